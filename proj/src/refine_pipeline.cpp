#include "edgetrack/refine_pipeline.hpp"

#include <limits>

namespace edgetrack {

std::string to_string(RefineMode mode) {
  switch (mode) {
    case RefineMode::S1: return "S1";
    case RefineMode::S2: return "S2";
    case RefineMode::S1S2: return "S1+S2";
  }
  return "?";
}

RefineMode refine_mode_from_string(const std::string& s) {
  if (s == "S1") return RefineMode::S1;
  if (s == "S2") return RefineMode::S2;
  if (s == "S1+S2") return RefineMode::S1S2;
  throw Error("unknown refine mode '" + s + "'");
}

void RefineConfig::Validate() const {
  if (pyramid_levels < 1) throw Error("pyramid_levels must be >= 1");
  if (iterations < 1) throw Error("iterations must be >= 1");
  if (scanline_length < 3 || scanline_length % 2 == 0)
    throw Error("scanline_length must be odd and >= 3");
  if (reps_s1 < 1 || reps_s2 < 1 || reweights < 0) throw Error("invalid repetition counts");
  if (grid_cells < 1 || box_radius < 0) throw Error("invalid edge-pairing parameters");
  if (t_e < 0 || t_r < 0 || t_min < 0) throw Error("thresholds must be non-negative");
  if (contour_points < 8) throw Error("contour_points must be >= 8");
  if (kernel_orientations < 2) throw Error("kernel_orientations must be >= 2");
}

ContourStageConfig RefineConfig::contour_stage(SolveMode m) const {
  return ContourStageConfig{scanline_length, t_e, reps_s1, reweights, contour_points, m};
}

DenseStageConfig RefineConfig::dense_stage() const {
  return DenseStageConfig{reps_s2, reweights, AdaptiveThresholdParams{grid_cells, t_r, t_min, box_radius}};
}

namespace {

ContourSolveStats score_at(const GrayImage& camera, const Mesh& mesh, const Pose& pose,
                           const Intrinsics& intr, const RefineConfig& cfg,
                           const RotatedSobelBank& bank) {
  const RenderOutput rendered = render(mesh, pose, intr);
  const ContourSet contour = extract_contour(rendered, 1, intr, cfg.contour_points);
  const HypothesisSet hyps = find_hypotheses(camera, contour, cfg.scanline_length, cfg.t_e, bank);
  if (hyps.lines_found() == 0) {
    ContourSolveStats stats;
    stats.lines = contour.size();
    stats.valid_ratio = std::numeric_limits<double>::infinity();
    stats.irls_mean_residual = std::numeric_limits<double>::infinity();
    stats.mean_hyp_distance = std::numeric_limits<double>::infinity();
    return stats;
  }
  return solve_contour(contour, hyps, pose, intr, SolveMode::Full6D, cfg.reweights).stats;
}

}  // namespace

ContourSolveStats score_pose(const GrayImage& camera, const Mesh& mesh, const Pose& pose,
                             const Intrinsics& intr, const RefineConfig& cfg) {
  const RotatedSobelBank bank(cfg.kernel_orientations);
  return score_at(camera, mesh, pose, intr, cfg, bank);
}

RefineResult refine_pose(const ImagePyramid& camera, const Mesh& mesh, const Pose& init,
                         const Intrinsics& intr, const RefineConfig& cfg) {
  cfg.Validate();
  if (static_cast<int>(camera.levels.size()) < cfg.pyramid_levels) throw Error("pyramid too shallow");
  if (camera.levels[0].cols() != intr.width || camera.levels[0].rows() != intr.height)
    throw Error("camera image does not match intrinsics");
  if (!(init.translation.z() > 0)) throw Error("initial pose behind camera");

  const RotatedSobelBank bank(cfg.kernel_orientations);
  const bool run_s1 = cfg.mode != RefineMode::S2;
  const bool run_s2 = cfg.mode != RefineMode::S1;
  const int coarsest = cfg.pyramid_levels - 1;

  std::vector<GrayImage> magnitudes;
  if (run_s2) {
    for (int l = 0; l < cfg.pyramid_levels; ++l)
      magnitudes.push_back(gradient_magnitude(sobel_gradients(camera.levels[static_cast<std::size_t>(l)])));
  }

  RefineResult out{init, {}, 0};
  bool have_s1_stats = false;
  try {
    for (int it = 0; it < cfg.iterations; ++it) {
      for (int level = coarsest; level >= 0; --level) {
        const Intrinsics li = intr.AtLevel(level);
        const GrayImage& img = camera.levels[static_cast<std::size_t>(level)];
        if (run_s1) {
          const SolveMode m = (level == coarsest && coarsest > 0) ? SolveMode::InPlane3 : SolveMode::Full6D;
          const ContourStageResult r = refine_contour_stage(img, mesh, out.pose, li, cfg.contour_stage(m), bank);
          out.pose = r.pose;
          if (level == 0) {
            out.stats = r.stats;
            have_s1_stats = true;
          }
        }
        if (run_s2) {
          out.pose = refine_dense_stage_with_magnitude(magnitudes[static_cast<std::size_t>(level)], mesh,
                                                       out.pose, li, cfg.dense_stage());
          have_s1_stats = false;
        }
      }
      out.iterations_run = it + 1;
    }
    if (!have_s1_stats) out.stats = score_at(camera.levels[0], mesh, out.pose, intr, cfg, bank);
  } catch (const Error&) {
    try {
      out.stats = score_at(camera.levels[0], mesh, out.pose, intr, cfg, bank);
    } catch (const Error&) {
      out.stats = ContourSolveStats{};
      out.stats.valid_ratio = std::numeric_limits<double>::infinity();
      out.stats.irls_mean_residual = std::numeric_limits<double>::infinity();
      out.stats.mean_hyp_distance = std::numeric_limits<double>::infinity();
    }
    out.stats.converged = false;
  }
  return out;
}

RefineResult refine_pose(const GrayImage& camera, const Mesh& mesh, const Pose& init,
                         const Intrinsics& intr, const RefineConfig& cfg) {
  cfg.Validate();
  return refine_pose(build_pyramid(camera, cfg.pyramid_levels), mesh, init, intr, cfg);
}

}  // namespace edgetrack
