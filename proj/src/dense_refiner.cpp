#include "edgetrack/dense_refiner.hpp"

#include <cmath>

#include "edgetrack/contour_refiner.hpp"

namespace edgetrack {

DenseRows dense_rows(const EdgeImagePair& edges, const RenderOutput& render, std::uint16_t id,
                     const Pose& pose, const Intrinsics& intr) {
  const GrayImage& synth = edges.rendered_edges;
  const GrayImage& cam = edges.camera_edges;
  if (synth.rows() != render.intensity.rows() || synth.cols() != render.intensity.cols() ||
      cam.rows() != synth.rows() || cam.cols() != synth.cols())
    throw Error("edge images and render differ in size");
  const int h = static_cast<int>(synth.rows());
  const int w = static_cast<int>(synth.cols());

  DenseRows rows;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (render.object_id(y, x) != id) continue;
      const double gx = 0.5 * (synth(y, std::min(x + 1, w - 1)) - synth(y, std::max(x - 1, 0)));
      const double gy = 0.5 * (synth(std::min(y + 1, h - 1), x) - synth(std::max(y - 1, 0), x));
      const Eigen::Vector3d p =
          back_project<double>(Eigen::Vector2d(x, y), render.depth(y, x), intr);
      const Eigen::RowVector2d grad(gx, gy);
      rows.a.push_back((grad * motion_jacobian<double>(p, pose.translation, intr)).transpose());
      rows.b.push_back(static_cast<double>(synth(y, x)) - static_cast<double>(cam(y, x)));
      rows.pixels.emplace_back(x, y);
    }
  }
  if (rows.a.empty()) throw Error("empty silhouette");
  return rows;
}

DenseSystem accumulate(const DenseRows& rows, const std::vector<double>* weights) {
  DenseSystem sys;
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < rows.a.size(); ++i) {
    const double wq = weights ? (*weights)[i] : 1.0;
    sys.ata.noalias() += wq * rows.a[i] * rows.a[i].transpose();
    sys.atb.noalias() += wq * rows.b[i] * rows.a[i];
    abs_sum += std::abs(rows.b[i]);
  }
  // Exact symmetry regardless of summation order.
  sys.ata = 0.5 * (sys.ata + sys.ata.transpose()).eval();
  sys.pixel_count = rows.a.size();
  sys.mean_abs_residual = rows.a.empty() ? 0.0 : abs_sum / static_cast<double>(rows.a.size());
  return sys;
}

DenseSystem dense_system(const EdgeImagePair& edges, const RenderOutput& render, std::uint16_t id,
                         const Pose& pose, const Intrinsics& intr, const GrayImage* weights) {
  const DenseRows rows = dense_rows(edges, render, id, pose, intr);
  if (!weights) return accumulate(rows);
  std::vector<double> w(rows.a.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = (*weights)(rows.pixels[i].y(), rows.pixels[i].x());
  return accumulate(rows, &w);
}

MotionDelta solve_dense(const DenseSystem& system) {
  if (system.atb.isZero(0.0)) return MotionDelta{};
  return MotionDelta::FromStacked(solve_normal_equations(
      system.ata, system.atb, {0, 1, 2, 3, 4, 5}, "insufficient edge structure"));
}

Pose refine_dense_stage_with_magnitude(const GrayImage& camera_magnitude, const Mesh& mesh,
                                       const Pose& pose, const Intrinsics& intr,
                                       const DenseStageConfig& cfg) {
  Pose current = pose;
  for (int rep = 0; rep < cfg.reps; ++rep) {
    const RenderOutput rendered = render(mesh, current, intr);
    const GrayImage rendered_mag = gradient_magnitude(sobel_gradients(rendered.intensity));
    const EdgeImagePair edges = adaptive_threshold_magnitudes(rendered_mag, camera_magnitude, cfg.threshold);
    const DenseRows rows = dense_rows(edges, rendered, 1, current, intr);

    MotionDelta delta = solve_dense(accumulate(rows));
    std::vector<double> weights(rows.a.size());
    for (int it = 0; it < cfg.reweights; ++it) {
      const Vector6d d = delta.stacked();
      for (std::size_t i = 0; i < weights.size(); ++i)
        weights[i] = charbonnier_weight(rows.b[i] - rows.a[i].dot(d));
      delta = solve_dense(accumulate(rows, &weights));
    }
    current = apply_delta(current, delta);
  }
  return current;
}

Pose refine_dense_stage(const GrayImage& camera, const Mesh& mesh, const Pose& pose,
                        const Intrinsics& intr, const DenseStageConfig& cfg) {
  return refine_dense_stage_with_magnitude(gradient_magnitude(sobel_gradients(camera)), mesh, pose,
                                           intr, cfg);
}

}  // namespace edgetrack
