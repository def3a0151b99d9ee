#pragma once

#include <vector>

#include "edgetrack/geometry.hpp"
#include "edgetrack/image_ops.hpp"
#include "edgetrack/mesh.hpp"
#include "edgetrack/rasterizer.hpp"

namespace edgetrack {

/// Charbonnier constant shared by both refinement stages.
inline constexpr double kCharbonnierEpsilon = 0.001;

inline double charbonnier_weight(double r) {
  return 1.0 / std::sqrt(r * r + kCharbonnierEpsilon * kCharbonnierEpsilon);
}
inline double charbonnier(double r) {
  return std::sqrt(r * r + kCharbonnierEpsilon * kCharbonnierEpsilon);
}

struct Hypothesis {
  double offset = 0.0;    // signed pixels along the scanline normal
  double response = 0.0;  // oriented edge response magnitude
};

/// Edge hypotheses along every scanline of a contour.
struct HypothesisSet {
  std::vector<std::vector<Hypothesis>> lines;

  bool has_any(std::size_t i) const { return !lines[i].empty(); }
  std::size_t lines_found() const;
};

enum class SolveMode { Full6D, InPlane3 };

struct ContourSolveStats {
  double irls_mean_residual = 0.0;  // mean Charbonnier residual after the last reweight, pixels
  double mean_hyp_distance = 0.0;   // pixels
  double valid_ratio = 1.0;         // scanlines / scanlines with a hypothesis
  bool converged = false;
  std::size_t lines = 0;
  std::size_t lines_found = 0;
};

struct ContourStageConfig {
  int scanline_length = 15;
  double t_e = 0.08;
  int reps = 5;
  int reweights = 3;
  std::size_t contour_points = 256;
  SolveMode mode = SolveMode::Full6D;
};

HypothesisSet find_hypotheses(const GrayImage& camera, const ContourSet& contour, int length,
                              double t_e, const RotatedSobelBank& bank);

struct ContourSolution {
  MotionDelta delta;
  ContourSolveStats stats;
};

/// One IRLS solve of the point-to-line contour error. `contour.points_3d` holds the current
/// camera-frame contour; points_2d / normals are the scanline anchors the hypotheses refer to.
ContourSolution solve_contour(const ContourSet& contour, const HypothesisSet& hyps, const Pose& pose,
                              const Intrinsics& intr, SolveMode mode, int reweights);

struct ContourStageResult {
  Pose pose;
  ContourSolveStats stats;
};

ContourStageResult refine_contour_stage(const GrayImage& camera, const Mesh& mesh, const Pose& pose,
                                        const Intrinsics& intr, const ContourStageConfig& cfg,
                                        const RotatedSobelBank& bank);

/// Solves (J^T W J) x = J^T W r on the given parameter subset with a conditioning check.
/// Throws Error(message) when the Jacobi-scaled condition number exceeds 1e12.
Vector6d solve_normal_equations(const Matrix6d& ata, const Vector6d& atb,
                                const std::vector<int>& active, const char* message);

}  // namespace edgetrack
