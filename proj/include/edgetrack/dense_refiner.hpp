#pragma once

#include <optional>
#include <vector>

#include "edgetrack/geometry.hpp"
#include "edgetrack/image_ops.hpp"
#include "edgetrack/mesh.hpp"
#include "edgetrack/rasterizer.hpp"

namespace edgetrack {

/// Accumulated normal equations of the per-pixel flow constraint a_q * delta = b_q.
struct DenseSystem {
  Matrix6d ata = Matrix6d::Zero();
  Vector6d atb = Vector6d::Zero();
  std::size_t pixel_count = 0;
  double mean_abs_residual = 0.0;
};

/// Per-pixel rows before accumulation; kept for IRLS reweighting.
struct DenseRows {
  std::vector<Vector6d> a;
  std::vector<double> b;
  std::vector<Eigen::Vector2i> pixels;
};

struct DenseStageConfig {
  int reps = 3;
  int reweights = 3;
  AdaptiveThresholdParams threshold;
};

DenseRows dense_rows(const EdgeImagePair& edges, const RenderOutput& render, std::uint16_t id,
                     const Pose& pose, const Intrinsics& intr);

/// Weighted accumulation; `weights` indexed like the rows, uniform when absent.
DenseSystem accumulate(const DenseRows& rows, const std::vector<double>* weights = nullptr);

/// Builds the system over the silhouette of object `id`. `weights` is an optional per-pixel
/// image (same size as the render); uniform when absent.
DenseSystem dense_system(const EdgeImagePair& edges, const RenderOutput& render, std::uint16_t id,
                         const Pose& pose, const Intrinsics& intr,
                         const GrayImage* weights = nullptr);

/// Solves a full 6-DoF system; throws "insufficient edge structure" when ill-conditioned.
MotionDelta solve_dense(const DenseSystem& system);

Pose refine_dense_stage(const GrayImage& camera, const Mesh& mesh, const Pose& pose,
                        const Intrinsics& intr, const DenseStageConfig& cfg);

/// Variant reusing a precomputed camera Sobel magnitude.
Pose refine_dense_stage_with_magnitude(const GrayImage& camera_magnitude, const Mesh& mesh,
                                       const Pose& pose, const Intrinsics& intr,
                                       const DenseStageConfig& cfg);

}  // namespace edgetrack
