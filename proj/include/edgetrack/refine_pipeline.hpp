#pragma once

#include <string>

#include "edgetrack/contour_refiner.hpp"
#include "edgetrack/dense_refiner.hpp"

namespace edgetrack {

enum class RefineMode { S1, S2, S1S2 };

std::string to_string(RefineMode mode);
RefineMode refine_mode_from_string(const std::string& s);

struct RefineConfig {
  int pyramid_levels = 3;
  int iterations = 1;  // full coarse-to-fine passes
  RefineMode mode = RefineMode::S1S2;
  int scanline_length = 15;
  double t_e = 0.08;
  double t_r = 0.1;
  double t_min = 0.02;
  int reps_s1 = 5;
  int reps_s2 = 3;
  int reweights = 3;
  int grid_cells = 16;
  int box_radius = 2;
  std::size_t contour_points = 256;
  int kernel_orientations = 8;

  void Validate() const;
  ContourStageConfig contour_stage(SolveMode mode) const;
  DenseStageConfig dense_stage() const;
};

struct RefineResult {
  Pose pose;
  ContourSolveStats stats;  // full-resolution contour stage at the final pose
  int iterations_run = 0;
};

/// Coarse-to-fine refinement alternating the contour and dense stages per level.
RefineResult refine_pose(const GrayImage& camera, const Mesh& mesh, const Pose& init,
                         const Intrinsics& intr, const RefineConfig& cfg);

/// Same, with a prebuilt camera pyramid (at least cfg.pyramid_levels levels).
RefineResult refine_pose(const ImagePyramid& camera, const Mesh& mesh, const Pose& init,
                         const Intrinsics& intr, const RefineConfig& cfg);

/// Contour statistics of a pose without moving it (single solve, full resolution).
ContourSolveStats score_pose(const GrayImage& camera, const Mesh& mesh, const Pose& pose,
                             const Intrinsics& intr, const RefineConfig& cfg);

}  // namespace edgetrack
