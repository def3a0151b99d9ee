#pragma once

#include "edgetrack/geometry.hpp"
#include "edgetrack/mesh.hpp"

namespace edgetrack {

struct ProjectionMetric {
  double mean_px = 0.0;
  bool pass = false;
};

struct AddMetric {
  double mean_m = 0.0;
  bool pass = false;
};

/// Mean 2D distance between vertex projections under `est` and `gt`; pass iff mean < threshold.
ProjectionMetric projection_metric(const Pose& est, const Pose& gt, const Mesh& mesh,
                                   const Intrinsics& intr, double threshold_px = 5.0);

/// Mean 3D vertex distance; pass iff mean < 0.1 * diameter.
AddMetric add_metric(const Pose& est, const Pose& gt, const Mesh& mesh);

}  // namespace edgetrack
