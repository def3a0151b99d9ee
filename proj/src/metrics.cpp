#include "edgetrack/metrics.hpp"

namespace edgetrack {

ProjectionMetric projection_metric(const Pose& est, const Pose& gt, const Mesh& mesh,
                                   const Intrinsics& intr, double threshold_px) {
  if (mesh.vertices.empty()) throw Error("mesh has no vertices");
  double sum = 0.0;
  for (const auto& v : mesh.vertices)
    sum += (project<double>(est * v, intr) - project<double>(gt * v, intr)).norm();
  ProjectionMetric m;
  m.mean_px = sum / static_cast<double>(mesh.vertices.size());
  m.pass = m.mean_px < threshold_px;
  return m;
}

AddMetric add_metric(const Pose& est, const Pose& gt, const Mesh& mesh) {
  if (mesh.vertices.empty()) throw Error("mesh has no vertices");
  double sum = 0.0;
  for (const auto& v : mesh.vertices) sum += (est * v - gt * v).norm();
  AddMetric m;
  m.mean_m = sum / static_cast<double>(mesh.vertices.size());
  m.pass = m.mean_m < 0.1 * mesh.diameter;
  return m;
}

}  // namespace edgetrack
