#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "edgetrack/geometry.hpp"
#include "edgetrack/image_ops.hpp"
#include "edgetrack/mesh.hpp"

namespace edgetrack {

using DepthImage = GrayImage;
using MaskImage = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IdImage = Eigen::Array<std::uint16_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SceneObject {
  const Mesh* mesh = nullptr;
  Pose pose;
  std::uint16_t id = 0;  // 0: assigned as position in the scene + 1
};

/// Synthesis planes. Background pixels: intensity 0, depth 0, id 0.
struct RenderOutput {
  GrayImage intensity;
  DepthImage depth;  // camera-frame z in meters
  MaskImage silhouette;
  IdImage object_id;

  int width() const { return static_cast<int>(intensity.cols()); }
  int height() const { return static_cast<int>(intensity.rows()); }
};

/// Sampled silhouette contour of one object.
struct ContourSet {
  std::vector<Eigen::Vector2d> points_2d;  // pixels
  std::vector<Eigen::Vector3d> points_3d;  // camera frame, meters
  std::vector<Eigen::Vector2d> normals;    // unit, pointing out of the silhouette

  std::size_t size() const { return points_2d.size(); }
};

/// Z-buffered flat-shaded rasterization with a headlight along the viewing axis.
RenderOutput render(const std::vector<SceneObject>& scene, const Intrinsics& intr);
RenderOutput render(const Mesh& mesh, const Pose& pose, const Intrinsics& intr);

/// Traces the outer boundary of every connected component of the id mask and samples it
/// uniformly in arc length to at most m_target points.
ContourSet extract_contour(const RenderOutput& render, std::uint16_t id, const Intrinsics& intr,
                           std::size_t m_target);

/// Closed 8-connected Moore trace of the outer boundary of each component, as pixel coordinates.
std::vector<std::vector<Eigen::Vector2i>> trace_boundaries(const MaskImage& mask);

/// Flat shading term used by the rasterizer for a camera-frame face normal.
inline float shade(const Eigen::Vector3d& normal) {
  const double lambert = std::max(0.0, -normal.z());
  return static_cast<float>(std::clamp(0.2 + 0.8 * lambert, 0.0, 1.0));
}

}  // namespace edgetrack
