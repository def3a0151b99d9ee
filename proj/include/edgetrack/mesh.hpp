#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <vector>

#include "edgetrack/geometry.hpp"

namespace edgetrack {

using Triangle = std::array<std::uint32_t, 3>;

/// Triangle mesh in the object frame, centered at its axis-aligned bounding box.
struct Mesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Triangle> triangles;
  double diameter = 0.0;
};

/// Object center followed by k-1 surface keypoints.
struct KeypointSet {
  std::vector<Eigen::Vector3d> points;
  std::size_t size() const { return points.size(); }
};

/// Builds a mesh: validates indices, recenters on the bounding box and computes the diameter.
Mesh make_mesh(std::vector<Eigen::Vector3d> vertices, std::vector<Triangle> triangles);

Eigen::Vector3d bbox_center(const std::vector<Eigen::Vector3d>& vertices);
double max_pairwise_distance(const std::vector<Eigen::Vector3d>& vertices);

/// Greedy farthest-point selection seeded with the origin; ties go to the lowest index.
KeypointSet farthest_point_sample(const Mesh& mesh, std::size_t k);

// Procedural primitives. Triangles wind counter-clockwise seen from outside.
Mesh make_box(const Eigen::Vector3d& size, int subdivisions = 1);
Mesh make_uv_sphere(double radius, int stacks, int slices);

/// Appends an axis-aligned box (counter-clockwise outward) to raw vertex/triangle lists.
void append_box(std::vector<Eigen::Vector3d>& vertices, std::vector<Triangle>& triangles,
                const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, int subdivisions = 1);

}  // namespace edgetrack
