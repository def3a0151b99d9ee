#include "edgetrack/mesh.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace edgetrack {

Eigen::Vector3d bbox_center(const std::vector<Eigen::Vector3d>& vertices) {
  if (vertices.empty()) return Eigen::Vector3d::Zero();
  Eigen::Vector3d lo = vertices.front();
  Eigen::Vector3d hi = vertices.front();
  for (const auto& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return 0.5 * (lo + hi);
}

double max_pairwise_distance(const std::vector<Eigen::Vector3d>& vertices) {
  double best = 0.0;
  for (std::size_t i = 0; i < vertices.size(); ++i)
    for (std::size_t j = i + 1; j < vertices.size(); ++j)
      best = std::max(best, (vertices[i] - vertices[j]).squaredNorm());
  return std::sqrt(best);
}

Mesh make_mesh(std::vector<Eigen::Vector3d> vertices, std::vector<Triangle> triangles) {
  if (vertices.empty()) throw Error("mesh has no vertices");
  for (const auto& tri : triangles)
    for (auto idx : tri)
      if (idx >= vertices.size())
        throw Error("triangle index " + std::to_string(idx) + " out of range");
  for (const auto& v : vertices)
    if (!v.allFinite()) throw Error("non-finite vertex");
  const Eigen::Vector3d c = bbox_center(vertices);
  for (auto& v : vertices) v -= c;
  Mesh mesh;
  mesh.diameter = max_pairwise_distance(vertices);
  mesh.vertices = std::move(vertices);
  mesh.triangles = std::move(triangles);
  return mesh;
}

KeypointSet farthest_point_sample(const Mesh& mesh, std::size_t k) {
  if (k < 1) throw Error("keypoint count must be >= 1");
  if (mesh.vertices.empty()) throw Error("empty mesh");
  if (k > mesh.vertices.size() + 1) throw Error("keypoint count exceeds vertex count + 1");

  KeypointSet keys;
  keys.points.reserve(k);
  keys.points.push_back(Eigen::Vector3d::Zero());

  std::vector<double> min_dist(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) min_dist[i] = mesh.vertices[i].squaredNorm();

  while (keys.points.size() < k) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < min_dist.size(); ++i)
      if (min_dist[i] > min_dist[best]) best = i;
    const Eigen::Vector3d chosen = mesh.vertices[best];
    keys.points.push_back(chosen);
    for (std::size_t i = 0; i < min_dist.size(); ++i)
      min_dist[i] = std::min(min_dist[i], (mesh.vertices[i] - chosen).squaredNorm());
  }
  return keys;
}

namespace {

// One face of a box as a (subdivisions x subdivisions) grid. origin + u*s + v*t spans the face;
// u x v must point outward.
void append_face(std::vector<Eigen::Vector3d>& vertices, std::vector<Triangle>& triangles,
                 const Eigen::Vector3d& origin, const Eigen::Vector3d& u, const Eigen::Vector3d& v,
                 int n) {
  const auto base = static_cast<std::uint32_t>(vertices.size());
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      vertices.push_back(origin + u * (static_cast<double>(i) / n) + v * (static_cast<double>(j) / n));
  const auto at = [&](int i, int j) { return base + static_cast<std::uint32_t>(j * (n + 1) + i); };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      triangles.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
      triangles.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
    }
  }
}

}  // namespace

void append_box(std::vector<Eigen::Vector3d>& vertices, std::vector<Triangle>& triangles,
                const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, int subdivisions) {
  const int n = std::max(1, subdivisions);
  const Eigen::Vector3d d = hi - lo;
  const Eigen::Vector3d ex(d.x(), 0, 0), ey(0, d.y(), 0), ez(0, 0, d.z());
  append_face(vertices, triangles, lo, ey, ex, n);                  // -z
  append_face(vertices, triangles, lo + ez, ex, ey, n);             // +z
  append_face(vertices, triangles, lo, ex, ez, n);                  // -y
  append_face(vertices, triangles, lo + ey, ez, ex, n);             // +y
  append_face(vertices, triangles, lo, ez, ey, n);                  // -x
  append_face(vertices, triangles, lo + ex, ey, ez, n);             // +x
}

Mesh make_box(const Eigen::Vector3d& size, int subdivisions) {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Triangle> triangles;
  append_box(vertices, triangles, -0.5 * size, 0.5 * size, subdivisions);
  return make_mesh(std::move(vertices), std::move(triangles));
}

Mesh make_uv_sphere(double radius, int stacks, int slices) {
  if (stacks < 2 || slices < 3) throw Error("sphere tessellation too coarse");
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Triangle> triangles;
  for (int i = 0; i <= stacks; ++i) {
    const double phi = std::numbers::pi * i / stacks;
    for (int j = 0; j < slices; ++j) {
      const double theta = 2.0 * std::numbers::pi * j / slices;
      vertices.emplace_back(radius * std::sin(phi) * std::cos(theta),
                            radius * std::sin(phi) * std::sin(theta), radius * std::cos(phi));
    }
  }
  const auto at = [&](int i, int j) { return static_cast<std::uint32_t>(i * slices + (j % slices)); };
  for (int i = 0; i < stacks; ++i) {
    for (int j = 0; j < slices; ++j) {
      if (i > 0) triangles.push_back({at(i, j), at(i + 1, j), at(i, j + 1)});
      if (i + 1 < stacks) triangles.push_back({at(i, j + 1), at(i + 1, j), at(i + 1, j + 1)});
    }
  }
  return make_mesh(std::move(vertices), std::move(triangles));
}

}  // namespace edgetrack
