#include "edgetrack/rasterizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace edgetrack {

namespace {

constexpr double kNearPlane = 1e-4;

struct ScreenVertex {
  double x, y, inv_z;
};

// Edge function evaluated with canonically ordered endpoints, so two triangles sharing an edge
// see bit-identical values of opposite sign.
inline double edge_function(const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
  const bool swap = (b.x < a.x) || (b.x == a.x && b.y < a.y);
  const ScreenVertex& p = swap ? b : a;
  const ScreenVertex& q = swap ? a : b;
  const double e = (q.x - p.x) * (py - p.y) - (q.y - p.y) * (px - p.x);
  return swap ? -e : e;
}

// Top-left rule for an edge a->b of a triangle whose interior has positive edge functions.
inline bool owns_boundary(const ScreenVertex& a, const ScreenVertex& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  return dy < 0.0 || (dy == 0.0 && dx > 0.0);
}

void rasterize_object(const Mesh& mesh, const Pose& pose, std::uint16_t id, const Intrinsics& intr,
                      RenderOutput& out, Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic,
                                                      Eigen::RowMajor>& zbuf) {
  std::vector<Eigen::Vector3d> cam(mesh.vertices.size());
  for (std::size_t i = 0; i < cam.size(); ++i) cam[i] = pose * mesh.vertices[i];

  const int w = intr.width;
  const int h = intr.height;
  for (const auto& tri : mesh.triangles) {
    const Eigen::Vector3d& p0 = cam[tri[0]];
    const Eigen::Vector3d& p1 = cam[tri[1]];
    const Eigen::Vector3d& p2 = cam[tri[2]];
    if (p0.z() <= kNearPlane || p1.z() <= kNearPlane || p2.z() <= kNearPlane) continue;

    const Eigen::Vector3d n_raw = (p1 - p0).cross(p2 - p0);
    const double n_len = n_raw.norm();
    if (n_len == 0.0) continue;
    const float intensity = shade(n_raw / n_len);

    std::array<ScreenVertex, 3> v;
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d& p = cam[tri[static_cast<std::size_t>(k)]];
      v[static_cast<std::size_t>(k)] = {intr.fx * p.x() / p.z() + intr.cx,
                                        intr.fy * p.y() / p.z() + intr.cy, 1.0 / p.z()};
    }
    double area = edge_function(v[0], v[1], v[2].x, v[2].y);
    if (area == 0.0) continue;
    if (area < 0.0) {
      std::swap(v[1], v[2]);
      area = -area;
    }

    const double min_x = std::min({v[0].x, v[1].x, v[2].x});
    const double max_x = std::max({v[0].x, v[1].x, v[2].x});
    const double min_y = std::min({v[0].y, v[1].y, v[2].y});
    const double max_y = std::max({v[0].y, v[1].y, v[2].y});
    const int x0 = std::max(0, static_cast<int>(std::ceil(min_x)));
    const int x1 = std::min(w - 1, static_cast<int>(std::floor(max_x)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(min_y)));
    const int y1 = std::min(h - 1, static_cast<int>(std::floor(max_y)));
    if (x0 > x1 || y0 > y1) continue;

    const bool own12 = owns_boundary(v[1], v[2]);
    const bool own20 = owns_boundary(v[2], v[0]);
    const bool own01 = owns_boundary(v[0], v[1]);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double e0 = edge_function(v[1], v[2], x, y);
        const double e1 = edge_function(v[2], v[0], x, y);
        const double e2 = edge_function(v[0], v[1], x, y);
        if (e0 < 0.0 || e1 < 0.0 || e2 < 0.0) continue;
        if ((e0 == 0.0 && !own12) || (e1 == 0.0 && !own20) || (e2 == 0.0 && !own01)) continue;
        const double inv_z = (e0 * v[0].inv_z + e1 * v[1].inv_z + e2 * v[2].inv_z) / area;
        const double z = 1.0 / inv_z;
        if (!(z < zbuf(y, x))) continue;
        zbuf(y, x) = z;
        out.intensity(y, x) = intensity;
        out.object_id(y, x) = id;
      }
    }
  }
}

}  // namespace

RenderOutput render(const std::vector<SceneObject>& scene, const Intrinsics& intr) {
  intr.Validate();
  const int w = intr.width;
  const int h = intr.height;
  RenderOutput out{GrayImage::Zero(h, w), DepthImage::Zero(h, w), MaskImage::Constant(h, w, false),
                   IdImage::Zero(h, w)};
  Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> zbuf =
      Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Constant(
          h, w, std::numeric_limits<double>::infinity());

  for (std::size_t i = 0; i < scene.size(); ++i) {
    const SceneObject& obj = scene[i];
    if (obj.mesh == nullptr) throw Error("scene object without mesh");
    const auto id = obj.id != 0 ? obj.id : static_cast<std::uint16_t>(i + 1);
    rasterize_object(*obj.mesh, obj.pose, id, intr, out, zbuf);
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (out.object_id(y, x) != 0) {
        out.depth(y, x) = static_cast<float>(zbuf(y, x));
        out.silhouette(y, x) = true;
      }
    }
  }
  return out;
}

RenderOutput render(const Mesh& mesh, const Pose& pose, const Intrinsics& intr) {
  return render(std::vector<SceneObject>{SceneObject{&mesh, pose, 1}}, intr);
}

namespace {

// Clockwise on screen (y down), starting east.
constexpr std::array<std::array<int, 2>, 8> kRing = {
    {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};

int ring_index(int dx, int dy) {
  for (int k = 0; k < 8; ++k)
    if (kRing[static_cast<std::size_t>(k)][0] == dx && kRing[static_cast<std::size_t>(k)][1] == dy)
      return k;
  return -1;
}

}  // namespace

std::vector<std::vector<Eigen::Vector2i>> trace_boundaries(const MaskImage& mask) {
  const int h = static_cast<int>(mask.rows());
  const int w = static_cast<int>(mask.cols());
  const auto inside = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h && mask(y, x); };

  // 8-connected component labels; the first pixel of each component in raster order lies on its
  // outer boundary with a background pixel to the west.
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> label =
      Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Constant(h, w, -1);
  std::vector<Eigen::Vector2i> starts;
  std::vector<Eigen::Vector2i> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(y, x) || label(y, x) >= 0) continue;
      const int id = static_cast<int>(starts.size());
      starts.emplace_back(x, y);
      stack.assign(1, Eigen::Vector2i(x, y));
      label(y, x) = id;
      while (!stack.empty()) {
        const Eigen::Vector2i p = stack.back();
        stack.pop_back();
        for (const auto& d : kRing) {
          const int nx = p.x() + d[0];
          const int ny = p.y() + d[1];
          if (inside(nx, ny) && label(ny, nx) < 0) {
            label(ny, nx) = id;
            stack.emplace_back(nx, ny);
          }
        }
      }
    }
  }

  std::vector<std::vector<Eigen::Vector2i>> traces;
  traces.reserve(starts.size());
  for (const Eigen::Vector2i& s : starts) {
    std::vector<Eigen::Vector2i> trace{s};
    Eigen::Vector2i c = s;
    int back = 4;  // west
    const std::size_t guard = 8 * static_cast<std::size_t>(w + h) * 4 + 16;
    while (trace.size() < guard) {
      int found = -1;
      for (int k = 1; k <= 8; ++k) {
        const int d = (back + k) % 8;
        if (inside(c.x() + kRing[static_cast<std::size_t>(d)][0],
                   c.y() + kRing[static_cast<std::size_t>(d)][1])) {
          found = d;
          break;
        }
      }
      if (found < 0) break;  // isolated pixel
      const Eigen::Vector2i n(c.x() + kRing[static_cast<std::size_t>(found)][0],
                              c.y() + kRing[static_cast<std::size_t>(found)][1]);
      const int prev = (found + 7) % 8;
      const Eigen::Vector2i b(c.x() + kRing[static_cast<std::size_t>(prev)][0],
                              c.y() + kRing[static_cast<std::size_t>(prev)][1]);
      if (c == s && trace.size() > 1 && n == trace[1]) {
        trace.pop_back();  // closing duplicate of s
        break;
      }
      back = ring_index(b.x() - n.x(), b.y() - n.y());
      c = n;
      trace.push_back(c);
    }
    traces.push_back(std::move(trace));
  }
  return traces;
}

ContourSet extract_contour(const RenderOutput& render, std::uint16_t id, const Intrinsics& intr,
                           std::size_t m_target) {
  const MaskImage mask = render.object_id == id;
  if (!mask.any()) throw Error("object not visible");
  const auto traces = trace_boundaries(mask);

  std::vector<double> lengths;
  double total_length = 0.0;
  std::size_t total_pixels = 0;
  for (const auto& t : traces) {
    double len = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const Eigen::Vector2i d = t[(i + 1) % t.size()] - t[i];
      len += (d.x() != 0 && d.y() != 0) ? std::sqrt(2.0) : (d.isZero() ? 0.0 : 1.0);
    }
    lengths.push_back(len);
    total_length += len;
    total_pixels += t.size();
  }
  if (total_pixels < 8) throw Error("degenerate silhouette");

  const auto w = static_cast<int>(mask.cols());
  const auto h = static_cast<int>(mask.rows());
  const auto in_mask = [&](const Eigen::Vector2d& p) {
    const int x = static_cast<int>(std::lround(p.x()));
    const int y = static_cast<int>(std::lround(p.y()));
    return x >= 0 && y >= 0 && x < w && y < h && mask(y, x);
  };

  const std::size_t m = std::min(m_target, total_pixels);
  ContourSet out;
  out.points_2d.reserve(m);
  out.points_3d.reserve(m);
  out.normals.reserve(m);
  constexpr int kTangentHalfWidth = 2;

  for (std::size_t ti = 0; ti < traces.size(); ++ti) {
    const auto& t = traces[ti];
    if (t.size() < 3 || lengths[ti] <= 0.0) continue;
    const auto count = static_cast<std::size_t>(
        std::floor(static_cast<double>(m) * lengths[ti] / total_length + 1e-9));
    if (count == 0) continue;

    // Cumulative arc length at each trace vertex.
    std::vector<double> arc(t.size() + 1, 0.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const Eigen::Vector2i d = t[(i + 1) % t.size()] - t[i];
      arc[i + 1] = arc[i] + ((d.x() != 0 && d.y() != 0) ? std::sqrt(2.0) : 1.0);
    }
    std::size_t idx = 0;
    const auto n_trace = static_cast<long>(t.size());
    for (std::size_t k = 0; k < count; ++k) {
      const double s = lengths[ti] * static_cast<double>(k) / static_cast<double>(count);
      while (idx + 1 < t.size() && arc[idx + 1] <= s) ++idx;
      const std::size_t i = (idx + 1 < t.size() && arc[idx + 1] - s < s - arc[idx]) ? idx + 1 : idx;

      const auto li = static_cast<long>(i);
      const Eigen::Vector2i& fwd = t[static_cast<std::size_t>((li + kTangentHalfWidth) % n_trace)];
      const Eigen::Vector2i& bwd =
          t[static_cast<std::size_t>(((li - kTangentHalfWidth) % n_trace + n_trace) % n_trace)];
      Eigen::Vector2d tangent = (fwd - bwd).cast<double>();
      if (tangent.squaredNorm() == 0.0) continue;
      tangent.normalize();
      Eigen::Vector2d normal(tangent.y(), -tangent.x());  // clockwise trace: outward on the left

      const Eigen::Vector2d center = t[i].cast<double>();
      if (in_mask(center + 1.5 * normal) && !in_mask(center - 1.5 * normal)) normal = -normal;

      const Eigen::Vector2d edge = center + 0.5 * normal.cwiseAbs().maxCoeff() * normal;
      const double depth = render.depth(t[i].y(), t[i].x());
      out.points_2d.push_back(edge);
      out.points_3d.push_back(back_project<double>(edge, depth, intr));
      out.normals.push_back(normal);
    }
  }
  if (out.size() < 3) throw Error("degenerate silhouette");
  return out;
}

}  // namespace edgetrack
