#include "edgetrack/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace edgetrack {

namespace {

inline int clampi(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

// Bilinear tap into a 5x5 kernel, zero outside its support.
double kernel_at(const Kernel5& k, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double ax = x - x0;
  const double ay = y - y0;
  double acc = 0.0;
  for (int dy = 0; dy <= 1; ++dy) {
    for (int dx = 0; dx <= 1; ++dx) {
      const int xi = x0 + dx;
      const int yi = y0 + dy;
      if (xi < 0 || xi > 4 || yi < 0 || yi > 4) continue;
      acc += (dx ? ax : 1.0 - ax) * (dy ? ay : 1.0 - ay) * k(yi, xi);
    }
  }
  return acc;
}

}  // namespace

RotatedSobelBank::RotatedSobelBank(int n) {
  if (n < 2) throw Error("kernel bank needs at least two orientations");
  const double deriv[5] = {-1, -2, 0, 2, 1};
  const double smooth[5] = {1, 4, 6, 4, 1};
  Kernel5 base;
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) base(y, x) = smooth[y] * deriv[x];

  kernels_.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double theta = std::numbers::pi * i / n;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    Kernel5 k;
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 5; ++x) {
        // Rotate the tap offset back into the base kernel frame.
        const double u = x - 2.0;
        const double v = y - 2.0;
        k(y, x) = kernel_at(base, c * u + s * v + 2.0, -s * u + c * v + 2.0);
      }
    }
    k.array() -= k.mean();
    const double positive = k.cwiseMax(0.0).sum();
    k /= positive;
    kernels_.push_back(k);
  }
}

double RotatedSobelBank::angle(int i) const { return std::numbers::pi * i / size(); }

int RotatedSobelBank::nearest(double radians) const {
  const double step = std::numbers::pi / size();
  double a = std::fmod(radians, std::numbers::pi);
  if (a < 0) a += std::numbers::pi;
  return static_cast<int>(std::lround(a / step)) % size();
}

GrayImage downsample(const GrayImage& img) {
  const int h = static_cast<int>(img.rows());
  const int w = static_cast<int>(img.cols());
  const int oh = (h + 1) / 2;
  const int ow = (w + 1) / 2;
  GrayImage out(oh, ow);
  for (int y = 0; y < oh; ++y) {
    const int y0 = 2 * y;
    const int y1 = std::min(2 * y + 1, h - 1);
    for (int x = 0; x < ow; ++x) {
      const int x0 = 2 * x;
      const int x1 = std::min(2 * x + 1, w - 1);
      out(y, x) = 0.25f * (img(y0, x0) + img(y0, x1) + img(y1, x0) + img(y1, x1));
    }
  }
  return out;
}

ImagePyramid build_pyramid(const GrayImage& img, int levels) {
  if (levels < 1) throw Error("pyramid needs at least one level");
  const long min_side = 1L << (levels - 1);
  if (img.rows() < min_side || img.cols() < min_side) throw Error("image too small for pyramid");
  ImagePyramid pyr;
  pyr.levels.reserve(static_cast<std::size_t>(levels));
  pyr.levels.push_back(img);
  for (int l = 1; l < levels; ++l) pyr.levels.push_back(downsample(pyr.levels.back()));
  return pyr;
}

Gradients sobel_gradients(const GrayImage& img) {
  const int h = static_cast<int>(img.rows());
  const int w = static_cast<int>(img.cols());
  Gradients g{GrayImage(h, w), GrayImage(h, w)};
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0);
    const int yp = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0);
      const int xp = std::min(x + 1, w - 1);
      const float a = img(ym, xm), b = img(ym, x), c = img(ym, xp);
      const float d = img(y, xm), f = img(y, xp);
      const float p = img(yp, xm), q = img(yp, x), r = img(yp, xp);
      g.gx(y, x) = 0.25f * ((c + 2.0f * f + r) - (a + 2.0f * d + p));
      g.gy(y, x) = 0.25f * ((p + 2.0f * q + r) - (a + 2.0f * b + c));
    }
  }
  return g;
}

GrayImage gradient_magnitude(const Gradients& g) { return (g.gx.square() + g.gy.square()).sqrt(); }

GrayImage box_filter(const GrayImage& img, int radius) {
  if (radius < 0) throw Error("negative box radius");
  if (radius == 0) return img;
  const int h = static_cast<int>(img.rows());
  const int w = static_cast<int>(img.cols());
  const double norm = 1.0 / (2 * radius + 1);

  GrayImage tmp(h, w);
  for (int y = 0; y < h; ++y) {
    double acc = 0.0;
    for (int i = -radius; i <= radius; ++i) acc += img(y, clampi(i, 0, w - 1));
    for (int x = 0; x < w; ++x) {
      tmp(y, x) = static_cast<float>(acc * norm);
      acc += img(y, clampi(x + radius + 1, 0, w - 1)) - img(y, clampi(x - radius, 0, w - 1));
    }
  }
  GrayImage out(h, w);
  for (int x = 0; x < w; ++x) {
    double acc = 0.0;
    for (int i = -radius; i <= radius; ++i) acc += tmp(clampi(i, 0, h - 1), x);
    for (int y = 0; y < h; ++y) {
      out(y, x) = static_cast<float>(acc * norm);
      acc += tmp(clampi(y + radius + 1, 0, h - 1), x) - tmp(clampi(y - radius, 0, h - 1), x);
    }
  }
  return out;
}

EdgeImagePair adaptive_threshold_magnitudes(const GrayImage& rendered_magnitude,
                                            const GrayImage& camera_magnitude,
                                            const AdaptiveThresholdParams& params) {
  if (rendered_magnitude.rows() != camera_magnitude.rows() ||
      rendered_magnitude.cols() != camera_magnitude.cols())
    throw Error("edge images differ in size");
  if (params.grid_cells < 1) throw Error("grid needs at least one cell");
  const int h = static_cast<int>(rendered_magnitude.rows());
  const int w = static_cast<int>(rendered_magnitude.cols());

  GrayImage rmask = (rendered_magnitude > static_cast<float>(params.t_r)).cast<float>();
  GrayImage cmask = GrayImage::Zero(h, w);

  const int gx = std::min(params.grid_cells, w);
  const int gy = std::min(params.grid_cells, h);
  const int cw = w / gx;
  const int ch = h / gy;
  std::vector<int> order;
  for (int cy = 0; cy < gy; ++cy) {
    const int y0 = cy * ch;
    const int y1 = (cy == gy - 1) ? h : y0 + ch;
    for (int cx = 0; cx < gx; ++cx) {
      const int x0 = cx * cw;
      const int x1 = (cx == gx - 1) ? w : x0 + cw;
      const int cell_w = x1 - x0;
      const auto count = static_cast<std::size_t>(rmask.block(y0, x0, y1 - y0, cell_w).sum());
      if (count == 0) continue;

      order.resize(static_cast<std::size_t>((y1 - y0) * cell_w));
      std::iota(order.begin(), order.end(), 0);
      const auto value = [&](int i) { return camera_magnitude(y0 + i / cell_w, x0 + i % cell_w); };
      // Strongest first, lower index on ties: exactly `count` pixels are selected.
      std::nth_element(order.begin(), order.begin() + static_cast<long>(count - 1), order.end(),
                       [&](int a, int b) {
                         const float va = value(a), vb = value(b);
                         return va > vb || (va == vb && a < b);
                       });
      for (std::size_t k = 0; k < count; ++k) {
        const int i = order[k];
        if (value(i) > params.t_min) cmask(y0 + i / cell_w, x0 + i % cell_w) = 1.0f;
      }
    }
  }
  return EdgeImagePair{box_filter(rmask, params.box_radius), box_filter(cmask, params.box_radius)};
}

EdgeImagePair adaptive_threshold_pair(const GrayImage& rendered, const GrayImage& camera,
                                      const AdaptiveThresholdParams& params) {
  if (rendered.rows() != camera.rows() || rendered.cols() != camera.cols())
    throw Error("edge images differ in size");
  return adaptive_threshold_magnitudes(gradient_magnitude(sobel_gradients(rendered)),
                                       gradient_magnitude(sobel_gradients(camera)), params);
}

float sample_bilinear(const GrayImage& img, double x, double y) {
  const int w = static_cast<int>(img.cols());
  const int h = static_cast<int>(img.rows());
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const double ax = x - fx;
  const double ay = y - fy;
  const int x0 = clampi(static_cast<int>(fx), 0, w - 1);
  const int x1 = clampi(static_cast<int>(fx) + 1, 0, w - 1);
  const int y0 = clampi(static_cast<int>(fy), 0, h - 1);
  const int y1 = clampi(static_cast<int>(fy) + 1, 0, h - 1);
  const double top = (1.0 - ax) * img(y0, x0) + ax * img(y0, x1);
  const double bottom = (1.0 - ax) * img(y1, x0) + ax * img(y1, x1);
  return static_cast<float>((1.0 - ay) * top + ay * bottom);
}

double kernel_response(const GrayImage& img, const Kernel5& k, double x, double y) {
  double acc = 0.0;
  for (int j = 0; j < 5; ++j)
    for (int i = 0; i < 5; ++i)
      if (k(j, i) != 0.0) acc += k(j, i) * sample_bilinear(img, x + i - 2, y + j - 2);
  return acc;
}

}  // namespace edgetrack
