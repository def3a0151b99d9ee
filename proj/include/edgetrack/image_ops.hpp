#pragma once

#include <Eigen/Core>

#include <vector>

#include "edgetrack/error.hpp"

namespace edgetrack {

/// Row-major grayscale image, values in [0, 1]. Indexed (row, col) = (y, x).
using GrayImage = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ImagePyramid {
  std::vector<GrayImage> levels;  // levels[0] is full resolution
};

struct Gradients {
  GrayImage gx;
  GrayImage gy;
};

struct EdgeImagePair {
  GrayImage rendered_edges;
  GrayImage camera_edges;
};

using Kernel5 = Eigen::Matrix<double, 5, 5, Eigen::RowMajor>;

/// Bank of 5x5 derivative kernels. Kernel i differentiates along angle i * pi / n
/// (measured from +x towards +y in image coordinates).
class RotatedSobelBank {
 public:
  explicit RotatedSobelBank(int n = 8);

  int size() const { return static_cast<int>(kernels_.size()); }
  const Kernel5& kernel(int i) const { return kernels_[static_cast<std::size_t>(i)]; }
  double angle(int i) const;
  /// Index of the kernel whose orientation is nearest `radians` modulo pi.
  int nearest(double radians) const;

 private:
  std::vector<Kernel5> kernels_;
};

struct AdaptiveThresholdParams {
  int grid_cells = 16;
  double t_r = 0.1;
  double t_min = 0.02;
  int box_radius = 2;
};

ImagePyramid build_pyramid(const GrayImage& img, int levels);
GrayImage downsample(const GrayImage& img);

/// 3x3 Sobel scaled by 1/4 (a unit step yields 1), replicate borders.
Gradients sobel_gradients(const GrayImage& img);
GrayImage gradient_magnitude(const Gradients& g);

/// Normalized moving average over a (2r+1)^2 window, replicate borders.
GrayImage box_filter(const GrayImage& img, int radius);

/// Thresholds the rendered Sobel magnitude at t_r, then per grid cell marks the same number of
/// strongest camera pixels as edges (floored at t_min), and box-filters both masks.
EdgeImagePair adaptive_threshold_pair(const GrayImage& rendered, const GrayImage& camera,
                                      const AdaptiveThresholdParams& params);

/// Same pairing from precomputed Sobel magnitudes of both images.
EdgeImagePair adaptive_threshold_magnitudes(const GrayImage& rendered_magnitude,
                                            const GrayImage& camera_magnitude,
                                            const AdaptiveThresholdParams& params);

/// Bilinear lookup with replicated borders.
float sample_bilinear(const GrayImage& img, double x, double y);

/// Response of a 5x5 kernel centered at a sub-pixel location.
double kernel_response(const GrayImage& img, const Kernel5& k, double x, double y);

}  // namespace edgetrack
