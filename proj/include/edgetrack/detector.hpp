#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "edgetrack/geometry.hpp"
#include "edgetrack/image_ops.hpp"
#include "edgetrack/mesh.hpp"
#include "edgetrack/rasterizer.hpp"

namespace edgetrack {

using FieldPlane = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Class mask plus k joint unit-vector fields pointing at keypoint projections. Field planes are
/// shared by all classes; the class mask selects which object a pixel votes for.
struct CorrespondenceFrame {
  int width = 0;
  int height = 0;
  int n_classes = 0;
  IdImage class_mask;
  std::vector<FieldPlane> vx;  // k planes
  std::vector<FieldPlane> vy;  // k planes

  int k() const { return static_cast<int>(vx.size()); }
  static CorrespondenceFrame Empty(int width, int height, int k, int n_classes);
};

struct KeypointEstimate {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  std::size_t votes = 0;
  double inlier_ratio = 0.0;
};

struct DetectionConfig {
  std::size_t min_votes = 25;
  double max_reproj_px = 12.0;
  std::size_t min_valid_points = 4;
  int ransac_hypotheses = 128;
  double inlier_cos_threshold = 0.99;
  std::uint64_t seed = 0;

  void Validate() const;
};

/// RANSAC voting for every keypoint of class `id`. Deterministic per (frame, id, cfg.seed).
std::vector<KeypointEstimate> vote_keypoints(const CorrespondenceFrame& frame, std::uint16_t id,
                                             const DetectionConfig& cfg);

/// EPnP followed by Gauss-Newton reprojection polish. Planar point sets use three control points.
Pose solve_pnp(const std::vector<Eigen::Vector3d>& points_3d,
               const std::vector<Eigen::Vector2d>& points_2d, const Intrinsics& intr);

/// True iff at least cfg.min_valid_points correspondences reproject strictly within
/// cfg.max_reproj_px.
bool validate_detection(const Pose& pose, const std::vector<Eigen::Vector3d>& points_3d,
                        const std::vector<Eigen::Vector2d>& points_2d, const Intrinsics& intr,
                        const DetectionConfig& cfg);

struct Detection {
  Pose pose;
  std::vector<KeypointEstimate> keypoints;
  std::vector<std::size_t> used;  // keypoint indices passing the vote gate
  bool valid = false;
};

/// Full initialization: vote, gate on min_votes, PnP, validate. Empty when PnP is impossible.
/// `offset` maps frame pixel coordinates into the image of `intr` (Far-Range patches).
std::optional<Detection> detect(const CorrespondenceFrame& frame, std::uint16_t id,
                                const KeypointSet& keys, const Intrinsics& intr,
                                const DetectionConfig& cfg,
                                const Eigen::Vector2d& offset = Eigen::Vector2d::Zero());

struct CorrespondenceObject {
  const Mesh* mesh = nullptr;
  const KeypointSet* keys = nullptr;
  Pose pose;
  std::uint16_t class_id = 1;
};

struct CorrespondenceNoise {
  double noise_deg = 0.0;
  double outlier_rate = 0.0;
  std::uint64_t seed = 0;
};

/// Oracle correspondence frame from ground-truth poses (stands in for a network).
/// Pixels flagged in `hidden` (same size as the image) are treated as background.
CorrespondenceFrame synth_correspondences(const std::vector<CorrespondenceObject>& objects,
                                          const Intrinsics& intr, const CorrespondenceNoise& noise,
                                          const MaskImage* hidden = nullptr,
                                          const std::vector<SceneObject>& occluders = {});

CorrespondenceFrame synth_correspondences(const Mesh& mesh, const KeypointSet& keys, const Pose& gt,
                                          const Intrinsics& intr, double noise_deg,
                                          double outlier_rate, std::uint64_t seed);

}  // namespace edgetrack
