#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "edgetrack/detector.hpp"
#include "edgetrack/pose_validation.hpp"
#include "edgetrack/refine_pipeline.hpp"

namespace edgetrack {

struct CloseRange {};

/// Detection runs on a square patch around the last known object position.
struct FarRange {
  Eigen::Vector2d start_anchor = Eigen::Vector2d::Zero();
  int patch_side = 0;  // 0 = image width / 2
};

using TrackerMode = std::variant<CloseRange, FarRange>;

struct TrackerConfig {
  RefineConfig refine;
  ValidationConfig validation;
  DetectionConfig detection;
  TrackerMode mode = CloseRange{};
  bool parallel_objects = false;

  void Validate() const;
  /// Defaults for small objects: two pyramid levels and a stricter acceptance threshold.
  static TrackerConfig FarRangeDefaults(const Eigen::Vector2d& start_anchor, int patch_side = 0);
};

struct ObjectTrack {
  std::uint16_t object_id = 1;
  const Mesh* mesh = nullptr;
  const KeypointSet* keys = nullptr;
  TrackHealth health = health::Uninitialized{};
  std::optional<Pose> pose;
  std::optional<EdgeScore> last_score;
  std::optional<Eigen::Vector2d> anchor;  // Far-Range patch center
};

struct StageTimings {
  double detect_ms = 0.0;
  double refine_ms = 0.0;
  double total_ms = 0.0;
};

struct ObjectReport {
  std::uint16_t object_id = 0;
  std::string state_before;
  std::string state_after;
  std::string decision;
  std::optional<Pose> pose;
  std::optional<EdgeScore> score;
  bool detection_used = false;
  std::string error;
  StageTimings timings;
};

struct FrameReport {
  std::vector<ObjectReport> objects;  // registration order
};

struct PatchView {
  GrayImage patch;
  Eigen::Vector2i offset = Eigen::Vector2i::Zero();
  Intrinsics intrinsics;
};

/// Square crop of `side` pixels centered on `anchor`, clamped inside the image.
Eigen::Vector2i patch_offset(const Eigen::Vector2d& anchor, int side, int width, int height);
PatchView far_range_patch(const GrayImage& image, const Intrinsics& intr, const ObjectTrack& track,
                          const FarRange& mode);
CorrespondenceFrame crop_correspondences(const CorrespondenceFrame& frame, const Eigen::Vector2i& offset,
                                         int side);

/// One tracking step for every registered object. Detection runs only for objects that need
/// initialization and only when `correspondences` is given.
FrameReport process_frame(const GrayImage& image, const CorrespondenceFrame* correspondences,
                          std::vector<ObjectTrack>& tracks, const Intrinsics& intr,
                          const TrackerConfig& cfg);

}  // namespace edgetrack
