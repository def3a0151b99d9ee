#include "edgetrack/tracker.hpp"

#include <chrono>
#include <future>

namespace edgetrack {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

int resolved_side(const FarRange& mode, int width) { return mode.patch_side > 0 ? mode.patch_side : width / 2; }

struct Refined {
  Pose pose;
  EdgeScore score;
};

Refined refine_and_score(const ImagePyramid& pyramid, const ObjectTrack& track, const Pose& from,
                         const Intrinsics& intr, const RefineConfig& cfg) {
  const RefineResult r = refine_pose(pyramid, *track.mesh, from, intr, cfg);
  return {r.pose, edge_score(r.stats)};
}

void reset(ObjectTrack& track) {
  track.health = health::Uninitialized{};
  track.pose.reset();
}

void update_anchor(ObjectTrack& track, const Intrinsics& intr, const TrackerConfig& cfg) {
  const auto* far = std::get_if<FarRange>(&cfg.mode);
  if (!far) return;
  if (track.pose && track.pose->translation.z() > 1e-9)
    track.anchor = project<double>(track.pose->translation, intr);
  else
    track.anchor.reset();
}

// Detection followed by refinement and candidate acceptance.
void initialize(ObjectTrack& track, const ImagePyramid& pyramid, const CorrespondenceFrame& corr,
                const Intrinsics& intr, const TrackerConfig& cfg, ObjectReport& rep) {
  rep.detection_used = true;
  const auto t0 = Clock::now();
  std::optional<Detection> det;
  if (const auto* far = std::get_if<FarRange>(&cfg.mode)) {
    const int side = resolved_side(*far, intr.width);
    const Eigen::Vector2i off =
        patch_offset(track.anchor.value_or(far->start_anchor), side, intr.width, intr.height);
    if (corr.width == intr.width && corr.height == intr.height) {
      det = detect(crop_correspondences(corr, off, side), track.object_id, *track.keys, intr, cfg.detection,
                   off.cast<double>());
    } else if (corr.width == side && corr.height == side) {
      det = detect(corr, track.object_id, *track.keys, intr, cfg.detection, off.cast<double>());
    } else {
      throw Error("correspondence frame matches neither the image nor the patch size");
    }
  } else {
    det = detect(corr, track.object_id, *track.keys, intr, cfg.detection);
  }
  rep.timings.detect_ms = elapsed_ms(t0);
  if (!det || !det->valid) {
    reset(track);
    rep.decision = "NoDetection";
    return;
  }
  const auto t1 = Clock::now();
  const Refined r = refine_and_score(pyramid, track, det->pose, intr, cfg.refine);
  rep.timings.refine_ms += elapsed_ms(t1);
  const CandidateStep step = step_candidate(health::Uninitialized{}, r.score, cfg.validation);
  rep.decision = to_string(step.decision);
  rep.score = r.score;
  track.last_score = r.score;
  track.health = step.health;
  if (std::holds_alternative<health::Uninitialized>(step.health))
    track.pose.reset();
  else
    track.pose = r.pose;
}

void step_track(ObjectTrack& track, const ImagePyramid& pyramid, const CorrespondenceFrame* corr,
                const Intrinsics& intr, const TrackerConfig& cfg, ObjectReport& rep) {
  const auto t0 = Clock::now();
  rep.object_id = track.object_id;
  rep.state_before = state_name(track.health);
  try {
    bool needs_init = std::holds_alternative<health::Uninitialized>(track.health);
    if (std::holds_alternative<health::Valid>(track.health) ||
        std::holds_alternative<health::Borderline>(track.health)) {
      const auto t1 = Clock::now();
      const Refined r = refine_and_score(pyramid, track, *track.pose, intr, cfg.refine);
      rep.timings.refine_ms += elapsed_ms(t1);
      const ValidStep step = step_valid(track.health, r.score, cfg.validation, *track.pose);
      rep.decision = to_string(step.decision);
      rep.score = r.score;
      track.last_score = r.score;
      track.health = step.health;
      if (step.decision == ValidDecision::UpdatePose) {
        track.pose = r.pose;
      } else if (step.decision == ValidDecision::Reinitialize) {
        track.pose.reset();
        needs_init = true;
      }
    } else if (std::holds_alternative<health::Candidate>(track.health)) {
      const auto t1 = Clock::now();
      const Refined r = refine_and_score(pyramid, track, *track.pose, intr, cfg.refine);
      rep.timings.refine_ms += elapsed_ms(t1);
      const CandidateStep step = step_candidate(track.health, r.score, cfg.validation);
      rep.decision = to_string(step.decision);
      rep.score = r.score;
      track.last_score = r.score;
      track.health = step.health;
      if (std::holds_alternative<health::Uninitialized>(step.health))
        track.pose.reset();
      else
        track.pose = r.pose;
    }
    if (needs_init && corr) initialize(track, pyramid, *corr, intr, cfg, rep);
  } catch (const Error& e) {
    reset(track);
    rep.error = e.what();
  }
  update_anchor(track, intr, cfg);
  rep.state_after = state_name(track.health);
  rep.pose = track.pose;
  rep.timings.total_ms = elapsed_ms(t0);
}

}  // namespace

void TrackerConfig::Validate() const {
  refine.Validate();
  validation.Validate();
  detection.Validate();
  if (const auto* far = std::get_if<FarRange>(&mode))
    if (far->patch_side < 0) throw Error("patch_side must be >= 0");
}

TrackerConfig TrackerConfig::FarRangeDefaults(const Eigen::Vector2d& start_anchor, int patch_side) {
  TrackerConfig cfg;
  cfg.refine.pyramid_levels = 2;
  cfg.validation.e_init_threshold = 0.08;
  cfg.mode = FarRange{start_anchor, patch_side};
  return cfg;
}

Eigen::Vector2i patch_offset(const Eigen::Vector2d& anchor, int side, int width, int height) {
  if (side <= 0 || side > width || side > height) throw Error("patch side does not fit the image");
  const auto clamp_axis = [side](double center, int extent) {
    const int lo = static_cast<int>(std::lround(center - side / 2.0));
    return std::clamp(lo, 0, extent - side);
  };
  return {clamp_axis(anchor.x(), width), clamp_axis(anchor.y(), height)};
}

PatchView far_range_patch(const GrayImage& image, const Intrinsics& intr, const ObjectTrack& track,
                          const FarRange& mode) {
  const int side = resolved_side(mode, static_cast<int>(image.cols()));
  const Eigen::Vector2i off = patch_offset(track.anchor.value_or(mode.start_anchor), side,
                                           static_cast<int>(image.cols()), static_cast<int>(image.rows()));
  PatchView view;
  view.patch = image.block(off.y(), off.x(), side, side);
  view.offset = off;
  view.intrinsics = intr.Shifted(off.x(), off.y(), side, side);
  return view;
}

CorrespondenceFrame crop_correspondences(const CorrespondenceFrame& frame, const Eigen::Vector2i& offset,
                                         int side) {
  if (offset.x() < 0 || offset.y() < 0 || offset.x() + side > frame.width || offset.y() + side > frame.height)
    throw Error("patch outside correspondence frame");
  CorrespondenceFrame out = CorrespondenceFrame::Empty(side, side, frame.k(), frame.n_classes);
  out.class_mask = frame.class_mask.block(offset.y(), offset.x(), side, side);
  for (std::size_t j = 0; j < frame.vx.size(); ++j) {
    out.vx[j] = frame.vx[j].block(offset.y(), offset.x(), side, side);
    out.vy[j] = frame.vy[j].block(offset.y(), offset.x(), side, side);
  }
  return out;
}

FrameReport process_frame(const GrayImage& image, const CorrespondenceFrame* correspondences,
                          std::vector<ObjectTrack>& tracks, const Intrinsics& intr,
                          const TrackerConfig& cfg) {
  cfg.Validate();
  if (image.cols() != intr.width || image.rows() != intr.height)
    throw Error("image does not match intrinsics");
  for (const auto& t : tracks)
    if (!t.mesh || !t.keys) throw Error("track without mesh or keypoints");
  const ImagePyramid pyramid = build_pyramid(image, cfg.refine.pyramid_levels);

  FrameReport report;
  report.objects.resize(tracks.size());
  if (cfg.parallel_objects && tracks.size() > 1) {
    std::vector<std::future<void>> jobs;
    for (std::size_t i = 0; i < tracks.size(); ++i)
      jobs.push_back(std::async(std::launch::async, [&, i] {
        step_track(tracks[i], pyramid, correspondences, intr, cfg, report.objects[i]);
      }));
    for (auto& j : jobs) j.get();
  } else {
    for (std::size_t i = 0; i < tracks.size(); ++i)
      step_track(tracks[i], pyramid, correspondences, intr, cfg, report.objects[i]);
  }
  return report;
}

}  // namespace edgetrack
