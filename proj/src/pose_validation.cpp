#include "edgetrack/pose_validation.hpp"

#include <cmath>
#include <limits>

namespace edgetrack {

EdgeScore edge_score(const ContourSolveStats& stats) {
  EdgeScore s;
  if (stats.lines_found == 0 || !std::isfinite(stats.valid_ratio)) {
    const double inf = std::numeric_limits<double>::infinity();
    s.e_irls = std::isfinite(stats.irls_mean_residual) ? stats.irls_mean_residual : inf;
    s.e_dist = std::isfinite(stats.mean_hyp_distance) ? stats.mean_hyp_distance : inf;
    s.e_valid = inf;
    s.e_edge = inf;
    return s;
  }
  s.e_irls = stats.irls_mean_residual;
  s.e_dist = stats.mean_hyp_distance;
  s.e_valid = stats.valid_ratio;
  s.e_edge = s.e_irls * s.e_dist * s.e_valid;
  return s;
}

void ValidationConfig::Validate() const {
  if (!(e_init_threshold > 0)) throw Error("e_init_threshold must be > 0");
  if (!(e_max > 0)) throw Error("e_max must be > 0");
  if (!(mean_factor_f > 1)) throw Error("mean_factor_f must be > 1");
  if (!(ema_alpha > 0 && ema_alpha <= 1)) throw Error("ema_alpha must be in (0, 1]");
  if (candidate_max_frames < 1) throw Error("candidate_max_frames must be >= 1");
}

std::string state_name(const TrackHealth& h) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, health::Uninitialized>) return "Uninitialized";
        if constexpr (std::is_same_v<T, health::Candidate>) return "Candidate";
        if constexpr (std::is_same_v<T, health::Valid>) return "Valid";
        if constexpr (std::is_same_v<T, health::Borderline>) return "Borderline";
      },
      h);
}

std::string to_string(CandidateDecision d) {
  switch (d) {
    case CandidateDecision::Accept: return "Accept";
    case CandidateDecision::KeepRefining: return "KeepRefining";
    case CandidateDecision::Discard: return "Discard";
  }
  return "?";
}

std::string to_string(ValidDecision d) {
  switch (d) {
    case ValidDecision::UpdatePose: return "UpdatePose";
    case ValidDecision::HoldPose: return "HoldPose";
    case ValidDecision::Reinitialize: return "Reinitialize";
  }
  return "?";
}

CandidateStep step_candidate(const TrackHealth& h, const EdgeScore& e, const ValidationConfig& cfg) {
  double last = std::numeric_limits<double>::infinity();
  int frames = 0;
  if (const auto* c = std::get_if<health::Candidate>(&h)) {
    last = c->last_e;
    frames = c->frames;
  }
  if (e.e_edge < cfg.e_init_threshold)
    return {health::Valid{e.e_edge, 1, 0}, CandidateDecision::Accept};
  if (e.e_edge < last && frames < cfg.candidate_max_frames)
    return {health::Candidate{e.e_edge, frames + 1}, CandidateDecision::KeepRefining};
  return {health::Uninitialized{}, CandidateDecision::Discard};
}

ValidStep step_valid(const TrackHealth& h, const EdgeScore& e, const ValidationConfig& cfg,
                     const Pose& pose) {
  double mean = 0.0;
  int frames_valid = 0;
  bool borderline = false;
  if (const auto* v = std::get_if<health::Valid>(&h)) {
    mean = v->running_mean;
    frames_valid = v->frames_valid;
  } else if (const auto* b = std::get_if<health::Borderline>(&h)) {
    mean = b->running_mean;
    frames_valid = b->frames_valid;
    borderline = true;
  } else {
    throw Error("step_valid requires a Valid or Borderline track");
  }

  const bool frame_valid = e.e_edge < cfg.e_max && e.e_edge < mean * cfg.mean_factor_f;
  if (frame_valid) {
    const double updated = (1.0 - cfg.ema_alpha) * mean + cfg.ema_alpha * e.e_edge;
    return {health::Valid{updated, frames_valid + 1, 0}, ValidDecision::UpdatePose};
  }
  if (borderline) return {health::Uninitialized{}, ValidDecision::Reinitialize};
  return {health::Borderline{pose, mean, frames_valid, 1}, ValidDecision::HoldPose};
}

}  // namespace edgetrack
