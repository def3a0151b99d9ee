#pragma once

#include <string>
#include <variant>

#include "edgetrack/contour_refiner.hpp"
#include "edgetrack/geometry.hpp"

namespace edgetrack {

/// Edge matching score: product of residual, hypothesis distance and scanline validity ratio.
struct EdgeScore {
  double e_irls = 0.0;
  double e_dist = 0.0;
  double e_valid = 1.0;
  double e_edge = 0.0;
};

EdgeScore edge_score(const ContourSolveStats& stats);

struct ValidationConfig {
  double e_init_threshold = 0.12;
  double e_max = 0.30;
  double mean_factor_f = 2.0;
  double ema_alpha = 0.1;
  int candidate_max_frames = 10;

  void Validate() const;
};

namespace health {
struct Uninitialized {};
struct Candidate {
  double last_e = 0.0;
  int frames = 1;
};
struct Valid {
  double running_mean = 0.0;
  int frames_valid = 0;
  int mismatch_count = 0;
};
struct Borderline {
  Pose held_pose;
  double running_mean = 0.0;
  int frames_valid = 0;
  int mismatch_count = 1;
};
}  // namespace health

using TrackHealth = std::variant<health::Uninitialized, health::Candidate, health::Valid, health::Borderline>;

std::string state_name(const TrackHealth& h);

enum class CandidateDecision { Accept, KeepRefining, Discard };
enum class ValidDecision { UpdatePose, HoldPose, Reinitialize };

std::string to_string(CandidateDecision d);
std::string to_string(ValidDecision d);

struct CandidateStep {
  TrackHealth health;
  CandidateDecision decision;
};
struct ValidStep {
  TrackHealth health;
  ValidDecision decision;
};

/// Acceptance of a fresh detection (h Uninitialized) or a pending candidate.
CandidateStep step_candidate(const TrackHealth& h, const EdgeScore& e, const ValidationConfig& cfg);

/// Monitoring of an accepted track (h Valid or Borderline). `pose` is the pose held on entering
/// Borderline.
ValidStep step_valid(const TrackHealth& h, const EdgeScore& e, const ValidationConfig& cfg,
                     const Pose& pose = Pose{});

}  // namespace edgetrack
