#include "doctest.h"

#include <limits>
#include <string>

#include "edgetrack/pose_validation.hpp"
#include "edgetrack/random.hpp"
#include "edgetrack/refine_pipeline.hpp"

using namespace edgetrack;

namespace {

// Independent table-driven reference of the acceptance automaton.
struct RefState {
  std::string name = "Uninitialized";
  double last = 0.0;
  int frames = 0;
  double mean = 0.0;
};

std::string ref_step(RefState& s, double e, const ValidationConfig& c) {
  if (s.name == "Uninitialized" || s.name == "Candidate") {
    const double last = s.name == "Candidate" ? s.last : std::numeric_limits<double>::infinity();
    const int frames = s.name == "Candidate" ? s.frames : 0;
    if (e < c.e_init_threshold) {
      s = {"Valid", 0, 0, e};
      return "Accept";
    }
    if (e < last && frames < c.candidate_max_frames) {
      s = {"Candidate", e, frames + 1, 0};
      return "KeepRefining";
    }
    s = {};
    return "Discard";
  }
  const bool ok = e < c.e_max && e < s.mean * c.mean_factor_f;
  if (ok) {
    s.mean = s.mean + c.ema_alpha * (e - s.mean);
    s.name = "Valid";
    return "UpdatePose";
  }
  if (s.name == "Borderline") {
    s = {};
    return "Reinitialize";
  }
  s.name = "Borderline";
  return "HoldPose";
}

std::string impl_step(TrackHealth& h, double e, const ValidationConfig& c) {
  const EdgeScore score{e, 1.0, 1.0, e};
  if (std::holds_alternative<health::Uninitialized>(h) || std::holds_alternative<health::Candidate>(h)) {
    const CandidateStep s = step_candidate(h, score, c);
    h = s.health;
    return to_string(s.decision);
  }
  const ValidStep s = step_valid(h, score, c);
  h = s.health;
  return to_string(s.decision);
}

double mean_of(const TrackHealth& h) {
  if (const auto* v = std::get_if<health::Valid>(&h)) return v->running_mean;
  if (const auto* b = std::get_if<health::Borderline>(&h)) return b->running_mean;
  return 0.0;
}

}  // namespace

TEST_CASE("edge score is the product of its parts") {
  ContourSolveStats st;
  st.irls_mean_residual = 0.2;
  st.mean_hyp_distance = 0.6;
  st.valid_ratio = 1.0;
  st.lines = st.lines_found = 100;
  const EdgeScore e = edge_score(st);
  CHECK(e.e_edge == doctest::Approx(0.12));
  CHECK(e.e_edge == e.e_irls * e.e_dist * e.e_valid);

  st.valid_ratio = 2.0;
  st.lines_found = 50;
  CHECK(edge_score(st).e_valid == 2.0);

  st.lines_found = 0;
  st.valid_ratio = std::numeric_limits<double>::infinity();
  const EdgeScore none = edge_score(st);
  CHECK(std::isinf(none.e_edge));
  CHECK_FALSE(none.e_edge < ValidationConfig{}.e_max);
}

TEST_CASE("edge score at a perfectly aligned pose is small") {
  const Intrinsics intr{500, 500, 127.5, 127.5, 256, 256};
  const Mesh cube = make_box(Eigen::Vector3d(0.1, 0.1, 0.1), 2);
  const Pose gt{ExpSO3<double>(Eigen::Vector3d(0.4, 0.3, 0.1)), Eigen::Vector3d(0.0, 0.0, 1.0)};
  const RenderOutput r = render(cube, gt, intr);
  GrayImage img = r.intensity;
  for (int y = 0; y < img.rows(); ++y)
    for (int x = 0; x < img.cols(); ++x)
      if (!r.silhouette(y, x)) img(y, x) = 0.05f;
  const EdgeScore e = edge_score(score_pose(img, cube, gt, intr, RefineConfig{}));
  CHECK(e.e_dist < 0.5);
  CHECK(e.e_valid == 1.0);
  CHECK(e.e_edge < 0.25 * 0.12);
}

TEST_CASE("candidate acceptance examples") {
  const ValidationConfig cfg;
  const CandidateStep fresh = step_candidate(health::Uninitialized{}, EdgeScore{0.1, 1, 1, 0.10}, cfg);
  CHECK(fresh.decision == CandidateDecision::Accept);
  CHECK(std::get<health::Valid>(fresh.health).running_mean == 0.10);

  const CandidateStep keep = step_candidate(health::Candidate{0.20, 1}, EdgeScore{0.15, 1, 1, 0.15}, cfg);
  CHECK(keep.decision == CandidateDecision::KeepRefining);
  CHECK(std::get<health::Candidate>(keep.health).last_e == 0.15);

  const CandidateStep drop = step_candidate(health::Candidate{0.15, 1}, EdgeScore{0.16, 1, 1, 0.16}, cfg);
  CHECK(drop.decision == CandidateDecision::Discard);
  CHECK(std::holds_alternative<health::Uninitialized>(drop.health));
}

TEST_CASE("candidate refinement is capped") {
  ValidationConfig cfg;
  TrackHealth h = health::Uninitialized{};
  double e = 1.0;
  int frames = 0;
  for (;;) {
    const CandidateStep s = step_candidate(h, EdgeScore{e, 1, 1, e}, cfg);
    h = s.health;
    if (s.decision != CandidateDecision::KeepRefining) break;
    ++frames;
    e *= 0.99;
  }
  CHECK(frames == cfg.candidate_max_frames);
}

TEST_CASE("valid monitoring examples") {
  const ValidationConfig cfg;
  const ValidStep up = step_valid(health::Valid{0.05, 10, 0}, EdgeScore{0.08, 1, 1, 0.08}, cfg);
  CHECK(up.decision == ValidDecision::UpdatePose);
  CHECK(std::get<health::Valid>(up.health).running_mean == doctest::Approx(0.053));

  Pose held;
  held.translation = Eigen::Vector3d(0.1, 0.2, 0.9);
  const ValidStep hold = step_valid(health::Valid{0.05, 10, 0}, EdgeScore{0.35, 1, 1, 0.35}, cfg, held);
  CHECK(hold.decision == ValidDecision::HoldPose);
  const auto& b = std::get<health::Borderline>(hold.health);
  CHECK(b.mismatch_count == 1);
  CHECK(b.held_pose.translation == held.translation);
  CHECK(b.running_mean == 0.05);

  const ValidStep re = step_valid(hold.health, EdgeScore{0.35, 1, 1, 0.35}, cfg);
  CHECK(re.decision == ValidDecision::Reinitialize);
  CHECK(std::holds_alternative<health::Uninitialized>(re.health));

  const ValidStep back = step_valid(hold.health, EdgeScore{0.06, 1, 1, 0.06}, cfg);
  CHECK(back.decision == ValidDecision::UpdatePose);
  CHECK(std::get<health::Valid>(back.health).mismatch_count == 0);

  CHECK_THROWS_AS(step_valid(health::Uninitialized{}, EdgeScore{}, cfg), Error);
}

TEST_CASE("automaton matches the reference over random score sequences") {
  Rng rng(21);
  for (int seq = 0; seq < 200; ++seq) {
    ValidationConfig cfg;
    cfg.e_init_threshold = rng.uniform(0.05, 0.2);
    cfg.mean_factor_f = rng.uniform(1.2, 3.0);
    TrackHealth h = health::Uninitialized{};
    RefState ref;
    int consecutive_invalid = 0;
    for (int f = 0; f < 200; ++f) {
      const double e = rng.uniform() < 0.1 ? rng.uniform(0.2, 1.0) : rng.uniform(0.0, 0.2);
      const std::string before = state_name(h);
      const std::string got = impl_step(h, e, cfg);
      const std::string want = ref_step(ref, e, cfg);
      REQUIRE(got == want);
      REQUIRE(state_name(h) == ref.name);
      CHECK(mean_of(h) == doctest::Approx(ref.mean).epsilon(1e-12));
      if (before == "Valid" || before == "Borderline") {
        consecutive_invalid = (got == "UpdatePose") ? 0 : consecutive_invalid + 1;
        CHECK(consecutive_invalid <= 2);
        if (consecutive_invalid == 2) CHECK(state_name(h) == "Uninitialized");
      } else {
        consecutive_invalid = 0;
      }
      if (const auto* b = std::get_if<health::Borderline>(&h)) CHECK(b->mismatch_count == 1);
    }
  }
}

TEST_CASE("replaying a score log reproduces the trajectory") {
  Rng rng(5);
  std::vector<double> log;
  for (int i = 0; i < 500; ++i) log.push_back(rng.uniform(0.0, 0.4));
  const ValidationConfig cfg;
  const auto run = [&] {
    std::vector<std::string> out;
    TrackHealth h = health::Uninitialized{};
    for (const double e : log) out.push_back(impl_step(h, e, cfg) + "/" + state_name(h));
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("raising the acceptance threshold is monotone") {
  Rng rng(13);
  std::vector<double> correct, wrong;
  for (int i = 0; i < 300; ++i) correct.push_back(std::abs(rng.normal(0.05, 0.04)));
  for (int i = 0; i < 300; ++i) wrong.push_back(std::abs(rng.normal(0.3, 0.15)));
  int prev_ok = -1, prev_rejected = 1 << 30;
  for (double t = 0.02; t <= 0.5; t += 0.01) {
    ValidationConfig cfg;
    cfg.e_init_threshold = t;
    int ok = 0, rejected = 0;
    for (const double e : correct)
      if (step_candidate(health::Uninitialized{}, EdgeScore{e, 1, 1, e}, cfg).decision == CandidateDecision::Accept) ++ok;
    for (const double e : wrong)
      if (step_candidate(health::Uninitialized{}, EdgeScore{e, 1, 1, e}, cfg).decision != CandidateDecision::Accept) ++rejected;
    CHECK(ok >= prev_ok);
    CHECK(rejected <= prev_rejected);
    prev_ok = ok;
    prev_rejected = rejected;
  }
}

TEST_CASE("config validation") {
  ValidationConfig cfg;
  CHECK_NOTHROW(cfg.Validate());
  cfg.mean_factor_f = 1.0;
  CHECK_THROWS_AS(cfg.Validate(), Error);
  cfg = ValidationConfig{};
  cfg.e_init_threshold = 0.0;
  CHECK_THROWS_AS(cfg.Validate(), Error);
}
