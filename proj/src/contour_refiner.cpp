#include "edgetrack/contour_refiner.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace edgetrack {

std::size_t HypothesisSet::lines_found() const {
  std::size_t n = 0;
  for (const auto& l : lines) n += l.empty() ? 0 : 1;
  return n;
}

HypothesisSet find_hypotheses(const GrayImage& camera, const ContourSet& contour, int length,
                              double t_e, const RotatedSobelBank& bank) {
  if (length < 3 || length % 2 == 0) throw Error("scanline length must be odd and >= 3");
  const int half = length / 2;
  HypothesisSet out;
  out.lines.resize(contour.size());
  std::vector<double> resp(static_cast<std::size_t>(length));

  for (std::size_t i = 0; i < contour.size(); ++i) {
    const Eigen::Vector2d& e = contour.points_2d[i];
    const Eigen::Vector2d& s = contour.normals[i];
    const Kernel5& k = bank.kernel(bank.nearest(std::atan2(s.y(), s.x())));
    for (int j = -half; j <= half; ++j) {
      const Eigen::Vector2d p = e + j * s;
      resp[static_cast<std::size_t>(j + half)] = std::abs(kernel_response(camera, k, p.x(), p.y()));
    }
    for (int j = 1; j + 1 < length; ++j) {
      const double l = resp[static_cast<std::size_t>(j - 1)];
      const double c = resp[static_cast<std::size_t>(j)];
      const double r = resp[static_cast<std::size_t>(j + 1)];
      // A two-sample plateau counts once, at its first sample.
      if (!(c > t_e && c > l && c >= r)) continue;
      const double curvature = l - 2.0 * c + r;
      const double sub = curvature < 0.0 ? std::clamp(0.5 * (l - r) / curvature, -0.5, 0.5) : 0.0;
      out.lines[i].push_back(Hypothesis{j - half + sub, c});
    }
  }
  return out;
}

Vector6d solve_normal_equations(const Matrix6d& ata, const Vector6d& atb,
                                const std::vector<int>& active, const char* message) {
  const auto n = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd a(n, n);
  Eigen::VectorXd b(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    b(r) = atb(active[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < n; ++c)
      a(r, c) = ata(active[static_cast<std::size_t>(r)], active[static_cast<std::size_t>(c)]);
  }
  Eigen::VectorXd scale(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    if (!(a(r, r) > 0.0)) throw Error(message);
    scale(r) = 1.0 / std::sqrt(a(r, r));
  }
  const Eigen::MatrixXd scaled = scale.asDiagonal() * a * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) throw Error(message);
  const Eigen::VectorXd x = scale.asDiagonal() * scaled.ldlt().solve(scale.asDiagonal() * b);

  Vector6d full = Vector6d::Zero();
  for (Eigen::Index r = 0; r < n; ++r) full(active[static_cast<std::size_t>(r)]) = x(r);
  return full;
}

ContourSolution solve_contour(const ContourSet& contour, const HypothesisSet& hyps, const Pose& pose,
                              const Intrinsics& intr, SolveMode mode, int reweights) {
  if (hyps.lines.size() != contour.size()) throw Error("hypotheses do not match contour");
  const std::size_t found = hyps.lines_found();
  const std::size_t needed = mode == SolveMode::Full6D ? 6 : 3;
  if (found < needed) throw Error("too few valid scanlines");

  const std::vector<int> active =
      mode == SolveMode::Full6D ? std::vector<int>{0, 1, 2, 3, 4, 5} : std::vector<int>{2, 3, 4};

  struct Line {
    std::size_t index;
    Eigen::Vector2d x;     // projection at the linearization point
    Vector6d a;            // J^T s
    Eigen::Matrix<double, 2, 6> jac;
    double r = 0.0;        // residual at the linearization point
  };
  std::vector<Line> lines;
  lines.reserve(found);
  for (std::size_t i = 0; i < contour.size(); ++i) {
    if (!hyps.has_any(i)) continue;
    const Eigen::Vector3d& p = contour.points_3d[i];
    Line l;
    l.index = i;
    l.x = project<double>(p, intr);
    l.jac = motion_jacobian<double>(p, pose.translation, intr);
    l.a = l.jac.transpose() * contour.normals[i];
    lines.push_back(l);
  }

  // Nearest hypothesis to a predicted contour location; returns the point-to-line residual.
  const auto select = [&](const Line& l, const Eigen::Vector2d& predicted, double* distance) {
    const Eigen::Vector2d& e = contour.points_2d[l.index];
    const Eigen::Vector2d& s = contour.normals[l.index];
    double best = std::numeric_limits<double>::infinity();
    Eigen::Vector2d h = e;
    for (const Hypothesis& hyp : hyps.lines[l.index]) {
      const Eigen::Vector2d cand = e + hyp.offset * s;
      const double d = (cand - predicted).squaredNorm();
      if (d < best) {
        best = d;
        h = cand;
      }
    }
    if (distance) *distance = std::sqrt(best);
    return s.dot(h - l.x);
  };

  double dist_sum = 0.0;
  for (Line& l : lines) {
    double d = 0.0;
    l.r = select(l, l.x, &d);
    dist_sum += d;
  }

  Vector6d delta = Vector6d::Zero();
  std::vector<double> weights(lines.size(), 1.0);
  for (int it = 0; it <= reweights; ++it) {
    if (it > 0) {
      for (std::size_t k = 0; k < lines.size(); ++k) {
        Line& l = lines[k];
        l.r = select(l, l.x + l.jac * delta, nullptr);
        weights[k] = charbonnier_weight(l.r - l.a.dot(delta));
      }
    }
    Matrix6d ata = Matrix6d::Zero();
    Vector6d atb = Vector6d::Zero();
    for (std::size_t k = 0; k < lines.size(); ++k) {
      ata.noalias() += weights[k] * lines[k].a * lines[k].a.transpose();
      atb.noalias() += weights[k] * lines[k].r * lines[k].a;
    }
    delta = solve_normal_equations(ata, atb, active, "degenerate geometry");
  }

  ContourSolution out;
  out.delta = MotionDelta::FromStacked(delta);
  double res_sum = 0.0;
  for (const Line& l : lines) res_sum += charbonnier(l.r - l.a.dot(delta));
  out.stats.lines = contour.size();
  out.stats.lines_found = found;
  out.stats.irls_mean_residual = res_sum / static_cast<double>(lines.size());
  out.stats.mean_hyp_distance = dist_sum / static_cast<double>(lines.size());
  out.stats.valid_ratio = static_cast<double>(contour.size()) / static_cast<double>(found);
  out.stats.converged = true;
  return out;
}

ContourStageResult refine_contour_stage(const GrayImage& camera, const Mesh& mesh, const Pose& pose,
                                        const Intrinsics& intr, const ContourStageConfig& cfg,
                                        const RotatedSobelBank& bank) {
  const RenderOutput rendered = render(mesh, pose, intr);
  ContourSet contour = extract_contour(rendered, 1, intr, cfg.contour_points);
  const HypothesisSet hyps = find_hypotheses(camera, contour, cfg.scanline_length, cfg.t_e, bank);

  ContourStageResult out{pose, {}};
  for (int rep = 0; rep < cfg.reps; ++rep) {
    const ContourSolution sol = solve_contour(contour, hyps, out.pose, intr, cfg.mode, cfg.reweights);
    for (auto& p : contour.points_3d) p = apply_delta<double>(p, out.pose.translation, sol.delta);
    out.pose = apply_delta(out.pose, sol.delta);
    out.stats = sol.stats;
  }
  return out;
}

}  // namespace edgetrack
