#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <limits>

#include "edgetrack/detector.hpp"

namespace edgetrack {

namespace {

struct ControlFrame {
  std::vector<Eigen::Vector3d> world;          // control points, world frame
  Eigen::MatrixXd alphas;                      // n x nc barycentric coordinates
};

ControlFrame choose_control_points(const std::vector<Eigen::Vector3d>& pts) {
  const auto n = static_cast<double>(pts.size());
  Eigen::Vector3d c0 = Eigen::Vector3d::Zero();
  for (const auto& p : pts) c0 += p;
  c0 /= n;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) cov += (p - c0) * (p - c0).transpose();
  cov /= n;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Vector3d lambda = eig.eigenvalues();  // ascending
  const double scale = lambda(2);
  if (!(scale > 1e-20) || lambda(1) < 1e-10 * scale) throw Error("degenerate PnP configuration");
  const bool planar = lambda(0) < 1e-10 * scale;

  ControlFrame cf;
  cf.world.push_back(c0);
  for (int i = 2; i >= (planar ? 1 : 0); --i)
    cf.world.push_back(c0 + std::sqrt(lambda(i)) * eig.eigenvectors().col(i));

  const auto nc = static_cast<Eigen::Index>(cf.world.size());
  Eigen::MatrixXd basis(3, nc - 1);
  for (Eigen::Index j = 1; j < nc; ++j) basis.col(j - 1) = cf.world[static_cast<std::size_t>(j)] - c0;
  const auto qr = basis.colPivHouseholderQr();
  cf.alphas.resize(static_cast<Eigen::Index>(pts.size()), nc);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Eigen::VectorXd a = qr.solve(pts[i] - c0);
    const auto r = static_cast<Eigen::Index>(i);
    cf.alphas(r, 0) = 1.0 - a.sum();
    cf.alphas.row(r).tail(nc - 1) = a.transpose();
  }
  return cf;
}

// Camera-frame control points from the null-space combination.
std::vector<Eigen::Vector3d> control_points(const Eigen::MatrixXd& null_space, const Eigen::VectorXd& beta,
                                            Eigen::Index nc) {
  const Eigen::VectorXd x = null_space.leftCols(beta.size()) * beta;
  std::vector<Eigen::Vector3d> cc(static_cast<std::size_t>(nc));
  for (Eigen::Index j = 0; j < nc; ++j) cc[static_cast<std::size_t>(j)] = x.segment<3>(3 * j);
  return cc;
}

double mean_reprojection(const Pose& pose, const std::vector<Eigen::Vector3d>& p3,
                         const std::vector<Eigen::Vector2d>& p2, const Intrinsics& intr) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p3.size(); ++i) {
    const Eigen::Vector3d p = pose * p3[i];
    if (!(p.z() > 1e-9)) return std::numeric_limits<double>::infinity();
    sum += (project<double>(p, intr) - p2[i]).norm();
  }
  return sum / static_cast<double>(p3.size());
}

Pose pose_from_controls(const ControlFrame& cf, const std::vector<Eigen::Vector3d>& cc,
                        const std::vector<Eigen::Vector3d>& p3) {
  const auto n = static_cast<Eigen::Index>(p3.size());
  Eigen::Matrix3Xd src(3, n), dst(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Vector3d pc = Eigen::Vector3d::Zero();
    for (std::size_t j = 0; j < cc.size(); ++j) pc += cf.alphas(i, static_cast<Eigen::Index>(j)) * cc[j];
    src.col(i) = p3[static_cast<std::size_t>(i)];
    dst.col(i) = pc;
  }
  if (dst.row(2).mean() < 0) dst = -dst;
  const Eigen::Matrix4d t = Eigen::umeyama(src, dst, false);
  Pose pose;
  pose.rotation = Orthonormalize<double>(t.topLeftCorner<3, 3>());
  pose.translation = t.topRightCorner<3, 1>();
  return pose;
}

// Gauss-Newton on the null-space coefficients against the control-point distance constraints.
Eigen::VectorXd refine_betas(const Eigen::MatrixXd& null_space, Eigen::VectorXd beta, const ControlFrame& cf) {
  const auto nc = static_cast<Eigen::Index>(cf.world.size());
  const Eigen::Index nb = beta.size();
  for (int it = 0; it < 10; ++it) {
    std::vector<Eigen::VectorXd> rows;
    std::vector<double> res;
    for (Eigen::Index a = 0; a < nc; ++a) {
      for (Eigen::Index b = a + 1; b < nc; ++b) {
        std::vector<Eigen::Vector3d> diffs(static_cast<std::size_t>(nb));
        Eigen::Vector3d d = Eigen::Vector3d::Zero();
        for (Eigen::Index k = 0; k < nb; ++k) {
          diffs[static_cast<std::size_t>(k)] =
              null_space.col(k).segment<3>(3 * a) - null_space.col(k).segment<3>(3 * b);
          d += beta(k) * diffs[static_cast<std::size_t>(k)];
        }
        const double target = (cf.world[static_cast<std::size_t>(a)] - cf.world[static_cast<std::size_t>(b)]).squaredNorm();
        Eigen::VectorXd g(nb);
        for (Eigen::Index k = 0; k < nb; ++k) g(k) = 2.0 * d.dot(diffs[static_cast<std::size_t>(k)]);
        rows.push_back(g);
        res.push_back(target - d.squaredNorm());
      }
    }
    Eigen::MatrixXd j(static_cast<Eigen::Index>(rows.size()), nb);
    Eigen::VectorXd r(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      j.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
      r(static_cast<Eigen::Index>(i)) = res[i];
    }
    const Eigen::VectorXd step = j.colPivHouseholderQr().solve(r);
    if (!step.allFinite()) break;
    beta += step;
    if (step.norm() < 1e-12 * (1.0 + beta.norm())) break;
  }
  return beta;
}

// Initial coefficients from the linearized distance constraints (products beta_a * beta_b).
Eigen::VectorXd initial_betas(const Eigen::MatrixXd& null_space, Eigen::Index nb, const ControlFrame& cf) {
  const auto nc = static_cast<Eigen::Index>(cf.world.size());
  std::vector<std::pair<Eigen::Index, Eigen::Index>> prods;
  for (Eigen::Index a = 0; a < nb; ++a)
    for (Eigen::Index b = a; b < nb; ++b) prods.emplace_back(a, b);
  const auto np = static_cast<Eigen::Index>(prods.size());
  const Eigen::Index pairs = nc * (nc - 1) / 2;
  if (np > pairs) return Eigen::VectorXd();

  Eigen::MatrixXd l(pairs, np);
  Eigen::VectorXd rho(pairs);
  Eigen::Index row = 0;
  for (Eigen::Index a = 0; a < nc; ++a) {
    for (Eigen::Index b = a + 1; b < nc; ++b, ++row) {
      for (Eigen::Index p = 0; p < np; ++p) {
        const auto [i, k] = prods[static_cast<std::size_t>(p)];
        const Eigen::Vector3d di = null_space.col(i).segment<3>(3 * a) - null_space.col(i).segment<3>(3 * b);
        const Eigen::Vector3d dk = null_space.col(k).segment<3>(3 * a) - null_space.col(k).segment<3>(3 * b);
        l(row, p) = (i == k ? 1.0 : 2.0) * di.dot(dk);
      }
      rho(row) = (cf.world[static_cast<std::size_t>(a)] - cf.world[static_cast<std::size_t>(b)]).squaredNorm();
    }
  }
  const Eigen::VectorXd prod = l.colPivHouseholderQr().solve(rho);
  // prods layout: (0,0), (0,1), ..., (0,nb-1), (1,1), ...
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(nb);
  beta(0) = std::sqrt(std::abs(prod(0)));
  if (beta(0) > 0)
    for (Eigen::Index a = 1; a < nb; ++a) beta(a) = prod(a) / beta(0);
  return beta;
}

Pose gauss_newton_polish(Pose pose, const std::vector<Eigen::Vector3d>& p3,
                         const std::vector<Eigen::Vector2d>& p2, const Intrinsics& intr) {
  double err = mean_reprojection(pose, p3, p2, intr);
  for (int it = 0; it < 10; ++it) {
    Matrix6d h = Matrix6d::Zero();
    Vector6d g = Vector6d::Zero();
    for (std::size_t i = 0; i < p3.size(); ++i) {
      const Eigen::Vector3d p = pose * p3[i];
      const Eigen::Matrix<double, 2, 6> j = motion_jacobian<double>(p, pose.translation, intr);
      const Eigen::Vector2d r = p2[i] - project<double>(p, intr);
      h.noalias() += j.transpose() * j;
      g.noalias() += j.transpose() * r;
    }
    const Vector6d step = h.ldlt().solve(g);
    if (!step.allFinite()) break;
    const Pose next = apply_delta(pose, MotionDelta::FromStacked(step));
    const double next_err = mean_reprojection(next, p3, p2, intr);
    if (!(next_err <= err)) break;
    pose = next;
    const bool done = err - next_err < 1e-12;
    err = next_err;
    if (done) break;
  }
  return pose;
}

}  // namespace

Pose solve_pnp(const std::vector<Eigen::Vector3d>& points_3d,
               const std::vector<Eigen::Vector2d>& points_2d, const Intrinsics& intr) {
  if (points_3d.size() != points_2d.size()) throw Error("correspondence count mismatch");
  if (points_3d.size() < 4) throw Error("PnP needs at least four correspondences");
  const ControlFrame cf = choose_control_points(points_3d);
  const auto nc = static_cast<Eigen::Index>(cf.world.size());
  const auto n = static_cast<Eigen::Index>(points_3d.size());

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * n, 3 * nc);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = (points_2d[static_cast<std::size_t>(i)].x() - intr.cx) / intr.fx;
    const double v = (points_2d[static_cast<std::size_t>(i)].y() - intr.cy) / intr.fy;
    for (Eigen::Index j = 0; j < nc; ++j) {
      const double a = cf.alphas(i, j);
      m(2 * i, 3 * j) = a;
      m(2 * i, 3 * j + 2) = -a * u;
      m(2 * i + 1, 3 * j + 1) = a;
      m(2 * i + 1, 3 * j + 2) = -a * v;
    }
  }
  const Eigen::MatrixXd mtm = m.transpose() * m;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mtm);
  // Null-space candidates ordered by increasing eigenvalue.
  const Eigen::MatrixXd null_space = eig.eigenvectors().leftCols(std::min<Eigen::Index>(4, 3 * nc));

  Pose best;
  double best_err = std::numeric_limits<double>::infinity();
  const Eigen::Index max_nb = nc == 4 ? 3 : 2;
  for (Eigen::Index nb = 1; nb <= max_nb; ++nb) {
    Eigen::VectorXd beta = initial_betas(null_space, nb, cf);
    if (beta.size() == 0 || !beta.allFinite()) continue;
    beta = refine_betas(null_space, beta, cf);
    const Pose candidate = pose_from_controls(cf, control_points(null_space, beta, nc), points_3d);
    const double err = mean_reprojection(candidate, points_3d, points_2d, intr);
    if (err < best_err) {
      best_err = err;
      best = candidate;
    }
  }
  if (!std::isfinite(best_err)) throw Error("PnP failed to find a pose in front of the camera");
  return gauss_newton_polish(best, points_3d, points_2d, intr);
}

}  // namespace edgetrack
