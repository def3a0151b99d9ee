#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "edgetrack/error.hpp"

namespace edgetrack {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Matrix26 = Eigen::Matrix<Scalar, 2, 6>;

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// Rigid object-to-camera transform. x_cam = rotation * x_obj + translation.
template <typename Scalar>
struct Pose_ {
  Matrix3<Scalar> rotation = Matrix3<Scalar>::Identity();
  Vector3<Scalar> translation = Vector3<Scalar>::Zero();

  Vector3<Scalar> operator*(const Vector3<Scalar>& x) const { return rotation * x + translation; }

  static Pose_ Identity() { return Pose_{}; }
};
using Pose = Pose_<double>;

/// Small pose increment: rotation about the object center, then translation.
template <typename Scalar>
struct MotionDelta_ {
  Vector3<Scalar> dr = Vector3<Scalar>::Zero();  // radians
  Vector3<Scalar> dt = Vector3<Scalar>::Zero();  // meters

  Eigen::Matrix<Scalar, 6, 1> stacked() const {
    Eigen::Matrix<Scalar, 6, 1> v;
    v << dr, dt;
    return v;
  }
  static MotionDelta_ FromStacked(const Eigen::Matrix<Scalar, 6, 1>& v) {
    return MotionDelta_{v.template head<3>(), v.template tail<3>()};
  }
  MotionDelta_ operator-() const { return MotionDelta_{-dr, -dt}; }
};
using MotionDelta = MotionDelta_<double>;

/// Pinhole intrinsics. Pixel centers sit at integer coordinates.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  Eigen::Matrix3d K() const {
    Eigen::Matrix3d k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return k;
  }

  /// Intrinsics of the next coarser pyramid level (factor 2, pixel centers preserved).
  Intrinsics Downsampled() const {
    return Intrinsics{fx / 2.0, fy / 2.0, (cx + 0.5) / 2.0 - 0.5, (cy + 0.5) / 2.0 - 0.5,
                      (width + 1) / 2, (height + 1) / 2};
  }
  Intrinsics AtLevel(int level) const {
    Intrinsics out = *this;
    for (int i = 0; i < level; ++i) out = out.Downsampled();
    return out;
  }
  Intrinsics Shifted(double dx, double dy, int new_width, int new_height) const {
    return Intrinsics{fx, fy, cx - dx, cy - dy, new_width, new_height};
  }

  void Validate() const {
    if (!(fx > 0) || !(fy > 0) || width <= 0 || height <= 0) throw Error("invalid intrinsics");
  }
};

template <typename Scalar>
Matrix3<Scalar> Skew(const Vector3<Scalar>& v) {
  Matrix3<Scalar> s;
  // clang-format off
  s << Scalar(0), -v.z(),     v.y(),
       v.z(),     Scalar(0), -v.x(),
      -v.y(),     v.x(),      Scalar(0);
  // clang-format on
  return s;
}

/// Exact matrix exponential of [w]x (Rodrigues).
template <typename Scalar>
Matrix3<Scalar> ExpSO3(const Vector3<Scalar>& w) {
  const Scalar theta = w.norm();
  if (theta < Scalar(1e-12)) return Matrix3<Scalar>::Identity() + Skew(w);
  return Eigen::AngleAxis<Scalar>(theta, w / theta).toRotationMatrix();
}

/// Nearest rotation in the Frobenius sense.
template <typename Scalar>
Matrix3<Scalar> Orthonormalize(const Matrix3<Scalar>& m) {
  Eigen::JacobiSVD<Matrix3<Scalar>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3<Scalar> u = svd.matrixU();
  const Matrix3<Scalar>& v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0) u.col(2) *= Scalar(-1);
  return u * v.transpose();
}

template <typename Scalar>
Vector2<Scalar> project(const Vector3<Scalar>& p, const Intrinsics& intr) {
  if (!(p.z() > Scalar(1e-9))) throw Error("behind camera");
  return Vector2<Scalar>(Scalar(intr.fx) * p.x() / p.z() + Scalar(intr.cx),
                         Scalar(intr.fy) * p.y() / p.z() + Scalar(intr.cy));
}

template <typename Scalar>
Vector3<Scalar> back_project(const Vector2<Scalar>& x, Scalar depth, const Intrinsics& intr) {
  if (!(depth > Scalar(0))) throw Error("non-positive depth");
  return Vector3<Scalar>((x.x() - Scalar(intr.cx)) / Scalar(intr.fx) * depth,
                         (x.y() - Scalar(intr.cy)) / Scalar(intr.fy) * depth, depth);
}

/// p = exp([dr]x)(p_hat - t) + t + dt applied to the whole pose.
template <typename Scalar>
Pose_<Scalar> apply_delta(const Pose_<Scalar>& pose, const MotionDelta_<Scalar>& delta) {
  Pose_<Scalar> out;
  out.rotation = Orthonormalize<Scalar>(ExpSO3<Scalar>(delta.dr) * pose.rotation);
  out.translation = pose.translation + delta.dt;
  return out;
}

/// Image motion of a single camera-frame point under the same increment.
template <typename Scalar>
Vector3<Scalar> apply_delta(const Vector3<Scalar>& p_hat, const Vector3<Scalar>& center,
                            const MotionDelta_<Scalar>& delta) {
  return ExpSO3<Scalar>(delta.dr) * (p_hat - center) + center + delta.dt;
}

/// d pi(K p) / d(dr, dt) at delta = 0, for p parameterized as above.
template <typename Scalar>
Matrix26<Scalar> motion_jacobian(const Vector3<Scalar>& p_hat, const Vector3<Scalar>& center,
                                 const Intrinsics& intr) {
  if (!(p_hat.z() > Scalar(0))) throw Error("behind camera");
  const Scalar iz = Scalar(1) / p_hat.z();
  Eigen::Matrix<Scalar, 2, 3> jp;
  jp << Scalar(intr.fx) * iz, Scalar(0), -Scalar(intr.fx) * p_hat.x() * iz * iz,  //
      Scalar(0), Scalar(intr.fy) * iz, -Scalar(intr.fy) * p_hat.y() * iz * iz;
  Matrix26<Scalar> j;
  j.template leftCols<3>() = -jp * Skew<Scalar>(p_hat - center);
  j.template rightCols<3>() = jp;
  return j;
}

/// Angle of the relative rotation, degrees in [0, 180].
template <typename Scalar>
Scalar rotation_error(const Pose_<Scalar>& a, const Pose_<Scalar>& b) {
  const Matrix3<Scalar> rel = a.rotation.transpose() * b.rotation;
  const Scalar c = std::clamp((rel.trace() - Scalar(1)) / Scalar(2), Scalar(-1), Scalar(1));
  // atan2 form of arccos((trace - 1) / 2); keeps precision near 0 and 180 degrees.
  const Vector3<Scalar> axis(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  const Scalar s = axis.norm() / Scalar(2);
  return std::atan2(s, c) * Scalar(180) / std::numbers::pi_v<Scalar>;
}

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

}  // namespace edgetrack
