#pragma once

// Chart-level state types, the canonical involution of TTM, SO(3) helpers and
// central finite differences.

#include <Eigen/Dense>

#include <functional>

#include "fldisc/error.hpp"

namespace fldisc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

using VectorFunction = std::function<Vec(const Vec&)>;

inline constexpr double kJacobianStep = 1e-6;
inline constexpr double kHessianStep = 1e-4;

bool all_finite(const Vec& v);

/// A point of TM in chart coordinates: position x and velocity y.
class CoordState {
 public:
  CoordState() = default;
  CoordState(Vec x, Vec y);

  /// Splits a stacked (x, y) vector of even length.
  static CoordState from_stacked(const Vec& s);

  const Vec& x() const { return x_; }
  const Vec& y() const { return y_; }
  Eigen::Index dim() const { return x_.size(); }
  Vec stacked() const;

 private:
  Vec x_;
  Vec y_;
};

/// An element (x, y, xdot, ydot) of TTM in canonical chart coordinates.
struct DoubleTangent {
  Vec x;
  Vec y;
  Vec xdot;
  Vec ydot;

  DoubleTangent() = default;
  DoubleTangent(Vec x, Vec y, Vec xdot, Vec ydot);

  Eigen::Index dim() const { return x.size(); }
};

/// Canonical involution: (x, y, xdot, ydot) -> (x, xdot, y, ydot).
DoubleTangent kappa(const DoubleTangent& w);

class Rotation {
 public:
  Rotation() : r_(Mat3::Identity()) {}

  /// Accepts matrices whose orthogonality defect is at most 1e-9. Defects in
  /// (1e-12, 1e-9] are removed by polar projection; anything larger throws
  /// NotRotation.
  explicit Rotation(const Mat3& r);

  const Mat3& matrix() const { return r_; }

  /// max |R^T R - I|
  double orthogonality_defect() const;

 private:
  Mat3 r_;
};

class AngularVelocity {
 public:
  AngularVelocity() : w_(Vec3::Zero()) {}
  explicit AngularVelocity(const Vec3& w);

  const Vec3& vector() const { return w_; }

 private:
  Vec3 w_;
};

Mat3 hat(const Vec3& w);

/// Inverse of hat; throws NotSkew when |S + S^T| >= 1e-9.
Vec3 vee(const Mat3& s);

Rotation so3_exp(const Vec3& w);

/// Principal logarithm; throws AngleAtPi when trace(R) <= -1 + 1e-9.
Vec3 so3_log(const Rotation& r);

/// Row-major flattening (r11, r12, r13, r21, ..., r33).
Eigen::Matrix<double, 9, 1> vectorize(const Mat3& m);
Mat3 devectorize(const Eigen::Matrix<double, 9, 1>& v);

/// Right Jacobian of the exponential: R^T dR = hat(J_r(w) dw) at R = exp(hat(w)).
Mat3 so3_right_jacobian(const Vec3& w);
Mat3 so3_right_jacobian_inverse(const Vec3& w);

/// Central-difference Jacobian. Throws NonFinite if f returns NaN/Inf.
Mat numeric_jacobian(const VectorFunction& f, const Vec& x0, double step = kJacobianStep);

}  // namespace fldisc
