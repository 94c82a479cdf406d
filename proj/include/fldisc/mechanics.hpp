#pragma once

// Mechanical control systems x'' = -Gamma(x)[x', x'] + e(x) + g(x) u, the
// mechanical feedback group acting on them, and the two shipped examples.

#include <functional>
#include <vector>

#include "fldisc/discretization.hpp"
#include "fldisc/geometry.hpp"

namespace fldisc {

/// Christoffel symbols: gamma[i](j, k) = Gamma^i_{jk}.
using Christoffel = std::vector<Mat>;

/// Quadratic form sum_jk Gamma^i_{jk} u^j v^k for every i.
Vec contract(const Christoffel& gamma, const Vec& u, const Vec& v);

class MechanicalSystem {
 public:
  using ChristoffelField = std::function<Christoffel(const Vec&)>;
  using ControlField = std::function<Mat(const Vec&)>;

  MechanicalSystem(Eigen::Index n, Eigen::Index m, ChristoffelField gamma, VectorFunction drift,
                   ControlField controls);

  /// Gamma = 0, e = a x, g = b.
  static MechanicalSystem linear(const Mat& a, const Mat& b);

  Eigen::Index n() const { return n_; }
  Eigen::Index m() const { return m_; }

  Christoffel gamma(const Vec& x) const;
  Vec drift(const Vec& x) const;
  Mat controls(const Vec& x) const;
  /// r-th column of g as a vector field.
  VectorFunction control_field(Eigen::Index r) const;
  VectorFunction drift_field() const;

  /// Largest |Gamma^i_{jk} - Gamma^i_{kj}| at x.
  double symmetry_defect(const Vec& x) const;

 private:
  Eigen::Index n_;
  Eigen::Index m_;
  ChristoffelField gamma_;
  VectorFunction drift_;
  ControlField controls_;
};

/// Derivative (xdot, ydot) of the SODE at s under control u.
CoordState sode_field(const MechanicalSystem& sys, const CoordState& s, const Vec& u);

/// Mechanical feedback u = y^T gamma y + alpha + beta u~ together with the
/// coordinate change phi.
struct MFTransform {
  Diffeomorphism phi;
  VectorFunction alpha;                      // m-vector
  std::function<Mat(const Vec&)> beta;       // m x m
  std::function<std::vector<Mat>(const Vec&)> gamma;  // m symmetric n x n forms

  static MFTransform identity(Eigen::Index n, Eigen::Index m);
};

Vec apply_feedback(const MFTransform& t, const Vec& x, const Vec& y, const Vec& utilde);

/// x~'' = A x~ + B u~ with constant A (n x n) and B (n x m).
struct LinearMechanicalSystem {
  Mat a;
  Mat b;

  LinearMechanicalSystem(Mat a, Mat b);

  Eigen::Index n() const { return a.rows(); }
  Eigen::Index m() const { return b.cols(); }

  /// First-order form on (x~, y~): [[0, I], [A, 0]] and [[0], [B]].
  Mat stacked_a() const;
  Mat stacked_b() const;
};

struct MechanicalBundle {
  MechanicalSystem system;
  MFTransform transform;
  LinearMechanicalSystem lms;
};

struct PendulumParams {
  double l1 = 0.063;
  double m1 = 0.02;
  double m2 = 0.3;
  double j1 = 47e-6;
  double j2 = 32e-6;
  double a = 9.81;
  double m0 = 0.3832;
  double md = 49e-4;

  /// a L1 (m1 + 2 m2) and L1^2 (m1 + 4 m2) + J1.
  double m0_from_formula() const;
  double md_from_formula() const;
  /// Throws InvalidArgument unless every parameter is positive and the printed
  /// m0, md agree with their formulas within 0.5%.
  void validate() const;
};

/// Inertia wheel pendulum with its linearizing diffeomorphism and feedback.
MechanicalBundle pendulum_system(const PendulumParams& params = {});

/// phi for the pendulum: (c x1 + x2, (m0/J2) sin x1) with c = (md + J2)/J2.
Diffeomorphism pendulum_diffeomorphism(const PendulumParams& params);

/// Rigid body on SO(3) with torque input and the input change
/// tau = Omega x J Omega + J u.
struct RigidBody {
  Mat3 inertia;

  explicit RigidBody(const Mat3& inertia);

  /// dR/dt = R hat(Omega) and dOmega/dt = J^{-1}(-Omega x J Omega + tau).
  std::pair<Mat3, Vec3> derivative(const Rotation& r, const AngularVelocity& w, const Vec3& tau) const;
  Vec3 torque_from_input(const AngularVelocity& w, const Vec3& u) const;
  Vec3 input_from_torque(const AngularVelocity& w, const Vec3& tau) const;

  /// (xi, eta) = (Log(R)^vee, Omega) and its inverse.
  static Vec chart(const Rotation& r, const AngularVelocity& w);
  static std::pair<Rotation, AngularVelocity> from_chart(const Vec& z);

  /// Mechanical system in exponential coordinates xi with velocity xi':
  /// xi'' = -Gamma(xi)[xi', xi'] + J_r(xi)^{-1} u, where Omega = J_r(xi) xi'.
  /// Paired with the feedback u = xi'^T gamma xi' + J_r(xi) u~ it is MF
  /// equivalent to xi'' = u~, i.e. A = 0 and B = I.
  static MechanicalBundle exponential_chart_bundle();

  /// Row-major vectorized form on R^9 (read-only view): Gamma from
  /// Y'' = Y X^T Y, g_r(X) = vec(X hat(e_r)), e = 0.
  static MechanicalSystem vectorized_system();

  /// Stacked first-order matrices A = [0 I; 0 0], B = [0; I] on R^6.
  static LinearMechanicalSystem linear_model();
};

struct MFReport {
  double worst_defect = 0.0;
  Vec witness;
  double tolerance = 1e-7;
  bool passed = true;
};

struct MFSample {
  Vec x;
  Vec y;
  Vec utilde;
};

/// Pushes the closed-loop field of `sys` (with u = apply_feedback) through T phi
/// and compares it to (y~, A x~ + B u~) at T phi(x, y). Defects are relative to
/// max(1, |LMS field|).
MFReport verify_mf_equivalence(const MechanicalSystem& sys, const MFTransform& t,
                               const LinearMechanicalSystem& lms,
                               const std::vector<MFSample>& samples);

}  // namespace fldisc
