#include "fldisc/mechanics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace fldisc {

Vec contract(const Christoffel& gamma, const Vec& u, const Vec& v) {
  Vec out(static_cast<Eigen::Index>(gamma.size()));
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = u.dot(gamma[i] * v);
  }
  return out;
}

MechanicalSystem::MechanicalSystem(Eigen::Index n, Eigen::Index m, ChristoffelField gamma,
                                   VectorFunction drift, ControlField controls)
    : n_(n), m_(m), gamma_(std::move(gamma)), drift_(std::move(drift)), controls_(std::move(controls)) {
  if (n_ < 1 || m_ < 0) {
    throw Error(ErrorCode::InvalidArgument, "mechanical system needs n >= 1 and m >= 0");
  }
}

MechanicalSystem MechanicalSystem::linear(const Mat& a, const Mat& b) {
  const auto n = a.rows();
  if (a.cols() != n || b.rows() != n) {
    throw Error(ErrorCode::DimensionMismatch, "linear system matrices are inconsistent");
  }
  return MechanicalSystem(
      n, b.cols(), [n](const Vec&) { return Christoffel(n, Mat::Zero(n, n)); },
      [a](const Vec& x) { return Vec(a * x); }, [b](const Vec&) { return b; });
}

Christoffel MechanicalSystem::gamma(const Vec& x) const { return gamma_(x); }
Vec MechanicalSystem::drift(const Vec& x) const { return drift_(x); }
Mat MechanicalSystem::controls(const Vec& x) const { return controls_(x); }

VectorFunction MechanicalSystem::control_field(Eigen::Index r) const {
  return [controls = controls_, r](const Vec& x) { return Vec(controls(x).col(r)); };
}

VectorFunction MechanicalSystem::drift_field() const { return drift_; }

double MechanicalSystem::symmetry_defect(const Vec& x) const {
  double worst = 0.0;
  for (const Mat& g : gamma_(x)) {
    worst = std::max(worst, (g - g.transpose()).cwiseAbs().maxCoeff());
  }
  return worst;
}

CoordState sode_field(const MechanicalSystem& sys, const CoordState& s, const Vec& u) {
  if (s.dim() != sys.n() || u.size() != sys.m()) {
    throw Error(ErrorCode::DimensionMismatch, "state or control has the wrong dimension");
  }
  const Vec& x = s.x();
  const Vec& y = s.y();
  Vec ydot = -contract(sys.gamma(x), y, y) + sys.drift(x);
  if (sys.m() > 0) {
    ydot += sys.controls(x) * u;
  }
  return {y, ydot};
}

MFTransform MFTransform::identity(Eigen::Index n, Eigen::Index m) {
  return MFTransform{Diffeomorphism::identity(n), [m](const Vec&) { return Vec(Vec::Zero(m)); },
                     [m](const Vec&) { return Mat(Mat::Identity(m, m)); },
                     [n, m](const Vec&) { return std::vector<Mat>(m, Mat::Zero(n, n)); }};
}

Vec apply_feedback(const MFTransform& t, const Vec& x, const Vec& y, const Vec& utilde) {
  if (x.size() != t.phi.dim() || y.size() != x.size()) {
    throw Error(ErrorCode::DimensionMismatch, "feedback state has the wrong dimension");
  }
  const Mat beta = t.beta(x);
  if (utilde.size() != beta.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "auxiliary control has the wrong dimension");
  }
  Vec u = t.alpha(x) + beta * utilde;
  const std::vector<Mat> gamma = t.gamma(x);
  for (Eigen::Index r = 0; r < u.size(); ++r) {
    u(r) += y.dot(gamma[static_cast<std::size_t>(r)] * y);
  }
  return u;
}

LinearMechanicalSystem::LinearMechanicalSystem(Mat a_, Mat b_) : a(std::move(a_)), b(std::move(b_)) {
  if (a.rows() != a.cols() || b.rows() != a.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "LMS matrices are inconsistent");
  }
  if (!a.allFinite() || !b.allFinite()) {
    throw Error(ErrorCode::NonFinite, "LMS entries must be finite");
  }
}

Mat LinearMechanicalSystem::stacked_a() const {
  const auto n = this->n();
  Mat s = Mat::Zero(2 * n, 2 * n);
  s.topRightCorner(n, n).setIdentity();
  s.bottomLeftCorner(n, n) = a;
  return s;
}

Mat LinearMechanicalSystem::stacked_b() const {
  const auto n = this->n();
  Mat s = Mat::Zero(2 * n, m());
  s.bottomRows(n) = b;
  return s;
}

// ---------------------------------------------------------------------------
// Inertia wheel pendulum

double PendulumParams::m0_from_formula() const { return a * l1 * (m1 + 2.0 * m2); }
double PendulumParams::md_from_formula() const { return l1 * l1 * (m1 + 4.0 * m2) + j1; }

void PendulumParams::validate() const {
  for (double p : {l1, m1, m2, j1, j2, a, m0, md}) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw Error(ErrorCode::InvalidArgument, "pendulum parameters must be positive and finite");
    }
  }
  const double rel_m0 = std::abs(m0 - m0_from_formula()) / m0;
  const double rel_md = std::abs(md - md_from_formula()) / md;
  if (rel_m0 > 5e-3 || rel_md > 5e-3) {
    throw Error(ErrorCode::InvalidArgument,
                "m0/md disagree with a L1 (m1 + 2 m2) and L1^2 (m1 + 4 m2) + J1 by more than 0.5%");
  }
}

Diffeomorphism pendulum_diffeomorphism(const PendulumParams& p) {
  const double c = (p.md + p.j2) / p.j2;
  const double k = p.m0 / p.j2;
  auto map = [c, k](const Vec& x) { return Vec(Eigen::Vector2d(c * x(0) + x(1), k * std::sin(x(0)))); };
  auto inverse = [c, k](const Vec& xt) {
    const double s = xt(1) / k;
    if (std::abs(s) > 1.0) {
      throw Error(ErrorCode::OutsideChart, "sin x1 = " + std::to_string(s) + " is outside [-1, 1]");
    }
    const double x1 = std::asin(s);
    return Vec(Eigen::Vector2d(x1, xt(0) - c * x1));
  };
  auto derivative = [c, k](const Vec& x) {
    Mat d(2, 2);
    d << c, 1.0, k * std::cos(x(0)), 0.0;
    return d;
  };
  auto second = [k](const Vec& x, const Vec& u, const Vec& v) {
    return Vec(Eigen::Vector2d(0.0, -k * std::sin(x(0)) * u(0) * v(0)));
  };
  return Diffeomorphism(2, map, inverse, derivative, second);
}

MechanicalBundle pendulum_system(const PendulumParams& p) {
  p.validate();
  const double ratio = p.m0 / p.md;
  MechanicalSystem sys(
      2, 1, [](const Vec&) { return Christoffel(2, Mat::Zero(2, 2)); },
      [ratio](const Vec& x) {
        const double e1 = ratio * std::sin(x(0));
        return Vec(Eigen::Vector2d(e1, -e1));
      },
      [p](const Vec&) {
        Mat g(2, 1);
        g << -1.0 / p.md, (p.md + p.j2) / (p.md * p.j2);
        return g;
      });

  // Solving u~ = -(m0/J2) sin x1 y1^2 + m0^2/(2 md J2) sin 2x1 - m0/(md J2) cos x1 u
  // for u gives alpha = m0 sin x1, beta = -md J2/(m0 cos x1), gamma_11 = -md tan x1.
  auto checked_cos = [](const Vec& x) {
    const double c = std::cos(x(0));
    if (std::abs(c) <= 1e-12) {
      throw Error(ErrorCode::SingularFeedback, "linearizing feedback is singular at cos x1 = 0");
    }
    return c;
  };
  MFTransform t{
      pendulum_diffeomorphism(p),
      [p](const Vec& x) { return Vec(Vec::Constant(1, p.m0 * std::sin(x(0)))); },
      [p, checked_cos](const Vec& x) {
        return Mat(Mat::Constant(1, 1, -p.md * p.j2 / (p.m0 * checked_cos(x))));
      },
      [p, checked_cos](const Vec& x) {
        Mat g = Mat::Zero(2, 2);
        g(0, 0) = -p.md * std::sin(x(0)) / checked_cos(x);
        return std::vector<Mat>{g};
      }};

  Mat a(2, 2);
  a << 0.0, 1.0, 0.0, 0.0;
  Mat b(2, 1);
  b << 0.0, 1.0;
  return {std::move(sys), std::move(t), LinearMechanicalSystem(a, b)};
}

// ---------------------------------------------------------------------------
// Rigid body

RigidBody::RigidBody(const Mat3& j) : inertia(j) {
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(j);
  if ((j - j.transpose()).cwiseAbs().maxCoeff() > 1e-12 || eig.eigenvalues().minCoeff() <= 0.0) {
    throw Error(ErrorCode::InvalidArgument, "inertia must be symmetric positive definite");
  }
}

std::pair<Mat3, Vec3> RigidBody::derivative(const Rotation& r, const AngularVelocity& w,
                                            const Vec3& tau) const {
  const Vec3& om = w.vector();
  return {r.matrix() * hat(om), inertia.ldlt().solve(-om.cross(inertia * om) + tau)};
}

Vec3 RigidBody::torque_from_input(const AngularVelocity& w, const Vec3& u) const {
  const Vec3& om = w.vector();
  return om.cross(inertia * om) + inertia * u;
}

Vec3 RigidBody::input_from_torque(const AngularVelocity& w, const Vec3& tau) const {
  const Vec3& om = w.vector();
  return inertia.ldlt().solve(tau - om.cross(inertia * om));
}

Vec RigidBody::chart(const Rotation& r, const AngularVelocity& w) {
  Vec z(6);
  z << so3_log(r), w.vector();
  return z;
}

std::pair<Rotation, AngularVelocity> RigidBody::from_chart(const Vec& z) {
  if (z.size() != 6) {
    throw Error(ErrorCode::DimensionMismatch, "rigid-body chart point must have length 6");
  }
  return {so3_exp(z.head<3>()), AngularVelocity(z.tail<3>())};
}

namespace {

// -1/2 [ (d_j Jinv) J ]^i_k symmetrized over (j, k).
Christoffel exponential_chart_christoffel(const Vec& xi) {
  const Vec3 w = xi.head<3>();
  const Mat3 jr = so3_right_jacobian(w);
  constexpr double h = 1e-5;
  std::array<Mat3, 3> djinv_j;
  for (int j = 0; j < 3; ++j) {
    const Vec3 e = Vec3::Unit(j);
    djinv_j[static_cast<std::size_t>(j)] =
        (so3_right_jacobian_inverse(w + h * e) - so3_right_jacobian_inverse(w - h * e)) / (2.0 * h) * jr;
  }
  Christoffel gamma(3, Mat::Zero(3, 3));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) {
        gamma[static_cast<std::size_t>(i)](j, k) =
            -0.5 * (djinv_j[static_cast<std::size_t>(j)](i, k) + djinv_j[static_cast<std::size_t>(k)](i, j));
      }
    }
  }
  return gamma;
}

}  // namespace

MechanicalBundle RigidBody::exponential_chart_bundle() {
  MechanicalSystem sys(
      3, 3, exponential_chart_christoffel, [](const Vec&) { return Vec(Vec::Zero(3)); },
      [](const Vec& xi) { return Mat(so3_right_jacobian_inverse(xi.head<3>())); });
  MFTransform t{Diffeomorphism::identity(3), [](const Vec&) { return Vec(Vec::Zero(3)); },
                [](const Vec& xi) { return Mat(so3_right_jacobian(xi.head<3>())); },
                [](const Vec& xi) {
                  const Christoffel g = exponential_chart_christoffel(xi);
                  const Mat3 jr = so3_right_jacobian(xi.head<3>());
                  std::vector<Mat> forms(3, Mat::Zero(3, 3));
                  for (int r = 0; r < 3; ++r) {
                    for (int i = 0; i < 3; ++i) {
                      forms[static_cast<std::size_t>(r)] += jr(r, i) * g[static_cast<std::size_t>(i)];
                    }
                  }
                  return forms;
                }};
  return {std::move(sys), std::move(t), LinearMechanicalSystem(Mat::Zero(3, 3), Mat::Identity(3, 3))};
}

MechanicalSystem RigidBody::vectorized_system() {
  using Vec9 = Eigen::Matrix<double, 9, 1>;
  auto gamma = [](const Vec& x) {
    const Mat3 xt = devectorize(Vec9(x)).transpose();
    Christoffel g(9, Mat::Zero(9, 9));
    for (int j = 0; j < 9; ++j) {
      const Mat3 ej = devectorize(Vec9::Unit(j));
      for (int k = 0; k < 9; ++k) {
        const Mat3 ek = devectorize(Vec9::Unit(k));
        const Vec9 q = -0.5 * vectorize(ej * xt * ek + ek * xt * ej);
        for (int i = 0; i < 9; ++i) {
          g[static_cast<std::size_t>(i)](j, k) = q(i);
        }
      }
    }
    return g;
  };
  auto controls = [](const Vec& x) {
    const Mat3 r = devectorize(Vec9(x));
    Mat g(9, 3);
    for (int c = 0; c < 3; ++c) {
      g.col(c) = vectorize(r * hat(Vec3::Unit(c)));
    }
    return g;
  };
  return MechanicalSystem(9, 3, gamma, [](const Vec&) { return Vec(Vec::Zero(9)); }, controls);
}

LinearMechanicalSystem RigidBody::linear_model() {
  return LinearMechanicalSystem(Mat::Zero(3, 3), Mat::Identity(3, 3));
}

// ---------------------------------------------------------------------------

MFReport verify_mf_equivalence(const MechanicalSystem& sys, const MFTransform& t,
                               const LinearMechanicalSystem& lms,
                               const std::vector<MFSample>& samples) {
  if (t.phi.dim() != sys.n() || lms.n() != sys.n() || lms.m() != sys.m()) {
    throw Error(ErrorCode::DimensionMismatch, "system, transform and LMS dimensions disagree");
  }
  MFReport report;
  for (const MFSample& s : samples) {
    const Vec u = apply_feedback(t, s.x, s.y, s.utilde);
    const CoordState f = sode_field(sys, CoordState(s.x, s.y), u);

    // d/dt (phi(x), D phi(x) y) = (D phi y, D^2 phi [y, y] + D phi ydot).
    const Mat dphi = t.phi.derivative(s.x);
    const Vec pushed_x = dphi * f.x();
    const Vec pushed_y = t.phi.second_derivative(s.x, s.y, s.y) + dphi * f.y();

    const Vec xt = t.phi.apply(s.x);
    const Vec yt = dphi * s.y;
    const Vec lin_y = lms.a * xt + lms.b * s.utilde;

    const double scale = std::max({1.0, yt.cwiseAbs().maxCoeff(), lin_y.cwiseAbs().maxCoeff()});
    const double defect = std::max((pushed_x - yt).cwiseAbs().maxCoeff(),
                                   (pushed_y - lin_y).cwiseAbs().maxCoeff()) / scale;
    if (defect >= report.worst_defect || report.witness.size() == 0) {
      report.worst_defect = defect;
      report.witness = s.x;
    }
  }
  report.passed = report.worst_defect < report.tolerance;
  return report;
}

}  // namespace fldisc
