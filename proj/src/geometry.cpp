#include "fldisc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace fldisc {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotSkew: return "NotSkew";
    case ErrorCode::NotRotation: return "NotRotation";
    case ErrorCode::AngleAtPi: return "AngleAtPi";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::OutsideChart: return "OutsideChart";
    case ErrorCode::SingularFeedback: return "SingularFeedback";
    case ErrorCode::WrongDimensions: return "WrongDimensions";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NotLinearityPreserving: return "NotLinearityPreserving";
    case ErrorCode::Uncontrollable: return "Uncontrollable";
    case ErrorCode::MultiInputUnsupported: return "MultiInputUnsupported";
    case ErrorCode::SingularStep: return "SingularStep";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::UnknownSystem: return "UnknownSystem";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

bool all_finite(const Vec& v) { return v.allFinite(); }

CoordState::CoordState(Vec x, Vec y) : x_(std::move(x)), y_(std::move(y)) {
  if (x_.size() != y_.size() || x_.size() < 1) {
    throw Error(ErrorCode::DimensionMismatch, "CoordState needs x and y of equal length >= 1");
  }
  if (!x_.allFinite() || !y_.allFinite()) {
    throw Error(ErrorCode::NonFinite, "CoordState entries must be finite");
  }
}

CoordState CoordState::from_stacked(const Vec& s) {
  if (s.size() % 2 != 0) {
    throw Error(ErrorCode::DimensionMismatch, "stacked state must have even length");
  }
  const auto n = s.size() / 2;
  return {s.head(n), s.tail(n)};
}

Vec CoordState::stacked() const {
  Vec s(2 * x_.size());
  s << x_, y_;
  return s;
}

DoubleTangent::DoubleTangent(Vec x_, Vec y_, Vec xdot_, Vec ydot_)
    : x(std::move(x_)), y(std::move(y_)), xdot(std::move(xdot_)), ydot(std::move(ydot_)) {
  const auto n = x.size();
  if (y.size() != n || xdot.size() != n || ydot.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "DoubleTangent components differ in length");
  }
  if (!x.allFinite() || !y.allFinite() || !xdot.allFinite() || !ydot.allFinite()) {
    throw Error(ErrorCode::NonFinite, "DoubleTangent entries must be finite");
  }
}

DoubleTangent kappa(const DoubleTangent& w) { return {w.x, w.xdot, w.y, w.ydot}; }

namespace {

double orthogonality_defect_of(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

}  // namespace

Rotation::Rotation(const Mat3& r) : r_(r) {
  if (!r.allFinite()) {
    throw Error(ErrorCode::NonFinite, "rotation entries must be finite");
  }
  const double defect = std::max(orthogonality_defect_of(r), std::abs(r.determinant() - 1.0));
  if (defect > 1e-9) {
    throw Error(ErrorCode::NotRotation,
                "orthogonality/determinant defect " + std::to_string(defect) + " exceeds 1e-9");
  }
  if (defect > 1e-12) {
    Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    r_ = svd.matrixU() * svd.matrixV().transpose();
  }
}

double Rotation::orthogonality_defect() const { return orthogonality_defect_of(r_); }

AngularVelocity::AngularVelocity(const Vec3& w) : w_(w) {
  if (!w.allFinite()) {
    throw Error(ErrorCode::NonFinite, "angular velocity entries must be finite");
  }
}

Mat3 hat(const Vec3& w) {
  Mat3 s;
  s << 0.0, -w(2), w(1),
       w(2), 0.0, -w(0),
       -w(1), w(0), 0.0;
  return s;
}

Vec3 vee(const Mat3& s) {
  if ((s + s.transpose()).norm() >= 1e-9) {
    throw Error(ErrorCode::NotSkew, "matrix is not skew-symmetric");
  }
  return {s(2, 1), s(0, 2), s(1, 0)};
}

Rotation so3_exp(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a;  // sin(theta)/theta
  double b;  // (1 - cos(theta))/theta^2
  if (theta < 1e-4) {
    a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Mat3 k = hat(w);
  return Rotation(Mat3::Identity() + a * k + b * k * k);
}

Vec3 so3_log(const Rotation& rot) {
  const Mat3& r = rot.matrix();
  const double tr = r.trace();
  if (tr <= -1.0 + 1e-9) {
    throw Error(ErrorCode::AngleAtPi, "rotation angle is at pi; logarithm branch is ambiguous");
  }
  const Vec3 skew{r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)};  // 2 sin(theta) axis
  const double c = std::clamp((tr - 1.0) / 2.0, -1.0, 1.0);
  const double s = 0.5 * skew.norm();
  const double theta = std::atan2(s, c);

  if (theta < 1e-4) {
    return (0.5 + theta * theta / 12.0) * skew;
  }
  if (theta < std::numbers::pi - 1e-2) {
    return theta / (2.0 * std::sin(theta)) * skew;
  }

  // Close to pi the skew part vanishes; read the axis off the symmetric part
  // a a^T = (R + R^T)/2 - cos(theta) I, scaled by 1/(1 - cos(theta)).
  const Mat3 aat = (0.5 * (r + r.transpose()) - c * Mat3::Identity()) / (1.0 - c);
  Eigen::Index k;
  aat.diagonal().maxCoeff(&k);
  Vec3 axis = aat.col(k) / std::sqrt(aat(k, k));
  if (axis.dot(skew) < 0.0) {
    axis = -axis;
  }
  return theta * axis.normalized();
}

Eigen::Matrix<double, 9, 1> vectorize(const Mat3& m) {
  Eigen::Matrix<double, 9, 1> v;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      v(3 * i + j) = m(i, j);
    }
  }
  return v;
}

Mat3 devectorize(const Eigen::Matrix<double, 9, 1>& v) {
  Mat3 m;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      m(i, j) = v(3 * i + j);
    }
  }
  return m;
}

Mat3 so3_right_jacobian(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  double b;  // (1 - cos)/theta^2
  double c;  // (theta - sin)/theta^3
  if (theta < 1e-4) {
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  const Mat3 k = hat(w);
  return Mat3::Identity() - b * k + c * k * k;
}

Mat3 so3_right_jacobian_inverse(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  double d;  // 1/theta^2 - (1 + cos)/(2 theta sin)
  if (theta < 1e-4) {
    d = 1.0 / 12.0 + theta2 / 720.0;
  } else {
    d = 1.0 / theta2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  }
  const Mat3 k = hat(w);
  return Mat3::Identity() + 0.5 * k + d * k * k;
}

Mat numeric_jacobian(const VectorFunction& f, const Vec& x0, double step) {
  if (!(step > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "finite-difference step must be positive");
  }
  Mat jac;
  Vec x = x0;
  for (Eigen::Index j = 0; j < x0.size(); ++j) {
    // Difference of the representable abscissae, not 2 * step, so that affine
    // functions are differentiated without round-off from the step itself.
    const double xp = x0(j) + step;
    const double xm = x0(j) - step;
    x(j) = xp;
    const Vec fp = f(x);
    x(j) = xm;
    const Vec fm = f(x);
    x(j) = x0(j);
    if (!fp.allFinite() || !fm.allFinite()) {
      throw Error(ErrorCode::NonFinite, "function returned non-finite value during differencing");
    }
    if (j == 0) {
      jac.resize(fp.size(), x0.size());
    }
    jac.col(j) = (fp - fm) / (xp - xm);
  }
  return jac;
}

}  // namespace fldisc
