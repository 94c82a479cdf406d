#include "fldisc/discretization.hpp"

#include <utility>

#include "fldisc/newton.hpp"

namespace fldisc {

std::string to_string(MapKind kind) {
  switch (kind) {
    case MapKind::ExplicitEuler: return "explicit-euler";
    case MapKind::ImplicitEuler: return "implicit-euler";
    case MapKind::Midpoint: return "midpoint";
    case MapKind::Lifted: return "lifted";
    case MapKind::TangentLift: return "tangent-lift";
    case MapKind::Custom: return "custom";
  }
  return "unknown";
}

MapKind builtin_map_kind(const std::string& name) {
  if (name == "explicit-euler") return MapKind::ExplicitEuler;
  if (name == "implicit-euler") return MapKind::ImplicitEuler;
  if (name == "midpoint") return MapKind::Midpoint;
  throw Error(ErrorCode::InvalidArgument, "unknown map kind '" + name + "'");
}

namespace {

Vec stack(const Vec& a, const Vec& b) {
  Vec s(a.size() + b.size());
  s << a, b;
  return s;
}

void check_dim(const Vec& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + " has length " + std::to_string(v.size()) + ", expected " +
                    std::to_string(n));
  }
}

}  // namespace

DiscretizationMap::DiscretizationMap(Eigen::Index dim, MapKind kind, Forward forward,
                                     Inverse inverse, Jacobian jacobian, bool affine)
    : dim_(dim),
      kind_(kind),
      forward_(std::move(forward)),
      inverse_(std::move(inverse)),
      jacobian_(std::move(jacobian)),
      affine_(affine) {
  if (dim_ < 1) {
    throw Error(ErrorCode::InvalidArgument, "discretization map dimension must be >= 1");
  }
}

PointPair DiscretizationMap::forward(const Vec& x, const Vec& v) const {
  check_dim(x, dim_, "base point");
  check_dim(v, dim_, "tangent vector");
  return forward_(x, v);
}

Mat DiscretizationMap::jacobian(const Vec& x, const Vec& v) const {
  check_dim(x, dim_, "base point");
  check_dim(v, dim_, "tangent vector");
  if (jacobian_) {
    return jacobian_(x, v);
  }
  const auto n = dim_;
  return numeric_jacobian(
      [&](const Vec& z) {
        const PointPair p = forward_(z.head(n), z.tail(n));
        return stack(p.first, p.second);
      },
      stack(x, v));
}

TangentPoint DiscretizationMap::inverse(const Vec& a, const Vec& b) const {
  check_dim(a, dim_, "first point");
  check_dim(b, dim_, "second point");
  if (inverse_) {
    return inverse_(a, b);
  }
  const auto n = dim_;
  const Vec target = stack(a, b);
  const auto residual = [&](const Vec& z) {
    const PointPair p = forward_(z.head(n), z.tail(n));
    return Vec(stack(p.first, p.second) - target);
  };
  const NewtonResult sol = newton_solve(residual, stack(a, b - a), {}, [&](const Vec& z) {
    return jacobian(z.head(n), z.tail(n));
  });
  if (!sol.converged) {
    throw Error(ErrorCode::NoConvergence,
                "inverse of discretization map did not converge after " +
                    std::to_string(sol.iterations) + " iterations, residual " +
                    std::to_string(sol.residual));
  }
  return {sol.solution.head(n), sol.solution.tail(n)};
}

// ---------------------------------------------------------------------------

Diffeomorphism::Diffeomorphism(Eigen::Index dim, Map map, Map inverse, Derivative derivative,
                               SecondDerivative second_derivative)
    : dim_(dim),
      map_(std::move(map)),
      inverse_(std::move(inverse)),
      derivative_(std::move(derivative)),
      second_derivative_(std::move(second_derivative)) {}

Diffeomorphism Diffeomorphism::identity(Eigen::Index dim) {
  return Diffeomorphism(
      dim, [](const Vec& x) { return x; }, [](const Vec& x) { return x; },
      [dim](const Vec&) { return Mat(Mat::Identity(dim, dim)); },
      [dim](const Vec&, const Vec&, const Vec&) { return Vec(Vec::Zero(dim)); });
}

Diffeomorphism Diffeomorphism::linear(const Mat& a) {
  const auto dim = a.rows();
  const Eigen::FullPivLU<Mat> lu(a);
  if (a.cols() != dim || !lu.isInvertible()) {
    throw Error(ErrorCode::InvalidArgument, "linear diffeomorphism needs an invertible square matrix");
  }
  return Diffeomorphism(
      dim, [a](const Vec& x) { return Vec(a * x); }, [lu](const Vec& x) { return Vec(lu.solve(x)); },
      [a](const Vec&) { return a; },
      [dim](const Vec&, const Vec&, const Vec&) { return Vec(Vec::Zero(dim)); });
}

namespace {

template <typename F>
Vec guarded(F&& f, const char* what) {
  Vec out;
  try {
    out = f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::OutsideChart) throw;
    throw Error(ErrorCode::OutsideChart, std::string(what) + " failed: " + e.what());
  }
  if (!out.allFinite()) {
    throw Error(ErrorCode::OutsideChart, std::string(what) + " returned a non-finite value");
  }
  return out;
}

}  // namespace

Vec Diffeomorphism::apply(const Vec& x) const {
  check_dim(x, dim_, "diffeomorphism argument");
  return guarded([&] { return map_(x); }, "phi");
}

Vec Diffeomorphism::apply_inverse(const Vec& xt) const {
  check_dim(xt, dim_, "diffeomorphism argument");
  return guarded([&] { return inverse_(xt); }, "phi inverse");
}

Mat Diffeomorphism::derivative(const Vec& x) const {
  check_dim(x, dim_, "diffeomorphism argument");
  if (derivative_) {
    return derivative_(x);
  }
  return numeric_jacobian([this](const Vec& z) { return apply(z); }, x);
}

Vec Diffeomorphism::second_derivative(const Vec& x, const Vec& u, const Vec& v) const {
  if (second_derivative_) {
    return second_derivative_(x, u, v);
  }
  const double norm_u = u.norm();
  if (norm_u == 0.0) {
    return Vec::Zero(dim_);
  }
  const Vec du = u / norm_u;
  const double eps = kHessianStep;
  if (derivative_) {
    // Central difference of the analytic D phi along u/|u|.
    const Mat dp = derivative(x + eps * du);
    const Mat dm = derivative(x - eps * du);
    return norm_u * (dp - dm) * v / (2.0 * eps);
  }
  // Four-point mixed difference of phi itself; nesting two first differences
  // would amplify round-off by 1/(step_1 step_2).
  const double norm_v = v.norm();
  if (norm_v == 0.0) {
    return Vec::Zero(dim_);
  }
  const Vec dv = v / norm_v;
  const Vec mixed = apply(x + eps * (du + dv)) - apply(x + eps * (du - dv)) -
                    apply(x - eps * (du - dv)) + apply(x - eps * (du + dv));
  return norm_u * norm_v * mixed / (4.0 * eps * eps);
}

// ---------------------------------------------------------------------------

DiscretizationMap make_explicit_euler(Eigen::Index n) {
  Mat jac(2 * n, 2 * n);
  const Mat id = Mat::Identity(n, n);
  jac << id, Mat::Zero(n, n), id, id;
  return DiscretizationMap(
      n, MapKind::ExplicitEuler, [](const Vec& x, const Vec& v) { return PointPair{x, x + v}; },
      [](const Vec& a, const Vec& b) { return TangentPoint{a, b - a}; },
      [jac](const Vec&, const Vec&) { return jac; }, true);
}

DiscretizationMap make_implicit_euler(Eigen::Index n) {
  Mat jac(2 * n, 2 * n);
  const Mat id = Mat::Identity(n, n);
  jac << id, -id, id, Mat::Zero(n, n);
  return DiscretizationMap(
      n, MapKind::ImplicitEuler, [](const Vec& x, const Vec& v) { return PointPair{x - v, x}; },
      [](const Vec& a, const Vec& b) { return TangentPoint{b, b - a}; },
      [jac](const Vec&, const Vec&) { return jac; }, true);
}

DiscretizationMap make_midpoint(Eigen::Index n) {
  Mat jac(2 * n, 2 * n);
  const Mat id = Mat::Identity(n, n);
  jac << id, -0.5 * id, id, 0.5 * id;
  return DiscretizationMap(
      n, MapKind::Midpoint,
      [](const Vec& x, const Vec& v) { return PointPair{x - 0.5 * v, x + 0.5 * v}; },
      [](const Vec& a, const Vec& b) { return TangentPoint{0.5 * (a + b), b - a}; },
      [jac](const Vec&, const Vec&) { return jac; }, true);
}

DiscretizationMap make_builtin(MapKind kind, Eigen::Index n) {
  switch (kind) {
    case MapKind::ExplicitEuler: return make_explicit_euler(n);
    case MapKind::ImplicitEuler: return make_implicit_euler(n);
    case MapKind::Midpoint: return make_midpoint(n);
    default: break;
  }
  throw Error(ErrorCode::InvalidArgument, to_string(kind) + " is not a built-in map");
}

AxiomReport verify_axioms(const DiscretizationMap& map, const std::vector<Vec>& samples) {
  AxiomReport report;
  const auto n = map.dim();
  const Vec zero = Vec::Zero(n);
  const Mat id = Mat::Identity(n, n);
  for (const Vec& x : samples) {
    AxiomSample s{x, 0.0, 0.0};
    const PointPair p = map.forward(x, zero);
    s.zero_section_defect = std::max((p.first - x).cwiseAbs().maxCoeff(),
                                     (p.second - x).cwiseAbs().maxCoeff());
    const Mat dv = numeric_jacobian(
        [&](const Vec& v) {
          const PointPair q = map.forward(x, v);
          return Vec(q.second - q.first);
        },
        zero);
    s.identity_defect = (dv - id).cwiseAbs().maxCoeff();
    report.worst_zero_section = std::max(report.worst_zero_section, s.zero_section_defect);
    report.worst_identity = std::max(report.worst_identity, s.identity_defect);
    report.samples.push_back(std::move(s));
  }
  report.passed = report.worst_zero_section < report.zero_section_tolerance &&
                  report.worst_identity < report.identity_tolerance;
  return report;
}

DiscretizationMap lift_by_diffeo(const DiscretizationMap& map, const Diffeomorphism& phi) {
  if (map.dim() != phi.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "map and diffeomorphism dimensions differ");
  }
  const auto n = map.dim();

  auto forward = [map, phi](const Vec& x, const Vec& v) {
    const PointPair p = map.forward(phi.apply(x), phi.derivative(x) * v);
    return PointPair{phi.apply_inverse(p.first), phi.apply_inverse(p.second)};
  };

  auto inverse = [map, phi](const Vec& a, const Vec& b) {
    const TangentPoint t = map.inverse(phi.apply(a), phi.apply(b));
    const Vec x = phi.apply_inverse(t.x);
    const Eigen::FullPivLU<Mat> lu(phi.derivative(x));
    if (!lu.isInvertible()) {
      throw Error(ErrorCode::OutsideChart, "D phi is singular at the lifted base point");
    }
    return TangentPoint{x, lu.solve(t.v)};
  };

  // Chain rule through p = phi(x), q = D phi(x) v, then phi^{-1} on both outputs.
  auto jacobian = [map, phi, n](const Vec& x, const Vec& v) {
    const Mat dphi = phi.derivative(x);
    const Vec p = phi.apply(x);
    const Vec q = dphi * v;
    Mat inner(2 * n, 2 * n);
    inner.topLeftCorner(n, n) = dphi;
    inner.topRightCorner(n, n).setZero();
    for (Eigen::Index j = 0; j < n; ++j) {
      inner.block(n, j, n, 1) = phi.second_derivative(x, Vec::Unit(n, j), v);
    }
    inner.bottomRightCorner(n, n) = dphi;

    const PointPair out = map.forward(p, q);
    Mat outer = Mat::Zero(2 * n, 2 * n);
    outer.topLeftCorner(n, n) = phi.derivative(phi.apply_inverse(out.first)).inverse();
    outer.bottomRightCorner(n, n) = phi.derivative(phi.apply_inverse(out.second)).inverse();
    return Mat(outer * map.jacobian(p, q) * inner);
  };

  return DiscretizationMap(n, MapKind::Lifted, forward, inverse, jacobian, false);
}

DiscretizationMap tangent_lift(const DiscretizationMap& map) {
  const auto n = map.dim();

  // Point (x, xdot), vector (y, ydot); kappa moves (x, y) into the base slot of T R_d.
  auto forward = [map, n](const Vec& point, const Vec& vec) {
    const DoubleTangent w = kappa(DoubleTangent(point.head(n), point.tail(n), vec.head(n), vec.tail(n)));
    const PointPair base = map.forward(w.x, w.y);
    const Vec fiber = map.jacobian(w.x, w.y) * stack(w.xdot, w.ydot);
    return PointPair{stack(base.first, fiber.head(n)), stack(base.second, fiber.tail(n))};
  };

  auto inverse = [map, n](const Vec& a, const Vec& b) {
    const TangentPoint base = map.inverse(a.head(n), b.head(n));
    const Eigen::FullPivLU<Mat> lu(map.jacobian(base.x, base.v));
    if (!lu.isInvertible()) {
      throw Error(ErrorCode::OutsideChart, "discretization map is not a local diffeomorphism here");
    }
    const Vec dots = lu.solve(stack(a.tail(n), b.tail(n)));
    return TangentPoint{stack(base.x, dots.head(n)), stack(base.v, dots.tail(n))};
  };

  DiscretizationMap::Jacobian jacobian;
  if (map.affine()) {
    // Outputs (a, va, b, vb) with a, b depending on (x, y) and va, vb on (xdot, ydot)
    // through the same constant blocks.
    const Vec zero = Vec::Zero(n);
    const Mat jr = map.jacobian(zero, zero);
    Mat jac = Mat::Zero(4 * n, 4 * n);
    // Input ordering: x, xdot, y, ydot. Output ordering: a, va, b, vb.
    for (int out = 0; out < 2; ++out) {
      const Mat dx = jr.block(out * n, 0, n, n);
      const Mat dy = jr.block(out * n, n, n, n);
      const Eigen::Index row = out * 2 * n;
      jac.block(row, 0, n, n) = dx;
      jac.block(row, 2 * n, n, n) = dy;
      jac.block(row + n, n, n, n) = dx;
      jac.block(row + n, 3 * n, n, n) = dy;
    }
    jacobian = [jac](const Vec&, const Vec&) { return jac; };
  }

  return DiscretizationMap(2 * n, MapKind::TangentLift, forward, inverse, jacobian, map.affine());
}

PointPair tangent_lift_apply(const DiscretizationMap& lifted, const DoubleTangent& w) {
  return lifted.forward(stack(w.x, w.y), stack(w.xdot, w.ydot));
}

Diffeomorphism tangent_map(const Diffeomorphism& phi) {
  const auto n = phi.dim();
  auto map = [phi, n](const Vec& s) {
    return stack(phi.apply(s.head(n)), phi.derivative(s.head(n)) * s.tail(n));
  };
  auto inverse = [phi, n](const Vec& s) {
    const Vec x = phi.apply_inverse(s.head(n));
    const Eigen::FullPivLU<Mat> lu(phi.derivative(x));
    if (!lu.isInvertible()) {
      throw Error(ErrorCode::OutsideChart, "D phi is singular");
    }
    return stack(x, lu.solve(s.tail(n)));
  };
  auto derivative = [phi, n](const Vec& s) {
    const Vec x = s.head(n);
    const Vec v = s.tail(n);
    const Mat dphi = phi.derivative(x);
    Mat d = Mat::Zero(2 * n, 2 * n);
    d.topLeftCorner(n, n) = dphi;
    for (Eigen::Index j = 0; j < n; ++j) {
      d.block(n, j, n, 1) = phi.second_derivative(x, Vec::Unit(n, j), v);
    }
    d.bottomRightCorner(n, n) = dphi;
    return d;
  };
  return Diffeomorphism(2 * n, map, inverse, derivative);
}

}  // namespace fldisc
