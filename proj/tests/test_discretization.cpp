#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fldisc/discretization.hpp"
#include "fldisc/mechanics.hpp"

using namespace fldisc;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

std::vector<Vec> random_points(int count, Eigen::Index dim, double scale, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<Vec> out;
  for (int i = 0; i < count; ++i) out.push_back(Vec::NullaryExpr(dim, [&] { return u(rng); }));
  return out;
}

// Smooth nonlinear diffeomorphism of R^2 with explicit inverse.
Diffeomorphism shear_cubic() {
  return Diffeomorphism(
      2, [](const Vec& x) { return Vec(vec({x(0), x(1) + x(0) * x(0) * x(0)})); },
      [](const Vec& y) { return Vec(vec({y(0), y(1) - y(0) * y(0) * y(0)})); },
      [](const Vec& x) {
        Mat d(2, 2);
        d << 1, 0, 3 * x(0) * x(0), 1;
        return d;
      },
      [](const Vec& x, const Vec& u, const Vec& v) { return Vec(vec({0.0, 6 * x(0) * u(0) * v(0)})); });
}

// Same map with every derivative left to finite differences.
Diffeomorphism shear_cubic_numeric() {
  return Diffeomorphism(
      2, [](const Vec& x) { return Vec(vec({x(0), x(1) + x(0) * x(0) * x(0)})); },
      [](const Vec& y) { return Vec(vec({y(0), y(1) - y(0) * y(0) * y(0)})); });
}

const std::vector<MapKind> kBuiltins{MapKind::ExplicitEuler, MapKind::ImplicitEuler, MapKind::Midpoint};

}  // namespace

TEST(BuiltinMaps, ExplicitEuler) {
  const auto m = make_explicit_euler(2);
  const auto p = m.forward(vec({1, 1}), vec({2, 3}));
  EXPECT_EQ(p.first, vec({1, 1}));
  EXPECT_EQ(p.second, vec({3, 4}));
  const auto t = m.inverse(vec({1, 1}), vec({3, 4}));
  EXPECT_EQ(t.x, vec({1, 1}));
  EXPECT_EQ(t.v, vec({2, 3}));
}

TEST(BuiltinMaps, ImplicitEuler) {
  const auto p = make_implicit_euler(1).forward(vec({0}), vec({1}));
  EXPECT_EQ(p.first, vec({-1}));
  EXPECT_EQ(p.second, vec({0}));
}

TEST(BuiltinMaps, Midpoint) {
  const auto m = make_midpoint(1);
  const auto p = m.forward(vec({0}), vec({2}));
  EXPECT_EQ(p.first, vec({-1}));
  EXPECT_EQ(p.second, vec({1}));
  const auto t = m.inverse(vec({0}), vec({1}));
  EXPECT_EQ(t.x, vec({0.5}));
  EXPECT_EQ(t.v, vec({1}));
}

TEST(BuiltinMaps, ParseNames) {
  EXPECT_EQ(builtin_map_kind("midpoint"), MapKind::Midpoint);
  EXPECT_EQ(builtin_map_kind("explicit-euler"), MapKind::ExplicitEuler);
  EXPECT_EQ(builtin_map_kind("implicit-euler"), MapKind::ImplicitEuler);
  EXPECT_THROW(builtin_map_kind("rk4"), Error);
}

TEST(BuiltinMaps, ZeroSectionAndRoundTrip) {
  for (auto kind : kBuiltins) {
    const auto m = make_builtin(kind, 3);
    for (const Vec& x : random_points(20, 3, 5.0, 1)) {
      const auto p = m.forward(x, Vec::Zero(3));
      EXPECT_EQ(p.first, x);
      EXPECT_EQ(p.second, x);
      const Vec v = x.reverse();
      const auto q = m.forward(x, v);
      const auto back = m.inverse(q.first, q.second);
      EXPECT_LT((back.x - x).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LT((back.v - v).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(VerifyAxioms, BuiltinsPass) {
  for (auto kind : kBuiltins) {
    const auto report = verify_axioms(make_builtin(kind, 2), random_points(10, 2, 3.0, 2));
    EXPECT_TRUE(report.passed) << to_string(kind);
    EXPECT_EQ(report.samples.size(), 10u);
  }
}

TEST(VerifyAxioms, DoubledVelocityFailsSecondAxiom) {
  const DiscretizationMap bad(2, MapKind::Custom, [](const Vec& x, const Vec& v) {
    return PointPair{x, Vec(x + 2.0 * v)};
  });
  const auto report = verify_axioms(bad, random_points(5, 2, 1.0, 3));
  EXPECT_FALSE(report.passed);
  EXPECT_NEAR(report.worst_identity, 1.0, 1e-6);
  EXPECT_LT(report.worst_zero_section, 1e-12);
}

TEST(CustomMap, NewtonInverse) {
  // Nonlinear but valid map: (x - v/2 - v^3, x + v/2).
  const DiscretizationMap m(1, MapKind::Custom, [](const Vec& x, const Vec& v) {
    return PointPair{Vec(x - 0.5 * v - v.array().cube().matrix()), Vec(x + 0.5 * v)};
  });
  const auto p = m.forward(vec({0.3}), vec({0.2}));
  const auto t = m.inverse(p.first, p.second);
  EXPECT_NEAR(t.x(0), 0.3, 1e-10);
  EXPECT_NEAR(t.v(0), 0.2, 1e-10);
  EXPECT_TRUE(verify_axioms(m, random_points(5, 1, 1.0, 4)).passed);
}

TEST(LiftByDiffeo, IdentityIsNoOp) {
  const auto base = make_midpoint(2);
  const auto lifted = lift_by_diffeo(base, Diffeomorphism::identity(2));
  for (const Vec& x : random_points(10, 2, 2.0, 5)) {
    const Vec v = 0.5 * x.reverse();
    const auto a = base.forward(x, v), b = lifted.forward(x, v);
    EXPECT_LT((a.first - b.first).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((a.second - b.second).cwiseAbs().maxCoeff(), 1e-14);
    const auto ia = base.inverse(a.first, a.second), ib = lifted.inverse(a.first, a.second);
    EXPECT_LT((ia.x - ib.x).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((ia.v - ib.v).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(LiftByDiffeo, CommutesWithDiffeo) {
  const Diffeomorphism phi = shear_cubic();
  for (auto kind : kBuiltins) {
    const auto base = make_builtin(kind, 2);
    const auto lifted = lift_by_diffeo(base, phi);
    const auto pts = random_points(100, 2, 1.5, 6);
    const auto vels = random_points(100, 2, 0.5, 7);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto l = lifted.forward(pts[i], vels[i]);
      // Independent evaluation of R(phi(x), D phi(x) v) with an analytic D phi.
      Mat dphi(2, 2);
      dphi << 1, 0, 3 * pts[i](0) * pts[i](0), 1;
      const auto r = base.forward(phi.apply(pts[i]), dphi * vels[i]);
      EXPECT_LT((phi.apply(l.first) - r.first).cwiseAbs().maxCoeff(), 1e-9);
      EXPECT_LT((phi.apply(l.second) - r.second).cwiseAbs().maxCoeff(), 1e-9);
    }
    EXPECT_TRUE(verify_axioms(lifted, random_points(10, 2, 1.0, 8)).passed);
  }
}

TEST(TangentLift, MidpointFormula) {
  const auto lifted = tangent_lift(make_midpoint(1));
  // w = (x, y, xdot, ydot); after the involution the base map acts on (x, xdot)
  // and its tangent on (y, ydot).
  const DoubleTangent w(vec({1.0}), vec({0.4}), vec({-2.0}), vec({0.6}));
  const auto out = tangent_lift_apply(lifted, w);
  EXPECT_LT((out.first - vec({1.0 + 1.0, 0.4 - 0.3})).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((out.second - vec({1.0 - 1.0, 0.4 + 0.3})).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(TangentLift, ZeroVectorGivesDiagonal) {
  for (auto kind : kBuiltins) {
    const auto lifted = tangent_lift(make_builtin(kind, 2));
    const Vec s = vec({0.3, -1.0, 2.0, 0.7});
    const auto out = lifted.forward(s, Vec::Zero(4));
    EXPECT_EQ(out.first, s);
    EXPECT_EQ(out.second, s);
  }
}

TEST(TangentLift, AxiomsForBuiltins) {
  for (auto kind : kBuiltins) {
    EXPECT_TRUE(verify_axioms(tangent_lift(make_builtin(kind, 2)), random_points(10, 4, 2.0, 9)).passed);
  }
}

TEST(TangentLift, NonlinearMapInverseRoundTrip) {
  const DiscretizationMap m(1, MapKind::Custom, [](const Vec& x, const Vec& v) {
    return PointPair{Vec(x - 0.5 * v - v.array().cube().matrix()), Vec(x + 0.5 * v)};
  });
  const auto lifted = tangent_lift(m);
  const Vec p = vec({0.3, 1.2}), q = vec({0.2, -0.7});
  const auto out = lifted.forward(p, q);
  const auto back = lifted.inverse(out.first, out.second);
  EXPECT_LT((back.x - p).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((back.v - q).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(TangentMap, IdentityAndLinear) {
  const auto tid = tangent_map(Diffeomorphism::identity(2));
  const Vec s = vec({1.0, 2.0, 3.0, 4.0});
  EXPECT_EQ(tid.apply(s), s);
  Mat a(2, 2);
  a << 2, 1, 0, 3;
  const auto tl = tangent_map(Diffeomorphism::linear(a));
  Vec expected(4);
  expected << a * s.head(2), a * s.tail(2);
  EXPECT_LT((tl.apply(s) - expected).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((tl.apply_inverse(expected) - s).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(TangentMap, PendulumVelocity) {
  const auto tphi = tangent_map(pendulum_diffeomorphism(PendulumParams{}));
  const Vec z = tphi.apply(vec({std::numbers::pi / 6.0, 0.0, 1.0, 0.0}));
  EXPECT_NEAR(z(2), 154.125, 1e-9);
  EXPECT_NEAR(z(3), 11975.0 * std::sqrt(3.0) / 2.0, 1e-8);
}

TEST(TangentMap, DerivativeMatchesFiniteDifference) {
  const auto tphi = tangent_map(shear_cubic());
  const Vec s = vec({0.4, -0.3, 1.1, 0.5});
  const Mat numeric = numeric_jacobian([&](const Vec& x) { return tphi.apply(x); }, s);
  EXPECT_LT((tphi.derivative(s) - numeric).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Commutation, TangentLiftOfPhiLiftEqualsTphiLiftOfTangentLift) {
  const Diffeomorphism phi = shear_cubic();
  for (auto kind : kBuiltins) {
    const auto base = make_builtin(kind, 2);
    const auto left = tangent_lift(lift_by_diffeo(base, phi));
    const auto right = lift_by_diffeo(tangent_lift(base), tangent_map(phi));
    const auto pts = random_points(100, 4, 1.0, 10);
    const auto vels = random_points(100, 4, 0.3, 11);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto a = left.forward(pts[i], vels[i]);
      const auto b = right.forward(pts[i], vels[i]);
      EXPECT_LT((a.first - b.first).cwiseAbs().maxCoeff(), 1e-8);
      EXPECT_LT((a.second - b.second).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(Diffeomorphism, NumericDerivativesMatchAnalytic) {
  const auto exact = shear_cubic();
  const auto numeric = shear_cubic_numeric();
  const Vec x = vec({0.7, -0.2}), u = vec({0.3, 1.1}), v = vec({-0.8, 0.4});
  EXPECT_LT((numeric.derivative(x) - exact.derivative(x)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((numeric.second_derivative(x, u, v) - exact.second_derivative(x, u, v)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Diffeomorphism, OutsideChart) {
  const auto phi = pendulum_diffeomorphism(PendulumParams{});
  try {
    phi.apply_inverse(vec({0.0, 2.0e4}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutsideChart);
  }
}
