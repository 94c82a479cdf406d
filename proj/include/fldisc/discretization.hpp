#pragma once

// Discretization maps R_d : TM -> M x M on a chart, their axiom checks, and the
// two lifting constructions: through a diffeomorphism and to the tangent bundle.

#include <functional>
#include <string>
#include <vector>

#include "fldisc/geometry.hpp"

namespace fldisc {

enum class MapKind { ExplicitEuler, ImplicitEuler, Midpoint, Lifted, TangentLift, Custom };

std::string to_string(MapKind kind);

/// Parses "explicit-euler", "implicit-euler" or "midpoint".
MapKind builtin_map_kind(const std::string& name);

/// A pair of points (x0, x1) in M x M.
struct PointPair {
  Vec first;
  Vec second;
};

/// A tangent vector v based at x.
struct TangentPoint {
  Vec x;
  Vec v;
};

class DiscretizationMap {
 public:
  using Forward = std::function<PointPair(const Vec& x, const Vec& v)>;
  using Inverse = std::function<TangentPoint(const Vec& a, const Vec& b)>;
  // Jacobian of (x0, x1) with respect to (x, v); 2n x 2n.
  using Jacobian = std::function<Mat(const Vec& x, const Vec& v)>;

  /// Missing inverses are solved by damped Newton on `forward`; missing
  /// Jacobians fall back to central differences.
  DiscretizationMap(Eigen::Index dim, MapKind kind, Forward forward, Inverse inverse = {},
                    Jacobian jacobian = {}, bool affine = false);

  Eigen::Index dim() const { return dim_; }
  MapKind kind() const { return kind_; }
  /// True when forward is affine in (x, v), so its Jacobian is constant.
  bool affine() const { return affine_; }

  PointPair forward(const Vec& x, const Vec& v) const;
  TangentPoint inverse(const Vec& a, const Vec& b) const;
  Mat jacobian(const Vec& x, const Vec& v) const;

 private:
  Eigen::Index dim_;
  MapKind kind_;
  Forward forward_;
  Inverse inverse_;
  Jacobian jacobian_;
  bool affine_;
};

/// Diffeomorphism between n-dimensional charts, with first and second derivatives.
class Diffeomorphism {
 public:
  using Map = std::function<Vec(const Vec&)>;
  using Derivative = std::function<Mat(const Vec&)>;
  /// D^2 phi(x)[u, v], bilinear in (u, v).
  using SecondDerivative = std::function<Vec(const Vec& x, const Vec& u, const Vec& v)>;

  Diffeomorphism(Eigen::Index dim, Map map, Map inverse, Derivative derivative = {},
                 SecondDerivative second_derivative = {});

  static Diffeomorphism identity(Eigen::Index dim);
  static Diffeomorphism linear(const Mat& a);

  Eigen::Index dim() const { return dim_; }

  /// These throw OutsideChart when the underlying map fails or is non-finite.
  Vec apply(const Vec& x) const;
  Vec apply_inverse(const Vec& xt) const;
  Mat derivative(const Vec& x) const;
  Vec second_derivative(const Vec& x, const Vec& u, const Vec& v) const;

 private:
  Eigen::Index dim_;
  Map map_;
  Map inverse_;
  Derivative derivative_;
  SecondDerivative second_derivative_;
};

DiscretizationMap make_explicit_euler(Eigen::Index n);
DiscretizationMap make_implicit_euler(Eigen::Index n);
DiscretizationMap make_midpoint(Eigen::Index n);
DiscretizationMap make_builtin(MapKind kind, Eigen::Index n);

struct AxiomSample {
  Vec x;
  double zero_section_defect;  // max |R(x, 0) - (x, x)|
  double identity_defect;      // max |D_v(R^2 - R^1)(x, 0) - I|
};

struct AxiomReport {
  std::vector<AxiomSample> samples;
  double worst_zero_section = 0.0;
  double worst_identity = 0.0;
  double zero_section_tolerance = 1e-10;
  double identity_tolerance = 1e-6;
  bool passed = true;
};

AxiomReport verify_axioms(const DiscretizationMap& map, const std::vector<Vec>& samples);

/// R_{d,phi} = (phi x phi)^{-1} o R_d o T phi, a map on the domain of phi.
DiscretizationMap lift_by_diffeo(const DiscretizationMap& map, const Diffeomorphism& phi);

/// R_d^T = T R_d o kappa on the 2n chart of TM. Points are stacked (x, xdot),
/// vectors (y, ydot); outputs are the two tangent points (x0, v0), (x1, v1).
DiscretizationMap tangent_lift(const DiscretizationMap& map);

/// Evaluates the tangent lift on a double tangent element and returns the
/// result as two stacked TM points.
PointPair tangent_lift_apply(const DiscretizationMap& lifted, const DoubleTangent& w);

/// T phi : (x, v) -> (phi(x), D phi(x) v) as a diffeomorphism of the 2n chart.
Diffeomorphism tangent_map(const Diffeomorphism& phi);

}  // namespace fldisc
