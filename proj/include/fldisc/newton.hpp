#pragma once

#include <functional>
#include <optional>

#include "fldisc/geometry.hpp"

namespace fldisc {

struct NewtonOptions {
  double tolerance = 1e-12;  // on max|F|, scaled by (1 + max|x|)
  int max_iterations = 50;
  double jacobian_step = kJacobianStep;
};

struct NewtonResult {
  Vec solution;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

using JacobianFunction = std::function<Mat(const Vec&)>;

/// Damped Newton iteration for F(x) = 0. The step is halved while the residual
/// increases. Uses `jacobian` when given, central differences otherwise.
/// Never throws on non-convergence; callers decide via `converged`.
NewtonResult newton_solve(const VectorFunction& residual, const Vec& initial,
                          const NewtonOptions& options = {},
                          const JacobianFunction& jacobian = {});

}  // namespace fldisc
