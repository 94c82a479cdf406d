#include "fldisc/newton.hpp"

#include <cmath>
#include <limits>

namespace fldisc {

namespace {

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

NewtonResult newton_solve(const VectorFunction& residual, const Vec& initial,
                          const NewtonOptions& options, const JacobianFunction& jacobian) {
  NewtonResult out;
  out.solution = initial;
  Vec r = residual(out.solution);
  if (!r.allFinite()) {
    out.residual = std::numeric_limits<double>::infinity();
    return out;
  }
  out.residual = inf_norm(r);

  // Once the tolerance is met, a couple of extra iterations are taken while they
  // still reduce the residual; the scaled tolerance can be loose for large states.
  int polish = 2;
  for (out.iterations = 0; out.iterations < options.max_iterations; ++out.iterations) {
    const double scale = 1.0 + inf_norm(out.solution);
    if (out.residual <= options.tolerance * scale) {
      out.converged = true;
      if (out.residual == 0.0 || polish-- == 0) {
        return out;
      }
    }
    const Mat jac = jacobian ? jacobian(out.solution)
                             : numeric_jacobian(residual, out.solution, options.jacobian_step);
    const Vec dx = jac.fullPivLu().solve(-r);
    if (!dx.allFinite()) {
      return out;
    }

    double lambda = 1.0;
    Vec trial = out.solution + dx;
    Vec r_trial = residual(trial);
    while ((!r_trial.allFinite() || inf_norm(r_trial) >= out.residual) && lambda > 1.0 / 1024.0) {
      lambda *= 0.5;
      trial = out.solution + lambda * dx;
      r_trial = residual(trial);
    }
    if (!r_trial.allFinite()) {
      return out;
    }
    const double new_residual = inf_norm(r_trial);
    if (new_residual >= out.residual) {
      // No further progress is possible at this precision.
      break;
    }
    out.solution = trial;
    r = r_trial;
    out.residual = new_residual;
  }
  out.converged = out.residual <= options.tolerance * (1.0 + inf_norm(out.solution));
  return out;
}

}  // namespace fldisc
