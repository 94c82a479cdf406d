#pragma once

// One-step schemes generated by discretization maps, their linear images, and
// the adaptive reference integrator used to measure them.

#include <complex>
#include <functional>
#include <optional>
#include <vector>

#include "fldisc/discretization.hpp"
#include "fldisc/mechanics.hpp"

namespace fldisc {

template <typename State>
struct StepResult {
  State state;
  int iterations = 0;
  double residual = 0.0;
};

struct SodeStep {
  CoordState state;
  CoordState base;  // tau_TM of the inverse map: where the field and control were evaluated
  Vec control;      // physical control used on this step
  int iterations = 0;
  double residual = 0.0;
};

/// m x 2n state feedback on stacked (x~, y~): u~ = -K z.
struct GainMatrix {
  Mat k;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<CoordState> states;
  std::vector<Vec> controls;            // physical u_k, one per step
  std::vector<Vec> auxiliary_controls;  // u~_k, one per step
  std::vector<CoordState> bases;        // base point of each step
};

/// Solves R^{-1}(x_k, x_{k+1}) = (z, h X(z)) for x_{k+1}. The explicit Euler map
/// is solved in closed form; other maps use damped Newton.
StepResult<Vec> step_first_order(const DiscretizationMap& map, const VectorFunction& field,
                                 const Vec& xk, double h);

/// Control evaluated at the base point (x_bar, y_bar) of the step.
using ControlSupplier = std::function<Vec(const CoordState& base)>;

/// Second-order scheme: with (Z, V) = RT^{-1}(s_k, s_{k+1}), solve V = h X(Z)
/// where X is the SODE field of `sys` under the supplied control.
SodeStep step_sode(const DiscretizationMap& lifted, const MechanicalSystem& sys,
                   const ControlSupplier& control, const CoordState& sk, double h);

/// Either state feedback in linearized coordinates or a fixed u~ sequence.
struct AuxiliaryControl {
  std::optional<GainMatrix> gains;
  std::vector<Vec> open_loop;
};

/// Steps `bundle.system` with the tangent lift of R pulled back through phi
/// (R^T_{d,phi}), applying u_k = apply_feedback(x_bar_k, y_bar_k, u~_k).
Trajectory fl_discretize(const MechanicalBundle& bundle, const DiscretizationMap& map,
                         const AuxiliaryControl& control, const CoordState& s0, double h,
                         int steps);

/// x_{k+2} = coef_k x_k + coef_k1 x_{k+1} + control_k u_k + control_k1 u_{k+1}
/// obtained by eliminating y from the one-step map s_{k+1} = M s_k + N u_k.
struct TwoStepRecurrence {
  Mat coef_k;
  Mat coef_k1;
  Mat control_k;
  Mat control_k1;
  Mat one_step_state;  // M
  Mat one_step_input;  // N

  Vec next(const Vec& xk, const Vec& xk1, const Vec& uk, const Vec& uk1) const;
};

TwoStepRecurrence linear_two_step(const LinearMechanicalSystem& lms, const DiscretizationMap& map,
                                  double h);

/// Ackermann's formula on the stacked first-order form; single input only.
GainMatrix pole_place(const LinearMechanicalSystem& lms,
                      const std::vector<std::complex<double>>& poles);

/// (I - h/2 A)^{-1} (I + h/2 A)
Mat cayley_matrix(const Mat& a_cl, double h);
Vec cayley_step(const Mat& a_cl, const Vec& xk, double h);

/// R_{k+1} = R_k exp(h hat(Omega_k)),
/// Omega_{k+1} = Omega_k - h K1 Log(R_k)^vee - h K2 Omega_k.
std::pair<Rotation, AngularVelocity> so3_closed_loop_step(const Rotation& rk,
                                                          const AngularVelocity& wk,
                                                          const Mat3& k1, const Mat3& k2, double h);

struct DenseSolution {
  std::vector<double> t;
  std::vector<Vec> states;
  int accepted_steps = 0;
};

/// Dormand-Prince 5(4) (Boost.Odeint) with absolute and relative tolerance
/// `tol` and fourth-order dense output at the requested (non-decreasing, >= 0) times.
DenseSolution reference_integrate(const VectorFunction& field, const Vec& s0,
                                  const std::vector<double>& sample_times, double tol = 1e-10);

/// Propagates s0 over `steps` steps of size h and returns the final state.
using FixedStepper = std::function<Vec(const Vec& s0, double h, int steps)>;
using ReferenceSolver = std::function<Vec(const Vec& s0, double t_final)>;
using ErrorMetric = std::function<double(const Vec& approx, const Vec& exact)>;

struct OrderStudy {
  std::vector<double> h;
  std::vector<double> error;
  std::optional<double> slope;  // absent with fewer than two usable points
  double fit_residual = 0.0;
  bool floor = false;           // some errors sit at round-off level and were excluded
};

OrderStudy order_study(const FixedStepper& stepper, const ReferenceSolver& reference, const Vec& s0,
                       double t_final, const std::vector<double>& h_list,
                       const ErrorMetric& metric = {});

}  // namespace fldisc
