#include "fldisc/integrators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <boost/numeric/odeint.hpp>

#include "fldisc/newton.hpp"

namespace fldisc {

namespace {

// Derivative of the second component of R^{-1}(a, b) with respect to b, split
// into the base-point block and the vector block. Uses the forward Jacobian at
// the inverse image.
std::pair<Mat, Mat> inverse_jacobian_in_second(const DiscretizationMap& map, const TangentPoint& tp) {
  const Eigen::Index n = map.dim();
  const Mat j = map.jacobian(tp.x, tp.v);
  Eigen::FullPivLU<Mat> lu(j);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::SingularStep, "discretization map Jacobian is singular");
  }
  Mat rhs = Mat::Zero(2 * n, n);
  rhs.bottomRows(n) = Mat::Identity(n, n);
  const Mat cols = lu.solve(rhs);
  return {cols.topRows(n), cols.bottomRows(n)};
}

// Solves inverse(a, b).v = h X(inverse(a, b).x) for b with the predictor a + h X(a).
StepResult<Vec> solve_implicit(const DiscretizationMap& map, const VectorFunction& field,
                               const Vec& a, double h) {
  const auto residual = [&](const Vec& b) -> Vec {
    const TangentPoint tp = map.inverse(a, b);
    return tp.v - h * field(tp.x);
  };
  const auto jacobian = [&](const Vec& b) -> Mat {
    const TangentPoint tp = map.inverse(a, b);
    const auto [dz, dv] = inverse_jacobian_in_second(map, tp);
    return dv - h * numeric_jacobian(field, tp.x) * dz;
  };
  const Vec predictor = a + h * field(a);
  const NewtonResult result = newton_solve(residual, predictor, NewtonOptions{}, jacobian);
  if (!result.converged) {
    throw Error(ErrorCode::NoConvergence,
                "Newton stopped after " + std::to_string(result.iterations) +
                    " iterations with residual " + std::to_string(result.residual));
  }
  return {result.solution, result.iterations, result.residual};
}

void require_positive_step(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw Error(ErrorCode::InvalidArgument, "step size must be positive");
  }
}

}  // namespace

StepResult<Vec> step_first_order(const DiscretizationMap& map, const VectorFunction& field,
                                 const Vec& xk, double h) {
  require_positive_step(h);
  if (xk.size() != map.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "state does not match the map dimension");
  }
  if (map.kind() == MapKind::ExplicitEuler) {
    return {xk + h * field(xk), 0, 0.0};
  }
  return solve_implicit(map, field, xk, h);
}

SodeStep step_sode(const DiscretizationMap& lifted, const MechanicalSystem& sys,
                   const ControlSupplier& control, const CoordState& sk, double h) {
  require_positive_step(h);
  if (lifted.dim() != 2 * sys.n() || sk.dim() != sys.n()) {
    throw Error(ErrorCode::DimensionMismatch, "lifted map, system and state disagree in dimension");
  }
  const VectorFunction field = [&](const Vec& s) -> Vec {
    const CoordState base = CoordState::from_stacked(s);
    return sode_field(sys, base, control(base)).stacked();
  };
  const StepResult<Vec> solved = solve_implicit(lifted, field, sk.stacked(), h);
  const CoordState base = CoordState::from_stacked(lifted.inverse(sk.stacked(), solved.state).x);
  return {CoordState::from_stacked(solved.state), base, control(base), solved.iterations,
          solved.residual};
}

Trajectory fl_discretize(const MechanicalBundle& bundle, const DiscretizationMap& map,
                         const AuxiliaryControl& control, const CoordState& s0, double h,
                         int steps) {
  require_positive_step(h);
  const Eigen::Index n = bundle.system.n();
  const Eigen::Index m = bundle.system.m();
  if (steps < 0) {
    throw Error(ErrorCode::InvalidArgument, "negative step count");
  }
  if (control.gains) {
    if (control.gains->k.rows() != m || control.gains->k.cols() != 2 * n) {
      throw Error(ErrorCode::DimensionMismatch, "gain matrix must be m x 2n");
    }
  } else if (control.open_loop.size() < static_cast<std::size_t>(steps)) {
    throw Error(ErrorCode::DimensionMismatch, "open-loop sequence shorter than the step count");
  }

  const Diffeomorphism tphi = tangent_map(bundle.transform.phi);
  const DiscretizationMap lifted = lift_by_diffeo(tangent_lift(map), tphi);

  Trajectory traj;
  traj.t.push_back(0.0);
  traj.states.push_back(s0);
  for (int k = 0; k < steps; ++k) {
    const auto auxiliary = [&](const CoordState& base) -> Vec {
      if (control.gains) {
        return -control.gains->k * tphi.apply(base.stacked());
      }
      return control.open_loop[static_cast<std::size_t>(k)];
    };
    const ControlSupplier physical = [&](const CoordState& base) -> Vec {
      return apply_feedback(bundle.transform, base.x(), base.y(), auxiliary(base));
    };
    const SodeStep step = step_sode(lifted, bundle.system, physical, traj.states.back(), h);
    traj.t.push_back(static_cast<double>(k + 1) * h);
    traj.states.push_back(step.state);
    traj.controls.push_back(step.control);
    traj.auxiliary_controls.push_back(auxiliary(step.base));
    traj.bases.push_back(step.base);
  }
  return traj;
}

Vec TwoStepRecurrence::next(const Vec& xk, const Vec& xk1, const Vec& uk, const Vec& uk1) const {
  return coef_k * xk + coef_k1 * xk1 + control_k * uk + control_k1 * uk1;
}

TwoStepRecurrence linear_two_step(const LinearMechanicalSystem& lms, const DiscretizationMap& map,
                                  double h) {
  require_positive_step(h);
  const Eigen::Index n = lms.n();
  const Eigen::Index m = lms.m();
  if (map.dim() != n) {
    throw Error(ErrorCode::DimensionMismatch, "map dimension differs from the linear system");
  }
  const MechanicalSystem sys = MechanicalSystem::linear(lms.a, lms.b);
  const DiscretizationMap lifted = tangent_lift(map);

  const auto one_step = [&](const Vec& s, const Vec& u) -> Vec {
    const ControlSupplier held = [&](const CoordState&) { return u; };
    return step_sode(lifted, sys, held, CoordState::from_stacked(s), h).state.stacked();
  };

  const Vec zero_state = Vec::Zero(2 * n);
  const Vec zero_input = Vec::Zero(m);
  const Vec offset = one_step(zero_state, zero_input);
  Mat state_map(2 * n, 2 * n);
  Mat input_map(2 * n, m);
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    state_map.col(i) = one_step(Vec::Unit(2 * n, i), zero_input) - offset;
  }
  for (Eigen::Index s = 0; s < m; ++s) {
    input_map.col(s) = one_step(zero_state, Vec::Unit(m, s)) - offset;
  }

  // The origin with zero input is an equilibrium of the LMS, so a linearity
  // preserving map must send it to itself and act linearly elsewhere.
  std::mt19937 rng(20240521u);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  double defect = offset.cwiseAbs().maxCoeff();
  for (int probe = 0; probe < 3; ++probe) {
    const Vec s = Vec::NullaryExpr(2 * n, [&] { return 2.0 * dist(rng); });
    const Vec u = Vec::NullaryExpr(m, [&] { return 2.0 * dist(rng); });
    const Vec direct = one_step(s, u);
    const Vec predicted = state_map * s + input_map * u;
    defect = std::max(defect, (direct - predicted).cwiseAbs().maxCoeff() /
                                  (1.0 + direct.cwiseAbs().maxCoeff()));
  }
  if (defect > 1e-9) {
    throw Error(ErrorCode::NotLinearityPreserving,
                "one-step map is not linear (defect " + std::to_string(defect) + ")");
  }

  const Mat m11 = state_map.topLeftCorner(n, n);
  const Mat m12 = state_map.topRightCorner(n, n);
  const Mat m21 = state_map.bottomLeftCorner(n, n);
  const Mat m22 = state_map.bottomRightCorner(n, n);
  const Mat n1 = input_map.topRows(n);
  const Mat n2 = input_map.bottomRows(n);

  Eigen::FullPivLU<Mat> lu(m12);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::SingularStep, "position update does not determine the velocity");
  }
  // y_k = M12^{-1}(x_{k+1} - M11 x_k - N1 u_k), substituted into x_{k+2}.
  const Mat p = m12 * m22 * lu.inverse();

  TwoStepRecurrence rec;
  rec.coef_k = m12 * m21 - p * m11;
  rec.coef_k1 = m11 + p;
  rec.control_k = m12 * n2 - p * n1;
  rec.control_k1 = n1;
  rec.one_step_state = state_map;
  rec.one_step_input = input_map;
  return rec;
}

GainMatrix pole_place(const LinearMechanicalSystem& lms,
                      const std::vector<std::complex<double>>& poles) {
  if (lms.m() != 1) {
    throw Error(ErrorCode::MultiInputUnsupported, "pole placement supports a single input only");
  }
  const Mat a = lms.stacked_a();
  const Mat b = lms.stacked_b();
  const Eigen::Index dim = a.rows();
  if (static_cast<Eigen::Index>(poles.size()) != dim) {
    throw Error(ErrorCode::DimensionMismatch, "need one pole per state of the stacked system");
  }

  std::vector<bool> paired(poles.size(), false);
  for (std::size_t i = 0; i < poles.size(); ++i) {
    const double scale = std::max(1.0, std::abs(poles[i]));
    if (paired[i] || std::abs(poles[i].imag()) <= 1e-12 * scale) {
      continue;
    }
    bool found = false;
    for (std::size_t j = i + 1; j < poles.size() && !found; ++j) {
      if (!paired[j] && std::abs(poles[j] - std::conj(poles[i])) <= 1e-9 * scale) {
        paired[i] = paired[j] = found = true;
      }
    }
    if (!found) {
      throw Error(ErrorCode::InvalidArgument, "poles are not closed under conjugation");
    }
  }

  // Monic characteristic polynomial, coeffs[i] multiplies s^i.
  std::vector<std::complex<double>> coeffs{1.0};
  for (const auto& p : poles) {
    std::vector<std::complex<double>> next(coeffs.size() + 1, 0.0);
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      next[i + 1] += coeffs[i];
      next[i] -= p * coeffs[i];
    }
    coeffs = std::move(next);
  }

  Mat ctrb(dim, dim);
  ctrb.col(0) = b;
  for (Eigen::Index i = 1; i < dim; ++i) {
    ctrb.col(i) = a * ctrb.col(i - 1);
  }
  Eigen::JacobiSVD<Mat> svd(ctrb);
  const auto& sv = svd.singularValues();
  if (sv(dim - 1) <= 1e-12 * sv(0)) {
    throw Error(ErrorCode::Uncontrollable, "controllability matrix is rank deficient");
  }

  Mat poly_a = Mat::Zero(dim, dim);
  for (auto i = static_cast<Eigen::Index>(coeffs.size()) - 1; i >= 0; --i) {
    poly_a = poly_a * a + coeffs[static_cast<std::size_t>(i)].real() * Mat::Identity(dim, dim);
  }
  const Vec selector = ctrb.transpose().fullPivLu().solve(Vec::Unit(dim, dim - 1));
  return GainMatrix{selector.transpose() * poly_a};
}

Mat cayley_matrix(const Mat& a_cl, double h) {
  require_positive_step(h);
  if (a_cl.rows() != a_cl.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "closed-loop matrix must be square");
  }
  const Mat id = Mat::Identity(a_cl.rows(), a_cl.cols());
  Eigen::FullPivLU<Mat> lu(id - 0.5 * h * a_cl);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::SingularStep, "I - h/2 A is singular");
  }
  return lu.solve(id + 0.5 * h * a_cl);
}

Vec cayley_step(const Mat& a_cl, const Vec& xk, double h) {
  if (xk.size() != a_cl.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "state does not match the closed-loop matrix");
  }
  return cayley_matrix(a_cl, h) * xk;
}

std::pair<Rotation, AngularVelocity> so3_closed_loop_step(const Rotation& rk,
                                                          const AngularVelocity& wk,
                                                          const Mat3& k1, const Mat3& k2, double h) {
  require_positive_step(h);
  const Vec3 xi = so3_log(rk);
  if (xi.norm() >= std::numbers::pi - 1e-3) {
    throw Error(ErrorCode::AngleAtPi, "rotation angle too close to pi");
  }
  const Vec3& w = wk.vector();
  Rotation next(rk.matrix() * so3_exp(h * w).matrix());
  AngularVelocity next_w(w - h * k1 * xi - h * k2 * w);
  return {next, next_w};
}

DenseSolution reference_integrate(const VectorFunction& field, const Vec& s0,
                                  const std::vector<double>& sample_times, double tol) {
  namespace ode = boost::numeric::odeint;
  using State = std::vector<double>;

  if (!(tol >= 1e-12 && tol <= 1e-6)) {
    throw Error(ErrorCode::InvalidArgument, "tolerance must lie in [1e-12, 1e-6]");
  }
  if (!std::is_sorted(sample_times.begin(), sample_times.end()) ||
      (!sample_times.empty() && sample_times.front() < 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "sample times must be non-negative and sorted");
  }
  if (!all_finite(s0)) {
    throw Error(ErrorCode::NonFinite, "initial state is not finite");
  }

  DenseSolution out;
  if (sample_times.empty()) {
    return out;
  }
  const double t_final = sample_times.back();
  const auto dim = static_cast<std::size_t>(s0.size());

  const auto rhs = [&](const State& x, State& dxdt, double) {
    const Vec v = field(Eigen::Map<const Vec>(x.data(), s0.size()));
    if (v.size() != s0.size() || !all_finite(v)) {
      throw Error(ErrorCode::NonFinite, "field returned a non-finite or mis-sized value");
    }
    dxdt.assign(v.data(), v.data() + v.size());
  };
  const auto to_vec = [](const State& x) { return Vec(Eigen::Map<const Vec>(x.data(), static_cast<Eigen::Index>(x.size()))); };

  State x(s0.data(), s0.data() + s0.size());
  std::size_t next_sample = 0;
  while (next_sample < sample_times.size() && sample_times[next_sample] <= 0.0) {
    out.t.push_back(sample_times[next_sample]);
    out.states.push_back(s0);
    ++next_sample;
  }
  if (next_sample == sample_times.size()) {
    return out;
  }

  auto stepper = ode::make_dense_output(tol, tol, ode::runge_kutta_dopri5<State>());
  stepper.initialize(x, 0.0, 1e-3 * t_final);
  State sample(dim);
  while (next_sample < sample_times.size()) {
    try {
      stepper.do_step(rhs);
    } catch (const ode::step_adjustment_error&) {
      throw Error(ErrorCode::StepUnderflow, "step size control failed to make progress");
    }
    ++out.accepted_steps;
    if (stepper.current_time_step() < 1e-14 * t_final) {
      throw Error(ErrorCode::StepUnderflow, "required step below 1e-14 t_final");
    }
    while (next_sample < sample_times.size() &&
           sample_times[next_sample] <= stepper.current_time()) {
      stepper.calc_state(sample_times[next_sample], sample);
      out.t.push_back(sample_times[next_sample]);
      out.states.push_back(to_vec(sample));
      ++next_sample;
    }
  }
  return out;
}

OrderStudy order_study(const FixedStepper& stepper, const ReferenceSolver& reference, const Vec& s0,
                       double t_final, const std::vector<double>& h_list,
                       const ErrorMetric& metric) {
  if (!(t_final > 0.0) || h_list.empty()) {
    throw Error(ErrorCode::InvalidArgument, "order study needs t_final > 0 and step sizes");
  }
  const ErrorMetric measure = metric ? metric : [](const Vec& a, const Vec& b) {
    return (a - b).cwiseAbs().maxCoeff();
  };
  const Vec exact = reference(s0, t_final);
  const double floor_level = 1e-11 * (1.0 + exact.cwiseAbs().maxCoeff());

  OrderStudy study;
  std::vector<double> log_h;
  std::vector<double> log_e;
  for (double h : h_list) {
    require_positive_step(h);
    const double steps_real = t_final / h;
    const int steps = static_cast<int>(std::lround(steps_real));
    if (steps < 1 || std::abs(steps * h - t_final) > 1e-9 * t_final) {
      throw Error(ErrorCode::InvalidArgument, "step size does not divide t_final");
    }
    const double err = measure(stepper(s0, h, steps), exact);
    study.h.push_back(h);
    study.error.push_back(err);
    if (err <= floor_level) {
      study.floor = true;
    } else {
      log_h.push_back(std::log(h));
      log_e.push_back(std::log(err));
    }
  }

  if (log_h.size() >= 2) {
    const auto count = static_cast<Eigen::Index>(log_h.size());
    Mat design(count, 2);
    Vec target(count);
    for (Eigen::Index i = 0; i < count; ++i) {
      design(i, 0) = 1.0;
      design(i, 1) = log_h[static_cast<std::size_t>(i)];
      target(i) = log_e[static_cast<std::size_t>(i)];
    }
    const Vec fit = design.colPivHouseholderQr().solve(target);
    study.slope = fit(1);
    study.fit_residual = (design * fit - target).norm();
  }
  return study;
}

}  // namespace fldisc
