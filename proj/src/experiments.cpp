#include "fldisc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

namespace fldisc {

namespace {

const std::vector<std::string> kBuiltinNames{"explicit-euler", "implicit-euler", "midpoint"};

Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

std::vector<std::complex<double>> complex_poles(const std::vector<double>& poles) {
  return {poles.begin(), poles.end()};
}

double max_abs(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

std::ofstream open_output(const std::filesystem::path& dir, const std::string& name) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
  }
  std::ofstream out(dir / name);
  if (!out) {
    throw Error(ErrorCode::IoFailure, "cannot open " + (dir / name).string());
  }
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) {
    throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
  }
}

void write_row(std::ostream& out, std::initializer_list<double> values) {
  bool first = true;
  for (double v : values) {
    out << (first ? "" : ",") << format_number(v);
    first = false;
  }
  out << '\n';
}

void write_states(const std::filesystem::path& dir, const std::string& name,
                  const std::vector<double>& t, const std::vector<CoordState>& states) {
  auto out = open_output(dir, name);
  out << "t,theta1,theta2,dtheta1,dtheta2\n";
  for (std::size_t k = 0; k < t.size(); ++k) {
    const CoordState& s = states[k];
    write_row(out, {t[k], s.x()(0), s.x()(1), s.y()(0), s.y()(1)});
  }
  finish(out, dir / name);
}

double trace_error(const Mat3& r) { return 3.0 - r.trace(); }

}  // namespace

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::UnknownSystem:
      return 4;
    case ErrorCode::IoFailure:
      return 3;
    default:
      return 2;
  }
}

std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

ExperimentConfig ExperimentConfig::pendulum_defaults() {
  ExperimentConfig c;
  c.system = "pendulum";
  c.h = 0.01;
  c.t_final = 1.0;
  c.initial_state = {std::numbers::pi / 4.0, 0.0, 0.0, 0.0};
  c.map = "midpoint";
  c.poles = {-10.0, -20.0, -30.0, -40.0};
  return c;
}

ExperimentConfig ExperimentConfig::so3_defaults() {
  ExperimentConfig c;
  c.system = "so3";
  c.h = 0.01;
  c.t_final = 10.0;
  c.initial_state = {0.0, -std::numbers::pi / 2.0, 0.0, 0.0, 0.0, 0.0};
  c.map = "explicit-euler";
  c.gains = {5.0, 10.0};
  return c;
}

void ExperimentConfig::validate() const {
  if (system != "pendulum" && system != "so3") {
    throw Error(ErrorCode::UnknownSystem, "no experiment named '" + system + "'");
  }
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw Error(ErrorCode::InvalidArgument, "h must be positive");
  }
  if (!(t_final > 0.0) || !std::isfinite(t_final)) {
    throw Error(ErrorCode::InvalidArgument, "t_final must be positive");
  }
  builtin_map_kind(map);
  const std::size_t expected = system == "pendulum" ? 4 : 6;
  if (initial_state.size() != expected) {
    throw Error(ErrorCode::InvalidArgument,
                "initial_state needs " + std::to_string(expected) + " entries for " + system);
  }
  if (system == "pendulum" && poles.size() != 4) {
    throw Error(ErrorCode::InvalidArgument, "pendulum needs four poles");
  }
  if (system == "so3" && gains.size() != 2) {
    throw Error(ErrorCode::InvalidArgument, "so3 needs gains [K1, K2]");
  }
  steps();
}

int ExperimentConfig::steps() const {
  const long n = std::lround(t_final / h);
  if (n < 1 || std::abs(static_cast<double>(n) * h - t_final) > 1e-9 * t_final) {
    throw Error(ErrorCode::InvalidArgument, "t_final must be a whole number of steps");
  }
  return static_cast<int>(n);
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{{"system", c.system},
                     {"h", c.h},
                     {"t_final", c.t_final},
                     {"initial_state", c.initial_state},
                     {"map", c.map},
                     {"poles", c.poles},
                     {"gains", c.gains},
                     {"reference_tol", c.reference_tol},
                     {"output_dir", c.output_dir}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  if (!j.is_object()) {
    throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
  }
  static const std::vector<std::string> known{"system", "h", "t_final", "initial_state", "map",
                                              "poles", "gains", "reference_tol", "output_dir"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
    }
  }
  try {
    if (j.contains("system")) j.at("system").get_to(c.system);
    if (j.contains("h")) j.at("h").get_to(c.h);
    if (j.contains("t_final")) j.at("t_final").get_to(c.t_final);
    if (j.contains("initial_state")) j.at("initial_state").get_to(c.initial_state);
    if (j.contains("map")) j.at("map").get_to(c.map);
    if (j.contains("poles")) j.at("poles").get_to(c.poles);
    if (j.contains("gains")) j.at("gains").get_to(c.gains);
    if (j.contains("reference_tol")) j.at("reference_tol").get_to(c.reference_tol);
    if (j.contains("output_dir")) j.at("output_dir").get_to(c.output_dir);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad config value: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Pendulum

std::vector<CoordState> pendulum_reference(const MechanicalBundle& bundle, const GainMatrix& gains,
                                           const CoordState& s0, const std::vector<double>& times,
                                           double tol) {
  const Diffeomorphism tphi = tangent_map(bundle.transform.phi);
  const Mat a_cl = bundle.lms.stacked_a() - bundle.lms.stacked_b() * gains.k;
  const DenseSolution sol =
      reference_integrate([&](const Vec& z) { return Vec(a_cl * z); }, tphi.apply(s0.stacked()), times, tol);
  std::vector<CoordState> out;
  out.reserve(sol.states.size());
  for (std::size_t i = 0; i < sol.states.size(); ++i) {
    // The initial sample is the initial state itself, not its chart round trip.
    out.push_back(times[i] == 0.0 ? s0 : CoordState::from_stacked(tphi.apply_inverse(sol.states[i])));
  }
  return out;
}

PendulumRun run_pendulum(const ExperimentConfig& config) {
  config.validate();
  if (config.system != "pendulum") {
    throw Error(ErrorCode::InvalidArgument, "run_pendulum needs system = pendulum");
  }
  PendulumRun run;
  run.config = config;
  const MechanicalBundle bundle = pendulum_system();
  run.gains = pole_place(bundle.lms, complex_poles(config.poles));
  const CoordState s0 = CoordState::from_stacked(to_vec(config.initial_state));
  const DiscretizationMap map = make_builtin(builtin_map_kind(config.map), 2);

  run.trajectory = fl_discretize(bundle, map, {run.gains, {}}, s0, config.h, config.steps());
  run.reference = pendulum_reference(bundle, run.gains, s0, run.trajectory.t, config.reference_tol);

  for (std::size_t k = 0; k < run.trajectory.t.size(); ++k) {
    const CoordState& s = run.trajectory.states[k];
    const CoordState& r = run.reference[k];
    run.e1.push_back(std::abs(s.x()(0) - r.x()(0)));
    run.ed1.push_back(std::abs(s.y()(0) - r.y()(0)));
  }
  run.max_e1 = *std::max_element(run.e1.begin(), run.e1.end());
  run.max_ed1 = *std::max_element(run.ed1.begin(), run.ed1.end());

  // The image under T phi must follow the same map applied to the linear system.
  const Diffeomorphism tphi = tangent_map(bundle.transform.phi);
  const MechanicalSystem linear = MechanicalSystem::linear(bundle.lms.a, bundle.lms.b);
  const DiscretizationMap lifted = tangent_lift(map);
  const ControlSupplier feedback = [&](const CoordState& z) { return Vec(-run.gains.k * z.stacked()); };
  for (std::size_t k = 0; k + 1 < run.trajectory.states.size(); ++k) {
    const Vec zk = tphi.apply(run.trajectory.states[k].stacked());
    const Vec zk1 = tphi.apply(run.trajectory.states[k + 1].stacked());
    const Vec linear_step =
        step_sode(lifted, linear, feedback, CoordState::from_stacked(zk), config.h).state.stacked();
    run.max_conjugacy_defect = std::max(run.max_conjugacy_defect, max_abs(zk1 - linear_step));
  }
  return run;
}

void write_pendulum_outputs(const PendulumRun& run, const std::filesystem::path& dir) {
  write_states(dir, "pendulum_states.csv", run.trajectory.t, run.trajectory.states);
  write_states(dir, "pendulum_reference.csv", run.trajectory.t, run.reference);
  auto out = open_output(dir, "pendulum_errors.csv");
  out << "t,e1,ed1\n";
  for (std::size_t k = 0; k < run.trajectory.t.size(); ++k) {
    write_row(out, {run.trajectory.t[k], run.e1[k], run.ed1[k]});
  }
  finish(out, dir / "pendulum_errors.csv");
  write_summary(to_json(run), dir);
}

nlohmann::json to_json(const PendulumRun& run) {
  const CoordState& last = run.trajectory.states.back();
  return {{"command", "simulate-pendulum"},
          {"config", run.config},
          {"gains", to_std(run.gains.k.row(0).transpose())},
          {"metrics",
           {{"steps", run.trajectory.t.size() - 1},
            {"max_e1", run.max_e1},
            {"max_ed1", run.max_ed1},
            {"max_conjugacy_defect", run.max_conjugacy_defect},
            {"final_state", to_std(last.stacked())}}}};
}

// ---------------------------------------------------------------------------
// Rigid body

Vec so3_reference_field(const Vec& z, double k1, double k2) {
  const Vec3 xi = z.head<3>();
  const Vec3 w = z.tail<3>();
  Vec out(6);
  out << so3_right_jacobian_inverse(xi) * w, -k1 * xi - k2 * w;
  return out;
}

So3Run run_so3(const ExperimentConfig& config) {
  config.validate();
  if (config.system != "so3") {
    throw Error(ErrorCode::InvalidArgument, "run_so3 needs system = so3");
  }
  So3Run run;
  run.config = config;
  const Vec z0 = to_vec(config.initial_state);
  const double k1 = config.gains[0];
  const double k2 = config.gains[1];
  const int steps = config.steps();

  Rotation r = so3_exp(z0.head<3>());
  AngularVelocity w(z0.tail<3>());
  for (int k = 0; k <= steps; ++k) {
    if (k > 0) {
      std::tie(r, w) = so3_closed_loop_step(r, w, k1 * Mat3::Identity(), k2 * Mat3::Identity(), config.h);
    }
    run.t.push_back(k * config.h);
    run.rotations.push_back(r);
    run.velocities.push_back(w);
    run.trace_err.push_back(trace_error(r.matrix()));
    run.max_orthogonality_defect = std::max(run.max_orthogonality_defect, r.orthogonality_defect());
    run.max_det_defect = std::max(run.max_det_defect, std::abs(r.matrix().determinant() - 1.0));
  }

  const DenseSolution ref = reference_integrate(
      [&](const Vec& z) { return so3_reference_field(z, k1, k2); }, z0, run.t, config.reference_tol);
  for (const Vec& z : ref.states) {
    run.trace_err_ref.push_back(trace_error(so3_exp(z.head<3>()).matrix()));
  }
  return run;
}

void write_so3_outputs(const So3Run& run, const std::filesystem::path& dir) {
  auto out = open_output(dir, "rigid_body.csv");
  out << "t,trace_err,trace_err_ref,p,q,r\n";
  for (std::size_t k = 0; k < run.t.size(); ++k) {
    const Vec3& w = run.velocities[k].vector();
    write_row(out, {run.t[k], run.trace_err[k], run.trace_err_ref[k], w(0), w(1), w(2)});
  }
  finish(out, dir / "rigid_body.csv");
  write_summary(to_json(run), dir);
}

nlohmann::json to_json(const So3Run& run) {
  const Vec3& w = run.velocities.back().vector();
  return {{"command", "simulate-so3"},
          {"config", run.config},
          {"metrics",
           {{"steps", run.t.size() - 1},
            {"trace_err_initial", run.trace_err.front()},
            {"trace_err_final", run.trace_err.back()},
            {"trace_err_ref_final", run.trace_err_ref.back()},
            {"omega_final", to_std(w)},
            {"omega_final_max_abs", w.cwiseAbs().maxCoeff()},
            {"max_orthogonality_defect", run.max_orthogonality_defect},
            {"max_det_defect", run.max_det_defect}}}};
}

// ---------------------------------------------------------------------------
// Condition checks

MechanicalSystem registered_system(const std::string& name) {
  if (name == "pendulum") return pendulum_system().system;
  if (name == "rigid-body") return RigidBody::exponential_chart_bundle().system;
  if (name == "double-integrator") {
    return MechanicalSystem::linear(Mat::Zero(1, 1), Mat::Identity(1, 1));
  }
  throw Error(ErrorCode::UnknownSystem, "no system named '" + name + "'");
}

std::vector<Vec> sample_grid(const std::string& system, const GridSpec& grid) {
  if (grid.points < 1 || !(grid.hi >= grid.lo)) {
    throw Error(ErrorCode::InvalidArgument, "grid needs points >= 1 and hi >= lo");
  }
  const MechanicalSystem sys = registered_system(system);
  Vec direction = Vec::Unit(sys.n(), 0);
  if (system == "rigid-body") {
    direction = Vec3(0.6, -0.48, 0.64);
  }
  std::vector<Vec> out;
  for (int i = 0; i < grid.points; ++i) {
    const double s = grid.points == 1 ? grid.lo : grid.lo + (grid.hi - grid.lo) * i / (grid.points - 1);
    out.push_back(s * direction);
  }
  return out;
}

CheckOutcome run_check(const std::string& system, const GridSpec& grid) {
  const MechanicalSystem sys = registered_system(system);
  const std::vector<Vec> samples = sample_grid(system, grid);
  CheckOutcome outcome;
  outcome.system = system;
  if (sys.n() == 2 && sys.m() == 1) {
    outcome.reports.push_back(check_planar(sys, samples));
  }
  outcome.reports.push_back(check_general(sys, samples));
  outcome.passed = std::all_of(outcome.reports.begin(), outcome.reports.end(),
                               [](const ConditionReport& r) { return r.passed(); });
  return outcome;
}

nlohmann::json to_json(const CheckOutcome& outcome) {
  nlohmann::json conditions = nlohmann::json::array();
  nlohmann::json warnings = nlohmann::json::array();
  for (const auto& report : outcome.reports) {
    for (const auto& c : report.conditions) {
      conditions.push_back({{"name", c.name},
                            {"verdict", to_string(c.verdict)},
                            {"worst_value", c.worst_value},
                            {"metric", c.metric},
                            {"tolerance", c.tolerance},
                            {"witness", to_std(c.witness)},
                            {"note", c.note}});
    }
    for (const auto& w : report.warnings) warnings.push_back(w);
  }
  return {{"command", "check"},
          {"system", outcome.system},
          {"passed", outcome.passed},
          {"conditions", conditions},
          {"warnings", warnings}};
}

// ---------------------------------------------------------------------------
// Map verification

MapsReport verify_maps(int samples, bool inject_bad_map, unsigned seed) {
  if (samples < 1) {
    throw Error(ErrorCode::InvalidArgument, "need at least one sample");
  }
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const auto draw = [&](Eigen::Index dim, double scale) {
    return Vec(Vec::NullaryExpr(dim, [&] { return scale * unit(rng); }));
  };
  const auto points = [&](Eigen::Index dim) {
    std::vector<Vec> out;
    for (int i = 0; i < samples; ++i) out.push_back(draw(dim, 1.0));
    return out;
  };

  const Diffeomorphism phi = pendulum_diffeomorphism(PendulumParams{});
  MapsReport report;
  const auto record = [&](const std::string& name, const DiscretizationMap& map, Eigen::Index dim) {
    const AxiomReport a = verify_axioms(map, points(dim));
    report.maps.push_back({name, a.worst_zero_section, a.worst_identity, a.passed});
  };

  for (const auto& name : kBuiltinNames) {
    const DiscretizationMap base = make_builtin(builtin_map_kind(name), 2);
    record(name, base, 2);
    record(name + "/tangent-lift", tangent_lift(base), 4);
    record(name + "/pendulum-lift", lift_by_diffeo(base, phi), 2);

    const DiscretizationMap lifted = lift_by_diffeo(base, phi);
    const DiscretizationMap tangent_of_lift = tangent_lift(lifted);
    const DiscretizationMap lift_of_tangent = lift_by_diffeo(tangent_lift(base), tangent_map(phi));
    for (int i = 0; i < 100; ++i) {
      const Vec x = draw(2, 1.0);
      const Vec v = draw(2, 0.1);
      const PointPair l = lifted.forward(x, v);
      const PointPair r = base.forward(phi.apply(x), phi.derivative(x) * v);
      report.worst_phi_commutation =
          std::max({report.worst_phi_commutation, max_abs(phi.apply(l.first) - r.first),
                    max_abs(phi.apply(l.second) - r.second)});

      const Vec p = draw(4, 1.0);
      const Vec q = draw(4, 0.1);
      const PointPair a = tangent_of_lift.forward(p, q);
      const PointPair b = lift_of_tangent.forward(p, q);
      report.worst_tangent_commutation =
          std::max({report.worst_tangent_commutation, max_abs(a.first - b.first), max_abs(a.second - b.second)});
    }
  }
  if (inject_bad_map) {
    const DiscretizationMap bad(2, MapKind::Custom, [](const Vec& x, const Vec& v) {
      return PointPair{x, Vec(x + 2.0 * v)};
    });
    record("injected-double-velocity", bad, 2);
  }

  report.passed = std::all_of(report.maps.begin(), report.maps.end(), [](const MapCheck& m) { return m.passed; }) &&
                  report.worst_phi_commutation < report.commutation_tolerance &&
                  report.worst_tangent_commutation < report.commutation_tolerance;
  return report;
}

nlohmann::json to_json(const MapsReport& report) {
  nlohmann::json maps = nlohmann::json::array();
  for (const auto& m : report.maps) {
    maps.push_back({{"name", m.name},
                    {"worst_zero_section", m.worst_zero_section},
                    {"worst_identity", m.worst_identity},
                    {"passed", m.passed}});
  }
  return {{"command", "verify-maps"},
          {"passed", report.passed},
          {"maps", maps},
          {"worst_phi_commutation", report.worst_phi_commutation},
          {"worst_tangent_commutation", report.worst_tangent_commutation},
          {"commutation_tolerance", report.commutation_tolerance}};
}

// ---------------------------------------------------------------------------
// Order studies

std::vector<OrderRow> run_order_study(const std::string& system, const std::vector<std::string>& maps,
                                      const std::vector<double>& h_list, double t_final,
                                      const std::vector<double>& initial_state) {
  std::vector<OrderRow> rows;
  if (system == "pendulum") {
    const ExperimentConfig defaults = ExperimentConfig::pendulum_defaults();
    const MechanicalBundle bundle = pendulum_system();
    const GainMatrix gains = pole_place(bundle.lms, complex_poles(defaults.poles));
    const Vec s0 = to_vec(initial_state.empty() ? defaults.initial_state : initial_state);
    if (s0.size() != 4) {
      throw Error(ErrorCode::InvalidArgument, "pendulum initial state needs four entries");
    }
    const ReferenceSolver reference = [&](const Vec& s, double t) {
      return pendulum_reference(bundle, gains, CoordState::from_stacked(s), {t}, 1e-12).back().stacked();
    };
    for (const auto& name : maps) {
      const DiscretizationMap map = make_builtin(builtin_map_kind(name), 2);
      const FixedStepper stepper = [&](const Vec& s, double h, int steps) {
        return fl_discretize(bundle, map, {gains, {}}, CoordState::from_stacked(s), h, steps)
            .states.back()
            .stacked();
      };
      rows.push_back({name, order_study(stepper, reference, s0, t_final, h_list)});
    }
    return rows;
  }
  if (system == "so3") {
    const ExperimentConfig defaults = ExperimentConfig::so3_defaults();
    const Vec z0 = to_vec(initial_state.empty() ? defaults.initial_state : initial_state);
    if (z0.size() != 6) {
      throw Error(ErrorCode::InvalidArgument, "so3 initial state needs six entries");
    }
    const double k1 = defaults.gains[0];
    const double k2 = defaults.gains[1];
    const ReferenceSolver reference = [&](const Vec& z, double t) {
      return reference_integrate([&](const Vec& s) { return so3_reference_field(s, k1, k2); }, z, {t}, 1e-12)
          .states.back();
    };
    const FixedStepper stepper = [&](const Vec& z, double h, int steps) {
      Rotation r = so3_exp(z.head<3>());
      AngularVelocity w(z.tail<3>());
      for (int k = 0; k < steps; ++k) {
        std::tie(r, w) = so3_closed_loop_step(r, w, k1 * Mat3::Identity(), k2 * Mat3::Identity(), h);
      }
      Vec out(6);
      out << so3_log(r), w.vector();
      return out;
    };
    rows.push_back({"so3-euler", order_study(stepper, reference, z0, t_final, h_list)});
    return rows;
  }
  throw Error(ErrorCode::UnknownSystem, "no order study for system '" + system + "'");
}

void write_order_study(const std::vector<OrderRow>& rows, const std::filesystem::path& dir) {
  auto out = open_output(dir, "order_study.csv");
  out << "scheme,h,error\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.study.h.size(); ++i) {
      out << row.scheme << ',' << format_number(row.study.h[i]) << ',' << format_number(row.study.error[i])
          << '\n';
    }
  }
  finish(out, dir / "order_study.csv");
  write_summary(to_json(rows), dir);
}

nlohmann::json to_json(const std::vector<OrderRow>& rows) {
  nlohmann::json schemes = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json entry{{"scheme", row.scheme},
                         {"h", row.study.h},
                         {"error", row.study.error},
                         {"floor", row.study.floor},
                         {"fit_residual", row.study.fit_residual}};
    entry["slope"] = row.study.slope ? nlohmann::json(*row.study.slope) : nlohmann::json(nullptr);
    schemes.push_back(entry);
  }
  return {{"command", "order-study"}, {"schemes", schemes}};
}

void write_summary(const nlohmann::json& summary, const std::filesystem::path& dir) {
  auto out = open_output(dir, "summary.json");
  out << summary.dump(2) << '\n';
  finish(out, dir / "summary.json");
}

}  // namespace fldisc
