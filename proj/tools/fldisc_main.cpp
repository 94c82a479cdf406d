#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fldisc/experiments.hpp"

using namespace fldisc;

namespace {

struct RunOverrides {
  std::string config_path;
  std::optional<double> h;
  std::optional<double> t_final;
  std::optional<std::string> map;
  std::optional<std::string> out;
};

void add_run_flags(CLI::App* cmd, RunOverrides& o) {
  cmd->add_option("--config", o.config_path, "JSON file with ExperimentConfig fields");
  cmd->add_option("--h", o.h, "step size [s]");
  cmd->add_option("--t-final", o.t_final, "final time [s]");
  cmd->add_option("--map", o.map, "explicit-euler | implicit-euler | midpoint");
  cmd->add_option("--out", o.out, "output directory");
}

ExperimentConfig resolve(ExperimentConfig config, const RunOverrides& o) {
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) {
      throw Error(ErrorCode::IoFailure, "cannot read " + o.config_path);
    }
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, o.config_path + ": " + e.what());
    }
    from_json(j, config);
  }
  if (o.h) config.h = *o.h;
  if (o.t_final) config.t_final = *o.t_final;
  if (o.map) config.map = *o.map;
  if (o.out) config.output_dir = *o.out;
  config.validate();
  return config;
}

int simulate_pendulum(const RunOverrides& o) {
  const ExperimentConfig config = resolve(ExperimentConfig::pendulum_defaults(), o);
  const PendulumRun run = run_pendulum(config);
  write_pendulum_outputs(run, config.output_dir);
  std::cout << "pendulum: " << run.trajectory.t.size() - 1 << " steps of h = " << config.h << " with "
            << config.map << "\n"
            << "  gains K = [" << run.gains.k << "]\n"
            << "  max |theta1 error| = " << format_number(run.max_e1) << "\n"
            << "  max |dtheta1 error| = " << format_number(run.max_ed1) << "\n"
            << "  max conjugacy defect = " << format_number(run.max_conjugacy_defect) << "\n"
            << "  wrote " << config.output_dir << "/pendulum_{states,reference,errors}.csv\n";
  return 0;
}

int simulate_so3(const RunOverrides& o) {
  const ExperimentConfig config = resolve(ExperimentConfig::so3_defaults(), o);
  const So3Run run = run_so3(config);
  write_so3_outputs(run, config.output_dir);
  std::cout << "so3: " << run.t.size() - 1 << " steps of h = " << config.h << "\n"
            << "  trace error " << format_number(run.trace_err.front()) << " -> "
            << format_number(run.trace_err.back()) << " (reference " << format_number(run.trace_err_ref.back())
            << ")\n"
            << "  |Omega(t_final)| = " << format_number(run.velocities.back().vector().norm()) << "\n"
            << "  max |R^T R - I| = " << format_number(run.max_orthogonality_defect)
            << ", max |det R - 1| = " << format_number(run.max_det_defect) << "\n"
            << "  wrote " << config.output_dir << "/rigid_body.csv\n";
  return 0;
}

int check(const std::string& system, const GridSpec& grid, const std::optional<std::string>& out) {
  const CheckOutcome outcome = run_check(system, grid);
  std::cout << "check " << system << " on [" << grid.lo << ", " << grid.hi << "] with " << grid.points
            << " points\n";
  for (const auto& report : outcome.reports) {
    for (const auto& c : report.conditions) {
      std::cout << "  " << std::left << std::setw(4) << c.name << ' ' << std::setw(12) << to_string(c.verdict)
                << c.metric << " = " << format_number(c.worst_value) << " (tol " << c.tolerance << ")";
      if (c.witness.size() > 0) std::cout << " witness [" << c.witness.transpose() << "]";
      if (!c.note.empty()) std::cout << " " << c.note;
      std::cout << "\n";
    }
    for (const auto& w : report.warnings) std::cout << "  warning: " << w << "\n";
  }
  std::cout << (outcome.passed ? "all conditions pass" : "conditions fail") << "\n";
  if (out) write_summary(to_json(outcome), *out);
  return outcome.passed ? 0 : 1;
}

int verify(int samples, bool inject, const std::optional<std::string>& out) {
  const MapsReport report = verify_maps(samples, inject);
  for (const auto& m : report.maps) {
    std::cout << "  " << std::left << std::setw(32) << m.name << (m.passed ? "pass" : "FAIL")
              << "  zero-section " << format_number(m.worst_zero_section) << "  identity "
              << format_number(m.worst_identity) << "\n";
  }
  std::cout << "  phi commutation " << format_number(report.worst_phi_commutation) << "\n"
            << "  tangent commutation " << format_number(report.worst_tangent_commutation) << "\n"
            << (report.passed ? "all maps pass" : "map verification failed") << "\n";
  if (out) write_summary(to_json(report), *out);
  return report.passed ? 0 : 1;
}

int order(const std::string& system, const std::vector<std::string>& maps, const std::vector<double>& h_list,
          double t_final, const std::string& out) {
  const auto rows = run_order_study(system, maps, h_list, t_final);
  for (const auto& row : rows) {
    std::cout << row.scheme << "\n";
    for (std::size_t i = 0; i < row.study.h.size(); ++i) {
      std::cout << "  h = " << std::setw(10) << row.study.h[i] << "  error = " << format_number(row.study.error[i])
                << "\n";
    }
    if (row.study.slope) {
      std::cout << "  slope = " << format_number(*row.study.slope) << "\n";
    } else {
      std::cout << "  slope omitted: fewer than two usable step sizes\n";
    }
    if (row.study.floor) std::cout << "  note: some errors sit at the round-off floor and were not fitted\n";
  }
  write_order_study(rows, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feedback-linearization-preserving discretization experiments"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);

  RunOverrides pendulum_flags, so3_flags;
  auto* pendulum_cmd = app.add_subcommand("simulate-pendulum", "inertia wheel pendulum closed loop");
  add_run_flags(pendulum_cmd, pendulum_flags);
  auto* so3_cmd = app.add_subcommand("simulate-so3", "rigid body attitude stabilization on SO(3)");
  add_run_flags(so3_cmd, so3_flags);

  std::string check_system;
  GridSpec grid;
  std::optional<std::string> check_out;
  auto* check_cmd = app.add_subcommand("check", "linearizability conditions on a sample grid");
  check_cmd->add_option("--system", check_system, "pendulum | rigid-body | double-integrator")->required();
  check_cmd->add_option("--lo", grid.lo, "lower end of the grid");
  check_cmd->add_option("--hi", grid.hi, "upper end of the grid");
  check_cmd->add_option("--points", grid.points, "number of grid points")->check(CLI::PositiveNumber);
  check_cmd->add_option("--out", check_out, "directory for summary.json");

  int samples = 50;
  bool inject = false;
  std::optional<std::string> verify_out;
  auto* verify_cmd = app.add_subcommand("verify-maps", "axioms and commutation of the discretization maps");
  verify_cmd->add_option("--samples", samples, "random points per map")->check(CLI::PositiveNumber);
  verify_cmd->add_flag("--inject-bad-map", inject)->group("");
  verify_cmd->add_option("--out", verify_out, "directory for summary.json");

  std::string order_system = "pendulum";
  std::vector<std::string> order_maps{"midpoint"};
  std::vector<double> h_list{0.01, 0.005, 0.0025, 0.00125};
  double order_t_final = 1.0;
  std::string order_out = ".";
  auto* order_cmd = app.add_subcommand("order-study", "global error against step size");
  order_cmd->add_option("--system", order_system, "pendulum | so3");
  order_cmd->add_option("--maps", order_maps, "maps to study (pendulum only)");
  order_cmd->add_option("--h", h_list, "step sizes");
  order_cmd->add_option("--t-final", order_t_final, "final time [s]");
  order_cmd->add_option("--out", order_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e);
    return status == 0 ? 0 : 4;
  }

  try {
    if (*pendulum_cmd) return simulate_pendulum(pendulum_flags);
    if (*so3_cmd) return simulate_so3(so3_flags);
    if (*check_cmd) return check(check_system, grid, check_out);
    if (*verify_cmd) return verify(samples, inject, verify_out);
    if (*order_cmd) return order(order_system, order_maps, h_list, order_t_final, order_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  }
  return 4;
}
