#pragma once

// The two worked experiments (inertia wheel pendulum, rigid body on SO(3)),
// the condition checker registry, map verification and order studies, with
// their CSV / JSON outputs.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "fldisc/integrators.hpp"
#include "fldisc/linearizability.hpp"

namespace fldisc {

struct ExperimentConfig {
  std::string system = "pendulum";
  double h = 0.01;
  double t_final = 1.0;
  std::vector<double> initial_state;  // pendulum: (x1, x2, y1, y2); so3: (xi, Omega)
  std::string map = "midpoint";
  std::vector<double> poles;          // pendulum, real closed-loop poles
  std::vector<double> gains;          // so3: scalar K1, K2 (times identity)
  double reference_tol = 1e-10;
  std::string output_dir = ".";

  static ExperimentConfig pendulum_defaults();
  static ExperimentConfig so3_defaults();

  /// Throws InvalidArgument on a non-positive h or t_final, an unknown map or
  /// a mis-sized initial state.
  void validate() const;
  int steps() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
/// Keys absent from `j` keep their current values in `c`.
void from_json(const nlohmann::json& j, ExperimentConfig& c);

struct PendulumRun {
  ExperimentConfig config;
  GainMatrix gains;
  Trajectory trajectory;
  std::vector<CoordState> reference;  // continuous closed loop at t_k
  std::vector<double> e1;             // |theta1_k - theta1(t_k)|
  std::vector<double> ed1;            // |dtheta1_k - dtheta1(t_k)|
  double max_e1 = 0.0;
  double max_ed1 = 0.0;
  double max_conjugacy_defect = 0.0;  // |T phi(s_{k+1}) - Cayley T phi(s_k)|
};

PendulumRun run_pendulum(const ExperimentConfig& config);

/// Reference for the pendulum: the linear closed loop z' = (A - B K) z from
/// T phi(s0), sampled at `times` and pulled back through (T phi)^{-1}.
std::vector<CoordState> pendulum_reference(const MechanicalBundle& bundle, const GainMatrix& gains,
                                           const CoordState& s0, const std::vector<double>& times,
                                           double tol);

struct So3Run {
  ExperimentConfig config;
  std::vector<double> t;
  std::vector<Rotation> rotations;
  std::vector<AngularVelocity> velocities;
  std::vector<double> trace_err;      // Tr(I - R_k)
  std::vector<double> trace_err_ref;  // same for the continuous closed loop
  double max_orthogonality_defect = 0.0;
  double max_det_defect = 0.0;
};

So3Run run_so3(const ExperimentConfig& config);

/// Continuous closed loop in (xi, Omega):
/// xi' = J_r(xi)^{-1} Omega, Omega' = -K1 xi - K2 Omega.
Vec so3_reference_field(const Vec& z, double k1, double k2);

void write_pendulum_outputs(const PendulumRun& run, const std::filesystem::path& dir);
void write_so3_outputs(const So3Run& run, const std::filesystem::path& dir);

/// Systems known to the checker: "pendulum", "rigid-body", "double-integrator".
MechanicalSystem registered_system(const std::string& name);

struct GridSpec {
  double lo = -1.3;
  double hi = 1.3;
  int points = 21;
};

/// Samples along x1 for the planar systems and along a fixed direction of the
/// exponential chart for the rigid body.
std::vector<Vec> sample_grid(const std::string& system, const GridSpec& grid);

struct CheckOutcome {
  std::string system;
  std::vector<ConditionReport> reports;  // planar (if n = 2, m = 1) then general
  bool passed = false;
};

CheckOutcome run_check(const std::string& system, const GridSpec& grid);

struct MapCheck {
  std::string name;
  double worst_zero_section = 0.0;
  double worst_identity = 0.0;
  bool passed = false;
};

struct MapsReport {
  std::vector<MapCheck> maps;
  double worst_phi_commutation = 0.0;      // (phi x phi) o R_phi vs R o T phi
  double worst_tangent_commutation = 0.0;  // T(R_phi) vs (R^T)_{T phi}
  double commutation_tolerance = 1e-8;
  bool passed = false;
};

/// Axioms of every built-in map, its tangent lift and its pendulum lift, and the
/// two commutation identities. `inject_bad_map` adds (x, v) -> (x, x + 2v).
MapsReport verify_maps(int samples = 50, bool inject_bad_map = false, unsigned seed = 20240521u);

struct OrderRow {
  std::string scheme;
  OrderStudy study;
};

/// Pendulum closed loop with each named map, or the SO(3) scheme (maps ignored).
/// An empty initial state selects the system's experiment default.
std::vector<OrderRow> run_order_study(const std::string& system, const std::vector<std::string>& maps,
                                      const std::vector<double>& h_list, double t_final,
                                      const std::vector<double>& initial_state = {});

void write_order_study(const std::vector<OrderRow>& rows, const std::filesystem::path& dir);

nlohmann::json to_json(const PendulumRun& run);
nlohmann::json to_json(const So3Run& run);
nlohmann::json to_json(const CheckOutcome& outcome);
nlohmann::json to_json(const MapsReport& report);
nlohmann::json to_json(const std::vector<OrderRow>& rows);

/// Writes `summary` as summary.json under `dir`; throws IoFailure.
void write_summary(const nlohmann::json& summary, const std::filesystem::path& dir);

/// Process exit status for a library failure: 4 for usage errors (bad
/// arguments, unknown system), 3 for I/O, 2 for every numerical failure.
int exit_code(ErrorCode code);

/// 17 significant digits, enough to round-trip a double.
std::string format_number(double v);

}  // namespace fldisc
