// Acceptance suite: one PASS/FAIL line per criterion. With a criterion number
// as argument only that criterion runs, and the exit status reflects it.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fldisc/experiments.hpp"

using namespace fldisc;

namespace {

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) passed = false;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [violated]");
  }
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

const std::vector<std::complex<double>> kPendulumPoles{-10.0, -20.0, -30.0, -40.0};

// Coefficients of det(sI - A), highest power first, by Faddeev-LeVerrier.
std::vector<double> characteristic_polynomial(const Mat& a) {
  const Eigen::Index n = a.rows();
  std::vector<double> c{1.0};
  Mat m = Mat::Zero(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    m = a * m + c.back() * Mat::Identity(n, n);
    c.push_back(-(a * m).trace() / static_cast<double>(k));
  }
  return c;
}

Outcome pole_placement() {
  Outcome o;
  const auto bundle = pendulum_system();
  const Mat k = pole_place(bundle.lms, kPendulumPoles).k;
  const std::vector<double> expected{240000.0, 3500.0, 50000.0, 100.0};
  double worst = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    worst = std::max(worst, std::abs(k(0, static_cast<Eigen::Index>(i)) - expected[i]) / expected[i]);
  }
  o.require(worst < 1e-6, "max relative gain error " + sci(worst) + " < 1e-6");

  const auto poly =
      characteristic_polynomial(bundle.lms.stacked_a() - bundle.lms.stacked_b() * k);
  const std::vector<double> hand{1.0, 100.0, 3500.0, 50000.0, 240000.0};
  double poly_err = 0.0;
  for (std::size_t i = 0; i < hand.size(); ++i) poly_err = std::max(poly_err, std::abs(poly[i] - hand[i]) / hand[i]);
  o.require(poly_err < 1e-9, "closed-loop characteristic polynomial error " + sci(poly_err));
  return o;
}

Outcome map_axioms() {
  Outcome o;
  const auto report = verify_maps(50);
  double zero = 0.0, ident = 0.0;
  for (const auto& m : report.maps) {
    zero = std::max(zero, m.worst_zero_section);
    ident = std::max(ident, m.worst_identity);
  }
  o.require(report.maps.size() == 9, std::to_string(report.maps.size()) + " maps checked");
  o.require(zero < 1e-10, "zero-section defect " + sci(zero) + " < 1e-10");
  o.require(ident < 1e-6, "identity defect " + sci(ident) + " < 1e-6");
  return o;
}

Outcome commutation() {
  Outcome o;
  const auto report = verify_maps(100);
  o.require(report.worst_phi_commutation < 1e-8, "phi-lift diagram " + sci(report.worst_phi_commutation) + " < 1e-8");
  o.require(report.worst_tangent_commutation < 1e-8,
            "tangent-lift diagram " + sci(report.worst_tangent_commutation) + " < 1e-8");
  return o;
}

Outcome conjugacy() {
  Outcome o;
  const auto run = run_pendulum(ExperimentConfig::pendulum_defaults());
  o.require(run.trajectory.t.size() == 101, "100 steps");
  o.require(run.max_conjugacy_defect < 1e-8, "conjugacy defect " + sci(run.max_conjugacy_defect) + " < 1e-8");

  // Independent check of the linear side: T phi(s_k) against powers of the Cayley matrix.
  const auto bundle = pendulum_system();
  const Mat a_cl = bundle.lms.stacked_a() - bundle.lms.stacked_b() * run.gains.k;
  const Mat step = cayley_matrix(a_cl, run.config.h);
  const Diffeomorphism tphi = tangent_map(bundle.transform.phi);
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < run.trajectory.states.size(); ++i) {
    const Vec zk = tphi.apply(run.trajectory.states[i].stacked());
    const Vec zk1 = tphi.apply(run.trajectory.states[i + 1].stacked());
    worst = std::max(worst, (zk1 - step * zk).cwiseAbs().maxCoeff());
  }
  o.require(worst < 1e-8, "Cayley conjugacy " + sci(worst) + " < 1e-8");
  o.require(run.max_e1 < 5e-3, "max |theta1 error| " + sci(run.max_e1) + " < 5e-3");
  return o;
}

double harmonic_oscillator_slope() {
  // q'' = -q with the midpoint-lifted SODE scheme; exact flow in closed form.
  const auto sys = MechanicalSystem::linear(Mat::Constant(1, 1, -1.0), Mat::Zero(1, 1));
  const auto lifted = tangent_lift(make_midpoint(1));
  const ControlSupplier none = [](const CoordState&) { return Vec(Vec::Zero(1)); };
  const FixedStepper stepper = [&](const Vec& s0, double h, int steps) {
    CoordState s = CoordState::from_stacked(s0);
    for (int k = 0; k < steps; ++k) s = step_sode(lifted, sys, none, s, h).state;
    return s.stacked();
  };
  const ReferenceSolver exact = [](const Vec& s0, double t) {
    Vec out(2);
    out << s0(0) * std::cos(t) + s0(1) * std::sin(t), -s0(0) * std::sin(t) + s0(1) * std::cos(t);
    return out;
  };
  Vec s0(2);
  s0 << 1.0, 0.0;
  return order_study(stepper, exact, s0, 10.0, {0.1, 0.05, 0.025, 0.0125}).slope.value_or(NAN);
}

Outcome convergence_orders() {
  Outcome o;
  const std::vector<double> h_list{0.01, 0.005, 0.0025, 0.00125};
  const auto pendulum = run_order_study("pendulum", {"midpoint"}, h_list, 1.0);
  const double p = pendulum[0].study.slope.value_or(NAN);
  o.require(std::abs(p - 2.0) <= 0.2, "pendulum midpoint slope " + sci(p));
  const double osc = harmonic_oscillator_slope();
  o.require(std::abs(osc - 2.0) <= 0.2, "harmonic oscillator midpoint slope " + sci(osc));
  const auto so3 = run_order_study("so3", {}, {0.02, 0.01, 0.005, 0.0025}, 1.0);
  const double s = so3[0].study.slope.value_or(NAN);
  o.require(std::abs(s - 1.0) <= 0.2, "SO(3) scheme slope " + sci(s));
  return o;
}

Outcome so3_structure() {
  Outcome o;
  const auto run = run_so3(ExperimentConfig::so3_defaults());
  o.require(run.t.size() == 1001, "1000 steps");
  o.require(run.max_orthogonality_defect < 1e-12, "|R^T R - I| " + sci(run.max_orthogonality_defect) + " < 1e-12");
  o.require(run.max_det_defect < 1e-12, "|det R - 1| " + sci(run.max_det_defect) + " < 1e-12");
  o.require(run.trace_err.front() == 2.0, "trace error starts at " + sci(run.trace_err.front()));
  o.require(run.trace_err.back() < 1e-3, "trace error at t = 10 " + sci(run.trace_err.back()) + " < 1e-3");
  const double w = run.velocities.back().vector().cwiseAbs().maxCoeff();
  o.require(w < 1e-3, "max |Omega_i(10)| " + sci(w) + " < 1e-3");
  return o;
}

Outcome linearizability_verdicts() {
  Outcome o;
  const auto valid = run_check("pendulum", {-1.3, 1.3, 27});
  bool md_pass = true;
  for (const char* name : {"MD1", "MD2", "MD3"}) {
    const auto* c = valid.reports[0].find(name);
    md_pass = md_pass && c != nullptr && c->verdict == Verdict::Pass;
  }
  o.require(md_pass, "MD1-MD3 pass for |x1| <= 1.3");

  const auto crossing = run_check("pendulum", {1.0, 2.0, 21});
  const auto* md1 = crossing.reports[0].find("MD1");
  const bool failed = md1 != nullptr && md1->verdict == Verdict::Fail && md1->witness.size() > 0;
  const double off = failed ? std::abs(md1->witness(0) - std::numbers::pi / 2.0) : INFINITY;
  o.require(failed && off < 1e-3, "MD1 fails across pi/2, witness off by " + sci(off));

  o.require(valid.reports.back().passed(), "ML1-ML5 pass for the pendulum");
  o.require(run_check("rigid-body", {-2.5, 2.5, 21}).passed, "ML1-ML5 pass for the rigid body");
  return o;
}

Outcome two_step_equivalence() {
  Outcome o;
  const auto bundle = pendulum_system();
  const auto sys = MechanicalSystem::linear(bundle.lms.a, bundle.lms.b);
  const double h = 0.01;
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  std::vector<Vec> inputs;
  for (int k = 0; k <= 100; ++k) inputs.push_back(Vec::Constant(1, u(rng)));

  double worst = 0.0;
  for (const char* name : {"explicit-euler", "implicit-euler", "midpoint"}) {
    const auto map = make_builtin(builtin_map_kind(name), 2);
    const auto rec = linear_two_step(bundle.lms, map, h);
    const auto lifted = tangent_lift(map);
    Vec s0(4);
    s0 << 0.3, -0.2, 0.5, 0.1;
    CoordState s = CoordState::from_stacked(s0);
    std::vector<Vec> xs{s.x()};
    for (std::size_t k = 0; k < 100; ++k) {
      const ControlSupplier input = [&](const CoordState&) { return inputs[k]; };
      s = step_sode(lifted, sys, input, s, h).state;
      xs.push_back(s.x());
    }
    for (std::size_t k = 0; k + 2 < xs.size(); ++k) {
      const Vec pred = rec.next(xs[k], xs[k + 1], inputs[k], inputs[k + 1]);
      worst = std::max(worst, (pred - xs[k + 2]).cwiseAbs().maxCoeff() / (1.0 + xs[k + 2].cwiseAbs().maxCoeff()));
    }
  }
  o.require(worst < 1e-10, "two-step vs one-step defect " + sci(worst) + " < 1e-10");
  return o;
}

struct Criterion {
  int number;
  const char* title;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "pole placement reproduces the reference gains", 1.0, pole_placement},
      {2, "discretization map axioms", 5.0, map_axioms},
      {3, "commutation diagrams", 5.0, commutation},
      {4, "closed-loop conjugacy and tracking", 10.0, conjugacy},
      {5, "convergence orders", 30.0, convergence_orders},
      {6, "SO(3) structure preservation and stabilization", 10.0, so3_structure},
      {7, "linearizability verdicts", 10.0, linearizability_verdicts},
      {8, "two-step recurrence equivalence", 5.0, two_step_equivalence},
  };
  const int only = argc > 1 ? std::atoi(argv[1]) : 0;
  if (argc > 1 && (only < 1 || only > static_cast<int>(criteria.size()))) {
    std::fprintf(stderr, "usage: %s [criterion 1-%zu]\n", argv[0], criteria.size());
    return 4;
  }

  int failures = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.number != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome.require(false, std::string("threw ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    outcome.require(seconds < c.budget_seconds, "runtime " + sci(seconds) + " s < " + sci(c.budget_seconds) + " s");
    std::printf("%s %d %s: %s\n", outcome.passed ? "PASS" : "FAIL", c.number, c.title, outcome.detail.str().c_str());
    if (!outcome.passed) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
