#pragma once

// Sampled numeric checks of the mechanical feedback linearizability
// conditions: ML1-ML5 for general systems, MD1-MD3 for planar single-input ones.

#include <string>
#include <vector>

#include "fldisc/mechanics.hpp"

namespace fldisc {

struct LinearizabilityOptions {
  double rank_tol = 1e-8;        // relative singular-value threshold
  double membership_tol = 1e-6;  // relative to the scale of the tested vector
  double step = kHessianStep;    // Richardson-extrapolated central differences
};

/// Richardson-extrapolated central-difference Jacobian (error O(step^4)).
Mat richardson_jacobian(const VectorFunction& f, const Vec& x, double step = kHessianStep);

/// [X, Y](x) = DY(x) X(x) - DX(x) Y(x).
Vec lie_bracket(const VectorFunction& X, const VectorFunction& Y, const Vec& x,
                double step = kHessianStep);

/// (nabla_X Y)^i = dY^i/dx^j X^j + Gamma^i_{jk} X^j Y^k.
Vec covariant_derivative(const MechanicalSystem& sys, const VectorFunction& X,
                         const VectorFunction& Y, const Vec& x, double step = kHessianStep);

/// nabla^2_{X,Y} Z = nabla_X (nabla_Y Z) - nabla_{nabla_X Y} Z.
Vec second_covariant_derivative(const MechanicalSystem& sys, const VectorFunction& X,
                                const VectorFunction& Y, const VectorFunction& Z, const Vec& x,
                                double step = kHessianStep);

/// Dense rank-4 array R^i_{jkl}.
class CurvatureTensor {
 public:
  explicit CurvatureTensor(Eigen::Index n) : n_(n), data_(static_cast<std::size_t>(n * n * n * n), 0.0) {}

  Eigen::Index dim() const { return n_; }
  double& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k, Eigen::Index l) {
    return data_[index(i, j, k, l)];
  }
  double operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k, Eigen::Index l) const {
    return data_[index(i, j, k, l)];
  }
  double max_abs() const;

 private:
  std::size_t index(Eigen::Index i, Eigen::Index j, Eigen::Index k, Eigen::Index l) const {
    return static_cast<std::size_t>(((i * n_ + j) * n_ + k) * n_ + l);
  }

  Eigen::Index n_;
  std::vector<double> data_;
};

/// R^i_{jkl} = d_k Gamma^i_{lj} - d_l Gamma^i_{kj} + Gamma^i_{km} Gamma^m_{lj} - Gamma^i_{lm} Gamma^m_{kj}.
CurvatureTensor curvature_tensor(const MechanicalSystem& sys, const Vec& x,
                                 double step = kHessianStep);

enum class Verdict { Pass, Fail, Inconclusive };

std::string to_string(Verdict v);

struct ConditionResult {
  std::string name;
  Verdict verdict = Verdict::Inconclusive;
  double worst_value = 0.0;  // meaning given by `metric`
  std::string metric;
  double tolerance = 0.0;
  Vec witness;  // set whenever verdict is Fail
  std::string note;
};

struct ConditionReport {
  std::vector<ConditionResult> conditions;
  std::vector<std::string> warnings;

  bool passed() const;
  const ConditionResult* find(const std::string& name) const;
};

/// MD1-MD3 for n = 2, m = 1. Consecutive samples whose det[g | ad_e g] changes
/// sign are bisected; the root is reported as an MD1 failure witness.
ConditionReport check_planar(const MechanicalSystem& sys, const std::vector<Vec>& samples,
                             const LinearizabilityOptions& options = {});

/// ML1-ML5 for any (n, m).
ConditionReport check_general(const MechanicalSystem& sys, const std::vector<Vec>& samples,
                              const LinearizabilityOptions& options = {});

}  // namespace fldisc
