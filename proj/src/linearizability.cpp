#include "fldisc/linearizability.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace fldisc {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

bool ConditionReport::passed() const {
  return !conditions.empty() &&
         std::all_of(conditions.begin(), conditions.end(),
                     [](const ConditionResult& c) { return c.verdict == Verdict::Pass; });
}

const ConditionResult* ConditionReport::find(const std::string& name) const {
  for (const auto& c : conditions) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

double CurvatureTensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Mat richardson_jacobian(const VectorFunction& f, const Vec& x, double step) {
  const Mat coarse = numeric_jacobian(f, x, step);
  const Mat fine = numeric_jacobian(f, x, 0.5 * step);
  return (4.0 * fine - coarse) / 3.0;
}

Vec lie_bracket(const VectorFunction& X, const VectorFunction& Y, const Vec& x, double step) {
  return richardson_jacobian(Y, x, step) * X(x) - richardson_jacobian(X, x, step) * Y(x);
}

Vec covariant_derivative(const MechanicalSystem& sys, const VectorFunction& X,
                         const VectorFunction& Y, const Vec& x, double step) {
  const Vec xv = X(x);
  const Vec yv = Y(x);
  if (xv.size() != sys.n() || yv.size() != sys.n()) {
    throw Error(ErrorCode::DimensionMismatch, "vector fields must have the system dimension");
  }
  const Vec out = richardson_jacobian(Y, x, step) * xv + contract(sys.gamma(x), xv, yv);
  if (!out.allFinite()) {
    throw Error(ErrorCode::NonFinite, "covariant derivative is not finite");
  }
  return out;
}

Vec second_covariant_derivative(const MechanicalSystem& sys, const VectorFunction& X,
                                const VectorFunction& Y, const VectorFunction& Z, const Vec& x,
                                double step) {
  const VectorFunction nabla_y_z = [&](const Vec& p) {
    return covariant_derivative(sys, Y, Z, p, step);
  };
  const Vec outer = covariant_derivative(sys, X, nabla_y_z, x, step);
  const Vec nabla_x_y = covariant_derivative(sys, X, Y, x, step);
  const VectorFunction constant = [nabla_x_y](const Vec&) { return nabla_x_y; };
  return outer - covariant_derivative(sys, constant, Z, x, step);
}

namespace {

Vec flatten(const Christoffel& g) {
  const auto n = static_cast<Eigen::Index>(g.size());
  Vec out(n * n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index k = 0; k < n; ++k) {
        out((i * n + j) * n + k) = g[static_cast<std::size_t>(i)](j, k);
      }
    }
  }
  return out;
}

double max_abs(const Christoffel& g) {
  double m = 0.0;
  for (const Mat& gi : g) m = std::max(m, gi.size() ? gi.cwiseAbs().maxCoeff() : 0.0);
  return m;
}

}  // namespace

CurvatureTensor curvature_tensor(const MechanicalSystem& sys, const Vec& x, double step) {
  const auto n = sys.n();
  const Christoffel g = sys.gamma(x);
  // dg((i n + j) n + k, l) = d_l Gamma^i_{jk}
  const Mat dg = richardson_jacobian([&](const Vec& p) { return flatten(sys.gamma(p)); }, x, step);
  if (!dg.allFinite()) {
    throw Error(ErrorCode::NonFinite, "Christoffel derivative is not finite");
  }
  const auto G = [&](Eigen::Index i, Eigen::Index j, Eigen::Index k) {
    return g[static_cast<std::size_t>(i)](j, k);
  };
  const auto dG = [&](Eigen::Index l, Eigen::Index i, Eigen::Index j, Eigen::Index k) {
    return dg((i * n + j) * n + k, l);
  };
  CurvatureTensor r(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index l = 0; l < n; ++l) {
          double v = dG(k, i, l, j) - dG(l, i, k, j);
          for (Eigen::Index m = 0; m < n; ++m) {
            v += G(i, k, m) * G(m, l, j) - G(i, l, m) * G(m, k, j);
          }
          r(i, j, k, l) = v;
        }
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {

struct RankInfo {
  Eigen::Index rank = 0;
  double smallest_kept_ratio = 1.0;  // smallest sigma_i / sigma_max among kept values
  double largest_dropped_ratio = 0.0;
  Mat u;  // full left singular basis
};

RankInfo numeric_rank(const Mat& m, double rank_tol) {
  RankInfo info;
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU);
  info.u = svd.matrixU();
  const Vec& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) {
    return info;
  }
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double ratio = s(i) / s(0);
    if (ratio > rank_tol) {
      ++info.rank;
      info.smallest_kept_ratio = std::min(info.smallest_kept_ratio, ratio);
    } else {
      info.largest_dropped_ratio = std::max(info.largest_dropped_ratio, ratio);
    }
  }
  return info;
}

/// Component of v outside the span of the first `rank` columns of u.
Vec out_of_span(const Mat& u, Eigen::Index rank, const Vec& v) {
  if (rank == 0) return v;
  const Mat basis = u.leftCols(rank);
  return v - basis * (basis.transpose() * v);
}

double relative(double value, double scale) { return scale > 0.0 ? value / scale : 0.0; }

struct Worst {
  double value = 0.0;
  Vec witness;

  void update(double v, const Vec& x) {
    if (witness.size() == 0 || v > value) {
      value = v;
      witness = x;
    }
  }
};

ConditionResult membership_result(std::string name, const Worst& w, double tol, std::string metric) {
  ConditionResult c;
  c.name = std::move(name);
  c.worst_value = w.value;
  c.metric = std::move(metric);
  c.tolerance = tol;
  c.verdict = w.value < tol ? Verdict::Pass : Verdict::Fail;
  if (c.verdict == Verdict::Fail) c.witness = w.witness;
  return c;
}

ConditionReport inconclusive(const std::vector<std::string>& names) {
  ConditionReport report;
  for (const auto& n : names) {
    ConditionResult c;
    c.name = n;
    c.note = "no samples";
    report.conditions.push_back(c);
  }
  return report;
}

VectorFunction constant_field(const Vec& v) {
  return [v](const Vec&) { return v; };
}

}  // namespace

ConditionReport check_planar(const MechanicalSystem& sys, const std::vector<Vec>& samples,
                             const LinearizabilityOptions& opt) {
  if (sys.n() != 2 || sys.m() != 1) {
    throw Error(ErrorCode::WrongDimensions, "planar check needs n = 2 and m = 1");
  }
  if (samples.empty()) {
    return inconclusive({"MD1", "MD2", "MD3"});
  }
  const VectorFunction g = sys.control_field(0);
  const VectorFunction e = sys.drift_field();
  const VectorFunction ad_e_g = [&](const Vec& x) { return lie_bracket(e, g, x, opt.step); };

  const auto independence = [&](const Vec& x, double* det) {
    Mat m(2, 2);
    m << g(x), ad_e_g(x);
    if (det) *det = m.determinant();
    const Eigen::JacobiSVD<Mat> svd(m);
    const Vec& s = svd.singularValues();
    return s(0) > 0.0 ? s(1) / s(0) : 0.0;
  };

  ConditionReport report;
  double min_ratio = 1.0;
  Vec md1_witness;
  Worst md2;
  Worst md3;
  std::vector<double> dets;
  dets.reserve(samples.size());

  for (const Vec& x : samples) {
    double det = 0.0;
    const double ratio = independence(x, &det);
    dets.push_back(det);
    if (md1_witness.size() == 0 || ratio < min_ratio) {
      min_ratio = ratio;
      md1_witness = x;
    }

    const Vec gv = g(x);
    const Vec av = ad_e_g(x);
    Mat span(2, 1);
    span << gv;
    const RankInfo e0 = numeric_rank(span, opt.rank_tol);

    for (const VectorFunction& field : {g, ad_e_g}) {
      const Vec v = covariant_derivative(sys, field, g, x, opt.step);
      const double scale = std::max(v.norm(), field(x).norm() * gv.norm());
      md2.update(relative(out_of_span(e0.u, e0.rank, v).norm(), scale), x);
    }

    const Vec t1 = second_covariant_derivative(sys, g, ad_e_g, ad_e_g, x, opt.step);
    const Vec t2 = second_covariant_derivative(sys, ad_e_g, g, ad_e_g, x, opt.step);
    const double scale = std::max({t1.norm(), t2.norm(), gv.norm() * av.squaredNorm()});
    md3.update(relative(out_of_span(e0.u, e0.rank, t1 - t2).norm(), scale), x);
  }

  ConditionResult md1;
  md1.name = "MD1";
  md1.metric = "min sigma_min/sigma_max of [g | ad_e g]";
  md1.tolerance = opt.rank_tol;
  md1.worst_value = min_ratio;
  md1.verdict = min_ratio > opt.rank_tol ? Verdict::Pass : Verdict::Fail;
  if (md1.verdict == Verdict::Fail) md1.witness = md1_witness;

  // Independence can be lost strictly between two samples; locate it by bisection.
  for (std::size_t i = 0; i + 1 < samples.size() && md1.verdict == Verdict::Pass; ++i) {
    if (dets[i] * dets[i + 1] >= 0.0) continue;
    Vec lo = samples[i];
    Vec hi = samples[i + 1];
    double det_lo = dets[i];
    for (int it = 0; it < 200 && (hi - lo).norm() > 1e-14 * (1.0 + lo.norm()); ++it) {
      const Vec mid = 0.5 * (lo + hi);
      double det_mid = 0.0;
      independence(mid, &det_mid);
      if (det_mid == 0.0) {
        lo = hi = mid;
        break;
      }
      if ((det_mid < 0.0) == (det_lo < 0.0)) {
        lo = mid;
        det_lo = det_mid;
      } else {
        hi = mid;
      }
    }
    md1.verdict = Verdict::Fail;
    md1.witness = 0.5 * (lo + hi);
    md1.worst_value = independence(md1.witness, nullptr);
    md1.note = "det[g | ad_e g] changes sign between consecutive samples";
  }
  report.conditions.push_back(md1);
  report.conditions.push_back(membership_result(
      "MD2", md2, opt.membership_tol, "relative residual of nabla_g g, nabla_{ad_e g} g outside E0"));
  report.conditions.push_back(membership_result(
      "MD3", md3, opt.membership_tol,
      "relative residual of nabla^2_{g,ad_e g} ad_e g - nabla^2_{ad_e g,g} ad_e g outside E0"));

  if (min_ratio > opt.rank_tol && min_ratio <= 10.0 * opt.rank_tol) {
    report.warnings.push_back("MD1 independence margin is within 10x of rank_tol");
  }
  return report;
}

ConditionReport check_general(const MechanicalSystem& sys, const std::vector<Vec>& samples,
                              const LinearizabilityOptions& opt) {
  if (samples.empty()) {
    return inconclusive({"ML1", "ML2", "ML3", "ML4", "ML5"});
  }
  const auto n = sys.n();
  const auto m = sys.m();
  const VectorFunction e = sys.drift_field();
  std::vector<VectorFunction> g;
  for (Eigen::Index r = 0; r < m; ++r) g.push_back(sys.control_field(r));

  std::vector<Eigen::Index> rank0;
  std::vector<Eigen::Index> rank1;
  bool near_threshold = false;
  Worst ml2, ml3, ml4, ml5;

  for (const Vec& x : samples) {
    const Mat gm = sys.controls(x);
    Mat e1(n, 2 * m);
    e1.leftCols(m) = gm;
    for (Eigen::Index r = 0; r < m; ++r) {
      e1.col(m + r) = lie_bracket(e, g[static_cast<std::size_t>(r)], x, opt.step);
    }
    const RankInfo r0 = numeric_rank(gm, opt.rank_tol);
    const RankInfo r1 = numeric_rank(e1, opt.rank_tol);
    rank0.push_back(r0.rank);
    rank1.push_back(r1.rank);
    for (const RankInfo* ri : {&r0, &r1}) {
      if (ri->smallest_kept_ratio <= 10.0 * opt.rank_tol ||
          (ri->largest_dropped_ratio > 0.1 * opt.rank_tol)) {
        near_threshold = true;
      }
    }

    // ML2: brackets of control fields stay in E0.
    double worst2 = 0.0;
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index s = r + 1; s < m; ++s) {
        const Vec b = lie_bracket(g[static_cast<std::size_t>(r)], g[static_cast<std::size_t>(s)], x, opt.step);
        const double scale = std::max(b.norm(), gm.col(r).norm() * gm.col(s).norm());
        worst2 = std::max(worst2, relative(out_of_span(r0.u, r0.rank, b).norm(), scale));
      }
    }
    ml2.update(worst2, x);

    const Mat ann0 = r0.u.rightCols(n - r0.rank);
    const Mat ann1 = r1.u.rightCols(n - r1.rank);
    const Christoffel gamma = sys.gamma(x);
    const double gamma_max = max_abs(gamma);

    // ML3: curvature values lie in E0.
    double worst3 = 0.0;
    if (ann0.cols() > 0) {
      const CurvatureTensor curv = curvature_tensor(sys, x, opt.step);
      const double scale = std::max(curv.max_abs(), gamma_max * gamma_max);
      for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index k = 0; k < n; ++k) {
          for (Eigen::Index l = 0; l < n; ++l) {
            Vec col(n);
            for (Eigen::Index i = 0; i < n; ++i) col(i) = curv(i, j, k, l);
            worst3 = std::max(worst3, relative((ann0.transpose() * col).cwiseAbs().maxCoeff(), scale));
          }
        }
      }
    }
    ml3.update(worst3, x);

    // ML4: nabla g_r takes values in E0.
    double worst4 = 0.0;
    if (ann0.cols() > 0) {
      for (Eigen::Index r = 0; r < m; ++r) {
        const Vec gr = gm.col(r);
        const Mat dg = richardson_jacobian(g[static_cast<std::size_t>(r)], x, opt.step);
        Mat nabla(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
          nabla.col(j) = dg.col(j) + contract(gamma, Vec::Unit(n, j), gr);
        }
        const double scale = std::max({nabla.cwiseAbs().maxCoeff(), dg.cwiseAbs().maxCoeff(),
                                       gamma_max * gr.cwiseAbs().maxCoeff()});
        worst4 = std::max(worst4, relative((ann0.transpose() * nabla).cwiseAbs().maxCoeff(), scale));
      }
    }
    ml4.update(worst4, x);

    // ML5: nabla^2 e takes values in E1.
    double worst5 = 0.0;
    if (ann1.cols() > 0) {
      double scale = std::max(e(x).cwiseAbs().maxCoeff(),
                              richardson_jacobian(e, x, opt.step).cwiseAbs().maxCoeff());
      std::vector<Vec> cols;
      for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index k = 0; k < n; ++k) {
          cols.push_back(second_covariant_derivative(sys, constant_field(Vec::Unit(n, j)),
                                                     constant_field(Vec::Unit(n, k)), e, x, opt.step));
          scale = std::max(scale, cols.back().cwiseAbs().maxCoeff());
        }
      }
      for (const Vec& c : cols) {
        worst5 = std::max(worst5, relative((ann1.transpose() * c).cwiseAbs().maxCoeff(), scale));
      }
    }
    ml5.update(worst5, x);
  }

  ConditionReport report;

  // ML1: the modal ranks must hold at every sample.
  ConditionResult ml1;
  ml1.name = "ML1";
  ml1.metric = "number of samples whose rank of E0 or E1 differs from the modal rank";
  ml1.tolerance = 0.0;
  const auto mode = [](const std::vector<Eigen::Index>& ranks) {
    std::map<Eigen::Index, int> counts;
    for (auto r : ranks) ++counts[r];
    return std::max_element(counts.begin(), counts.end(),
                            [](const auto& a, const auto& b) { return a.second < b.second; })
        ->first;
  };
  const auto mode0 = mode(rank0);
  const auto mode1 = mode(rank1);
  int deviating = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (rank0[i] != mode0 || rank1[i] != mode1) {
      if (deviating == 0) ml1.witness = samples[i];
      ++deviating;
    }
  }
  ml1.worst_value = deviating;
  ml1.verdict = deviating == 0 ? Verdict::Pass : Verdict::Fail;
  std::ostringstream note;
  note << "rank E0 = " << mode0 << ", rank E1 = " << mode1;
  ml1.note = note.str();
  report.conditions.push_back(ml1);

  report.conditions.push_back(
      membership_result("ML2", ml2, opt.membership_tol, "relative residual of [g_r, g_s] outside E0"));
  report.conditions.push_back(membership_result(
      "ML3", ml3, opt.membership_tol, "relative size of curvature values outside E0"));
  report.conditions.push_back(membership_result(
      "ML4", ml4, opt.membership_tol, "relative size of nabla g_r values outside E0"));
  report.conditions.push_back(membership_result(
      "ML5", ml5, opt.membership_tol, "relative size of nabla^2 e values outside E1"));
  if (near_threshold) {
    report.warnings.push_back("a singular-value ratio lies within 10x of rank_tol");
  }
  return report;
}

}  // namespace fldisc
