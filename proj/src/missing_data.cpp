#include "cmle/missing_data.hpp"

#include <cmath>
#include <numeric>

#include "cmle/asymptotics.hpp"

namespace cmle {

namespace {

constexpr double kDomainMargin = 1e-12;

// Sign pattern of the log cross-ratio over cells 00, 10, 01, 11.
constexpr std::array<double, 4> kCrossSign = {1.0, -1.0, -1.0, 1.0};

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Observable-cell probabilities (phi, completed s11) as a 12-vector.
Vec observable_probs(const Vec& phi) {
  Vec p(12);
  p.head(11) = phi;
  p[11] = 1.0 - phi.sum();
  return p;
}

// Completed-table cell masses  q1[c] = Pr(Y=1, cell c), q0[c] = Pr(Y=0, cell c).
struct CompletedCells {
  std::array<double, 4> q1;
  std::array<double, 4> q0;
};

CompletedCells completed_cells(const CellProbs& p) {
  CompletedCells q;
  for (int c = 0; c < 4; ++c) {
    q.q1[c] = p.r[4 + c] + p.s[c] * p.t[c];
    q.q0[c] = p.r[c] + p.s[c] * (1.0 - p.t[c]);
  }
  return q;
}

double checked_log(double x, const char* what) {
  if (!(x > 0.0))
    throw NonFiniteEvaluation(std::string("log of non-positive value in ") + what);
  return std::log(x);
}

}  // namespace

std::int64_t CellCounts::total() const {
  return std::accumulate(n.begin(), n.end(), std::int64_t{0}) +
         std::accumulate(m.begin(), m.end(), std::int64_t{0});
}

Vec CellCounts::as_data() const {
  Vec d(12);
  for (int i = 0; i < 8; ++i) d[i] = static_cast<double>(n[i]);
  for (int c = 0; c < 4; ++c) d[8 + c] = static_cast<double>(m[c]);
  return d;
}

CellProbs CellProbs::from_omega(const Vec& omega) {
  if (omega.size() != 15)
    throw Error("expected a 15-vector (phi, psi), got length " +
                std::to_string(omega.size()));
  CellProbs p;
  double tail = 1.0;
  for (int i = 0; i < 8; ++i) {
    p.r[i] = omega[i];
    tail -= omega[i];
  }
  for (int c = 0; c < 3; ++c) {
    p.s[c] = omega[8 + c];
    tail -= omega[8 + c];
  }
  p.s[3] = tail;
  for (int c = 0; c < 4; ++c) p.t[c] = omega[11 + c];
  return p;
}

CellProbs CellProbs::from_point(const ParamPoint& point) {
  return from_omega(point.flat());
}

Vec CellProbs::omega() const {
  Vec w(15);
  for (int i = 0; i < 8; ++i) w[i] = r[i];
  for (int c = 0; c < 3; ++c) w[8 + c] = s[c];
  for (int c = 0; c < 4; ++c) w[11 + c] = t[c];
  return w;
}

bool CellProbs::valid(double margin) const {
  const auto open_unit = [margin](double x) {
    return std::isfinite(x) && x > margin && x < 1.0 - margin;
  };
  double sum = 0.0;
  for (double x : r) {
    if (!open_unit(x)) return false;
    sum += x;
  }
  for (double x : s) {
    if (!open_unit(x)) return false;
    sum += x;
  }
  for (double x : t)
    if (!open_unit(x)) return false;
  return std::abs(sum - 1.0) <= 1e-12;
}

bool LogisticParams::valid() const {
  if (!std::isfinite(beta0) || !std::isfinite(beta1) || !std::isfinite(beta2) ||
      !std::isfinite(beta3))
    return false;
  double sum = 0.0;
  for (double x : px) {
    if (!(x > 0.0 && x < 1.0)) return false;
    sum += x;
  }
  for (double x : pr0_given_x)
    if (!(x > 0.0 && x < 1.0)) return false;
  return std::abs(sum - 1.0) <= 1e-12;
}

LogisticParams default_study_params() {
  LogisticParams p;
  p.beta0 = std::log(0.1 / 0.9);
  p.beta1 = std::log(2.0);
  p.beta2 = std::log(3.0);
  p.beta3 = 0.0;
  p.px = {0.4, 0.3, 0.2, 0.1};
  p.pr0_given_x = {0.2, 0.1, 0.05, 0.05};
  return p;
}

const char* to_string(ModelVariant v) {
  return v == ModelVariant::Full ? "full" : "mar-only";
}

double loglik_cells(const CellCounts& counts, const CellProbs& probs) {
  double ll = 0.0;
  for (int i = 0; i < 8; ++i)
    if (counts.n[i] > 0)
      ll += static_cast<double>(counts.n[i]) * checked_log(probs.r[i], "log-likelihood");
  for (int c = 0; c < 4; ++c)
    if (counts.m[c] > 0)
      ll += static_cast<double>(counts.m[c]) * checked_log(probs.s[c], "log-likelihood");
  return ll;
}

Vec mar_constraints(const CellProbs& probs) {
  Vec h(4);
  for (int c = 0; c < 4; ++c) {
    h[c] = checked_log(probs.t[c], "MAR constraint") -
           checked_log(1.0 - probs.t[c], "MAR constraint") -
           checked_log(probs.r[4 + c], "MAR constraint") +
           checked_log(probs.r[c], "MAR constraint");
  }
  return h;
}

double additivity_constraint(const CellProbs& probs) {
  const CompletedCells q = completed_cells(probs);
  double h = 0.0;
  for (int c = 0; c < 4; ++c)
    h += kCrossSign[c] * (checked_log(q.q1[c], "additivity constraint") -
                          checked_log(q.q0[c], "additivity constraint"));
  return h;
}

BetaPair recover_betas(const CellProbs& probs) {
  const CompletedCells q = completed_cells(probs);
  const auto lgt = [&](int c) {
    return checked_log(q.q1[c], "effect recovery") -
           checked_log(q.q0[c], "effect recovery");
  };
  BetaPair b;
  b.beta1 = lgt(cell_index(1, 0)) - lgt(cell_index(0, 0));
  b.beta2 = lgt(cell_index(0, 1)) - lgt(cell_index(0, 0));
  return b;
}

BetaSE beta_standard_errors(const CellProbs& probs, const Mat& param_cov,
                            double n, const NumDiffConfig& cfg) {
  if (param_cov.rows() != 15 || param_cov.cols() != 15)
    throw Error("param_cov must be 15x15 in (phi, psi) order");
  const Vec omega = probs.omega();
  BetaSE se;
  se.se1 = delta_method(
      [](const Vec& w) { return recover_betas(CellProbs::from_omega(w)).beta1; },
      omega, param_cov, n, cfg);
  se.se2 = delta_method(
      [](const Vec& w) { return recover_betas(CellProbs::from_omega(w)).beta2; },
      omega, param_cov, n, cfg);
  return se;
}

CellProbs true_cell_probs(const LogisticParams& params) {
  CellProbs p;
  for (int k = 0; k < 2; ++k) {
    for (int j = 0; j < 2; ++j) {
      const int c = cell_index(j, k);
      const double py1 = logistic(params.beta0 + params.beta1 * j +
                                  params.beta2 * k + params.beta3 * j * k);
      const double observed = params.px[c] * (1.0 - params.pr0_given_x[c]);
      p.r[c] = observed * (1.0 - py1);
      p.r[4 + c] = observed * py1;
      p.s[c] = params.px[c] * params.pr0_given_x[c];
      p.t[c] = py1;
    }
  }
  return p;
}

ParamPoint default_start(const CellCounts& counts, double psi0) {
  const std::int64_t total = counts.total();
  if (total < 1) throw Error("counts table is empty");
  Vec p(12);
  for (int i = 0; i < 8; ++i) p[i] = static_cast<double>(counts.n[i]);
  for (int c = 0; c < 4; ++c) p[8 + c] = static_cast<double>(counts.m[c]);
  p /= static_cast<double>(total);
  for (int i = 0; i < 12; ++i)
    if (p[i] == 0.0) p[i] = 0.5 / static_cast<double>(total);
  p /= p.sum();

  ParamPoint start;
  start.phi = p.head(11);
  start.psi = Vec::Constant(4, psi0);
  return start;
}

ModelSpec build_model(ModelVariant variant) {
  ModelSpec spec;
  spec.dims = {15, 11, variant == ModelVariant::Full ? 5 : 4};
  const Index t = spec.dims.t;

  spec.loglik = [](const Vec& data, const Vec& phi) {
    const Vec p = observable_probs(phi);
    double ll = 0.0;
    for (Index i = 0; i < 12; ++i)
      if (data[i] > 0.0) ll += data[i] * checked_log(p[i], "log-likelihood");
    return ll;
  };

  spec.score = [](const Vec& data, const Vec& phi) {
    const Vec p = observable_probs(phi);
    const double last = data[11] / p[11];
    Vec g(11);
    for (Index i = 0; i < 11; ++i)
      g[i] = (data[i] > 0.0 ? data[i] / p[i] : 0.0) - last;
    return g;
  };

  // Per-observation expected information of the free-cell chart:
  // B_ij = delta_ij / p_i + 1 / p_last.
  spec.fisher_info = [](const Vec& phi) {
    const Vec p = observable_probs(phi);
    Mat b = Mat::Constant(11, 11, 1.0 / p[11]);
    for (Index i = 0; i < 11; ++i) b(i, i) += 1.0 / p[i];
    return b;
  };

  spec.observed_info = [](const Vec& data, const Vec& phi) {
    const Vec p = observable_probs(phi);
    Mat m = Mat::Constant(11, 11, -data[11] / (p[11] * p[11]));
    for (Index i = 0; i < 11; ++i) m(i, i) -= data[i] / (p[i] * p[i]);
    return m;
  };

  spec.constraints = [variant, t](const Vec& omega) {
    const CellProbs p = CellProbs::from_omega(omega);
    Vec h(t);
    h.head(4) = mar_constraints(p);
    if (variant == ModelVariant::Full) h[4] = additivity_constraint(p);
    return h;
  };

  spec.jac_identified = [variant, t](const Vec& omega) {
    const CellProbs p = CellProbs::from_omega(omega);
    Mat J = Mat::Zero(11, t);
    for (int c = 0; c < 4; ++c) {
      J(c, c) = 1.0 / p.r[c];
      J(4 + c, c) = -1.0 / p.r[4 + c];
    }
    if (variant == ModelVariant::Full) {
      const CompletedCells q = completed_cells(p);
      const auto s_cell_term = [&](int c) {
        return kCrossSign[c] * (p.t[c] / q.q1[c] - (1.0 - p.t[c]) / q.q0[c]);
      };
      // The completed cell s11 = 1 - sum(phi) feeds every phi coordinate.
      const double chain = -s_cell_term(3);
      for (int i = 0; i < 11; ++i) J(i, 4) = chain;
      for (int c = 0; c < 4; ++c) {
        J(c, 4) += -kCrossSign[c] / q.q0[c];
        J(4 + c, 4) += kCrossSign[c] / q.q1[c];
      }
      for (int c = 0; c < 3; ++c) J(8 + c, 4) += s_cell_term(c);
    }
    return J;
  };

  spec.jac_unidentified = [variant, t](const Vec& omega) {
    const CellProbs p = CellProbs::from_omega(omega);
    Mat K = Mat::Zero(4, t);
    for (int c = 0; c < 4; ++c)
      K(c, c) = 1.0 / (p.t[c] * (1.0 - p.t[c]));
    if (variant == ModelVariant::Full) {
      const CompletedCells q = completed_cells(p);
      for (int c = 0; c < 4; ++c)
        K(c, 4) = kCrossSign[c] * p.s[c] * (1.0 / q.q1[c] + 1.0 / q.q0[c]);
    }
    return K;
  };

  spec.domain_check = [](const Vec& omega) {
    if (omega.size() != 15 || !omega.allFinite()) return false;
    return CellProbs::from_omega(omega).valid(kDomainMargin);
  };

  return spec;
}

}  // namespace cmle
