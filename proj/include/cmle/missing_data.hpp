#pragma once

#include <array>
#include <cstdint>

#include "cmle/model.hpp"

namespace cmle {

/// Cell index for the two binary covariates; order 00, 10, 01, 11.
constexpr int cell_index(int j, int k) { return j + 2 * k; }

/// Observed counts of the 2x2x2+missing contingency table: n[4*i + c] holds
/// (Y=i, cell c, observed) and m[c] holds (cell c, outcome missing).
struct CellCounts {
  std::array<std::int64_t, 8> n{};
  std::array<std::int64_t, 4> m{};

  std::int64_t total() const;
  /// 12-vector (n000..n111, m00..m11) consumed by the model callbacks.
  Vec as_data() const;
};

/// Cell probabilities: r mirrors n, s mirrors m, and t[c] is the conditional
/// probability of Y=1 in the missing stratum of cell c. The twelve observable
/// probabilities (r, s) sum to one.
struct CellProbs {
  std::array<double, 8> r{};
  std::array<double, 4> s{};
  std::array<double, 4> t{};

  /// Rebuilds from the 15-vector (phi, psi); the last observable cell s11 is
  /// completed as 1 - sum(phi).
  static CellProbs from_omega(const Vec& omega);
  static CellProbs from_point(const ParamPoint& point);
  /// 15-vector (8 r-cells, s00, s10, s01, 4 t-cells).
  Vec omega() const;
  bool valid(double margin = 0.0) const;
};

/// Logistic data-generating setting: logit Pr(Y=1 | cell) =
/// beta0 + beta1*j + beta2*k + beta3*j*k, covariate distribution px and
/// missingness probabilities pr0_given_x per cell.
struct LogisticParams {
  double beta0 = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta3 = 0.0;
  std::array<double, 4> px{};
  std::array<double, 4> pr0_given_x{};

  bool valid() const;
};

/// The compiled-in simulation-study setting: beta0 = logit 0.1,
/// beta1 = log 2, beta2 = log 3, beta3 = 0, px = (.4, .3, .2, .1),
/// pr0 = (.2, .1, .05, .05).
LogisticParams default_study_params();

enum class ModelVariant {
  Full,     // missing-at-random + additive-effects constraints, t = 5
  MarOnly,  // missing-at-random only, t = 4 (just-identified)
};

const char* to_string(ModelVariant v);

/// Wires dimensions (s=15, r=11), log-likelihood, analytic score, Fisher and
/// observed information, constraints and their Jacobian blocks, and the
/// open-interval domain check into a ModelSpec.
ModelSpec build_model(ModelVariant variant);

/// Sum of count * log(probability) over the twelve observable cells;
/// zero-count terms are dropped, independent of t.
double loglik_cells(const CellCounts& counts, const CellProbs& probs);

/// Missing-at-random constraints, one per cell:
/// logit t_c - (log r_{1c} - log r_{0c}).
Vec mar_constraints(const CellProbs& probs);

/// Log cross-ratio of the completed table; zero iff the two covariate
/// effects are additive on the logit scale.
double additivity_constraint(const CellProbs& probs);

struct BetaPair {
  double beta1 = 0.0;
  double beta2 = 0.0;
};

/// Main effects recovered from completed-table margins.
BetaPair recover_betas(const CellProbs& probs);

struct BetaSE {
  double se1 = 0.0;
  double se2 = 0.0;
};

/// Delta-method standard errors of the recovered effects; param_cov is the
/// 15x15 scaled covariance in (phi, psi) order.
BetaSE beta_standard_errors(const CellProbs& probs, const Mat& param_cov,
                            double n, const NumDiffConfig& cfg = {});

/// Cell probabilities implied by the logistic setting (missingness ignorable
/// by construction, so the MAR constraints hold; the additivity constraint
/// holds iff beta3 = 0).
CellProbs true_cell_probs(const LogisticParams& params);

/// Default solver start: empirical frequencies with zero cells perturbed to
/// 0.5/n and renormalized, psi set to psi0.
ParamPoint default_start(const CellCounts& counts, double psi0 = 0.5);

}  // namespace cmle
