#include "cmle/simulation.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>

#include "cmle/asymptotics.hpp"

namespace cmle {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Order-stable compensated accumulator.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

void validate_config(const SimConfig& cfg) {
  if (!cfg.params.valid()) throw Error("invalid logistic parameter setting");
  if (cfg.n < 1) throw Error("sample size must be >= 1");
  if (cfg.reps < 1) throw Error("replicate count must be >= 1");
  if (!(cfg.ci_level > 0.0 && cfg.ci_level < 1.0))
    throw Error("ci_level must lie in (0, 1)");
}

ReplicateRecord run_replicate(const ModelSpec& model, const SimConfig& cfg,
                              int index) {
  ReplicateRecord rec;
  rec.index = index;
  std::mt19937_64 rng = replicate_engine(cfg.seed, index);
  const CellCounts counts = generate_dataset(cfg.params, cfg.n, rng);
  try {
    const Vec data = counts.as_data();
    const double n = static_cast<double>(cfg.n);
    const SolverResult fit =
        solve(model, data, n, default_start(counts), cfg.solver);
    rec.iterations = fit.iterations;
    rec.kkt_residual = fit.kkt_residual;
    rec.constraint_violation = fit.constraint_violation;
    if (fit.status != SolverStatus::Converged) return rec;

    const CellProbs probs = CellProbs::from_point(fit.omega_hat);
    const BetaPair betas = recover_betas(probs);
    const Vec omega = fit.omega_hat.flat();
    const CovBlocks blocks =
        cov_blocks(model.fisher_info(fit.omega_hat.phi),
                   model.jac_identified(omega), model.jac_unidentified(omega));
    const Mat param_cov = estimator_covariance(blocks, n).param_cov;
    const BetaSE se = beta_standard_errors(probs, param_cov, n);

    const Interval ci1 = wald_ci(betas.beta1, se.se1, cfg.ci_level);
    const Interval ci2 = wald_ci(betas.beta2, se.se2, cfg.ci_level);
    rec.converged = true;
    rec.beta1 = betas.beta1;
    rec.beta2 = betas.beta2;
    rec.se1 = se.se1;
    rec.se2 = se.se2;
    rec.cover1 = ci1.lo <= cfg.params.beta1 && cfg.params.beta1 <= ci1.hi;
    rec.cover2 = ci2.lo <= cfg.params.beta2 && cfg.params.beta2 <= ci2.hi;
    rec.local_max = fit.local_max.has_value() && fit.local_max->all_positive;
  } catch (const std::exception&) {
    // no exception may escape into the parallel region
    rec.converged = false;
  }
  return rec;
}

SimSummary reduce_records(const SimConfig& cfg,
                          const std::vector<ReplicateRecord>& recs) {
  SimSummary out;
  KahanSum sum1, sum2;
  int cover1 = 0, cover2 = 0;
  for (const ReplicateRecord& rec : recs) {
    if (!rec.converged) {
      ++out.failures;
      continue;
    }
    ++out.converged;
    sum1.add(rec.beta1);
    sum2.add(rec.beta2);
    cover1 += rec.cover1 ? 1 : 0;
    cover2 += rec.cover2 ? 1 : 0;
    out.local_max_positive += rec.local_max ? 1 : 0;
    out.max_kkt_residual = std::max(out.max_kkt_residual, rec.kkt_residual);
    out.max_constraint_violation =
        std::max(out.max_constraint_violation, rec.constraint_violation);
  }
  if (out.converged == 0) return out;
  const double m = static_cast<double>(out.converged);
  const double mean1 = sum1.sum / m;
  const double mean2 = sum2.sum / m;
  out.bias1 = mean1 - cfg.params.beta1;
  out.bias2 = mean2 - cfg.params.beta2;
  out.coverage1 = cover1 / m;
  out.coverage2 = cover2 / m;

  KahanSum sq1, sq2;
  for (const ReplicateRecord& rec : recs) {
    if (!rec.converged) continue;
    sq1.add((rec.beta1 - mean1) * (rec.beta1 - mean1));
    sq2.add((rec.beta2 - mean2) * (rec.beta2 - mean2));
  }
  if (out.converged > 1) {
    out.mc_se1 = std::sqrt(sq1.sum / (m - 1.0) / m);
    out.mc_se2 = std::sqrt(sq2.sum / (m - 1.0) / m);
  }
  return out;
}

SimSummary run_study_impl(SimConfig cfg, std::vector<ReplicateRecord>* records,
                          bool parallel) {
  validate_config(cfg);
  const ModelSpec model = build_model(cfg.variant);
  if (cfg.solver.minor_permutation.empty())
    cfg.solver.minor_permutation = unidentified_first_order(model.dims);
  std::vector<ReplicateRecord> recs(static_cast<size_t>(cfg.reps));

  if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int i = 0; i < cfg.reps; ++i)
      recs[static_cast<size_t>(i)] = run_replicate(model, cfg, i);
  } else {
    for (int i = 0; i < cfg.reps; ++i)
      recs[static_cast<size_t>(i)] = run_replicate(model, cfg, i);
  }

  SimSummary out = reduce_records(cfg, recs);
  if (records) *records = std::move(recs);
  return out;
}

}  // namespace

std::mt19937_64 replicate_engine(std::uint64_t seed, int replicate) {
  std::uint64_t state = seed ^ (0xD1B54A32D192ED03ull *
                                (static_cast<std::uint64_t>(replicate) + 1));
  const std::uint64_t a = splitmix64(state);
  const std::uint64_t b = splitmix64(state);
  return std::mt19937_64(a ^ (b << 1));
}

CellCounts generate_dataset(const LogisticParams& params, std::int64_t n,
                            std::mt19937_64& rng) {
  if (!params.valid()) throw Error("invalid logistic parameter setting");
  if (n < 0) throw Error("sample size must be >= 0");
  const CellProbs probs = true_cell_probs(params);
  Vec p(12);
  for (int i = 0; i < 8; ++i) p[i] = probs.r[i];
  for (int c = 0; c < 4; ++c) p[8 + c] = probs.s[c];

  // Multinomial draw by conditional binomials over the canonical cell order.
  std::array<std::int64_t, 12> draw{};
  std::int64_t remaining = n;
  double mass_left = 1.0;
  for (int i = 0; i < 11 && remaining > 0; ++i) {
    const double q = std::clamp(p[i] / mass_left, 0.0, 1.0);
    std::binomial_distribution<std::int64_t> bin(remaining, q);
    draw[static_cast<size_t>(i)] = bin(rng);
    remaining -= draw[static_cast<size_t>(i)];
    mass_left -= p[i];
  }
  draw[11] = remaining;

  CellCounts counts;
  for (int i = 0; i < 8; ++i) counts.n[static_cast<size_t>(i)] = draw[static_cast<size_t>(i)];
  for (int c = 0; c < 4; ++c) counts.m[static_cast<size_t>(c)] = draw[static_cast<size_t>(8 + c)];
  return counts;
}

SimSummary run_study(const SimConfig& config, std::vector<ReplicateRecord>* records) {
  return run_study_impl(config, records, /*parallel=*/true);
}

SimSummary run_study_serial(const SimConfig& config,
                            std::vector<ReplicateRecord>* records) {
  return run_study_impl(config, records, /*parallel=*/false);
}

std::pair<Mat, Mat> asymptotic_matrices(const LogisticParams& params,
                                        ModelVariant variant) {
  if (!params.valid()) throw Error("invalid logistic parameter setting");
  if (params.beta3 != 0.0)
    throw Error("asymptotic matrices require the additive truth (beta3 = 0)");

  const CellProbs probs = true_cell_probs(params);

  Mat unconstrained(8, 8);
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b)
      unconstrained(a, b) =
          a == b ? probs.r[a] * (1.0 - probs.r[a]) : -probs.r[a] * probs.r[b];

  const ModelSpec model = build_model(variant);
  const Vec omega = probs.omega();
  const CovBlocks blocks =
      cov_blocks(model.fisher_info(omega.head(11)), model.jac_identified(omega),
                 model.jac_unidentified(omega));
  const Mat constrained =
      estimator_covariance(blocks, 1.0).param_cov.topLeftCorner(8, 8);
  return {unconstrained, constrained};
}

Interval wald_ci(double estimate, double se, double level) {
  if (se < 0.0) throw Error("standard error must be non-negative");
  if (!(level > 0.0 && level < 1.0)) throw Error("level must lie in (0, 1)");
  if (se == 0.0) return {estimate, estimate};
  const boost::math::normal_distribution<double> normal;
  const double z = boost::math::quantile(normal, (1.0 + level) / 2.0);
  return {estimate - z * se, estimate + z * se};
}

}  // namespace cmle
