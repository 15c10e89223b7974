#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "cmle/kkt_solver.hpp"
#include "cmle/missing_data.hpp"

namespace cmle {

struct SimConfig {
  LogisticParams params = default_study_params();
  std::int64_t n = 1000;   // sample size per dataset
  int reps = 10000;        // replicate count
  std::uint64_t seed = 0;
  double ci_level = 0.95;
  ModelVariant variant = ModelVariant::Full;
  SolverConfig solver{};
};

/// Aggregates over converged replicates; failures are counted and excluded.
struct SimSummary {
  double bias1 = 0.0;
  double bias2 = 0.0;
  double coverage1 = 0.0;
  double coverage2 = 0.0;
  double mc_se1 = 0.0;  // Monte Carlo standard errors of the biases
  double mc_se2 = 0.0;
  int failures = 0;
  int converged = 0;
  int local_max_positive = 0;  // converged fits passing the signed-minor test
  double max_kkt_residual = 0.0;
  double max_constraint_violation = 0.0;
};

struct ReplicateRecord {
  int index = 0;
  bool converged = false;
  bool local_max = false;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double se1 = 0.0;
  double se2 = 0.0;
  bool cover1 = false;
  bool cover2 = false;
  int iterations = 0;
  double kkt_residual = 0.0;
  double constraint_violation = 0.0;
};

/// RNG stream for one replicate, a pure function of (seed, index) so results
/// do not depend on scheduling.
std::mt19937_64 replicate_engine(std::uint64_t seed, int replicate);

/// One multinomial draw of size n over the twelve observable cells.
CellCounts generate_dataset(const LogisticParams& params, std::int64_t n,
                            std::mt19937_64& rng);

/// Full bias/coverage study: per replicate, generate data, fit the chosen
/// variant, recover the effects, and form Wald intervals from delta-method
/// standard errors. Replicates run in parallel when OpenMP is enabled; the
/// summary is bitwise independent of the worker count.
SimSummary run_study(const SimConfig& config,
                     std::vector<ReplicateRecord>* records = nullptr);

/// Serial reference path, kept for testing and benchmarking against the
/// parallel kernel; produces bit-identical results.
SimSummary run_study_serial(const SimConfig& config,
                            std::vector<ReplicateRecord>* records = nullptr);

/// Asymptotic covariance matrices of the scaled frequencies of the eight
/// fully observed cells: (unconstrained multinomial, constrained). Requires
/// beta3 = 0 so that the constraints hold at the truth.
std::pair<Mat, Mat> asymptotic_matrices(const LogisticParams& params,
                                        ModelVariant variant = ModelVariant::Full);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// estimate +/- z_{(1+level)/2} * se.
Interval wald_ci(double estimate, double se, double level);

}  // namespace cmle
