#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "cmle/model.hpp"

namespace cmle {

enum class SolverStatus { Converged, MaxIterations, SingularSystem, LeftDomain };
enum class Identification { JustIdentified, OverIdentified };

const char* to_string(SolverStatus s);
const char* to_string(Identification c);

struct SolverConfig {
  double kkt_tol = 1e-10;
  int max_iter = 200;
  double damping = 0.5;     // step shrink factor, in (0, 1]
  int max_backtracks = 40;
  double rank_tol = 1e-10;
  bool check_local_max = true;
  std::vector<Index> minor_permutation{};  // empty: identity ordering
  NumDiffConfig numdiff{};
};

/// Second-order sufficiency verdict: the signed leading principal minors
/// (-1)^(t+p) * Lambda_{2t+p}, p = 1..s-t, of the bordered Hessian of the
/// Lagrangian in (lambda, omega) ordering. The point is a strict constrained
/// local maximum when all of them are positive.
struct MinorReport {
  Vec signed_minors;
  bool all_positive = false;
  std::vector<Index> permutation_used;  // omega-row ordering applied first
};

struct IterationRecord {
  int iteration = 0;
  double kkt_residual = 0.0;
  double constraint_violation = 0.0;
  double step_scale = 1.0;
};

struct SolverResult {
  ParamPoint omega_hat;
  Vec lambda_hat;
  int iterations = 0;
  double kkt_residual = std::numeric_limits<double>::infinity();
  double constraint_violation = std::numeric_limits<double>::infinity();
  SolverStatus status = SolverStatus::MaxIterations;
  Identification identification = Identification::JustIdentified;
  std::optional<MinorReport> local_max;
  std::vector<IterationRecord> trace;
  bool full_rank_at_solution = true;  // diagnostic; see check_rank_conditions
};

/// The symmetric bordered matrix [[B, 0, -J], [0, 0, -K], [-J', -K', 0]]
/// of size (s+t) x (s+t).
Mat assemble_bordered(const Mat& B, const Mat& J, const Mat& K);

struct Residual {
  double kkt = 0.0;         // ||s/n + J*lambda||_inf + ||K*lambda||_inf
  double constraint = 0.0;  // ||h(omega)||_inf
  double total() const { return kkt + constraint; }
};

Residual kkt_residual(const ModelSpec& spec, const Vec& data, double n,
                      const ParamPoint& omega, const Vec& lambda);

struct StepResult {
  ParamPoint omega;
  Vec lambda;
  double step_scale = 1.0;  // damping actually applied
};

/// One update of the stationarity iteration: from the base point
/// (phi, psi, 0), add the bordered-system solve of (s/n, 0, h). The previous
/// multiplier never enters the right-hand side. The step is shrunk by
/// cfg.damping until domain_check passes; throws LeftDomain if it never does,
/// SingularSystem if the factorization detects rank deficiency.
StepResult iterate_step(const ModelSpec& spec, const Vec& data, double n,
                        const ParamPoint& omega, const SolverConfig& cfg = {});

/// Damped fixed-point iteration on the stationarity system until
/// kkt_residual + constraint_violation <= kkt_tol or max_iter. Statuses are
/// carried in the result, not thrown.
SolverResult solve(const ModelSpec& spec, const Vec& data, double n,
                   const ParamPoint& omega0, const SolverConfig& cfg = {});

/// Builds the bordered Hessian of the Lagrangian at (lambda_hat, omega_hat)
/// (constraint second derivatives by central differences of the analytic
/// Jacobians) and evaluates the signed-minor test. `permutation`, when
/// non-empty, reorders the omega rows/columns before minors are taken.
MinorReport verify_local_max(const ModelSpec& spec, const Vec& data, double n,
                             const ParamPoint& omega_hat, const Vec& lambda_hat,
                             const std::vector<Index>& permutation = {},
                             const NumDiffConfig& cfg = {});

/// JustIdentified iff t = s-r, OverIdentified iff t > s-r.
Identification classify_identification(const ModelDims& dims);

/// Row ordering (r, ..., s-1, 0, ..., r-1) that lists the unidentified
/// coordinates first. With this ordering every leading block of the stacked
/// Jacobian [J; K] has full column rank as long as K does, which keeps the
/// signed minors away from zero for models whose J alone is rank deficient
/// on the constraint manifold.
std::vector<Index> unidentified_first_order(const ModelDims& dims);

}  // namespace cmle
