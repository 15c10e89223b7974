#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>

#include "cmle/errors.hpp"

namespace cmle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Problem dimensions: omega has s entries, the first r of which (phi) are
/// identified by the likelihood; t equality constraints identify the rest.
/// Valid configurations satisfy 1 <= r <= s and s-r <= t <= r. The
/// degenerate fully identified case s = r is permitted.
struct ModelDims {
  Index s = 0;
  Index r = 0;
  Index t = 0;

  Index unidentified() const { return s - r; }
};

/// Throws DimensionRuleViolated naming the broken inequality.
void validate_dims(const ModelDims& dims);

/// A parameter point omega = (phi, psi) with the identified block phi
/// (length r) and the unidentified block psi (length s-r).
struct ParamPoint {
  Vec phi;
  Vec psi;

  Index size() const { return phi.size() + psi.size(); }
  bool all_finite() const;
  Vec flat() const;
  static ParamPoint split(const Vec& omega, const ModelDims& dims);
};

/// Central-difference settings; the step at x is max(rel_step*|x|, abs_step).
struct NumDiffConfig {
  double rel_step = 1e-6;
  double abs_step = 1e-8;

  double step_for(double x) const {
    return std::max(rel_step * std::abs(x), abs_step);
  }
};

/// A pluggable model. `data` is a model-defined vector of sufficient
/// statistics (cell counts for the contingency models). Conventions:
///   - loglik/score/observed_info are raw sums over observations; the
///     solver applies the 1/n normalization itself,
///   - fisher_info is the per-observation expected information of phi,
///   - constraints(omega) has length t; jac_identified is the r x t block
///     J with J(i,j) = d h_j / d omega_i, jac_unidentified the (s-r) x t
///     block K over the psi coordinates,
///   - observed_info may be left empty; callers fall back to fisher_info.
/// Callbacks must be pure; a ModelSpec is shared read-only across threads.
struct ModelSpec {
  ModelDims dims;
  std::function<double(const Vec& data, const Vec& phi)> loglik;
  std::function<Vec(const Vec& data, const Vec& phi)> score;
  std::function<Mat(const Vec& phi)> fisher_info;
  std::function<Mat(const Vec& data, const Vec& phi)> observed_info;
  std::function<Vec(const Vec& omega)> constraints;
  std::function<Mat(const Vec& omega)> jac_identified;
  std::function<Mat(const Vec& omega)> jac_unidentified;
  std::function<bool(const Vec& omega)> domain_check;
};

/// Central-difference gradient of loglik in phi. Throws NonFiniteEvaluation
/// if any perturbed evaluation is non-finite.
Vec numeric_score(const std::function<double(const Vec&, const Vec&)>& loglik,
                  const Vec& data, const Vec& phi,
                  const NumDiffConfig& cfg = {});

struct JacobianPair {
  Mat J;  // r x t
  Mat K;  // (s-r) x t
};

/// Central-difference constraint Jacobians, split into the identified block
/// (rows 1..r of the gradient) and the unidentified block (rows r+1..s).
JacobianPair numeric_jacobians(const std::function<Vec(const Vec&)>& constraints,
                               const Vec& omega, const ModelDims& dims,
                               const NumDiffConfig& cfg = {});

struct RankReport {
  Index rank_J = 0;
  Index rank_K = 0;
  bool full_rank = false;
};

/// Ranks by singular-value thresholding at tol * largest singular value.
/// full_rank iff rank(J) = t and rank(K) = s-r.
RankReport check_rank_conditions(const Mat& J, const Mat& K, double tol = 1e-10);

struct FisherSurrogate {
  Mat info;                      // -M/n, symmetrized
  bool positive_definite = true; // false if any eigenvalue <= 0
};

/// Surrogate for the per-observation information: -observed_info/n.
FisherSurrogate fisher_from_observed(
    const std::function<Mat(const Vec&, const Vec&)>& observed_info,
    const Vec& data, const Vec& phi, double n);

}  // namespace cmle
