#pragma once

#include <functional>

#include "cmle/model.hpp"

namespace cmle {

/// The six distinct blocks of the inverse of the bordered matrix
/// [[B, 0, -J], [0, 0, -K], [-J', -K', 0]]; p21, p31, p32 are transposes
/// of p12, p13, p23. The (phi, psi) corner [[p11, p12], [p21, p22]] is the
/// asymptotic covariance of the scaled estimation error and -p33 that of
/// the scaled multiplier.
struct CovBlocks {
  Mat p11;  // r x r
  Mat p12;  // r x (s-r)
  Mat p13;  // r x t
  Mat p22;  // (s-r) x (s-r)
  Mat p23;  // (s-r) x t
  Mat p33;  // t x t

  /// Full symmetric (s+t) x (s+t) block matrix.
  Mat assembled() const;
};

/// Closed-form blocks, with A = (J'B^-1 J)^-1 and W = (K A K')^-1:
///   p22 = W,                 p12 = -B^-1 J A K' W,
///   p23 = -W K A,            p13 = -B^-1 J A + B^-1 J A K' W K A,
///   p33 = -A + A K' W K A,
///   p11 = B^-1 - B^-1 J A J' B^-1 + B^-1 J A K' W K A J' B^-1.
/// Requires B SPD. When J alone is column-rank deficient but the bordered
/// matrix is still invertible (stacked [J; K] of full column rank), the
/// blocks are taken from a direct inverse instead; RankDeficient is thrown
/// only when the bordered matrix itself is singular.
CovBlocks cov_blocks(const Mat& B, const Mat& J, const Mat& K);

struct AsymptoticResult {
  Mat param_cov;   // s x s covariance of sqrt(n) * (estimate - truth)
  Mat lambda_cov;  // t x t, equals -p33
  double n = 0.0;  // sample size used when scaling standard errors
};

AsymptoticResult estimator_covariance(const CovBlocks& blocks, double n);

/// Max-norm of  P * diag(B,0,0) * P' - [[p11, p12, 0], [p21, p22, 0],
/// [0, 0, -p33]]  where P is the assembled block matrix. An algebraic
/// identity; values above ~1e-9 indicate inconsistent inputs.
double sandwich_check(const CovBlocks& blocks, const Mat& B);

/// First-order standard error sqrt(g' Cov g / n) of a smooth scalar
/// functional with gradient g. Throws NegativeVariance if the quadratic
/// form falls below -1e-12; tiny negatives are clamped to zero.
double delta_method(const Vec& grad, const Mat& param_cov, double n);

/// Same, with the gradient taken by central differences of value_fn at omega.
double delta_method(const std::function<double(const Vec&)>& value_fn,
                    const Vec& omega, const Mat& param_cov, double n,
                    const NumDiffConfig& cfg = {});

}  // namespace cmle
