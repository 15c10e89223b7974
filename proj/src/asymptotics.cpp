#include "cmle/asymptotics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <cmath>

#include "cmle/kkt_solver.hpp"

namespace cmle {

Mat CovBlocks::assembled() const {
  const Index r = p11.rows();
  const Index u = p22.rows();
  const Index t = p33.rows();
  Mat m(r + u + t, r + u + t);
  m.topLeftCorner(r, r) = p11;
  m.block(0, r, r, u) = p12;
  m.topRightCorner(r, t) = p13;
  m.block(r, 0, u, r) = p12.transpose();
  m.block(r, r, u, u) = p22;
  m.block(r, r + u, u, t) = p23;
  m.bottomLeftCorner(t, r) = p13.transpose();
  m.block(r + u, r, t, u) = p23.transpose();
  m.bottomRightCorner(t, t) = p33;
  return m;
}

namespace {

// SPD inverse via Cholesky; `what` names the matrix in diagnostics.
Mat spd_inverse(const Mat& m, const char* what, bool rank_error) {
  if (m.rows() == 0) return Mat(0, 0);
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success) {
    const std::string msg = std::string(what) + " is not positive definite";
    if (rank_error) throw RankDeficient(msg);
    throw NotPositiveDefinite(msg);
  }
  return llt.solve(Mat::Identity(m.rows(), m.rows()));
}

// ||bordered * assembled - I||_inf; cheap self-check of a candidate inverse.
double identity_error(const Mat& B, const Mat& J, const Mat& K,
                      const CovBlocks& blocks) {
  const Mat bordered = assemble_bordered(B, J, K);
  const Mat prod = bordered * blocks.assembled();
  return (prod - Mat::Identity(prod.rows(), prod.cols())).cwiseAbs().maxCoeff();
}

CovBlocks closed_form_blocks(const Mat& binv, const Mat& J, const Mat& K) {
  const Mat binv_j = binv * J;
  const Mat a = spd_inverse(J.transpose() * binv_j, "J'B^-1J", /*rank_error=*/true);
  const Mat ka = K * a;                         // u x t
  const Mat w = spd_inverse(ka * K.transpose(), "KAK'", /*rank_error=*/true);
  const Mat wka = w * ka;                       // u x t
  const Mat akt_wka = a * K.transpose() * wka;  // t x t

  CovBlocks out;
  out.p22 = w;
  out.p23 = -wka;
  out.p12 = -binv_j * (a * K.transpose()) * w;
  out.p13 = -binv_j * a + binv_j * akt_wka;
  out.p33 = -a + akt_wka;
  out.p11 = binv - binv_j * a * binv_j.transpose() +
            binv_j * akt_wka * binv_j.transpose();
  return out;
}

// Direct LU inverse of the bordered matrix. The bordered matrix stays
// invertible whenever the stacked [J; K] has full column rank and K full row
// rank, even if J alone is column-rank deficient and the closed form fails.
CovBlocks direct_inverse_blocks(const Mat& B, const Mat& J, const Mat& K) {
  const Index r = B.rows();
  const Index t = J.cols();
  const Index u = K.rows();
  const Mat bordered = assemble_bordered(B, J, K);
  Eigen::PartialPivLU<Mat> lu(bordered);
  const Vec diag = lu.matrixLU().diagonal().cwiseAbs();
  const double dmax = diag.maxCoeff();
  if (dmax == 0.0 || diag.minCoeff() <= 1e-13 * dmax)
    throw RankDeficient("bordered matrix is singular: J, K rank conditions fail");
  const Mat inv = lu.inverse();

  CovBlocks out;
  out.p11 = inv.topLeftCorner(r, r);
  out.p12 = inv.block(0, r, r, u);
  out.p13 = inv.topRightCorner(r, t);
  out.p22 = inv.block(r, r, u, u);
  out.p23 = inv.block(r, r + u, u, t);
  out.p33 = inv.bottomRightCorner(t, t);
  return out;
}

}  // namespace

CovBlocks cov_blocks(const Mat& B, const Mat& J, const Mat& K) {
  const Index r = B.rows();
  const Index t = J.cols();
  const Index u = K.rows();
  if (B.cols() != r || J.rows() != r || K.cols() != t)
    throw Error("cov_blocks: inconsistent block dimensions");

  const Mat binv = spd_inverse(B, "B", /*rank_error=*/false);

  if (t == 0) {
    // No constraints: the estimator covariance is the inverse information.
    CovBlocks out;
    out.p11 = binv;
    out.p12 = Mat(r, u);
    out.p13 = Mat(r, 0);
    out.p22 = Mat(u, u);
    out.p23 = Mat(u, 0);
    out.p33 = Mat(0, 0);
    return out;
  }

  // Closed form first; it can silently degrade when J is column-rank
  // deficient (the Cholesky of a singular J'B^-1J may not fail outright), so
  // the result is accepted only if it actually inverts the bordered matrix.
  try {
    CovBlocks out = closed_form_blocks(binv, J, K);
    if (out.assembled().allFinite() && identity_error(B, J, K, out) <= 1e-8)
      return out;
  } catch (const RankDeficient&) {
  }

  CovBlocks out = direct_inverse_blocks(B, J, K);
  if (identity_error(B, J, K, out) > 1e-8)
    throw RankDeficient("bordered matrix is too ill-conditioned to invert");
  return out;
}

AsymptoticResult estimator_covariance(const CovBlocks& blocks, double n) {
  const Index r = blocks.p11.rows();
  const Index u = blocks.p22.rows();
  AsymptoticResult out;
  out.param_cov.resize(r + u, r + u);
  out.param_cov.topLeftCorner(r, r) = blocks.p11;
  out.param_cov.topRightCorner(r, u) = blocks.p12;
  out.param_cov.bottomLeftCorner(u, r) = blocks.p12.transpose();
  out.param_cov.bottomRightCorner(u, u) = blocks.p22;
  out.lambda_cov = -blocks.p33;
  out.n = n;
  return out;
}

double sandwich_check(const CovBlocks& blocks, const Mat& B) {
  const Index r = blocks.p11.rows();
  const Index u = blocks.p22.rows();
  const Index t = blocks.p33.rows();
  const Mat p = blocks.assembled();
  Mat mid = Mat::Zero(r + u + t, r + u + t);
  mid.topLeftCorner(r, r) = B;

  Mat target = Mat::Zero(r + u + t, r + u + t);
  target.topLeftCorner(r, r) = blocks.p11;
  target.block(0, r, r, u) = blocks.p12;
  target.block(r, 0, u, r) = blocks.p12.transpose();
  target.block(r, r, u, u) = blocks.p22;
  target.bottomRightCorner(t, t) = -blocks.p33;

  return (p * mid * p.transpose() - target).cwiseAbs().maxCoeff();
}

double delta_method(const Vec& grad, const Mat& param_cov, double n) {
  if (!grad.allFinite()) throw NonFiniteEvaluation("delta-method gradient non-finite");
  if (n < 1.0) throw Error("delta_method requires n >= 1");
  const double q = grad.dot(param_cov * grad);
  if (q < -1e-12)
    throw NegativeVariance("delta-method quadratic form is negative: " + std::to_string(q));
  return std::sqrt(std::max(q, 0.0) / n);
}

double delta_method(const std::function<double(const Vec&)>& value_fn,
                    const Vec& omega, const Mat& param_cov, double n,
                    const NumDiffConfig& cfg) {
  Vec grad(omega.size());
  Vec x = omega;
  for (Index i = 0; i < omega.size(); ++i) {
    const double h = cfg.step_for(omega[i]);
    x[i] = omega[i] + h;
    const double fp = value_fn(x);
    x[i] = omega[i] - h;
    const double fm = value_fn(x);
    x[i] = omega[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NonFiniteEvaluation("delta-method functional non-finite near coordinate " +
                                std::to_string(i));
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return delta_method(grad, param_cov, n);
}

}  // namespace cmle
