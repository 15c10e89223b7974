#include "cmle/model.hpp"

#include <Eigen/SVD>
#include <Eigen/Eigenvalues>

namespace cmle {

void validate_dims(const ModelDims& dims) {
  if (dims.r < 1)
    throw DimensionRuleViolated("dimension rule violated: r >= 1 required, got r = " +
                                std::to_string(dims.r));
  if (dims.s < dims.r)
    throw DimensionRuleViolated("dimension rule violated: s >= r required, got s = " +
                                std::to_string(dims.s) + ", r = " + std::to_string(dims.r));
  if (dims.t < dims.s - dims.r)
    throw DimensionRuleViolated("dimension rule violated: t >= s-r required, got t = " +
                                std::to_string(dims.t) + ", s-r = " +
                                std::to_string(dims.s - dims.r));
  if (dims.t > dims.r)
    throw DimensionRuleViolated("dimension rule violated: t <= r required, got t = " +
                                std::to_string(dims.t) + ", r = " + std::to_string(dims.r));
}

bool ParamPoint::all_finite() const {
  return phi.allFinite() && psi.allFinite();
}

Vec ParamPoint::flat() const {
  Vec omega(size());
  omega.head(phi.size()) = phi;
  omega.tail(psi.size()) = psi;
  return omega;
}

ParamPoint ParamPoint::split(const Vec& omega, const ModelDims& dims) {
  if (omega.size() != dims.s)
    throw Error("parameter vector has length " + std::to_string(omega.size()) +
                ", expected s = " + std::to_string(dims.s));
  ParamPoint p;
  p.phi = omega.head(dims.r);
  p.psi = omega.tail(dims.s - dims.r);
  return p;
}

Vec numeric_score(const std::function<double(const Vec&, const Vec&)>& loglik,
                  const Vec& data, const Vec& phi, const NumDiffConfig& cfg) {
  const Index r = phi.size();
  Vec grad(r);
  Vec x = phi;
  for (Index i = 0; i < r; ++i) {
    const double h = cfg.step_for(phi[i]);
    x[i] = phi[i] + h;
    const double fp = loglik(data, x);
    x[i] = phi[i] - h;
    const double fm = loglik(data, x);
    x[i] = phi[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NonFiniteEvaluation("log-likelihood non-finite near coordinate " +
                                std::to_string(i));
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

JacobianPair numeric_jacobians(const std::function<Vec(const Vec&)>& constraints,
                               const Vec& omega, const ModelDims& dims,
                               const NumDiffConfig& cfg) {
  const Index s = dims.s, r = dims.r, t = dims.t;
  Mat full(s, t);
  Vec x = omega;
  for (Index i = 0; i < s; ++i) {
    const double h = cfg.step_for(omega[i]);
    x[i] = omega[i] + h;
    const Vec hp = constraints(x);
    x[i] = omega[i] - h;
    const Vec hm = constraints(x);
    x[i] = omega[i];
    if (!hp.allFinite() || !hm.allFinite())
      throw NonFiniteEvaluation("constraint evaluation non-finite near coordinate " +
                                std::to_string(i));
    full.row(i) = ((hp - hm) / (2.0 * h)).transpose();
  }
  return {full.topRows(r), full.bottomRows(s - r)};
}

namespace {

Index svd_rank(const Mat& m, double tol) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& sv = svd.singularValues();
  const double thresh = tol * sv(0);
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > thresh) ++rank;
  return rank;
}

}  // namespace

RankReport check_rank_conditions(const Mat& J, const Mat& K, double tol) {
  RankReport rep;
  rep.rank_J = svd_rank(J, tol);
  rep.rank_K = svd_rank(K, tol);
  rep.full_rank = (rep.rank_J == J.cols()) && (rep.rank_K == K.rows());
  return rep;
}

FisherSurrogate fisher_from_observed(
    const std::function<Mat(const Vec&, const Vec&)>& observed_info,
    const Vec& data, const Vec& phi, double n) {
  if (n < 1.0) throw Error("fisher_from_observed requires n >= 1");
  Mat m = observed_info(data, phi);
  if (!m.allFinite())
    throw NonFiniteEvaluation("observed information non-finite");
  FisherSurrogate out;
  out.info = -(m + m.transpose()) / (2.0 * n);
  Eigen::SelfAdjointEigenSolver<Mat> eig(out.info);
  out.positive_definite = eig.eigenvalues().minCoeff() > 0.0;
  return out;
}

}  // namespace cmle
