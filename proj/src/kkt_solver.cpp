#include "cmle/kkt_solver.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace cmle {

const char* to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::Converged: return "Converged";
    case SolverStatus::MaxIterations: return "MaxIterations";
    case SolverStatus::SingularSystem: return "SingularSystem";
    case SolverStatus::LeftDomain: return "LeftDomain";
  }
  return "?";
}

const char* to_string(Identification c) {
  return c == Identification::JustIdentified ? "JustIdentified" : "OverIdentified";
}

Mat assemble_bordered(const Mat& B, const Mat& J, const Mat& K) {
  const Index r = B.rows();
  const Index t = J.cols();
  const Index u = K.rows();  // s - r
  if (B.cols() != r || J.rows() != r || K.cols() != t)
    throw Error("assemble_bordered: inconsistent block dimensions");
  const Index n = r + u + t;
  Mat m = Mat::Zero(n, n);
  m.topLeftCorner(r, r) = B;
  m.topRightCorner(r, t) = -J;
  m.block(r, r + u, u, t) = -K;
  m.bottomLeftCorner(t, r) = -J.transpose();
  m.block(r + u, r, t, u) = -K.transpose();
  return m;
}

Residual kkt_residual(const ModelSpec& spec, const Vec& data, double n,
                      const ParamPoint& omega, const Vec& lambda) {
  const Vec x = omega.flat();
  const Vec sc = spec.score(data, omega.phi);
  const Mat J = spec.jac_identified(x);
  const Mat K = spec.jac_unidentified(x);
  const Vec h = spec.constraints(x);
  if (!sc.allFinite() || !J.allFinite() || !K.allFinite() || !h.allFinite())
    throw NonFiniteEvaluation("model callback produced a non-finite value");
  Residual res;
  res.kkt = (sc / n + J * lambda).lpNorm<Eigen::Infinity>();
  if (K.rows() > 0)
    res.kkt += (K * lambda).lpNorm<Eigen::Infinity>();
  res.constraint = h.size() > 0 ? h.lpNorm<Eigen::Infinity>() : 0.0;
  return res;
}

namespace {

Mat information_matrix(const ModelSpec& spec, const Vec& data, double n,
                       const Vec& phi) {
  if (spec.fisher_info) return spec.fisher_info(phi);
  if (spec.observed_info)
    return fisher_from_observed(spec.observed_info, data, phi, n).info;
  throw Error("model provides neither fisher_info nor observed_info");
}

struct RawStep {
  Vec delta_omega;  // length s
  Vec lambda;       // length t
};

// Full (undamped) bordered-system solve. Rank deficiency is detected on the
// U diagonal of the partial-pivot LU at rank_tol.
RawStep raw_step(const ModelSpec& spec, const Vec& data, double n,
                 const ParamPoint& omega, double rank_tol) {
  const ModelDims& d = spec.dims;
  const Vec x = omega.flat();
  const Mat B = information_matrix(spec, data, n, omega.phi);
  const Mat J = spec.jac_identified(x);
  const Mat K = spec.jac_unidentified(x);
  const Mat bordered = assemble_bordered(B, J, K);
  if (!bordered.allFinite())
    throw NonFiniteEvaluation("bordered matrix has non-finite entries");

  Vec rhs(d.s + d.t);
  rhs.head(d.r) = spec.score(data, omega.phi) / n;
  rhs.segment(d.r, d.s - d.r).setZero();
  rhs.tail(d.t) = spec.constraints(x);
  if (!rhs.allFinite())
    throw NonFiniteEvaluation("right-hand side has non-finite entries");

  Eigen::PartialPivLU<Mat> lu(bordered);
  const Vec diag = lu.matrixLU().diagonal().cwiseAbs();
  const double dmax = diag.size() > 0 ? diag.maxCoeff() : 0.0;
  if (dmax == 0.0 || diag.minCoeff() <= rank_tol * dmax)
    throw SingularSystem("bordered system is rank deficient");

  const Vec sol = lu.solve(rhs);
  if (!sol.allFinite()) throw SingularSystem("bordered solve produced non-finite values");
  return {sol.head(d.s), sol.tail(d.t)};
}

ParamPoint advance(const ParamPoint& omega, const Vec& delta, double alpha,
                   const ModelDims& d) {
  ParamPoint next;
  next.phi = omega.phi + alpha * delta.head(d.r);
  next.psi = omega.psi + alpha * delta.tail(d.s - d.r);
  return next;
}

}  // namespace

StepResult iterate_step(const ModelSpec& spec, const Vec& data, double n,
                        const ParamPoint& omega, const SolverConfig& cfg) {
  const RawStep step = raw_step(spec, data, n, omega, cfg.rank_tol);
  double alpha = 1.0;
  for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
    ParamPoint next = advance(omega, step.delta_omega, alpha, spec.dims);
    if (spec.domain_check(next.flat()))
      return {std::move(next), alpha * step.lambda, alpha};
    alpha *= cfg.damping;
  }
  throw LeftDomain("update left the parameter domain after " +
                   std::to_string(cfg.max_backtracks) + " dampings");
}

SolverResult solve(const ModelSpec& spec, const Vec& data, double n,
                   const ParamPoint& omega0, const SolverConfig& cfg) {
  validate_dims(spec.dims);
  if (!(cfg.kkt_tol > 0.0) || cfg.max_iter < 1 ||
      !(cfg.damping > 0.0 && cfg.damping <= 1.0))
    throw Error("invalid solver configuration");
  const ModelDims& d = spec.dims;

  SolverResult out;
  out.identification = classify_identification(d);
  out.omega_hat = omega0;
  out.lambda_hat = Vec::Zero(d.t);

  if (!omega0.all_finite() || omega0.size() != d.s ||
      !spec.domain_check(omega0.flat())) {
    out.status = SolverStatus::LeftDomain;
    return out;
  }

  ParamPoint omega = omega0;
  Vec lambda = Vec::Zero(d.t);
  Residual res = kkt_residual(spec, data, n, omega, lambda);
  out.status = SolverStatus::MaxIterations;

  for (int it = 1; it <= cfg.max_iter; ++it) {
    if (res.total() <= cfg.kkt_tol) {
      out.status = SolverStatus::Converged;
      break;
    }

    RawStep step;
    try {
      step = raw_step(spec, data, n, omega, cfg.rank_tol);
    } catch (const SingularSystem&) {
      out.status = SolverStatus::SingularSystem;
      break;
    }

    // Backtracking: shrink until the point is in-domain and the residual has
    // not grown by more than 10x; if only the residual guard keeps failing,
    // the most-damped in-domain point is taken as is.
    double alpha = 1.0;
    bool have_candidate = false;
    ParamPoint cand;
    Vec cand_lambda;
    Residual cand_res;
    double cand_alpha = 1.0;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
      ParamPoint trial = advance(omega, step.delta_omega, alpha, d);
      if (trial.all_finite() && spec.domain_check(trial.flat())) {
        bool usable = true;
        Residual trial_res;
        try {
          trial_res = kkt_residual(spec, data, n, trial, alpha * step.lambda);
        } catch (const NonFiniteEvaluation&) {
          usable = false;
        }
        if (usable && std::isfinite(trial_res.total())) {
          cand = trial;
          cand_lambda = alpha * step.lambda;
          cand_res = trial_res;
          cand_alpha = alpha;
          have_candidate = true;
          if (trial_res.total() <= 10.0 * res.total()) break;
        }
      }
      alpha *= cfg.damping;
    }
    if (!have_candidate) {
      out.status = SolverStatus::LeftDomain;
      break;
    }

    omega = cand;
    lambda = cand_lambda;
    res = cand_res;
    out.iterations = it;
    out.trace.push_back({it, res.kkt, res.constraint, cand_alpha});
    if (res.total() <= cfg.kkt_tol) {
      out.status = SolverStatus::Converged;
      break;
    }
  }

  out.omega_hat = omega;
  out.lambda_hat = lambda;
  out.kkt_residual = res.kkt;
  out.constraint_violation = res.constraint;

  const Vec x = omega.flat();
  const RankReport ranks =
      check_rank_conditions(spec.jac_identified(x), spec.jac_unidentified(x), cfg.rank_tol);
  out.full_rank_at_solution = ranks.full_rank;

  if (out.status == SolverStatus::Converged && cfg.check_local_max) {
    try {
      out.local_max = verify_local_max(spec, data, n, omega, lambda,
                                       cfg.minor_permutation, cfg.numdiff);
    } catch (const Error&) {
      out.local_max.reset();
    }
  }
  return out;
}

MinorReport verify_local_max(const ModelSpec& spec, const Vec& data, double n,
                             const ParamPoint& omega_hat, const Vec& lambda_hat,
                             const std::vector<Index>& permutation,
                             const NumDiffConfig& cfg) {
  const ModelDims& d = spec.dims;
  const Index s = d.s, r = d.r, t = d.t;
  const Vec x = omega_hat.flat();

  const auto stacked_jac = [&](const Vec& w) -> Mat {
    Mat g(s, t);
    g.topRows(r) = spec.jac_identified(w);
    g.bottomRows(s - r) = spec.jac_unidentified(w);
    return g;
  };

  // Hessian of lambda' h by central differences of the analytic Jacobians:
  // column j is d/d omega_j of (G(omega) * lambda).
  Mat hess = Mat::Zero(s, s);
  Vec w = x;
  for (Index j = 0; j < s; ++j) {
    const double h = cfg.step_for(x[j]);
    w[j] = x[j] + h;
    const Vec gp = stacked_jac(w) * lambda_hat;
    w[j] = x[j] - h;
    const Vec gm = stacked_jac(w) * lambda_hat;
    w[j] = x[j];
    if (!gp.allFinite() || !gm.allFinite())
      throw NonFiniteEvaluation("constraint Jacobian non-finite near coordinate " +
                                std::to_string(j));
    hess.col(j) = (gp - gm) / (2.0 * h);
  }
  hess = ((hess + hess.transpose()) / 2.0).eval();

  Mat obs;  // M / n
  if (spec.observed_info) {
    obs = spec.observed_info(data, omega_hat.phi) / n;
  } else {
    obs = -information_matrix(spec, data, n, omega_hat.phi);
  }

  const Mat G = stacked_jac(x);
  Mat ht = Mat::Zero(t + s, t + s);
  ht.topRightCorner(t, s) = G.transpose();
  ht.bottomLeftCorner(s, t) = G;
  ht.bottomRightCorner(s, s) = hess;
  ht.block(t, t, r, r) += obs;

  // Optional reordering of the omega rows/columns before minors are taken.
  std::vector<Index> perm(static_cast<size_t>(s));
  if (permutation.empty()) {
    for (Index i = 0; i < s; ++i) perm[static_cast<size_t>(i)] = i;
  } else {
    if (static_cast<Index>(permutation.size()) != s)
      throw Error("permutation must have length s");
    std::vector<bool> seen(static_cast<size_t>(s), false);
    for (Index p : permutation) {
      if (p < 0 || p >= s || seen[static_cast<size_t>(p)])
        throw Error("permutation is not a rearrangement of 0..s-1");
      seen[static_cast<size_t>(p)] = true;
    }
    perm = permutation;
  }
  Mat htp(t + s, t + s);
  const auto map = [&](Index a) { return a < t ? a : t + perm[static_cast<size_t>(a - t)]; };
  for (Index a = 0; a < t + s; ++a)
    for (Index b = 0; b < t + s; ++b) htp(a, b) = ht(map(a), map(b));

  MinorReport rep;
  rep.permutation_used = perm;
  rep.signed_minors.resize(s - t);
  rep.all_positive = true;
  for (Index p = 1; p <= s - t; ++p) {
    const Index k = 2 * t + p;
    const double minor = htp.topLeftCorner(k, k).determinant();
    const double sign = ((t + p) % 2 == 0) ? 1.0 : -1.0;
    rep.signed_minors[p - 1] = sign * minor;
    if (!(rep.signed_minors[p - 1] > 0.0)) rep.all_positive = false;
  }
  return rep;
}

Identification classify_identification(const ModelDims& dims) {
  validate_dims(dims);
  return dims.t == dims.s - dims.r ? Identification::JustIdentified
                                   : Identification::OverIdentified;
}

std::vector<Index> unidentified_first_order(const ModelDims& dims) {
  std::vector<Index> perm;
  perm.reserve(static_cast<size_t>(dims.s));
  for (Index i = dims.r; i < dims.s; ++i) perm.push_back(i);
  for (Index i = 0; i < dims.r; ++i) perm.push_back(i);
  return perm;
}

}  // namespace cmle
