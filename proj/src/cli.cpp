#include "cmle/cli.hpp"

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <cstdio>
#include <ostream>
#include <vector>

#include "cmle/asymptotics.hpp"
#include "cmle/counts_io.hpp"

namespace cmle {

namespace {

using json = nlohmann::ordered_json;

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string fmt3(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3f", x);
  return buf;
}

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json mat_to_json_rounded(const Mat& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(fmt3(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Flat key/value walk of a json document for the tsv format; arrays index
// with dots (a.0.1).
void tsv_walk(const json& node, const std::string& prefix, std::ostream& out) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items())
      tsv_walk(value, prefix.empty() ? key : prefix + "." + key, out);
  } else if (node.is_array()) {
    Index i = 0;
    for (const auto& value : node) {
      tsv_walk(value, prefix + "." + std::to_string(i), out);
      ++i;
    }
  } else if (node.is_number_float()) {
    out << prefix << '\t' << fmt(node.get<double>()) << '\n';
  } else if (node.is_string()) {
    out << prefix << '\t' << node.get<std::string>() << '\n';
  } else {
    out << prefix << '\t' << node.dump() << '\n';
  }
}

void emit(const json& doc, OutputFormat format, std::ostream& out) {
  if (format == OutputFormat::Json) {
    out << doc.dump(2) << '\n';
  } else {
    tsv_walk(doc, "", out);
  }
}

json minor_report_json(const MinorReport& rep) {
  json j;
  j["all_positive"] = rep.all_positive;
  j["signed_minors"] = vec_to_json(rep.signed_minors);
  return j;
}

const std::array<std::string, 8> kRCellOrder = {
    "r000", "r010", "r001", "r011", "r100", "r110", "r101", "r111"};

void apply_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

}  // namespace

int cmd_fit(const RunConfig& config, std::ostream& out, std::ostream& diag) {
  if (config.input_path.empty()) {
    diag << "fit: --input is required\n";
    return 1;
  }
  CellCounts counts;
  try {
    counts = read_counts_file(config.input_path);
  } catch (const ParseError& e) {
    diag << "fit: " << config.input_path << ": " << e.what() << '\n';
    return 1;
  }
  const std::int64_t total = counts.total();
  if (total < 1) {
    diag << "fit: counts table is empty\n";
    return 1;
  }

  const ModelSpec model = build_model(config.variant);
  const double n = static_cast<double>(total);
  const Vec data = counts.as_data();
  SolverConfig solver = config.solver;
  if (solver.minor_permutation.empty())
    solver.minor_permutation = unidentified_first_order(model.dims);
  const SolverResult fit = solve(model, data, n, default_start(counts), solver);

  json doc;
  doc["schema"] = 1;
  doc["command"] = "fit";
  doc["variant"] = to_string(config.variant);
  doc["n"] = total;
  doc["status"] = to_string(fit.status);
  doc["iterations"] = fit.iterations;
  doc["kkt_residual"] = fit.kkt_residual;
  doc["constraint_violation"] = fit.constraint_violation;
  doc["identification"] = to_string(fit.identification);
  doc["full_rank_at_solution"] = fit.full_rank_at_solution;
  doc["local_max"] = fit.local_max ? minor_report_json(*fit.local_max) : json();
  if (config.verbose) {
    json trace = json::array();
    for (const IterationRecord& it : fit.trace) {
      json row;
      row["iteration"] = it.iteration;
      row["kkt_residual"] = it.kkt_residual;
      row["constraint_violation"] = it.constraint_violation;
      row["step_scale"] = it.step_scale;
      trace.push_back(std::move(row));
    }
    doc["trace"] = trace;
  }

  if (fit.status == SolverStatus::Converged) {
    const CellProbs probs = CellProbs::from_point(fit.omega_hat);
    json est;
    est["r"] = std::vector<double>(probs.r.begin(), probs.r.end());
    est["s"] = std::vector<double>(probs.s.begin(), probs.s.end());
    est["t"] = std::vector<double>(probs.t.begin(), probs.t.end());
    doc["estimates"] = est;
    doc["lambda"] = vec_to_json(fit.lambda_hat);
    try {
      const Vec omega = fit.omega_hat.flat();
      const CovBlocks blocks = cov_blocks(model.fisher_info(fit.omega_hat.phi),
                                          model.jac_identified(omega),
                                          model.jac_unidentified(omega));
      const Mat param_cov = estimator_covariance(blocks, n).param_cov;
      const BetaPair betas = recover_betas(probs);
      const BetaSE se = beta_standard_errors(probs, param_cov, n);
      const Interval ci1 = wald_ci(betas.beta1, se.se1, config.ci_level);
      const Interval ci2 = wald_ci(betas.beta2, se.se2, config.ci_level);
      json beta;
      beta["beta1"] = betas.beta1;
      beta["se1"] = se.se1;
      beta["ci1"] = {ci1.lo, ci1.hi};
      beta["beta2"] = betas.beta2;
      beta["se2"] = se.se2;
      beta["ci2"] = {ci2.lo, ci2.hi};
      beta["ci_level"] = config.ci_level;
      doc["beta"] = beta;
    } catch (const Error& e) {
      diag << "fit: covariance unavailable: " << e.what() << '\n';
    }
  }

  emit(doc, config.format, out);
  if (fit.status != SolverStatus::Converged) {
    diag << "fit: solver stopped with status " << to_string(fit.status) << '\n';
    return 2;
  }
  return 0;
}

int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& diag) {
  apply_threads(config.threads);
  SimConfig sim = config.sim;
  sim.variant = config.variant;
  sim.solver = config.solver;
  sim.ci_level = config.ci_level;

  std::vector<ReplicateRecord> records;
  SimSummary summary;
  try {
    summary = config.threads == 1
                  ? run_study_serial(sim, config.verbose ? &records : nullptr)
                  : run_study(sim, config.verbose ? &records : nullptr);
  } catch (const Error& e) {
    diag << "simulate: " << e.what() << '\n';
    return 1;
  }

  json doc;
  doc["schema"] = 1;
  doc["command"] = "simulate";
  json cfg;
  cfg["variant"] = to_string(config.variant);
  cfg["n"] = sim.n;
  cfg["reps"] = sim.reps;
  cfg["seed"] = sim.seed;
  cfg["ci_level"] = sim.ci_level;
  cfg["beta1"] = sim.params.beta1;
  cfg["beta2"] = sim.params.beta2;
  doc["config"] = cfg;
  json sum;
  sum["bias1"] = summary.bias1;
  sum["bias2"] = summary.bias2;
  sum["coverage1"] = summary.coverage1;
  sum["coverage2"] = summary.coverage2;
  sum["mc_se1"] = summary.mc_se1;
  sum["mc_se2"] = summary.mc_se2;
  sum["failures"] = summary.failures;
  sum["converged"] = summary.converged;
  sum["local_max_positive"] = summary.local_max_positive;
  sum["max_kkt_residual"] = summary.max_kkt_residual;
  sum["max_constraint_violation"] = summary.max_constraint_violation;
  doc["summary"] = sum;

  if (config.verbose) {
    json reps = json::array();
    for (const ReplicateRecord& rec : records) {
      json r;
      r["index"] = rec.index;
      r["converged"] = rec.converged;
      r["beta1"] = rec.beta1;
      r["beta2"] = rec.beta2;
      r["se1"] = rec.se1;
      r["se2"] = rec.se2;
      r["cover1"] = rec.cover1;
      r["cover2"] = rec.cover2;
      r["local_max"] = rec.local_max;
      r["iterations"] = rec.iterations;
      reps.push_back(std::move(r));
    }
    doc["replicates"] = reps;
  }

  emit(doc, config.format, out);
  return 0;
}

int cmd_asymptotics(const RunConfig& config, std::ostream& out, std::ostream& diag) {
  std::pair<Mat, Mat> mats;
  try {
    mats = asymptotic_matrices(config.sim.params, config.variant);
  } catch (const Error& e) {
    diag << "asymptotics: " << e.what() << '\n';
    return 1;
  }

  json doc;
  doc["schema"] = 1;
  doc["command"] = "asymptotics";
  doc["variant"] = to_string(config.variant);
  doc["order"] = kRCellOrder;
  json unc;
  unc["matrix"] = mat_to_json(mats.first);
  unc["rounded"] = mat_to_json_rounded(mats.first);
  doc["unconstrained"] = unc;
  json con;
  con["matrix"] = mat_to_json(mats.second);
  con["rounded"] = mat_to_json_rounded(mats.second);
  doc["constrained"] = con;

  emit(doc, config.format, out);
  return 0;
}

int cmd_check_ident(const RunConfig& config, std::ostream& out, std::ostream& diag) {
  const ModelSpec model = build_model(config.variant);
  try {
    validate_dims(model.dims);
  } catch (const DimensionRuleViolated& e) {
    diag << "check-ident: " << e.what() << '\n';
    return 1;
  }

  Vec omega;
  if (!config.input_path.empty()) {
    try {
      omega = default_start(read_counts_file(config.input_path)).flat();
    } catch (const Error& e) {
      diag << "check-ident: " << config.input_path << ": " << e.what() << '\n';
      return 1;
    }
  } else {
    if (!config.sim.params.valid()) {
      diag << "check-ident: invalid parameter setting\n";
      return 1;
    }
    omega = true_cell_probs(config.sim.params).omega();
  }

  const RankReport ranks = check_rank_conditions(
      model.jac_identified(omega), model.jac_unidentified(omega), config.solver.rank_tol);

  json doc;
  doc["schema"] = 1;
  doc["command"] = "check-ident";
  doc["variant"] = to_string(config.variant);
  json dims;
  dims["s"] = model.dims.s;
  dims["r"] = model.dims.r;
  dims["t"] = model.dims.t;
  doc["dims"] = dims;
  doc["dimension_rule"] = "ok";
  doc["identification"] = to_string(classify_identification(model.dims));
  json rank;
  rank["rank_J"] = ranks.rank_J;
  rank["rank_K"] = ranks.rank_K;
  rank["full_rank"] = ranks.full_rank;
  doc["rank"] = rank;

  emit(doc, config.format, out);
  return 0;
}

int run_command(const RunConfig& config, std::ostream& out, std::ostream& diag) {
  switch (config.command) {
    case Command::Fit: return cmd_fit(config, out, diag);
    case Command::Simulate: return cmd_simulate(config, out, diag);
    case Command::Asymptotics: return cmd_asymptotics(config, out, diag);
    case Command::CheckIdent: return cmd_check_ident(config, out, diag);
  }
  return 1;
}

}  // namespace cmle
