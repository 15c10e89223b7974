#include <CLI11.hpp>

#include <array>
#include <fstream>
#include <iostream>

#include "cmle/cli.hpp"

namespace {

struct PresetOption {
  std::string name;
};

void add_common(CLI::App* sub, cmle::RunConfig& rc, std::string& format,
                std::string& variant) {
  sub->add_option("--output", rc.output_path, "write data to this file instead of stdout");
  sub->add_option("--format", format, "output format")
      ->check(CLI::IsMember({"json", "tsv"}));
  sub->add_option("--variant", variant, "model variant")
      ->check(CLI::IsMember({"full", "mar-only"}));
  sub->add_option("--tol", rc.solver.kkt_tol, "KKT residual tolerance")
      ->check(CLI::PositiveNumber);
  sub->add_option("--max-iter", rc.solver.max_iter, "iteration cap")
      ->check(CLI::PositiveNumber);
  sub->add_option("--ci-level", rc.ci_level, "confidence level in (0,1)");
  sub->add_option("--threads", rc.threads, "worker count (1 = serial reference path)");
  sub->add_flag("--verbose", rc.verbose, "extra output");
}

void add_preset(CLI::App* sub, std::string& preset) {
  sub->add_option("--preset", preset, "named parameter setting")
      ->check(CLI::IsMember({"paper-sec4"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"constrained maximum likelihood estimation for partially identified models"};
  app.require_subcommand(1);

  cmle::RunConfig rc;
  std::string format = "json";
  std::string variant = "full";
  std::string preset = "paper-sec4";
  std::array<double, 4> px = rc.sim.params.px;
  std::array<double, 4> pr0 = rc.sim.params.pr0_given_x;

  CLI::App* fit = app.add_subcommand("fit", "constrained fit of a counts table");
  fit->add_option("--input", rc.input_path, "counts file")->required();
  add_common(fit, rc, format, variant);

  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo bias/coverage study");
  simulate->add_option("--reps", rc.sim.reps, "replicate count");
  simulate->add_option("--n", rc.sim.n, "sample size per dataset");
  simulate->add_option("--seed", rc.sim.seed, "RNG seed");
  add_preset(simulate, preset);
  add_common(simulate, rc, format, variant);

  CLI::App* asym = app.add_subcommand("asymptotics",
                                      "asymptotic covariance of the observed-cell frequencies");
  add_preset(asym, preset);
  asym->add_option("--beta0", rc.sim.params.beta0, "intercept on the logit scale");
  asym->add_option("--beta1", rc.sim.params.beta1, "first main effect");
  asym->add_option("--beta2", rc.sim.params.beta2, "second main effect");
  asym->add_option("--beta3", rc.sim.params.beta3, "interaction effect");
  asym->add_option("--px", px, "covariate cell probabilities (00 10 01 11)");
  asym->add_option("--pr0", pr0, "missingness probabilities per cell");
  add_common(asym, rc, format, variant);

  CLI::App* ident = app.add_subcommand("check-ident", "identification diagnostics");
  ident->add_option("--input", rc.input_path,
                    "counts file; ranks are evaluated at its start point");
  add_preset(ident, preset);
  add_common(ident, rc, format, variant);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  rc.sim.params.px = px;
  rc.sim.params.pr0_given_x = pr0;
  rc.format = format == "tsv" ? cmle::OutputFormat::Tsv : cmle::OutputFormat::Json;
  rc.variant = variant == "mar-only" ? cmle::ModelVariant::MarOnly
                                     : cmle::ModelVariant::Full;
  if (fit->parsed()) rc.command = cmle::Command::Fit;
  if (simulate->parsed()) rc.command = cmle::Command::Simulate;
  if (asym->parsed()) rc.command = cmle::Command::Asymptotics;
  if (ident->parsed()) rc.command = cmle::Command::CheckIdent;

  if (!(rc.ci_level > 0.0 && rc.ci_level < 1.0)) {
    std::cerr << "ci-level must lie in (0, 1)\n";
    return 1;
  }
  if (simulate->parsed() && rc.sim.reps < 1) {
    std::cerr << "simulate: --reps must be >= 1\n";
    return 1;
  }

  std::ofstream file;
  if (!rc.output_path.empty()) {
    file.open(rc.output_path);
    if (!file) {
      std::cerr << "cannot open output file '" << rc.output_path << "'\n";
      return 1;
    }
  }
  std::ostream& out = rc.output_path.empty() ? std::cout : file;
  return cmle::run_command(rc, out, std::cerr);
}
