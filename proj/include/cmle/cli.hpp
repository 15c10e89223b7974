#pragma once

#include <iosfwd>
#include <string>

#include "cmle/simulation.hpp"

namespace cmle {

enum class Command { Fit, Simulate, Asymptotics, CheckIdent };
enum class OutputFormat { Json, Tsv };

/// Parsed command-line request. `sim` carries the simulate settings (its
/// params double as the asymptotics/check-ident setting); `solver` is shared
/// by every command that fits.
struct RunConfig {
  Command command = Command::Fit;
  std::string input_path;   // empty: none
  std::string output_path;  // empty: stdout
  SolverConfig solver{};
  SimConfig sim{};
  ModelVariant variant = ModelVariant::Full;
  OutputFormat format = OutputFormat::Json;
  double ci_level = 0.95;
  bool verbose = false;
  int threads = 0;  // 0: library default, 1: serial reference path
};

// Each command writes data to `out` and diagnostics to `diag`, returning the
// process exit code: 0 success, 1 input/config error, 2 non-convergence.
int cmd_fit(const RunConfig& config, std::ostream& out, std::ostream& diag);
int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& diag);
int cmd_asymptotics(const RunConfig& config, std::ostream& out, std::ostream& diag);
int cmd_check_ident(const RunConfig& config, std::ostream& out, std::ostream& diag);

int run_command(const RunConfig& config, std::ostream& out, std::ostream& diag);

}  // namespace cmle
