#pragma once

#include "glmmgm/csv_io.hpp"
#include "glmmgm/fitter.hpp"
#include "glmmgm/report.hpp"
#include "glmmgm/simulation.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace glmmgm {

enum class Command { Fit, Means, Simulate, Validate };

std::string_view to_string(Command command);

/// Stable process exit codes.
enum ExitCode : int {
  kExitSuccess = 0,
  kExitValidation = 1,
  kExitNonConvergence = 2,
  kExitIo = 3,
};

struct RunConfig {
  Command command = Command::Fit;
  std::string input;
  Family family = Family::Logistic;
  ColumnMapping columns;
  double alpha = kDefaultAlpha;
  FitConfig fit;
  Format format = Format::Json;
  /// Report destination; empty writes to the output stream.
  std::string out;
  std::uint64_t seed = 1;
  int reps = 500;
  ControlType design = ControlType::Gender;
  Baseline baseline = Baseline::Bernoulli;
  /// simulate: also write the dataset of replication 0 here.
  std::string dataset_out;
  /// Worker threads for simulate; 0 uses default_thread_count().
  int threads = 0;
};

/// Executes one command. Reports go to `config.out` or to `out`; failures
/// print a JSON error record to `err` and return a nonzero ExitCode.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Parses arguments (subcommand first, then flags, optionally a --config file
/// whose entries the flags override) and calls run(). Usage errors exit
/// with kExitValidation.
int run_command_line(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace glmmgm
