#pragma once

#include <string>

#include "towerlimits/config.hpp"

namespace towerlimits {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentResult {
  int exit_code = 0;          // 0 ok, 1 verdict failure (strict), 2 config, 3 precondition
  bool pass = true;           // all mandatory verdicts
  std::string summary_json;   // written to <out>/summary.json as well
  std::string summary_path;
};

// Runs one experiment: writes a CSV per measured series plus summary.json into
// the output directory.  Identical config+seed produce byte-identical summaries
// up to the runtime_seconds field.
ExperimentResult run_experiment(const ExperimentConfig& config, bool strict);

// Catalog of experiment kinds, their config keys, and the acceptance criterion
// each one reproduces.
std::string list_experiments(bool as_json);

}  // namespace towerlimits
