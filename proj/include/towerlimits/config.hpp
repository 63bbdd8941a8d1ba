#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "towerlimits/errors.hpp"
#include "towerlimits/lorentz.hpp"

namespace towerlimits {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sectioned key=value experiment description.  Unknown sections or keys are
// rejected with the offending name; every budget must be positive and the seed
// is mandatory (no wall-clock default).
struct ExperimentConfig {
  std::string kind;

  // [system]
  std::string system = "doubling";
  double alpha = 0.25;
  double base_lo = 0.5;
  double base_hi = 1.0;

  // [observable]
  std::string observable = "cos";  // cos | coordinate | cos_pair
  int harmonic = 1;

  // [billiard]
  std::vector<Disk> disks;

  // [budget]
  std::uint64_t orbit = 1000000;
  std::uint64_t replicas = 16;
  std::uint64_t horizon = 100000;
  std::uint64_t batches = 1;
  int depth = 6;
  double delta = 0.5;
  double t_total = 200.0;

  // [accept]
  double gamma_lo = 3.5, gamma_hi = 4.5;
  double min_r2 = 0.95;
  double rel_tol = 0.05;
  double band_lo = 0.5, band_hi = 1.5;
  double alpha_level = 0.01;

  // [run]
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir = ".";
  int threads = 0;
  bool plots = false;

  // raw echo for the summary
  std::map<std::string, std::string> echo;
};

extern const std::vector<std::string> kExperimentKinds;

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

}  // namespace towerlimits
