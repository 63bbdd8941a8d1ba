#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "towerlimits/errors.hpp"

namespace towerlimits::stats {

enum class LimitTest { clt, wip, lil, degenerate };

struct LimitLawReport {
  LimitTest test = LimitTest::clt;
  bool pass = false;
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t replicas = 0;
  double horizon = 0.0;   // N or t
  double sigma2 = 0.0;
  std::string notes;
  // per-component results for composite tests
  std::vector<std::string> component_names;
  std::vector<double> component_p;
  // diagnostic trajectory (lil): pairs (n, ratio)
  std::vector<std::pair<double, double>> trajectory;
  double running_sup = 0.0;
  double band_lo = 0.0, band_hi = 0.0;
  bool degenerate_flag = false;  // inputs collapse at the Brownian scale
};

// KS test of S_N / (sigma sqrt(N)) against the standard normal.
LimitLawReport clt_test(const std::vector<double>& sums, double n_horizon, double sigma2,
                        double alpha = 0.01);

// Scaled partial-sum paths W_i(t) = S_{floor(tN),i} / sqrt(N) on a grid of [0,1].
struct PathEnsemble {
  std::vector<double> times;               // grid in (0, 1]
  std::vector<std::vector<double>> paths;  // one row per replica
  double n_horizon = 0.0;
};

// Marginals at t in {0.25, 0.5, 1} against N(0, sigma^2 t) plus sup- and
// integral-functionals against a Brownian Monte Carlo reference; Bonferroni 1%.
LimitLawReport wip_test(const PathEnsemble& ensemble, double sigma2,
                        std::uint64_t brownian_seed = 0x5eedb70, std::size_t brownian_paths = 100000,
                        double alpha = 0.01);

struct LilCheckpoint {
  double n = 0.0;
  double partial_sum = 0.0;
};

// Trajectory of S_n / sqrt(2 sigma^2 n log log n) at the supplied checkpoints.
// Reports the running supremum over the final two decades against a loose band;
// a slow-convergence diagnostic, not a sharp test.
LimitLawReport lil_diagnostic(const std::vector<LilCheckpoint>& checkpoints, double sigma2,
                              double band_lo = 0.5, double band_hi = 1.5);

// Degenerate when max |S_N| across replicas stays bounded over two decades of N.
LimitLawReport degenerate_test(const std::map<double, std::vector<double>>& sums_by_n,
                               std::optional<double> sup_bound_hint = std::nullopt);

}  // namespace towerlimits::stats
