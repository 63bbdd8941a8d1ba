#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "towerlimits/gibbs_markov.hpp"

namespace towerlimits {

enum class VarianceMethod { green_kubo, batch_means };

struct VarianceEstimate {
  double sigma2 = 0.0;          // clipped at 0; raw value kept alongside
  double sigma2_raw = 0.0;
  VarianceMethod method = VarianceMethod::green_kubo;
  int truncation_lag = 0;       // green_kubo
  std::size_t block_length = 0;  // batch_means
  double se = 0.0;
  bool degenerate = false;      // estimate indistinguishable from 0
  double tail_value = 0.0;      // |C(K)| at the truncation lag
  double tail_floor = 0.0;      // noise floor there
};

// sigma^2 = C(0) + 2 sum_{k=1..K} C(k).  K < 0 picks the smallest lag whose
// correlation falls below the noise floor, capped at 200.
VarianceEstimate green_kubo(const InducedSystem& induced, const Observable& v, int K,
                            std::size_t budget, std::uint64_t seed, int replicas = 16);

// Sample variance of non-overlapping block sums divided by the block length.
// Requires at least 100 blocks.
VarianceEstimate batch_means(const std::vector<double>& values, std::size_t block_length);

struct VarianceGrowthPoint {
  double n = 0.0;
  double ratio = 0.0;      // E[v_N^2] / N
  double ratio_se = 0.0;
  double residual = 0.0;   // E[v_N^2] - sigma2 * N
};

struct VarianceGrowthReport {
  std::vector<VarianceGrowthPoint> points;
  double residual_trend_slope = 0.0;  // regression of residual on log N
  double residual_trend_se = 0.0;
};

VarianceGrowthReport variance_growth(const InducedSystem& induced, const Observable& v,
                                     const std::vector<std::size_t>& n_grid, int replicas,
                                     double sigma2_hat, std::uint64_t seed);

struct CoboundaryReport {
  std::vector<double> w;          // grid values of the transfer series
  double residual = 0.0;          // sup |P v_hat| on the grid
  bool degenerate = false;
  bool periodic_certificate = false;  // a periodic-orbit sum already rules out degeneracy
  double sigma2 = 0.0;
  double sigma2_se = 0.0;
  int terms = 0;
};

// w = sum_{j=1..J} P^j v and the decomposition v = v_hat + w o f - w.
// Degenerate verdict: periodic pre-check silent AND the Green-Kubo estimate of
// v_hat sits within 3 SE of zero.
CoboundaryReport coboundary_solve(const TransferDisc& op, const Observable& v, int terms,
                                  std::size_t gk_budget, std::uint64_t seed);

// Checks Birkhoff sums of v over periodic orbits of the doubling map up to the
// given period; a nonzero sum certifies a nondegenerate limit variance.
bool periodic_orbit_certificate(const MapSystem& system, const Observable& v, int max_period = 5,
                                double tol = 1e-9);

}  // namespace towerlimits
