#include "towerlimits/variance.hpp"

#include <algorithm>
#include <cmath>

#include "towerlimits/util/descriptive.hpp"
#include "towerlimits/util/parallel.hpp"

namespace towerlimits {

VarianceEstimate green_kubo(const InducedSystem& induced, const Observable& v, int K,
                            std::size_t budget, std::uint64_t seed, int replicas) {
  if (budget < 1000000)
    throw ParameterError("green_kubo: budget must be at least 1e6 iterates");
  if (K > 200) throw ParameterError("green_kubo: truncation lag exceeds the 200-lag cap");
  const int n_max = K > 0 ? K : 200;
  const auto corr = correlation_sequence(induced, v, v, n_max, budget, seed, replicas);

  int lag_cut = n_max;
  if (K < 0) {
    for (int k = 1; k <= n_max; ++k) {
      if (std::fabs(corr.value[k]) < 3.0 * corr.se[k]) {
        lag_cut = k;
        break;
      }
    }
  } else {
    lag_cut = K;
  }
  if (lag_cut < 1) lag_cut = 1;

  double sum = corr.value[0];
  double var = corr.se[0] * corr.se[0];
  for (int k = 1; k <= lag_cut; ++k) {
    sum += 2.0 * corr.value[k];
    var += 4.0 * corr.se[k] * corr.se[k];
  }
  VarianceEstimate est;
  est.method = VarianceMethod::green_kubo;
  est.truncation_lag = lag_cut;
  est.sigma2_raw = sum;
  est.sigma2 = std::max(0.0, sum);
  est.se = std::sqrt(var);
  est.tail_value = std::fabs(corr.value[lag_cut]);
  est.tail_floor = 3.0 * corr.se[lag_cut];
  est.degenerate = std::fabs(est.sigma2_raw) < 3.0 * est.se;
  return est;
}

VarianceEstimate batch_means(const std::vector<double>& values, std::size_t block_length) {
  if (block_length == 0) throw ParameterError("batch_means: block length must be positive");
  if (values.size() < 100 * block_length)
    throw InsufficientDataError("batch_means: need at least 100 blocks");
  const std::size_t blocks = values.size() / block_length;
  util::RunningStats stats;
  for (std::size_t b = 0; b < blocks; ++b) {
    double sum = 0.0;
    for (std::size_t i = b * block_length; i < (b + 1) * block_length; ++i) sum += values[i];
    stats.add(sum);
  }
  // block sums of a mean-zero series; subtracting the block-sum mean removes the
  // residual centering error of the input
  VarianceEstimate est;
  est.method = VarianceMethod::batch_means;
  est.block_length = block_length;
  est.sigma2_raw = stats.variance() / static_cast<double>(block_length);
  est.sigma2 = std::max(0.0, est.sigma2_raw);
  est.se = est.sigma2_raw * std::sqrt(2.0 / static_cast<double>(blocks - 1));
  est.degenerate = est.sigma2_raw < 3.0 * est.se && est.sigma2_raw < 1e-12;
  return est;
}

VarianceGrowthReport variance_growth(const InducedSystem& induced, const Observable& v,
                                     const std::vector<std::size_t>& n_grid, int replicas,
                                     double sigma2_hat, std::uint64_t seed) {
  if (replicas < 8) throw ParameterError("variance_growth: need at least 8 replicas");
  VarianceGrowthReport report;
  std::vector<std::size_t> grid = n_grid;
  std::sort(grid.begin(), grid.end());
  const std::size_t n_top = grid.back();

  std::vector<std::vector<double>> sums_sq(grid.size(),
                                           std::vector<double>(static_cast<std::size_t>(replicas)));
  util::parallel_for(static_cast<std::size_t>(replicas), [&](std::size_t r) {
    InducedOrbit orbit(induced, util::stream_seed(seed, r));
    double sum = 0.0;
    std::size_t next = 0;
    for (std::size_t i = 0; i < n_top; ++i) {
      sum += v(orbit.point());
      orbit.advance();
      while (next < grid.size() && i + 1 == grid[next]) {
        sums_sq[next][r] = sum * sum;
        ++next;
      }
    }
  });

  std::vector<double> log_n, resid;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    util::RunningStats stats;
    for (double s : sums_sq[g]) stats.add(s);
    VarianceGrowthPoint p;
    p.n = static_cast<double>(grid[g]);
    p.ratio = stats.mean() / p.n;
    p.ratio_se = stats.mean_se() / p.n;
    p.residual = stats.mean() - sigma2_hat * p.n;
    report.points.push_back(p);
    log_n.push_back(std::log(p.n));
    resid.push_back(p.residual);
  }
  if (grid.size() >= 3) {
    const auto fit = util::fit_line(log_n, resid);
    report.residual_trend_slope = fit.slope;
    report.residual_trend_se = fit.slope_se;
  }
  return report;
}

bool periodic_orbit_certificate(const MapSystem& system, const Observable& v, int max_period,
                                double tol) {
  if (system.kind() != MapKind::doubling) return false;
  for (int k = 1; k <= max_period; ++k) {
    const long long denom = (1LL << k) - 1;
    for (long long p = 0; p < denom; ++p) {
      // periodic point p/(2^k - 1); its orbit is the cyclic shift of the k-bit word
      double sum = 0.0;
      double x = static_cast<double>(p) / static_cast<double>(denom);
      for (int j = 0; j < k; ++j) {
        sum += v(x);
        x = system.step(x);
      }
      if (std::fabs(sum) > tol * static_cast<double>(k)) return true;
    }
  }
  return false;
}

CoboundaryReport coboundary_solve(const TransferDisc& op, const Observable& v, int terms,
                                  std::size_t gk_budget, std::uint64_t seed) {
  if (!op.exact_mode())
    throw ParameterError("coboundary_solve: requires the exact-branch transfer operator");
  if (terms < 1) throw ParameterError("coboundary_solve: need at least one series term");

  const MapSystem system = make_system({MapKind::doubling, 0.0});
  CoboundaryReport rep;
  rep.terms = terms;
  rep.periodic_certificate = periodic_orbit_certificate(system, v, 5);

  double sup_v = 1e-12;
  for (double x : op.nodes()) sup_v = std::max(sup_v, std::fabs(v(x)));

  // Accumulate w = sum_j P^j v on the grid.  The first terms use the explicit
  // preimage sum (2^j evaluations per node); later terms iterate the grid
  // transfer, whose interpolation error is negligible once P^j v is smooth.
  const auto v_eval = v.eval;
  const std::size_t n = op.size();
  const int exact_terms = std::min(terms, 10);
  std::vector<double> wgrid(n, 0.0), term(n, 0.0);
  for (int j = 1; j <= terms; ++j) {
    if (j <= exact_terms) {
      for (std::size_t i = 0; i < n; ++i) term[i] = op.eval_power(v_eval, op.nodes()[i], j);
    } else {
      term = op.apply(term);
    }
    double sup_partial = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      wgrid[i] += term[i];
      sup_partial = std::max(sup_partial, std::fabs(wgrid[i]));
    }
    if (sup_partial > 1e3 * sup_v)
      throw NoGapError("coboundary_solve: transfer series grew past the divergence guard");
  }
  rep.w = wgrid;

  // w is Lipschitz when the series converges; periodic linear interpolation is
  // accurate far below the statistical tolerances used downstream.
  auto w_interp = [wgrid, n](double x) {
    x -= std::floor(x);
    const double pos = x * static_cast<double>(n);
    const auto i = static_cast<std::size_t>(pos) % n;
    const double frac = pos - std::floor(pos);
    return wgrid[i] * (1.0 - frac) + wgrid[(i + 1) % n] * frac;
  };
  auto v_hat = [system, v_eval, w_interp](double x) {
    return v_eval(x) - (w_interp(system.step(x)) - w_interp(x));
  };

  double residual = 0.0;
  for (double x : op.nodes())
    residual = std::max(residual, std::fabs(op.eval_power(v_hat, x, 1)));
  rep.residual = residual;

  Observable vh;
  vh.eval = v_hat;
  vh.mean_zero = true;
  const InducedSystem trivial(system, Interval{0.0, 1.0});
  const auto gk = green_kubo(trivial, vh, -1, std::max<std::size_t>(gk_budget, 1000000), seed);
  rep.sigma2 = gk.sigma2;
  rep.sigma2_se = gk.se;
  rep.degenerate = !rep.periodic_certificate && std::fabs(gk.sigma2_raw) < 3.0 * gk.se;
  return rep;
}

}  // namespace towerlimits
