#include "towerlimits/limit_laws.hpp"

#include <algorithm>
#include <cmath>

#include "towerlimits/util/rng.hpp"
#include "towerlimits/util/special.hpp"

namespace towerlimits::stats {

LimitLawReport clt_test(const std::vector<double>& sums, double n_horizon, double sigma2,
                        double alpha) {
  if (!(sigma2 > 0.0))
    throw ParameterError("clt_test: sigma2 must be positive; use degenerate_test for sigma2 = 0");
  if (sums.size() < 200) throw InsufficientDataError("clt_test: need >= 200 replicas");
  const double scale = std::sqrt(sigma2 * n_horizon);
  std::vector<double> z;
  z.reserve(sums.size());
  for (double s : sums) z.push_back(s / scale);
  const auto ks = util::ks_test(z, [](double x) { return util::normal_cdf(x); });
  LimitLawReport rep;
  rep.test = LimitTest::clt;
  rep.statistic = ks.statistic;
  rep.p_value = ks.p_value;
  rep.replicas = sums.size();
  rep.horizon = n_horizon;
  rep.sigma2 = sigma2;
  rep.pass = ks.p_value > alpha;
  return rep;
}

LimitLawReport wip_test(const PathEnsemble& ensemble, double sigma2, std::uint64_t brownian_seed,
                        std::size_t brownian_paths, double alpha) {
  if (!(sigma2 > 0.0))
    throw ParameterError("wip_test: sigma2 must be positive; use degenerate_test for sigma2 = 0");
  if (ensemble.times.size() < 50)
    throw InsufficientDataError("wip_test: paths must be sampled at >= 50 grid times");
  if (ensemble.paths.size() < 200) throw InsufficientDataError("wip_test: need >= 200 replicas");

  const auto& times = ensemble.times;
  const std::size_t grid = times.size();
  auto index_of = [&](double t) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < grid; ++i)
      if (std::fabs(times[i] - t) < std::fabs(times[best] - t)) best = i;
    return best;
  };
  const double sigma = std::sqrt(sigma2);

  LimitLawReport rep;
  double amplitude = 0.0;
  for (const auto& path : ensemble.paths)
    for (double w : path) amplitude = std::max(amplitude, std::fabs(w));
  if (amplitude < 0.05 * sigma) {
    rep.test = LimitTest::wip;
    rep.replicas = ensemble.paths.size();
    rep.horizon = ensemble.n_horizon;
    rep.sigma2 = sigma2;
    rep.degenerate_flag = true;
    rep.pass = false;
    rep.notes = "paths collapse at the Brownian scale; use degenerate_test";
    return rep;
  }
  rep.test = LimitTest::wip;
  rep.replicas = ensemble.paths.size();
  rep.horizon = ensemble.n_horizon;
  rep.sigma2 = sigma2;

  // marginals
  for (double t : {0.25, 0.5, 1.0}) {
    const std::size_t idx = index_of(t);
    std::vector<double> vals;
    vals.reserve(ensemble.paths.size());
    for (const auto& path : ensemble.paths) vals.push_back(path[idx]);
    const double sd = sigma * std::sqrt(times[idx]);
    const auto ks = util::ks_test(vals, [sd](double x) { return util::normal_cdf(x / sd); });
    rep.component_names.push_back("marginal_t" + std::to_string(times[idx]));
    rep.component_p.push_back(ks.p_value);
    if (t == 1.0) rep.statistic = ks.statistic;
  }

  // Brownian reference for the path functionals, fresh per run from a fixed seed
  auto rng = util::make_engine(brownian_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> ref_sup, ref_int;
  ref_sup.reserve(brownian_paths);
  ref_int.reserve(brownian_paths);
  for (std::size_t p = 0; p < brownian_paths; ++p) {
    double w = 0.0, prev_t = 0.0, sup = 0.0, integral = 0.0;
    for (std::size_t i = 0; i < grid; ++i) {
      const double dt = times[i] - prev_t;
      w += std::sqrt(dt) * normal(rng);
      prev_t = times[i];
      sup = std::max(sup, w);
      integral += w * dt;
    }
    ref_sup.push_back(sup);
    ref_int.push_back(integral);
  }
  std::vector<double> got_sup, got_int;
  got_sup.reserve(ensemble.paths.size());
  got_int.reserve(ensemble.paths.size());
  for (const auto& path : ensemble.paths) {
    double sup = 0.0, integral = 0.0, prev_t = 0.0;
    for (std::size_t i = 0; i < grid; ++i) {
      sup = std::max(sup, path[i] / sigma);
      integral += path[i] / sigma * (times[i] - prev_t);
      prev_t = times[i];
    }
    got_sup.push_back(sup);
    got_int.push_back(integral);
  }
  rep.component_names.push_back("functional_sup");
  rep.component_p.push_back(util::ks_test_two_sample(got_sup, ref_sup).p_value);
  rep.component_names.push_back("functional_integral");
  rep.component_p.push_back(util::ks_test_two_sample(got_int, ref_int).p_value);

  const double bonferroni = alpha / static_cast<double>(rep.component_p.size());
  rep.pass = std::all_of(rep.component_p.begin(), rep.component_p.end(),
                         [bonferroni](double p) { return p > bonferroni; });
  rep.p_value = *std::min_element(rep.component_p.begin(), rep.component_p.end());
  return rep;
}

LimitLawReport lil_diagnostic(const std::vector<LilCheckpoint>& checkpoints, double sigma2,
                              double band_lo, double band_hi) {
  if (!(sigma2 > 0.0))
    throw ParameterError("lil_diagnostic: sigma2 must be positive; use degenerate_test");
  if (checkpoints.empty()) throw InsufficientDataError("lil_diagnostic: no checkpoints");
  const double n_max = checkpoints.back().n;
  if (n_max < 1e7)
    throw InsufficientDataError("lil_diagnostic: orbit must reach at least 1e7 iterates");

  LimitLawReport rep;
  rep.test = LimitTest::lil;
  rep.horizon = n_max;
  rep.sigma2 = sigma2;
  rep.band_lo = band_lo;
  rep.band_hi = band_hi;

  // The law bounds limsup and liminf symmetrically, so the band statistic is the
  // running supremum of |ratio|.  Checkpoints below 1e4 are reported in the
  // trajectory but excluded from the supremum: log log n is still far from its
  // asymptotic regime there and a single early fluctuation would dominate.
  double running = 0.0;
  double sup_final = 0.0;
  for (const auto& cp : checkpoints) {
    if (cp.n < 16.0) continue;  // log log n must be positive and meaningful
    const double denom = std::sqrt(2.0 * sigma2 * cp.n * std::log(std::log(cp.n)));
    const double ratio = cp.partial_sum / denom;
    if (cp.n >= 1e4) running = std::max(running, std::fabs(ratio));
    rep.trajectory.emplace_back(cp.n, ratio);
    if (cp.n >= n_max / 100.0) sup_final = std::max(sup_final, running);
  }
  rep.running_sup = sup_final;
  rep.statistic = sup_final;
  rep.pass = sup_final >= band_lo && sup_final <= band_hi;
  rep.notes = "slow-convergence diagnostic, not a sharp test";
  return rep;
}

LimitLawReport degenerate_test(const std::map<double, std::vector<double>>& sums_by_n,
                               std::optional<double> sup_bound_hint) {
  if (sums_by_n.empty()) throw InsufficientDataError("degenerate_test: no data");
  for (const auto& [n, sums] : sums_by_n)
    if (sums.size() < 100)
      throw InsufficientDataError("degenerate_test: need >= 100 replicas per horizon");

  LimitLawReport rep;
  rep.test = LimitTest::degenerate;
  const double n_min = sums_by_n.begin()->first;
  const double n_max = sums_by_n.rbegin()->first;
  rep.horizon = n_max;

  double max_small = 0.0, max_large = 0.0, max_all = 0.0;
  for (const auto& [n, sums] : sums_by_n) {
    double m = 0.0;
    for (double s : sums) m = std::max(m, std::fabs(s));
    if (n == n_min) max_small = m;
    if (n == n_max) max_large = m;
    max_all = std::max(max_all, m);
    rep.trajectory.emplace_back(n, m);
  }
  rep.statistic = max_all;

  if (n_max < 100.0 * n_min) {
    rep.pass = false;
    rep.notes = "horizons span fewer than two decades; growth not assessable";
    return rep;
  }
  const bool bounded = max_all == 0.0 || max_large <= 2.0 * std::max(max_small, 1e-300);
  const bool under_hint = !sup_bound_hint || max_all <= *sup_bound_hint;
  rep.pass = bounded && under_hint;
  rep.notes = rep.pass ? "max |S_N| shows no growth across two decades"
                       : "max |S_N| grows with N or exceeds the supplied bound";
  return rep;
}

}  // namespace towerlimits::stats
