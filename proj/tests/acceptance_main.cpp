// Acceptance battery: every criterion at its stated budget, one line each.
// Exit status is the number of failed criteria.

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <map>
#include <vector>

#include "towerlimits/flow.hpp"
#include "towerlimits/gibbs_markov.hpp"
#include "towerlimits/limit_laws.hpp"
#include "towerlimits/lorentz.hpp"
#include "towerlimits/tower.hpp"
#include "towerlimits/util/descriptive.hpp"
#include "towerlimits/util/parallel.hpp"
#include "towerlimits/util/rng.hpp"
#include "towerlimits/variance.hpp"

using namespace towerlimits;

namespace {

int g_failures = 0;

void report(const char* id, bool ok, const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  char detail[512];
  std::vsnprintf(detail, sizeof(detail), fmt, args);
  va_end(args);
  std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", id, detail);
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

Observable cos_obs() {
  Observable v = make_observable([](double x) { return std::cos(2.0 * M_PI * x); }, 1.0,
                                 2.0 * M_PI, 1.0);
  v.mean_zero = true;
  return v;
}

Observable coboundary_pair() {
  Observable v = make_observable(
      [](double x) { return std::cos(4.0 * M_PI * x) - std::cos(2.0 * M_PI * x); }, 1.0,
      6.0 * M_PI, 2.0);
  v.mean_zero = true;
  return v;
}

// AC1: Green-Kubo variance of cos(2 pi x) on the doubling map, 1e7 iterates.
void ac1() {
  const InducedSystem trivial(make_system({MapKind::doubling, 0.0}), {0.0, 1.0});
  const auto est = green_kubo(trivial, cos_obs(), -1, 10000000, 7);
  const bool ok = std::fabs(est.sigma2 - 0.5) <= 0.01;
  report("AC1", ok, "green-kubo sigma^2 = %.5f +- %.5f (target 0.5 +- 0.01, lag cut %d)",
         est.sigma2, est.se, est.truncation_lag);
}

// AC2: coboundary recovery, bounded sums, and a null variance verdict.
void ac2() {
  const auto sys = make_system({MapKind::doubling, 0.0});
  const auto op = TransferDisc::exact_doubling(sys, 4096);
  const auto v = coboundary_pair();
  const auto rep = coboundary_solve(op, v, 8, 2000000, 11);

  double w_err = 0.0;
  for (std::size_t i = 0; i < op.size(); ++i)
    w_err = std::max(w_err, std::fabs(rep.w[i] - std::cos(2.0 * M_PI * op.nodes()[i])));

  double running_max = 0.0;
  {
    StationaryOrbit orbit(sys, util::stream_seed(11, 1));
    double s = 0.0;
    for (std::size_t i = 0; i < 10000000; ++i) {
      s += v(orbit.point());
      orbit.advance();
      running_max = std::max(running_max, std::fabs(s));
    }
  }
  std::map<double, std::vector<double>> by_n;
  for (const double n : {1e3, 1e4, 1e5}) {
    std::vector<double> sums(128);
    util::parallel_for(128, [&](std::size_t r) {
      StationaryOrbit orbit(sys, util::stream_seed(1100 + (int)std::log10(n), r));
      double s = 0.0;
      for (std::size_t i = 0; i < (std::size_t)n; ++i) {
        s += v(orbit.point());
        orbit.advance();
      }
      sums[r] = s;
    });
    by_n[n] = std::move(sums);
  }
  const auto deg = stats::degenerate_test(by_n, 4.0);
  const auto gk = green_kubo(InducedSystem(sys, {0.0, 1.0}), v, -1, 10000000, 13);

  const bool ok = w_err <= 1e-3 && running_max <= 4.0 && deg.pass &&
                  std::fabs(gk.sigma2_raw) < 3.0 * gk.se && rep.degenerate;
  report("AC2", ok,
         "w error %.2e (<= 1e-3), max|S_N| %.3f to N=1e7 (<= 4), degenerate verdicts %d/%d, "
         "sigma^2 %.2e within 3 SE (%.2e) of 0",
         w_err, running_max, (int)deg.pass, (int)rep.degenerate, gk.sigma2_raw, 3.0 * gk.se);
}

// AC3: Kac mean first return to [1/2, 1) under doubling.
void ac3() {
  const InducedSystem ind(make_system({MapKind::doubling, 0.0}), {0.5, 1.0});
  const auto returns = sample_returns(ind, 1000000, 3);
  util::RunningStats stats;
  for (const auto r : returns) stats.add(static_cast<double>(r));
  const bool ok = std::fabs(stats.mean() - 2.0) <= 0.01;
  report("AC3", ok, "mean first-return time = %.4f over 1e6 returns (target 2 +- 0.01)",
         stats.mean());
}

// AC4: intermittent return-tail exponent and moment finiteness at 1e7 returns.
void ac4() {
  const InducedSystem ind(make_system({MapKind::lsv, 0.25}), {0.5, 1.0});
  const auto returns = sample_returns(ind, 10000000, 42);
  const auto tail = tail_exponent(returns);
  const auto mom = moment_norm(returns, 2.5);
  const bool ok = tail.kind == TailKind::polynomial && tail.exponent >= 3.5 &&
                  tail.exponent <= 4.5 && tail.r2_poly >= 0.95 && mom.finite;
  report("AC4", ok,
         "gamma-hat = %.3f in [3.5, 4.5], R^2 = %.4f (>= 0.95), |R|_2.5 = %.3f finite=%d",
         tail.exponent, tail.r2_poly, mom.norm, (int)mom.finite);
}

// AC5: correlation decay of a Lipschitz pair on the induced intermittent map.
void ac5() {
  const InducedSystem ind(make_system({MapKind::lsv, 0.25}), {0.5, 1.0});
  const auto v = make_observable([](double x) { return x; }, 1.0, 1.0, 1.0);
  const auto corr = correlation_sequence(ind, v, v, 20, 10000000, 17);
  const auto fit = fit_decay(corr);
  const bool ok = !fit.degenerate && fit.rate < 1.0 && fit.rate > 0.0 && fit.r2 >= 0.9;
  report("AC5", ok, "log-linear fit: tau = %.3f (slope %.3f < 0), R^2 = %.4f (>= 0.9), %zu lags",
         fit.rate, std::log(fit.rate), fit.r2, fit.lags_used.size());
}

// AC6: variance lift between the base and the suspension, plus the exact
// unit-roof reduction.
void ac6() {
  const auto sys = make_system({MapKind::lsv, 0.25});
  const InducedSystem ind(sys, {0.5, 1.0});
  const auto psi = center_observable(cos_obs(), sys, 2000000, 99);
  const auto tower = build_tower(ind, sample_returns(ind, 400000, 5));
  const auto phi = lift_phase_observable(psi);
  Observable Phi = induce_observable(tower, phi);
  {
    InducedOrbit probe(ind, 1234);
    double m = 0.0;
    for (int i = 0; i < 400000; ++i) {
      m += Phi(probe.point());
      probe.advance();
    }
    m /= 400000.0;
    const auto inner = Phi.eval;
    Phi.eval = [inner, m](double x) { return inner(x) - m; };
  }
  const auto gk = green_kubo(ind, Phi, -1, 6000000, 31);
  const double lifted = lift_variance(gk.sigma2, tower.mean_return);

  TowerWalker walker(tower, 777);
  std::vector<double> values;
  values.reserve(24000000);
  for (std::size_t i = 0; i < 24000000; ++i) {
    values.push_back(walker.value(phi));
    walker.advance();
  }
  double mean = 0.0;
  for (double x : values) mean += x;
  mean /= static_cast<double>(values.size());
  for (auto& x : values) x -= mean;
  const auto bm = batch_means(values, 2000);
  const double rel = std::fabs(bm.sigma2 - lifted) / lifted;

  const bool unit_roof = flow_variance(gk.sigma2, 1.0) == gk.sigma2 &&
                         lift_variance(gk.sigma2, 1.0) == gk.sigma2;
  const bool ok = rel <= 0.05 && unit_roof;
  report("AC6", ok,
         "tower batch-means %.4f vs lift %.4f (gap %.2f%% <= 5%%); unit-roof identity exact=%d",
         bm.sigma2, lifted, 100.0 * rel, (int)unit_roof);
}

// AC7: KS battery across 20 seed batches plus exact-normal calibration.
void ac7() {
  const auto sys = make_system({MapKind::doubling, 0.0});
  const std::size_t N = 100000, R = 2000, B = 20;
  std::size_t passes = 0;
  double min_p = 1.0;
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<double> sums(R);
    util::parallel_for(R, [&](std::size_t r) {
      StationaryOrbit orbit(sys, util::stream_seed(1000 + b, r));
      double s = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        s += std::cos(2.0 * M_PI * orbit.point());
        orbit.advance();
      }
      sums[r] = s;
    });
    const auto rep = stats::clt_test(sums, static_cast<double>(N), 0.5);
    passes += rep.pass;
    min_p = std::min(min_p, rep.p_value);
  }
  std::size_t rejects = 0;
  for (int b = 0; b < 100; ++b) {
    auto rng = util::make_engine(util::stream_seed(2000, b));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> z(10000);
    for (auto& x : z) x = normal(rng);
    if (!stats::clt_test(z, 1.0, 1.0).pass) ++rejects;
  }
  const bool ok = passes >= B * 95 / 100 && rejects <= 3;
  report("AC7", ok,
         "clt pass rate %zu/%zu at the 1%% level (min p %.4f); calibration rejections %zu/100 "
         "(<= 3)",
         passes, B, min_p, rejects);
}

// AC8: oscillation sums on the doubling base, depths 1-8, delta = 1/2.
void ac8() {
  const InducedSystem ind(make_system({MapKind::doubling, 0.0}), {0.5, 1.0});
  const auto tree = build_cylinders(ind, 8, 0.5, {.samples = 1000000, .seed = 21});
  const auto v = make_observable([](double x) { return x; }, 1.0, 1.0, 1.0);
  const auto osc = ps_oscillation(tree, v, 0.5, 1000000, 23);
  bool below = true;
  for (int k = 1; k <= 8; ++k) below = below && osc.sums[k - 1] <= osc.bounds[k - 1];
  const double limit = 2.5 * std::log(0.5) + 0.05;
  const bool ok = below && osc.log_slope <= limit;
  report("AC8", ok, "sums below bounds at all depths=%d; log-slope %.3f <= %.3f", (int)below,
         osc.log_slope, limit);
}

// AC9: billiard geometry battery.
void ac9() {
  const BilliardTable table({{0.0, 0.0, 0.45}, {0.5, 0.5, 0.2}});

  double per_collision_speed = 0.0, specular = 0.0;
  {
    auto rng = util::make_engine(5);
    FlowState2D s = to_flow_state(table, random_collision_state(table, rng));
    for (int i = 0; i < 1000000; ++i) {
      const auto nc = next_collision(table, s, 16.0);
      const auto& d = table.scatterers()[static_cast<std::size_t>(nc.scatterer)];
      const double cx = d.cx + std::round(nc.impact.px - d.cx);
      const double cy = d.cy + std::round(nc.impact.py - d.cy);
      const double nx = (nc.impact.px - cx) / d.rho, ny = (nc.impact.py - cy) / d.rho;
      const double speed_in = std::hypot(nc.impact.dx, nc.impact.dy);
      const double dot = nc.impact.dx * nx + nc.impact.dy * ny;
      s.px = nc.impact.px;
      s.py = nc.impact.py;
      s.dx = nc.impact.dx - 2.0 * dot * nx;
      s.dy = nc.impact.dy - 2.0 * dot * ny;
      per_collision_speed =
          std::max(per_collision_speed, std::fabs(std::hypot(s.dx, s.dy) - speed_in));
      specular = std::max(specular, std::fabs(s.dx * nx + s.dy * ny + dot));
    }
  }

  double involution = 0.0;
  {
    auto rng = util::make_engine(7);
    CollisionState c = random_collision_state(table, rng);
    for (int i = 0; i < 1000; ++i) {
      const auto c1 = billiard_map(table, c, 16.0);
      CollisionState back = c1;
      back.theta = -back.theta;
      auto c0 = billiard_map(table, back, 16.0);
      c0.theta = -c0.theta;
      double defect = 1.0;
      if (c0.scatterer == c.scatterer) {
        const double perim = 2.0 * M_PI * table.scatterers()[c.scatterer].rho;
        double dr = std::fabs(c0.arclength - c.arclength);
        dr = std::min(dr, perim - dr);
        defect = std::max(dr, std::fabs(c0.theta - c.theta));
      }
      involution = std::max(involution, defect);
      c = c1;
    }
  }

  double mft = 0.0;
  {
    auto rng = util::make_engine(9);
    const int n = 400000;
    for (int i = 0; i < n; ++i)
      mft += next_collision(table, to_flow_state(table, random_collision_state(table, rng)), 16.0)
                 .free_time;
    mft /= n;
  }
  const double mft_rel = std::fabs(mft / table.mean_free_time_formula() - 1.0);

  const auto chi = cos_theta_invariance(table, 1000000, 20, 20, 31);
  const auto h1 = finite_horizon_check(BilliardTable({{0.5, 0.5, 0.3}}), {12, 200000, 13});
  const auto h2 = finite_horizon_check(table, {12, 200000, 13});
  const bool single_ok = !h1.finite && h1.corridor && h1.corridor->p == 1 &&
                         h1.corridor->q == 0 &&
                         std::fabs(h1.corridor->clearance - 0.2) < 1e-9;

  const bool ok = per_collision_speed <= 1e-12 && specular <= 1e-12 && involution <= 1e-9 &&
                  mft_rel <= 0.02 && chi.p_value > 0.01 && single_ok && h2.finite;
  report("AC9", ok,
         "speed defect %.1e (<= 1e-12), involution %.1e (<= 1e-9), mean-free-time error "
         "%.2f%% (<= 2%%), chi^2 p = %.3f (> 0.01), single-disk infinite w/ witness=%d, "
         "two-disk finite=%d",
         per_collision_speed, involution, 100.0 * mft_rel, chi.p_value, (int)single_ok,
         (int)h2.finite);
}

// AC10: Lorentz flow CLT on the finite-horizon table plus the iterated-logarithm
// band diagnostic on a 1e8-iterate doubling run.
void ac10() {
  const BilliardTable table({{0.0, 0.0, 0.45}, {0.5, 0.5, 0.2}});
  const auto psi = [](double, double, double dx, double) { return dx; };  // mean zero by symmetry

  // variance from one long flow run by batch means of block integrals
  double sigma2;
  {
    const double block = 100.0;
    const auto run = lorentz_flow_observable_run(table, psi, 64000.0, block, 101);
    std::vector<double> increments;
    double prev = 0.0;
    for (const auto& p : run) {
      increments.push_back(p.integral - prev);
      prev = p.integral;
    }
    double mean = 0.0;
    for (double x : increments) mean += x;
    mean /= static_cast<double>(increments.size());
    double var = 0.0;
    for (double x : increments) var += (x - mean) * (x - mean);
    var /= static_cast<double>(increments.size() - 1);
    sigma2 = var / block;
  }

  const double t_total = 200.0;
  const std::size_t replicas = 500;
  std::vector<double> sums(replicas);
  util::parallel_for(replicas, [&](std::size_t r) {
    const auto run =
        lorentz_flow_observable_run(table, psi, t_total, t_total, util::stream_seed(500, r));
    sums[r] = run.empty() ? 0.0 : run.back().integral;
  });
  const auto clt = stats::clt_test(sums, t_total, sigma2);

  // diagnostic half: the band on a 1e8-iterate doubling partial-sum trajectory
  std::vector<stats::LilCheckpoint> cps;
  {
    const auto sys = make_system({MapKind::doubling, 0.0});
    StationaryOrbit orbit(sys, 37);
    double s = 0.0;
    std::size_t next_cp = 16;
    for (std::size_t n = 1; n <= 100000000; ++n) {
      s += std::cos(2.0 * M_PI * orbit.point());
      orbit.advance();
      if (n == next_cp) {
        cps.push_back({static_cast<double>(n), s});
        next_cp = std::max(next_cp + 1,
                           static_cast<std::size_t>(std::ceil(next_cp * 1.02)));
      }
    }
    cps.push_back({1e8, s});
  }
  const auto lil = stats::lil_diagnostic(cps, 0.5, 0.5, 1.5);

  const bool ok = clt.pass && lil.pass;
  report("AC10", ok,
         "lorentz flow clt p = %.4f (> 0.01; sigma^2 = %.4f, 500 replicas); lil running sup "
         "%.3f in [0.5, 1.5] (diagnostic)",
         clt.p_value, sigma2, lil.running_sup);
}

}  // namespace

int main() {
  ac1();
  ac2();
  ac3();
  ac4();
  ac5();
  ac6();
  ac7();
  ac8();
  ac9();
  ac10();
  if (g_failures == 0)
    std::printf("all acceptance criteria passed\n");
  else
    std::printf("%d criteria failed\n", g_failures);
  return g_failures;
}
