#include <cmath>

#include "doctest.h"
#include "towerlimits/gibbs_markov.hpp"
#include "towerlimits/util/descriptive.hpp"
#include "towerlimits/util/rng.hpp"

using namespace towerlimits;

namespace {

InducedSystem doubling_induced() {
  return InducedSystem(make_system({MapKind::doubling, 0.0}), {0.5, 1.0});
}

const CylinderTree& doubling_tree() {
  static const CylinderTree tree =
      build_cylinders(doubling_induced(), 4, 0.5, {.samples = 400000, .seed = 11});
  return tree;
}

}  // namespace

TEST_CASE("doubling cylinders carry exact dyadic lengths") {
  const auto& tree = doubling_tree();
  REQUIRE(tree.exact_lengths());
  for (const auto& c : tree.level(1)) {
    const auto r = static_cast<int>(tree.label_return_time(c.word[0]));
    CHECK(c.length_measure == doctest::Approx(std::ldexp(1.0, -r)).epsilon(1e-8));
  }
}

TEST_CASE("cylinder measures are a probability partition at every depth") {
  const auto& tree = doubling_tree();
  for (int k = 1; k <= tree.depth(); ++k) {
    double sum = 0.0;
    for (const auto& c : tree.level(k)) sum += c.measure;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("each cylinder refines exactly one cylinder one level up") {
  const auto& tree = doubling_tree();
  for (int k = 2; k <= tree.depth(); ++k) {
    for (const auto& c : tree.level(k)) {
      const std::vector<std::uint32_t> prefix(c.word.begin(), c.word.end() - 1);
      const auto parent = tree.find_cylinder(k - 1, prefix);
      REQUIRE(parent.has_value());
      const auto& p = tree.level(k - 1)[*parent];
      CHECK(c.lo >= p.lo - 1e-10);
      CHECK(c.hi <= p.hi + 1e-10);
    }
  }
}

TEST_CASE("linear branches factorize cylinder measures exactly") {
  const auto& tree = doubling_tree();
  for (const auto& c : tree.level(2)) {
    const double m0 = tree.level(1)[c.word[0]].length_measure;
    const double m1 = tree.level(1)[c.word[1]].length_measure;
    CHECK(c.length_measure == doctest::Approx(m0 * m1).epsilon(1e-7));
  }
}

TEST_CASE("separation time and metric follow the definitions") {
  const auto& tree = doubling_tree();
  // different first-return labels separate immediately
  const auto [s0, d0] = separation_and_metric(tree, 0.8, 0.6);
  CHECK(s0 == 0);
  CHECK(d0 == 1.0);
  // points deep inside the same depth-2 cylinder separate at 2 or later
  const auto& lvl2 = tree.level(2);
  const Cylinder* big = nullptr;
  for (const auto& c : lvl2)
    if (!big || c.count > big->count) big = &c;
  const double mid = 0.5 * (big->lo + big->hi);
  const double nudge = 0.05 * (big->hi - big->lo);
  const auto [s2, d2] = separation_and_metric(tree, mid - nudge, mid + nudge);
  CHECK(s2 >= 2);
  CHECK(d2 == doctest::Approx(std::pow(0.5, s2)));
}

TEST_CASE("the symbolic metric is an ultrametric on sampled triples") {
  const auto& tree = doubling_tree();
  auto rng = util::make_engine(3);
  int checked = 0;
  for (int i = 0; i < 10000; ++i) {
    const double x = 0.5 + 0.5 * util::uniform01(rng);
    const double y = 0.5 + 0.5 * util::uniform01(rng);
    const double z = 0.5 + 0.5 * util::uniform01(rng);
    const double dxy = separation_and_metric(tree, x, y).second;
    const double dyz = separation_and_metric(tree, y, z).second;
    const double dxz = separation_and_metric(tree, x, z).second;
    CHECK(dxz <= std::max(dxy, dyz) + 1e-15);
    ++checked;
  }
  CHECK(checked == 10000);
}

TEST_CASE("exact transfer operator: constants, cosine annihilation, duality") {
  const auto sys = make_system({MapKind::doubling, 0.0});
  const auto op = TransferDisc::exact_doubling(sys, 4096);

  const auto p1 = op.apply(op.sample_grid([](double) { return 1.0; }));
  for (double v : p1) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

  const auto pc = op.apply(op.sample_grid([](double x) { return std::cos(2.0 * M_PI * x); }));
  for (double v : pc) CHECK(std::fabs(v) < 1e-3);  // interpolation-limited

  auto rng = util::make_engine(5);
  for (int trial = 0; trial < 10; ++trial) {
    const double a = 2.0 * util::uniform01(rng) - 1.0;
    const double b = 2.0 * util::uniform01(rng) - 1.0;
    const auto v = op.sample_grid([a, b](double x) { return a * x + b * std::sin(2 * M_PI * x); });
    const auto w = op.sample_grid([a](double x) { return std::cos(2 * M_PI * a * x); });
    CHECK(std::fabs(op.integral(op.apply(v)) - op.integral(v)) < 1e-6);
    // duality <Pv, w> = <v, w o f>
    const auto pv = op.apply(v);
    const auto wf = op.apply_koopman(w);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < op.size(); ++i) {
      lhs += pv[i] * w[i] * op.node_measures()[i];
      rhs += v[i] * wf[i] * op.node_measures()[i];
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-4));
  }
  // positivity
  const auto pos = op.apply(op.sample_grid([](double x) { return 0.1 + x * x; }));
  for (double v : pos) CHECK(v >= 0.0);
}

TEST_CASE("explicit preimage powers reproduce the harmonic cascade") {
  const auto sys = make_system({MapKind::doubling, 0.0});
  const auto op = TransferDisc::exact_doubling(sys, 512);
  auto cos4 = [](double x) { return std::cos(4.0 * M_PI * x); };
  for (double x : op.nodes()) {
    CHECK(op.eval_power(cos4, x, 1) == doctest::Approx(std::cos(2.0 * M_PI * x)).epsilon(1e-12));
    CHECK(std::fabs(op.eval_power(cos4, x, 2)) < 1e-12);
  }
  // P^n x converges to the mean 1/2 at rate 2^-n
  auto coord = [](double x) { return x; };
  for (int n : {4, 8, 12}) {
    double worst = 0.0;
    for (double x : op.nodes())
      worst = std::max(worst, std::fabs(op.eval_power(coord, x, n) - 0.5));
    CHECK(worst <= std::ldexp(1.0, -n - 1) + 1e-12);
  }
}

TEST_CASE("iterated transfer keeps sup and symbolic Lipschitz proxies bounded") {
  const auto sys = make_system({MapKind::doubling, 0.0});
  const auto op = TransferDisc::exact_doubling(sys, 256);
  auto v = [](double x) { return std::sin(2.0 * M_PI * x) + 0.5 * x; };
  double prev_sup = 1e300;
  for (int n = 1; n <= 12; n += 2) {
    double sup = 0.0, lip = 0.0;
    std::vector<double> vals;
    for (double x : op.nodes()) vals.push_back(op.eval_power(v, x, n));
    for (std::size_t i = 0; i < vals.size(); ++i) {
      sup = std::max(sup, std::fabs(vals[i] - 0.25));
      if (i > 0) lip = std::max(lip, std::fabs(vals[i] - vals[i - 1]) * vals.size());
    }
    CHECK(sup <= prev_sup + 1e-12);  // contraction toward the constant
    CHECK(lip < 20.0);
    prev_sup = sup;
  }
  CHECK(prev_sup < 1e-3);
}

TEST_CASE("per-cylinder sup bound by mean plus diameter term") {
  const auto& tree = doubling_tree();
  // v = x is 1-Lipschitz; on the base its d_beta constant is 1/2
  const double vbeta = 0.5;
  for (int k = 1; k <= tree.depth(); ++k) {
    for (const auto& c : tree.level(k)) {
      const double sup = std::max(std::fabs(c.hi), std::fabs(c.lo));
      const double mean = 0.5 * (c.lo + c.hi);
      CHECK(sup <= mean + std::pow(tree.beta(), k) * vbeta + 1e-9);
    }
  }
}

TEST_CASE("ulam discretization is stochastic on visited cells and nearly dual") {
  const auto lsv = make_system({MapKind::lsv, 0.25});
  const InducedSystem ind(lsv, {0.5, 1.0});
  const auto tree = build_cylinders(ind, 3, 0.5, {.samples = 300000, .seed = 31});
  const auto op = TransferDisc::ulam(tree, 2, 500000, 41);
  const auto p1 = op.apply(op.sample_grid([](double) { return 1.0; }));
  double mass_weighted_err = 0.0, total_mass = 0.0;
  for (std::size_t i = 0; i < op.size(); ++i) {
    mass_weighted_err += op.node_measures()[i] * std::fabs(p1[i] - 1.0);
    total_mass += op.node_measures()[i];
  }
  CHECK(total_mass == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(mass_weighted_err < 1e-3);

  auto rng = util::make_engine(43);
  for (int t = 0; t < 5; ++t) {
    std::vector<double> v(op.size()), w(op.size());
    for (auto& x : v) x = util::uniform01(rng) - 0.5;
    for (auto& x : w) x = util::uniform01(rng) - 0.5;
    const auto pv = op.apply(v);
    const auto wf = op.apply_koopman(w);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < op.size(); ++i) {
      lhs += pv[i] * w[i] * op.node_measures()[i];
      rhs += v[i] * wf[i] * op.node_measures()[i];
    }
    // cell masses as source vs target differ by stream-boundary counts, so
    // duality holds to sampling accuracy rather than exactly
    CHECK(std::fabs(lhs - rhs) < 1e-4);
    const auto pos = op.apply(std::vector<double>(op.size(), 0.25));
    for (double x : pos) CHECK(x >= 0.0);
  }
}

TEST_CASE("correlations vanish for annihilated and constant observables") {
  const InducedSystem full(make_system({MapKind::doubling, 0.0}), {0.0, 1.0});
  const auto cosv =
      make_observable([](double x) { return std::cos(2.0 * M_PI * x); }, 1.0, 2.0 * M_PI, 1.0);
  const auto corr = correlation_sequence(full, cosv, cosv, 10, 2000000, 17);
  CHECK(corr.value[0] == doctest::Approx(0.5).epsilon(0.01));
  for (int n = 1; n <= 10; ++n)
    CHECK(std::fabs(corr.value[n]) <= 3.0 * corr.se[n]);

  const auto constv = make_observable([](double) { return 3.25; }, 1.0, 0.0, 3.25);
  const auto cc = correlation_sequence(full, constv, constv, 5, 1000000, 19);
  for (int n = 0; n <= 5; ++n) CHECK(std::fabs(cc.value[n]) < 1e-10);
}

TEST_CASE("decay fit recovers synthetic geometric laws") {
  CorrelationSeries clean;
  clean.replicas = 2;
  for (int n = 0; n <= 15; ++n) {
    clean.value.push_back(std::pow(0.8, n));
    clean.se.push_back(1e-9);
  }
  const auto fit = fit_decay(clean);
  CHECK(fit.rate == doctest::Approx(0.8).epsilon(0.0125));
  CHECK(fit.amplitude == doctest::Approx(1.0).epsilon(0.01));
  CHECK_FALSE(fit.degenerate);

  CorrelationSeries noisy;
  noisy.replicas = 2;
  auto rng = util::make_engine(21);
  for (int n = 0; n <= 20; ++n) {
    const double c = 0.5 * std::pow(0.9, n);
    noisy.value.push_back(c * (1.0 + 0.01 * (2.0 * util::uniform01(rng) - 1.0)));
    noisy.se.push_back(0.01 * c);
  }
  const auto nf = fit_decay(noisy);
  CHECK(nf.amplitude == doctest::Approx(0.5).epsilon(0.1));
  CHECK(nf.rate == doctest::Approx(0.9).epsilon(0.0223));
  CHECK(nf.rate >= nf.rate_lo);
  CHECK(nf.rate <= nf.rate_hi);

  // all lags at the floor: degenerate-decay notice rather than an error
  CorrelationSeries flat;
  flat.replicas = 2;
  flat.value = {0.5, 1e-6, -2e-6, 1e-6, -1e-6, 2e-6};
  flat.se = {1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 1e-4};
  CHECK(fit_decay(flat).degenerate);

  // a few lags above the floor is not enough for a fit
  CorrelationSeries thin;
  thin.replicas = 2;
  thin.value = {0.5, 0.3, 0.2, 1e-8, 1e-8, 1e-8};
  thin.se = {1e-6, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6};
  CHECK_THROWS_AS(fit_decay(thin), InsufficientDataError);
}

TEST_CASE("induced intermittent correlations decay log-linearly") {
  const InducedSystem ind(make_system({MapKind::lsv, 0.25}), {0.5, 1.0});
  const auto v = make_observable([](double x) { return x; }, 1.0, 1.0, 1.0);
  const auto corr = correlation_sequence(ind, v, v, 16, 4000000, 17);
  const auto fit = fit_decay(corr);
  CHECK_FALSE(fit.degenerate);
  CHECK(fit.lags_used.size() >= 5);
  CHECK(fit.rate < 1.0);
  CHECK(fit.r2 >= 0.9);
}

TEST_CASE("distortion is unity for linear branches and stable for lsv") {
  const auto rep = check_distortion(doubling_tree(), 3);
  CHECK(rep.lipschitz_part == 0.0);
  CHECK(rep.d_hat == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(rep.pairs > 100);

  const InducedSystem ind(make_system({MapKind::lsv, 0.25}), {0.5, 1.0});
  const auto tree = build_cylinders(ind, 6, 0.5, {.samples = 1500000, .seed = 31});
  double lo = 1e300, hi = 0.0;
  for (int k = 2; k <= 6; ++k) {
    const auto r = check_distortion(tree, k, {.max_pairs = 20000, .min_count = 200});
    CHECK(std::isfinite(r.d_hat));
    lo = std::min(lo, r.d_hat);
    hi = std::max(hi, r.d_hat);
  }
  CHECK((hi - lo) / hi < 0.2);
}

TEST_CASE("oscillation sums sit below their bound and vanish for constants") {
  const auto& tree = doubling_tree();
  const auto constv = make_observable([](double) { return 2.0; }, 1.0, 0.0, 2.0);
  const auto rep = ps_oscillation(tree, constv, 0.5, 200000, 23);
  for (double s : rep.sums) CHECK(s == 0.0);

  const auto coord = make_observable([](double x) { return x; }, 1.0, 1.0, 1.0);
  const auto rep2 = ps_oscillation(tree, coord, 0.5, 400000, 29);
  for (int k = 1; k <= tree.depth(); ++k) CHECK(rep2.sums[k - 1] <= rep2.bounds[k - 1]);
  CHECK(rep2.log_slope <= 2.5 * std::log(0.5) + 0.05);

  // exact enumeration oracle at depth 2: uniform centered moments over dyadic cells
  const double p = 2.5;
  double exact = 0.0;
  for (int a = 1; a <= 40; ++a) {
    for (int b = 1; b <= 40; ++b) {
      const double len = std::ldexp(0.5, -(a + b));          // cylinder length in [1/2,1)
      const double mass = std::ldexp(1.0, -(a + b));          // normalized measure
      exact += mass * 2.0 * std::pow(0.5 * len, p + 1.0) / ((p + 1.0) * len);
    }
  }
  CHECK(rep2.sums[1] == doctest::Approx(exact).epsilon(0.1));
}

TEST_CASE("mixing differences vanish for dyadic sets and the full base") {
  const auto& tree = doubling_tree();
  const Cylinder* a = nullptr;
  for (const auto& c : tree.level(2))
    if (!a || c.count > a->count) a = &c;
  const auto full = ps_mixing(tree, *a, {{0.5, 1.0}}, 3, 400000, 13);
  CHECK(full.difference == 0.0);
  for (int gap : {1, 4}) {
    const auto est = ps_mixing(tree, *a, {{0.5, 0.75}}, gap, 2000000, 13);
    CHECK(est.difference <= 3.0 * est.se + 1e-9);
  }
}

TEST_CASE("mixing gaps decay on the induced intermittent map") {
  const InducedSystem ind(make_system({MapKind::lsv, 0.25}), {0.5, 1.0});
  const auto tree = build_cylinders(ind, 3, 0.5, {.samples = 400000, .seed = 3});
  const Cylinder* a = nullptr;
  for (const auto& c : tree.level(1))
    if (!a || c.count > a->count) a = &c;
  std::vector<double> gaps, logs;
  double d0 = 0.0, floor0 = 0.0;
  for (int gap = 0; gap <= 5; ++gap) {
    const auto est = ps_mixing(tree, *a, {{0.55, 0.8}}, gap, 4000000, 7);
    if (gap == 0) {
      d0 = est.difference;
      floor0 = est.se;
    }
    if (est.difference > 3.0 * est.se) {
      gaps.push_back(gap);
      logs.push_back(std::log(est.difference));
    }
  }
  CHECK(d0 > 10.0 * floor0);  // the gap-0 correlation is a clear signal
  REQUIRE(gaps.size() >= 2);
  CHECK(util::fit_line(gaps, logs).slope < 0.0);
}

TEST_CASE("oscillation refuses observables over heavy-tailed returns") {
  // alpha = 0.8 puts the return time outside L^{2.5}
  const InducedSystem ind(make_system({MapKind::lsv, 0.8}), {0.5, 1.0});
  const auto tree = build_cylinders(ind, 2, 0.5, {.samples = 100000, .seed = 3});
  const auto v = make_observable([](double x) { return x; }, 1.0, 1.0, 1.0);
  CHECK_THROWS_AS(ps_oscillation(tree, v, 0.5, 200000, 1), ParameterError);
}

TEST_CASE("build_cylinders validates its inputs") {
  CHECK_THROWS_AS(build_cylinders(doubling_induced(), 0, 0.5), ParameterError);
  CHECK_THROWS_AS(build_cylinders(doubling_induced(), 2, 1.5), ParameterError);
  CHECK_THROWS_AS(build_cylinders(doubling_induced(), 2, 0.5, {.samples = 10}), ParameterError);
}
