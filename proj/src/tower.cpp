#include "towerlimits/tower.hpp"

#include <algorithm>
#include <cmath>

#include "towerlimits/util/descriptive.hpp"

namespace towerlimits {

TowerObservable lift_phase_observable(const Observable& psi) {
  TowerObservable phi;
  const auto eval = psi.eval;
  phi.on_level = [eval](double, double phase, std::uint32_t) { return eval(phase); };
  return phi;
}

TowerModel build_tower(const InducedSystem& induced, const std::vector<std::uint32_t>& samples,
                       const TowerOptions& opts) {
  if (samples.empty()) throw InsufficientDataError("build_tower: no return-time samples");
  TowerModel tower{induced};

  std::vector<double> r(samples.begin(), samples.end());
  util::RunningStats stats;
  for (double x : r) stats.add(x);
  tower.mean_return = stats.mean();
  tower.mean_return_se = util::segmented_mean_se(r);

  std::vector<double> sorted = r;
  std::sort(sorted.begin(), sorted.end());
  const auto horizon = static_cast<std::uint32_t>(util::quantile(sorted, opts.level_quantile));
  // mass at level l is m(R > l) / mean R
  std::vector<std::uint64_t> exceed(horizon + 1, 0);
  for (const auto s : samples)
    for (std::uint32_t l = 0; l <= horizon && l < s; ++l) ++exceed[l];
  tower.level_masses.resize(horizon + 1);
  for (std::uint32_t l = 0; l <= horizon; ++l)
    tower.level_masses[l] = static_cast<double>(exceed[l]) /
                            (static_cast<double>(samples.size()) * tower.mean_return);

  if (opts.theta > 0.0) {
    tower.theta = opts.theta;
  } else {
    // 1/lambda with lambda the smallest observed branch expansion of f
    double lambda = 1e300;
    InducedOrbit probe(induced, 7);
    for (std::size_t i = 0; i < opts.expansion_probe; ++i) {
      lambda = std::min(lambda, std::fabs(induced.derivative(probe.point())));
      probe.advance();
    }
    tower.theta = lambda > 1.0 ? 1.0 / lambda : 0.5;
  }
  return tower;
}

Observable induce_observable(const TowerModel& tower, const TowerObservable& phi) {
  const InducedSystem induced = tower.base;
  Observable out;
  out.eval = [induced, phi](double x) {
    if (!induced.base().contains(x)) throw DomainError("induced observable: point not in base");
    double sum = 0.0;
    double p = x;
    for (std::uint64_t l = 0; l <= induced.iterate_cap(); ++l) {
      sum += phi(x, p, static_cast<std::uint32_t>(l));
      p = induced.parent().step(p);
      if (p == 0.0) {
        if (induced.parent().kind() == MapKind::doubling) throw NonreturnError(l + 1);
        p = 0x1.0p-45;
      }
      if (induced.base().contains(p)) return sum;
    }
    throw NonreturnError(induced.iterate_cap());
  };
  return out;
}

double lift_variance(double sigma1_sq, double mean_return) {
  if (!(mean_return > 0.0)) throw ParameterError("lift_variance: mean return must be positive");
  if (sigma1_sq < 0.0) throw ParameterError("lift_variance: variance must be nonnegative");
  return sigma1_sq / mean_return;
}

TowerOrbitResult tower_orbit(const TowerModel& tower, double start, std::uint64_t n_steps,
                             const TowerObservable& phi) {
  const auto& induced = tower.base;
  if (!induced.base().contains(start)) throw DomainError("tower_orbit: start not in base");
  TowerOrbitResult res;
  double base = start;
  double phase = start;
  std::uint32_t level = 0;
  for (std::uint64_t n = 0; n < n_steps; ++n) {
    res.sum += phi(base, phase, level);
    ++res.steps;
    phase = induced.parent().step(phase);
    if (phase == 0.0) {
      if (induced.parent().kind() == MapKind::doubling) throw NonreturnError(n + 1);
      phase = 0x1.0p-45;
    }
    ++level;
    if (induced.base().contains(phase)) {
      res.sum_at_last_boundary = res.sum;
      ++res.excursions;
      res.max_return_seen = std::max(res.max_return_seen, level);
      base = phase;
      level = 0;
    }
    if (level > induced.iterate_cap()) throw NonreturnError(induced.iterate_cap());
  }
  return res;
}

TowerWalker::TowerWalker(const TowerModel& tower, std::uint64_t seed)
    : induced_(tower.base), orbit_(tower.base.parent(), seed) {
  // settle onto an excursion boundary so the base coordinate is known
  for (std::uint64_t n = 0; n <= induced_.iterate_cap(); ++n) {
    if (induced_.base().contains(orbit_.point())) {
      excursion_base_ = orbit_.point();
      level_ = 0;
      return;
    }
    orbit_.advance();
  }
  throw NonreturnError(induced_.iterate_cap());
}

double TowerWalker::value(const TowerObservable& phi) const {
  return phi(excursion_base_, orbit_.point(), level_);
}

void TowerWalker::advance() {
  orbit_.advance();
  ++level_;
  if (induced_.base().contains(orbit_.point())) {
    excursion_base_ = orbit_.point();
    level_ = 0;
  }
}

}  // namespace towerlimits
