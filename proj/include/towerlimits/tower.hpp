#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "towerlimits/inducing.hpp"

namespace towerlimits {

// Observable on the discrete suspension.  A tower point is (base point, level);
// the level-l phase point T^l(base) is supplied alongside, so lifted phase-space
// observables need no recomputation.
struct TowerObservable {
  std::function<double(double base_point, double phase_point, std::uint32_t level)> on_level;
  double operator()(double base, double phase, std::uint32_t level) const {
    return on_level(base, phase, level);
  }
};

TowerObservable lift_phase_observable(const Observable& psi);

struct TowerModel {
  InducedSystem base;
  double mean_return = 0.0;
  double mean_return_se = 0.0;
  std::vector<double> level_masses;  // mass of level l under m(R > l) / mean R
  double theta = 0.5;                // contraction for the symbolic metric upstairs
};

struct TowerOptions {
  double theta = 0.0;           // <= 0: 1/lambda with lambda the observed expansion floor
  double level_quantile = 0.999;  // store level masses up to this return quantile
  std::size_t expansion_probe = 4096;
};

TowerModel build_tower(const InducedSystem& induced, const std::vector<std::uint32_t>& samples,
                       const TowerOptions& opts = {});

// Induced observable: the sum of phi over one excursion column.
Observable induce_observable(const TowerModel& tower, const TowerObservable& phi);

// sigma^2 = sigma1^2 / mean return time.
double lift_variance(double sigma1_sq, double mean_return);

struct TowerOrbitResult {
  double sum = 0.0;                   // partial sum of phi over N tower steps
  double sum_at_last_boundary = 0.0;  // value at the last completed excursion
  std::uint64_t steps = 0;
  std::uint64_t excursions = 0;
  std::uint32_t max_return_seen = 0;
};

TowerOrbitResult tower_orbit(const TowerModel& tower, double start, std::uint64_t n_steps,
                             const TowerObservable& phi);

// Streaming tower orbit started on the parent's stationary measure; emits the
// phi value at the current tower point.
class TowerWalker {
 public:
  TowerWalker(const TowerModel& tower, std::uint64_t seed);
  double value(const TowerObservable& phi) const;
  void advance();
  std::uint32_t level() const { return level_; }

 private:
  const InducedSystem induced_;
  StationaryOrbit orbit_;
  double excursion_base_ = 0.0;
  std::uint32_t level_ = 0;
};

}  // namespace towerlimits
