#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include "towerlimits/errors.hpp"
#include "towerlimits/util/rng.hpp"

namespace towerlimits {

enum class MapKind { doubling, lsv, neutral_circle };

std::string to_string(MapKind kind);

struct MapSpec {
  MapKind kind = MapKind::doubling;
  double alpha = 0.0;  // intermittency parameter, used by lsv and neutral_circle
};

// A full-branch interval/circle map on [0,1).  Points live in [0,1); images that
// round to 1 wrap to 0.  Immutable after construction and safe to share.
class MapSystem {
 public:
  MapKind kind() const { return kind_; }
  double alpha() const { return alpha_; }

  // True when the parameters fall outside the regime in which the limit-theorem
  // pipeline has polynomial return tails with finite 2+delta moments (alpha >= 1/2).
  bool out_of_regime() const { return out_of_regime_; }

  int branch_count() const { return 2; }
  // Branch domains partition [0,1): branch 0 is [0, split), branch 1 is [split, 1).
  double branch_split() const { return split_; }
  int branch_index(double x) const { return x < split_ ? 0 : 1; }

  double step(double x) const;
  double derivative(double x) const;

  friend MapSystem make_system(const MapSpec& spec);

 private:
  MapKind kind_ = MapKind::doubling;
  double alpha_ = 0.0;
  double split_ = 0.5;
  bool out_of_regime_ = false;
};

MapSystem make_system(const MapSpec& spec);

// T^n x.  Throws DomainError for x outside [0,1) and ParameterError for n < 0.
double evolve(const MapSystem& system, double x, long long n);

// Stationary orbit of the map under its absolutely continuous invariant measure.
//
// For the doubling map the orbit is generated on the binary shift: the state is a
// 64-bit window of an i.i.d. fair bit stream and one step shifts in a fresh bit.
// Plain 2x mod 1 arithmetic would shift the seed's mantissa out and hit the fixed
// point 0 after ~53 iterates, so long-orbit statistics must use this form.
// The nonlinear maps use ordinary double arithmetic with a burn-in.
class StationaryOrbit {
 public:
  StationaryOrbit(const MapSystem& system, std::uint64_t seed);

  double point() const { return x_; }
  void advance();

  const MapSystem& system() const { return system_; }

  static constexpr int kBurnIn = 1000;

 private:
  void refill_point();

  MapSystem system_;
  std::mt19937_64 rng_;
  bool shift_mode_ = false;
  std::uint64_t window_ = 0;
  std::uint64_t bit_buffer_ = 0;
  int bits_left_ = 0;
  double x_ = 0.0;
};

struct Observable {
  std::function<double(double)> eval;
  double holder_exponent = 1.0;   // gamma in (0,1]
  double holder_constant = 0.0;   // declared |v(x)-v(y)| <= C d(x,y)^gamma bound
  double sup_norm = 0.0;
  bool mean_zero = false;
  double center_constant = 0.0;   // subtracted by center_observable
  double center_se = 0.0;

  double operator()(double x) const { return eval(x); }
};

Observable make_observable(std::function<double(double)> eval, double holder_exponent = 1.0,
                           double holder_constant = 0.0, double sup_norm = 0.0);

// v minus its invariant-measure mean, estimated by Birkhoff averages on two
// independent orbits of n points each.  Throws EstimationError when the two
// estimates disagree by more than 6 combined standard errors.
Observable center_observable(const Observable& v, const MapSystem& system, std::size_t n,
                             std::uint64_t seed);

}  // namespace towerlimits
