#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "towerlimits/systems.hpp"

namespace towerlimits {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool contains(double x) const { return x >= lo && x < hi; }
  double length() const { return hi - lo; }
};

// Identifies the branch itinerary of one excursion out of the base set.  For
// interval maps with monotone branches each label corresponds to one interval
// of the induced partition.  Patterns up to 62 steps are packed exactly; longer
// ones are FNV-hashed with a marker bit.
struct ExcursionLabel {
  std::uint32_t return_time = 0;
  std::uint64_t pattern = 0;
  bool operator==(const ExcursionLabel&) const = default;
};

struct FirstReturn {
  std::uint32_t return_time = 0;
  double image = 0.0;
};

// First-return system over a base interval Y: f(y) = T^{R(y)} y with
// R(y) = min{n >= 1 : T^n y in Y}.
class InducedSystem {
 public:
  InducedSystem(MapSystem parent, Interval base, std::uint64_t iterate_cap = 1000000000ULL);

  const MapSystem& parent() const { return parent_; }
  const Interval& base() const { return base_; }
  std::uint64_t iterate_cap() const { return cap_; }

  // Throws DomainError if x is not in Y, NonreturnError past the iterate cap.
  FirstReturn first_return(double x) const;
  std::uint32_t return_time(double x) const { return first_return(x).return_time; }
  double induced_map(double x) const { return first_return(x).image; }

  // f'(x) = product of T' along the excursion.
  double derivative(double x) const;

  ExcursionLabel label(double x) const;
  std::vector<int> branch_pattern(double x) const;

 private:
  MapSystem parent_;
  Interval base_;
  std::uint64_t cap_;
};

struct Excursion {
  std::uint32_t return_time = 0;
  ExcursionLabel label;
};

// Stationary orbit of the induced map, built on the parent's stationary orbit.
// point() is the start of the next excursion; advance() performs it.
class InducedOrbit {
 public:
  InducedOrbit(const InducedSystem& induced, std::uint64_t seed);

  double point() const { return y_; }
  Excursion advance();

  const InducedSystem& induced() const { return induced_; }

  static constexpr int kReturnBurnIn = 64;

 private:
  void settle_into_base();

  InducedSystem induced_;
  StationaryOrbit parent_orbit_;
  double y_ = 0.0;
};

// n return times along one stationary induced orbit.
std::vector<std::uint32_t> sample_returns(const InducedSystem& induced, std::size_t n,
                                          std::uint64_t seed);

enum class TailKind { polynomial, exponential_or_faster, undetermined };

struct TailFitOptions {
  double min_threshold = 10.0;      // drop the pre-asymptotic smallest decade
  double drop_top_fraction = 0.01;  // order-statistic cut against extreme-value noise
  std::size_t min_exceedances = 100;  // never regress on survival levels below this support
  int grid_points = 40;
  double poly_r2_threshold = 0.95;
};

struct TailReport {
  TailKind kind = TailKind::undetermined;
  double exponent = 0.0;      // gamma-hat, set only for polynomial verdicts
  double exponent_lo = 0.0;
  double exponent_hi = 0.0;
  double r2_poly = 0.0;
  double r2_exp = 0.0;
  std::size_t sample_count = 0;
  std::vector<double> thresholds;
  std::vector<double> survival;
};

TailReport tail_exponent(const std::vector<double>& samples, const TailFitOptions& opts = {});
TailReport tail_exponent(const std::vector<std::uint32_t>& samples,
                         const TailFitOptions& opts = {});

struct MomentReport {
  double norm = 0.0;        // estimate of |R|_p
  bool finite = false;      // truncated-mean stability verdict
  double half_full_drift = 0.0;
  double p = 0.0;
};

MomentReport moment_norm(const std::vector<double>& samples, double p);
MomentReport moment_norm(const std::vector<std::uint32_t>& samples, double p);

struct KacCheck {
  double mean_return = 0.0;
  double mean_return_se = 0.0;
  double base_measure = 0.0;
  double base_measure_se = 0.0;
  double product = 0.0;     // mean_return * m(Y), should be 1
  double product_se = 0.0;
};

KacCheck kac_check(const InducedSystem& induced, std::size_t n_returns,
                   std::size_t n_measure, std::uint64_t seed);

}  // namespace towerlimits
