#include "towerlimits/systems.hpp"

#include <cmath>
#include <utility>
#include <vector>

#include "towerlimits/util/descriptive.hpp"

namespace towerlimits {

std::string to_string(MapKind kind) {
  switch (kind) {
    case MapKind::doubling: return "doubling";
    case MapKind::lsv: return "lsv";
    case MapKind::neutral_circle: return "neutral_circle";
  }
  return "unknown";
}

namespace {

double wrap_unit(double y) {
  if (y >= 1.0) y -= 1.0;
  if (y >= 1.0 || y < 0.0) y -= std::floor(y);
  return y;
}

// Branch boundary of x + x^(1+alpha) mod 1: the root of x + x^(1+alpha) = 1.
double neutral_split(double alpha) {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mid + std::pow(mid, 1.0 + alpha) < 1.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

MapSystem make_system(const MapSpec& spec) {
  MapSystem sys;
  sys.kind_ = spec.kind;
  if (spec.kind == MapKind::doubling) {
    sys.split_ = 0.5;
    return sys;
  }
  if (!std::isfinite(spec.alpha) || spec.alpha <= 0.0)
    throw ParameterError("make_system: alpha must be finite and positive for " +
                         to_string(spec.kind));
  sys.alpha_ = spec.alpha;
  sys.out_of_regime_ = spec.alpha >= 0.5;
  sys.split_ = spec.kind == MapKind::lsv ? 0.5 : neutral_split(spec.alpha);
  return sys;
}

double MapSystem::step(double x) const {
  switch (kind_) {
    case MapKind::doubling: {
      const double y = 2.0 * x;
      return y >= 1.0 ? y - 1.0 : y;
    }
    case MapKind::lsv: {
      if (x < 0.5) {
        // x(1 + 2^alpha x^alpha) written as x + x (2x)^alpha
        return wrap_unit(x + x * std::pow(2.0 * x, alpha_));
      }
      return wrap_unit(2.0 * x - 1.0);
    }
    case MapKind::neutral_circle:
      return wrap_unit(x + std::pow(x, 1.0 + alpha_));
  }
  return x;
}

double MapSystem::derivative(double x) const {
  switch (kind_) {
    case MapKind::doubling:
      return 2.0;
    case MapKind::lsv:
      return x < 0.5 ? 1.0 + (1.0 + alpha_) * std::pow(2.0 * x, alpha_) : 2.0;
    case MapKind::neutral_circle:
      return 1.0 + (1.0 + alpha_) * std::pow(x, alpha_);
  }
  return 1.0;
}

double evolve(const MapSystem& system, double x, long long n) {
  if (!(x >= 0.0 && x < 1.0)) throw DomainError("evolve: point outside [0,1)");
  if (n < 0) throw ParameterError("evolve: negative iterate count");
  for (long long i = 0; i < n; ++i) {
    x = system.step(x);
    if (x == 0.0 && system.kind() != MapKind::doubling) {
      // Exact hit of the neutral fixed point: measure zero, but absorbing in
      // floating point.  Nudge off it and keep going.
      x = 0x1.0p-45;
    }
  }
  return x;
}

StationaryOrbit::StationaryOrbit(const MapSystem& system, std::uint64_t seed)
    : system_(system), rng_(util::make_engine(seed)) {
  if (system_.kind() == MapKind::doubling) {
    shift_mode_ = true;
    window_ = rng_();  // uniform window is exactly stationary
    refill_point();
    return;
  }
  x_ = util::uniform01(rng_);
  if (x_ <= 0.0) x_ = 0.25;
  for (int i = 0; i < kBurnIn; ++i) advance();
}

void StationaryOrbit::refill_point() { x_ = static_cast<double>(window_) * 0x1.0p-64; }

void StationaryOrbit::advance() {
  if (shift_mode_) {
    if (bits_left_ == 0) {
      bit_buffer_ = rng_();
      bits_left_ = 64;
    }
    window_ = (window_ << 1) | (bit_buffer_ & 1u);
    bit_buffer_ >>= 1;
    --bits_left_;
    refill_point();
    return;
  }
  x_ = system_.step(x_);
  if (x_ == 0.0) x_ = 0x1.0p-45;
}

Observable make_observable(std::function<double(double)> eval, double holder_exponent,
                           double holder_constant, double sup_norm) {
  if (!(holder_exponent > 0.0 && holder_exponent <= 1.0))
    throw ParameterError("make_observable: holder exponent must lie in (0,1]");
  Observable v;
  v.eval = std::move(eval);
  v.holder_exponent = holder_exponent;
  v.holder_constant = holder_constant;
  v.sup_norm = sup_norm;
  return v;
}

namespace {

std::pair<double, double> birkhoff_mean(const Observable& v, const MapSystem& system,
                                        std::size_t n, std::uint64_t seed) {
  StationaryOrbit orbit(system, seed);
  std::vector<double> values;
  values.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    values.push_back(v(orbit.point()));
    orbit.advance();
  }
  double sum = 0.0;
  for (double y : values) sum += y;
  return {sum / static_cast<double>(n), util::segmented_mean_se(values)};
}

}  // namespace

Observable center_observable(const Observable& v, const MapSystem& system, std::size_t n,
                             std::uint64_t seed) {
  if (n < 10000) throw ParameterError("center_observable: need n >= 1e4 samples");
  const auto [m1, se1] = birkhoff_mean(v, system, n, util::stream_seed(seed, 0));
  const auto [m2, se2] = birkhoff_mean(v, system, n, util::stream_seed(seed, 1));
  const double combined_se = std::sqrt(se1 * se1 + se2 * se2);
  if (combined_se > 0.0 && std::fabs(m1 - m2) > 6.0 * combined_se)
    throw EstimationError("center_observable: independent seeds disagree beyond 6 SE");
  const double mean = 0.5 * (m1 + m2);

  Observable centered = v;
  const auto inner = v.eval;
  centered.eval = [inner, mean](double x) { return inner(x) - mean; };
  centered.mean_zero = true;
  centered.center_constant = mean;
  centered.center_se = 0.5 * combined_se;
  centered.sup_norm = v.sup_norm + std::fabs(mean);
  return centered;
}

}  // namespace towerlimits
