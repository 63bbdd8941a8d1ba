#include "towerlimits/inducing.hpp"

#include <algorithm>
#include <cmath>

#include "towerlimits/util/descriptive.hpp"

namespace towerlimits {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;
constexpr std::uint64_t kHashMarker = 1ULL << 63;

struct LabelBuilder {
  std::uint32_t steps = 0;
  std::uint64_t packed = 1;  // leading sentinel bit keeps lengths distinct
  std::uint64_t hash = kFnvOffset;

  void push(int branch) {
    ++steps;
    if (steps <= 62) packed = (packed << 1) | static_cast<std::uint64_t>(branch & 1);
    hash = (hash ^ static_cast<std::uint64_t>(branch + 1)) * kFnvPrime;
  }
  ExcursionLabel finish() const {
    ExcursionLabel l;
    l.return_time = steps;
    l.pattern = steps <= 62 ? packed : (hash | kHashMarker);
    return l;
  }
};

}  // namespace

InducedSystem::InducedSystem(MapSystem parent, Interval base, std::uint64_t iterate_cap)
    : parent_(std::move(parent)), base_(base), cap_(iterate_cap) {
  if (!(base.lo >= 0.0 && base.hi <= 1.0 && base.lo < base.hi))
    throw ParameterError("InducedSystem: base set must be a nonempty subinterval of [0,1)");
  if (cap_ == 0) throw ParameterError("InducedSystem: iterate cap must be positive");
}

FirstReturn InducedSystem::first_return(double x) const {
  if (!base_.contains(x)) throw DomainError("first_return: point not in the base set");
  double y = x;
  for (std::uint64_t n = 1; n <= cap_; ++n) {
    y = parent_.step(y);
    if (y == 0.0) {
      // 0 is a fixed point; under the doubling map a return is impossible
      if (parent_.kind() == MapKind::doubling) throw NonreturnError(n);
      y = 0x1.0p-45;
    }
    if (base_.contains(y)) return {static_cast<std::uint32_t>(n), y};
  }
  throw NonreturnError(cap_);
}

double InducedSystem::derivative(double x) const {
  if (!base_.contains(x)) throw DomainError("derivative: point not in the base set");
  double y = x;
  double prod = 1.0;
  for (std::uint64_t n = 1; n <= cap_; ++n) {
    prod *= parent_.derivative(y);
    y = parent_.step(y);
    if (y == 0.0) {
      // 0 is a fixed point; under the doubling map a return is impossible
      if (parent_.kind() == MapKind::doubling) throw NonreturnError(n);
      y = 0x1.0p-45;
    }
    if (base_.contains(y)) return prod;
  }
  throw NonreturnError(cap_);
}

ExcursionLabel InducedSystem::label(double x) const {
  if (!base_.contains(x)) throw DomainError("label: point not in the base set");
  LabelBuilder lb;
  double y = x;
  for (std::uint64_t n = 1; n <= cap_; ++n) {
    lb.push(parent_.branch_index(y));
    y = parent_.step(y);
    if (y == 0.0) {
      // 0 is a fixed point; under the doubling map a return is impossible
      if (parent_.kind() == MapKind::doubling) throw NonreturnError(n);
      y = 0x1.0p-45;
    }
    if (base_.contains(y)) return lb.finish();
  }
  throw NonreturnError(cap_);
}

std::vector<int> InducedSystem::branch_pattern(double x) const {
  if (!base_.contains(x)) throw DomainError("branch_pattern: point not in the base set");
  std::vector<int> pattern;
  double y = x;
  for (std::uint64_t n = 1; n <= cap_; ++n) {
    pattern.push_back(parent_.branch_index(y));
    y = parent_.step(y);
    if (y == 0.0) {
      // 0 is a fixed point; under the doubling map a return is impossible
      if (parent_.kind() == MapKind::doubling) throw NonreturnError(n);
      y = 0x1.0p-45;
    }
    if (base_.contains(y)) return pattern;
  }
  throw NonreturnError(cap_);
}

InducedOrbit::InducedOrbit(const InducedSystem& induced, std::uint64_t seed)
    : induced_(induced), parent_orbit_(induced.parent(), seed) {
  settle_into_base();
  for (int i = 0; i < kReturnBurnIn; ++i) advance();
}

void InducedOrbit::settle_into_base() {
  const auto& base = induced_.base();
  for (std::uint64_t n = 0; n <= induced_.iterate_cap(); ++n) {
    if (base.contains(parent_orbit_.point())) {
      y_ = parent_orbit_.point();
      return;
    }
    parent_orbit_.advance();
  }
  throw NonreturnError(induced_.iterate_cap());
}

Excursion InducedOrbit::advance() {
  const auto& base = induced_.base();
  LabelBuilder lb;
  for (std::uint64_t n = 1; n <= induced_.iterate_cap(); ++n) {
    lb.push(induced_.parent().branch_index(parent_orbit_.point()));
    parent_orbit_.advance();
    if (base.contains(parent_orbit_.point())) {
      y_ = parent_orbit_.point();
      Excursion e;
      e.label = lb.finish();
      e.return_time = e.label.return_time;
      return e;
    }
  }
  throw NonreturnError(induced_.iterate_cap());
}

std::vector<std::uint32_t> sample_returns(const InducedSystem& induced, std::size_t n,
                                          std::uint64_t seed) {
  std::vector<std::uint32_t> out;
  if (n == 0) return out;
  out.reserve(n);
  InducedOrbit orbit(induced, seed);
  for (std::size_t i = 0; i < n; ++i) out.push_back(orbit.advance().return_time);
  return out;
}

namespace {

TailReport tail_exponent_impl(std::vector<double> sorted, const TailFitOptions& opts) {
  TailReport report;
  report.sample_count = sorted.size();
  if (sorted.size() < 10000)
    throw InsufficientDataError("tail_exponent: need at least 1e4 samples");
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());

  const double q_cut = util::quantile(sorted, 1.0 - opts.drop_top_fraction);
  const std::size_t keep = std::max<std::size_t>(opts.min_exceedances, 1);
  const double support_cut =
      sorted.size() > keep ? sorted[sorted.size() - keep] : sorted.back();
  // The order-statistic cut alone can collide with the lower cut on heavy-tailed
  // integer data; widen to wherever at least min_exceedances samples remain.
  const double t_hi = std::max(q_cut, support_cut);
  const double t_lo = opts.min_threshold;
  if (!(t_hi > t_lo * 1.2)) return report;  // undetermined: no usable fit window

  auto survival_at = [&](double t) {
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), t);
    return static_cast<double>(sorted.end() - it) / n;
  };

  const double log_lo = std::log(t_lo), log_hi = std::log(t_hi);
  std::vector<double> ts, ss;
  double last_t = -1.0;
  for (int i = 0; i < opts.grid_points; ++i) {
    double t = std::exp(log_lo + (log_hi - log_lo) * i / (opts.grid_points - 1));
    // integer-valued data: snap to integers so thresholds are distinct survival levels
    if (sorted.front() == std::floor(sorted.front()) && sorted.back() == std::floor(sorted.back()))
      t = std::ceil(t - 1e-9);
    if (t <= last_t) continue;
    const double s = survival_at(t);
    if (s <= 0.0) break;
    ts.push_back(t);
    ss.push_back(s);
    last_t = t;
  }
  report.thresholds = ts;
  report.survival = ss;
  if (ts.size() < 5) return report;

  std::vector<double> log_t(ts.size()), log_s(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    log_t[i] = std::log(ts[i]);
    log_s[i] = std::log(ss[i]);
  }
  const auto poly = util::fit_line(log_t, log_s);
  const auto expf = util::fit_line(ts, log_s);
  report.r2_poly = poly.r2;
  report.r2_exp = expf.r2;

  if (poly.r2 >= opts.poly_r2_threshold && poly.r2 > expf.r2) {
    report.kind = TailKind::polynomial;
    report.exponent = -poly.slope;
    report.exponent_lo = -poly.slope - 2.0 * poly.slope_se;
    report.exponent_hi = -poly.slope + 2.0 * poly.slope_se;
  } else if (expf.r2 >= opts.poly_r2_threshold && expf.r2 >= poly.r2) {
    report.kind = TailKind::exponential_or_faster;
  }
  return report;
}

}  // namespace

TailReport tail_exponent(const std::vector<double>& samples, const TailFitOptions& opts) {
  return tail_exponent_impl(samples, opts);
}

TailReport tail_exponent(const std::vector<std::uint32_t>& samples, const TailFitOptions& opts) {
  std::vector<double> d(samples.begin(), samples.end());
  return tail_exponent_impl(std::move(d), opts);
}

MomentReport moment_norm(const std::vector<double>& samples, double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw ParameterError("moment_norm: need finite p >= 1");
  if (samples.size() < 10000)
    throw InsufficientDataError("moment_norm: need at least 1e4 samples");
  const std::size_t half = samples.size() / 2;
  double sum_half = 0.0, sum_full = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double w = std::pow(std::fabs(samples[i]), p);
    sum_full += w;
    if (i < half) sum_half += w;
  }
  const double mean_full = sum_full / static_cast<double>(samples.size());
  const double mean_half = sum_half / static_cast<double>(half);
  MomentReport r;
  r.p = p;
  r.norm = std::pow(mean_full, 1.0 / p);
  r.half_full_drift = mean_full > 0.0 ? std::fabs(mean_half - mean_full) / mean_full : 0.0;
  r.finite = r.half_full_drift < 0.10;
  return r;
}

MomentReport moment_norm(const std::vector<std::uint32_t>& samples, double p) {
  std::vector<double> d(samples.begin(), samples.end());
  return moment_norm(d, p);
}

KacCheck kac_check(const InducedSystem& induced, std::size_t n_returns, std::size_t n_measure,
                   std::uint64_t seed) {
  KacCheck k;
  {
    const auto returns = sample_returns(induced, n_returns, util::stream_seed(seed, 0));
    std::vector<double> r(returns.begin(), returns.end());
    util::RunningStats stats;
    for (double x : r) stats.add(x);
    k.mean_return = stats.mean();
    k.mean_return_se = util::segmented_mean_se(r);
  }
  {
    StationaryOrbit orbit(induced.parent(), util::stream_seed(seed, 1));
    std::vector<double> hits;
    hits.reserve(n_measure);
    for (std::size_t i = 0; i < n_measure; ++i) {
      hits.push_back(induced.base().contains(orbit.point()) ? 1.0 : 0.0);
      orbit.advance();
    }
    util::RunningStats stats;
    for (double h : hits) stats.add(h);
    k.base_measure = stats.mean();
    k.base_measure_se = util::segmented_mean_se(hits);
  }
  k.product = k.mean_return * k.base_measure;
  k.product_se = std::sqrt(k.base_measure * k.base_measure * k.mean_return_se * k.mean_return_se +
                           k.mean_return * k.mean_return * k.base_measure_se * k.base_measure_se);
  return k;
}

}  // namespace towerlimits
