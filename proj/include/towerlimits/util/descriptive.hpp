#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "towerlimits/errors.hpp"

namespace towerlimits::util {

// Streaming mean/variance (Welford).
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  double mean_se() const {
    return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Standard error of the mean of a correlated stream, from disjoint segment means.
inline double segmented_mean_se(const std::vector<double>& values, std::size_t segments = 32) {
  if (values.size() < 2 * segments) segments = std::max<std::size_t>(2, values.size() / 2);
  if (segments < 2) return 0.0;
  const std::size_t len = values.size() / segments;
  RunningStats seg;
  for (std::size_t s = 0; s < segments; ++s) {
    double sum = 0.0;
    for (std::size_t i = s * len; i < (s + 1) * len; ++i) sum += values[i];
    seg.add(sum / static_cast<double>(len));
  }
  return seg.mean_se();
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
};

inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw InsufficientDataError("fit_line needs >= 2 paired points");
  const std::size_t n = x.size();
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0) throw InsufficientDataError("fit_line: degenerate abscissas");
  LinearFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ssr += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  fit.slope_se = n > 2 ? std::sqrt(ssr / static_cast<double>(n - 2) / sxx) : 0.0;
  return fit;
}

// Quantile of a sample, linear interpolation between order statistics.
inline double quantile(std::vector<double> sorted_ascending, double q) {
  auto& v = sorted_ascending;
  if (v.empty()) throw InsufficientDataError("quantile of empty sample");
  q = std::clamp(q, 0.0, 1.0);
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace towerlimits::util
