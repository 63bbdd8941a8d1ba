#pragma once

#include <cmath>
#include <functional>

#include "towerlimits/errors.hpp"

namespace towerlimits::util {

namespace detail {

inline double simpson(double a, double fa, double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_step(const std::function<double(double)>& f, double a, double fa, double b,
                            double fb, double m, double fm, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(a, fa, m, fm, flm);
  const double right = simpson(m, fm, b, fb, frm);
  const double delta = left + right - whole;
  if (std::fabs(delta) <= 15.0 * tol || depth <= 0) return left + right + delta / 15.0;
  return adaptive_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         adaptive_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson with a relative tolerance (falls back to absolute near zero).
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double rel_tol = 1e-8, int max_depth = 40) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
  if (!std::isfinite(fa) || !std::isfinite(fb) || !std::isfinite(fm))
    throw QuadratureError("integrate: non-finite integrand");
  const double whole = detail::simpson(a, fa, b, fb, fm);
  const double scale = std::max({std::fabs(whole), std::fabs(b - a), 1e-12});
  return detail::adaptive_step(f, a, fa, b, fb, m, fm, whole, rel_tol * scale, max_depth);
}

}  // namespace towerlimits::util
