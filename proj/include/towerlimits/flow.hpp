#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <variant>
#include <vector>

#include "towerlimits/inducing.hpp"

namespace towerlimits {

struct FlowPoint {
  double x = 0.0;  // base point
  double u = 0.0;  // height under the roof, 0 <= u < h(x)
};

// Suspension semiflow under a positive roof function over an interval map or an
// induced first-return map.
class SuspensionFlow {
 public:
  SuspensionFlow(MapSystem base, std::function<double(double)> roof);
  SuspensionFlow(InducedSystem base, std::function<double(double)> roof);

  double roof(double x) const;
  double base_step(double x) const;

  // Exact segment accounting; one floating rounding per rollover.  These are
  // mechanical operations on explicit states: long-horizon statistics over the
  // doubling base should instead walk roof segments from a StationaryOrbit,
  // since plain 2x mod 1 arithmetic collapses after ~53 iterates.
  FlowPoint evolve(FlowPoint state, double t) const;

  // Integral of psi(x, u) along the flow from state for duration t; complete roof
  // segments by adaptive quadrature, boundary pieces exactly split.
  double birkhoff_integral(const std::function<double(double, double)>& psi, FlowPoint state,
                           double t) const;

  // phi(x) = integral of psi(x, u) du over one roof segment.
  Observable induce_observable(const std::function<double(double, double)>& psi) const;

  // Stationary base orbit (invariant measure of the base map / induced map).
  std::function<double()> base_orbit(std::uint64_t seed) const;

  double quad_tol() const { return quad_tol_; }

 private:
  std::variant<MapSystem, InducedSystem> base_;
  std::function<double(double)> roof_;
  double quad_tol_ = 1e-8;
};

struct MeanRoofEstimate {
  double hbar = 0.0;
  double se = 0.0;
};

MeanRoofEstimate estimate_mean_roof(const SuspensionFlow& flow, std::size_t budget,
                                    std::uint64_t seed);

// sigma^2 = sigma1^2 / mean roof.
double flow_variance(double sigma1_sq, double mean_roof);

struct RoofSumPoint {
  double n = 0.0;
  double scaled_deviation = 0.0;  // (sum h o f^j - n hbar) / n^(1 - delta/2)
};

// Monitors the averaged-roof hypothesis along one base orbit.
std::vector<RoofSumPoint> roof_sum_check(const SuspensionFlow& flow, double delta, double hbar,
                                         const std::vector<std::size_t>& n_grid,
                                         std::uint64_t seed);

}  // namespace towerlimits
