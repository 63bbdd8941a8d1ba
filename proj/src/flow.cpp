#include "towerlimits/flow.hpp"

#include <cmath>

#include "towerlimits/util/descriptive.hpp"
#include "towerlimits/util/quadrature.hpp"

namespace towerlimits {

SuspensionFlow::SuspensionFlow(MapSystem base, std::function<double(double)> roof)
    : base_(std::move(base)), roof_(std::move(roof)) {}

SuspensionFlow::SuspensionFlow(InducedSystem base, std::function<double(double)> roof)
    : base_(std::move(base)), roof_(std::move(roof)) {}

double SuspensionFlow::roof(double x) const {
  const double h = roof_(x);
  if (!(h > 0.0)) throw ParameterError("SuspensionFlow: roof must be positive");
  return h;
}

double SuspensionFlow::base_step(double x) const {
  if (std::holds_alternative<MapSystem>(base_)) return std::get<MapSystem>(base_).step(x);
  return std::get<InducedSystem>(base_).induced_map(x);
}

FlowPoint SuspensionFlow::evolve(FlowPoint state, double t) const {
  if (t < 0.0) throw ParameterError("flow evolve: negative duration");
  double h = roof(state.x);
  if (!(state.u >= 0.0 && state.u < h)) throw DomainError("flow evolve: state above the roof");
  double remaining = h - state.u;
  while (t >= remaining) {
    t -= remaining;
    state.x = base_step(state.x);
    state.u = 0.0;
    remaining = roof(state.x);
  }
  state.u += t;
  return state;
}

double SuspensionFlow::birkhoff_integral(const std::function<double(double, double)>& psi,
                                         FlowPoint state, double t) const {
  if (t < 0.0) throw ParameterError("birkhoff_integral: negative duration");
  double total = 0.0;
  double h = roof(state.x);
  if (!(state.u >= 0.0 && state.u < h))
    throw DomainError("birkhoff_integral: state above the roof");
  while (t > 0.0) {
    const double seg_end = std::min(h, state.u + t);
    const double x = state.x;
    total += util::integrate([&psi, x](double u) { return psi(x, u); }, state.u, seg_end,
                             quad_tol_);
    t -= seg_end - state.u;
    if (seg_end >= h) {
      state.x = base_step(state.x);
      state.u = 0.0;
      h = roof(state.x);
    } else {
      state.u = seg_end;
      break;
    }
  }
  return total;
}

Observable SuspensionFlow::induce_observable(
    const std::function<double(double, double)>& psi) const {
  Observable phi;
  const auto roof_fn = roof_;
  const double tol = quad_tol_;
  phi.eval = [roof_fn, psi, tol](double x) {
    const double h = roof_fn(x);
    if (!(h > 0.0)) throw ParameterError("induced flow observable: roof must be positive");
    return util::integrate([&psi, x](double u) { return psi(x, u); }, 0.0, h, tol);
  };
  return phi;
}

std::function<double()> SuspensionFlow::base_orbit(std::uint64_t seed) const {
  if (std::holds_alternative<MapSystem>(base_)) {
    auto orbit = std::make_shared<StationaryOrbit>(std::get<MapSystem>(base_), seed);
    return [orbit]() {
      const double x = orbit->point();
      orbit->advance();
      return x;
    };
  }
  auto orbit = std::make_shared<InducedOrbit>(std::get<InducedSystem>(base_), seed);
  return [orbit]() {
    const double x = orbit->point();
    orbit->advance();
    return x;
  };
}

MeanRoofEstimate estimate_mean_roof(const SuspensionFlow& flow, std::size_t budget,
                                    std::uint64_t seed) {
  auto next = flow.base_orbit(seed);
  std::vector<double> values;
  values.reserve(budget);
  for (std::size_t i = 0; i < budget; ++i) values.push_back(flow.roof(next()));
  util::RunningStats stats;
  for (double h : values) stats.add(h);
  MeanRoofEstimate est;
  est.hbar = stats.mean();
  est.se = util::segmented_mean_se(values);
  return est;
}

double flow_variance(double sigma1_sq, double mean_roof) {
  if (!(mean_roof > 0.0)) throw ParameterError("flow_variance: mean roof must be positive");
  if (sigma1_sq < 0.0) throw ParameterError("flow_variance: variance must be nonnegative");
  return sigma1_sq / mean_roof;
}

std::vector<RoofSumPoint> roof_sum_check(const SuspensionFlow& flow, double delta, double hbar,
                                         const std::vector<std::size_t>& n_grid,
                                         std::uint64_t seed) {
  if (!(delta > 0.0 && delta <= 2.0)) throw ParameterError("roof_sum_check: delta in (0,2]");
  std::vector<std::size_t> grid = n_grid;
  std::sort(grid.begin(), grid.end());
  auto next = flow.base_orbit(seed);
  std::vector<RoofSumPoint> out;
  double sum = 0.0;
  std::size_t g = 0;
  for (std::size_t n = 1; g < grid.size() && n <= grid.back(); ++n) {
    sum += flow.roof(next());
    if (n == grid[g]) {
      RoofSumPoint p;
      p.n = static_cast<double>(n);
      p.scaled_deviation = (sum - p.n * hbar) / std::pow(p.n, 1.0 - 0.5 * delta);
      out.push_back(p);
      ++g;
    }
  }
  return out;
}

}  // namespace towerlimits
