#include "towerlimits/lorentz.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "towerlimits/util/quadrature.hpp"
#include "towerlimits/util/rng.hpp"
#include "towerlimits/util/special.hpp"

namespace towerlimits {

namespace {

constexpr double kTangencyTol = 1e-10;

double wrap01(double x) {
  x -= std::floor(x);
  return x >= 1.0 ? 0.0 : x;
}

}  // namespace

BilliardTable::BilliardTable(std::vector<Disk> scatterers) : disks_(std::move(scatterers)) {
  if (disks_.empty()) throw GeometryError("BilliardTable: no scatterers");
  for (const auto& d : disks_) {
    if (!(d.rho > 0.0)) throw GeometryError("BilliardTable: radii must be positive");
    if (d.rho >= 0.5) throw GeometryError("BilliardTable: scatterer overlaps its own translates");
  }
  for (std::size_t a = 0; a < disks_.size(); ++a) {
    for (std::size_t b = 0; b < disks_.size(); ++b) {
      for (int i = -1; i <= 1; ++i) {
        for (int j = -1; j <= 1; ++j) {
          if (a == b && i == 0 && j == 0) continue;
          const double dx = disks_[a].cx - (disks_[b].cx + i);
          const double dy = disks_[a].cy - (disks_[b].cy + j);
          const double dist = std::hypot(dx, dy);
          if (dist <= disks_[a].rho + disks_[b].rho)
            throw GeometryError("BilliardTable: scatterer boundaries intersect across translates");
        }
      }
    }
  }
}

double BilliardTable::free_area() const {
  double a = 1.0;
  for (const auto& d : disks_) a -= M_PI * d.rho * d.rho;
  return a;
}

double BilliardTable::boundary_length() const {
  double l = 0.0;
  for (const auto& d : disks_) l += 2.0 * M_PI * d.rho;
  return l;
}

double BilliardTable::max_radius() const {
  double r = 0.0;
  for (const auto& d : disks_) r = std::max(r, d.rho);
  return r;
}

double BilliardTable::mean_free_time_formula() const {
  return M_PI * free_area() / boundary_length();
}

FlowState2D to_flow_state(const BilliardTable& table, const CollisionState& c) {
  const auto& d = table.scatterers().at(static_cast<std::size_t>(c.scatterer));
  if (std::fabs(c.theta) > M_PI_2) throw DomainError("to_flow_state: |theta| > pi/2");
  const double phi = c.arclength / d.rho;
  const double nx = std::cos(phi), ny = std::sin(phi);
  const double tx = -ny, ty = nx;
  FlowState2D s;
  s.px = wrap01(d.cx + d.rho * nx);
  s.py = wrap01(d.cy + d.rho * ny);
  const double ct = std::cos(c.theta), st = std::sin(c.theta);
  s.dx = ct * nx + st * tx;
  s.dy = ct * ny + st * ty;
  return s;
}

CollisionState reflect_at(const BilliardTable& table, const FlowState2D& impact, int scatterer) {
  const auto& d = table.scatterers().at(static_cast<std::size_t>(scatterer));
  // nearest translate of the center to the impact point
  double cx = d.cx, cy = d.cy;
  cx += std::round(impact.px - cx);
  cy += std::round(impact.py - cy);
  double nx = impact.px - cx, ny = impact.py - cy;
  const double nn = std::hypot(nx, ny);
  nx /= nn;
  ny /= nn;
  const double dot = impact.dx * nx + impact.dy * ny;
  const double ox = impact.dx - 2.0 * dot * nx;
  const double oy = impact.dy - 2.0 * dot * ny;
  CollisionState c;
  c.scatterer = scatterer;
  double phi = std::atan2(ny, nx);
  if (phi < 0.0) phi += 2.0 * M_PI;
  c.arclength = phi * d.rho;
  c.theta = std::atan2(ox * (-ny) + oy * nx, ox * nx + oy * ny);
  c.tangency = std::fabs(c.theta) > M_PI_2 - kTangencyTol;
  return c;
}

NextCollision next_collision(const BilliardTable& table, const FlowState2D& state,
                             double time_cap) {
  const double rho_max = table.max_radius();
  double best_t = std::numeric_limits<double>::infinity();
  int best_disk = -1;

  for (int shell = 0;; ++shell) {
    const double shell_min_dist = shell >= 2 ? static_cast<double>(shell - 1) - rho_max : 0.0;
    if (best_t < shell_min_dist) break;
    if (shell_min_dist > time_cap) {
      if (std::isfinite(best_t) && best_t <= time_cap) break;
      throw HorizonEscapeError(time_cap);
    }
    for (int i = -shell; i <= shell; ++i) {
      for (int j = -shell; j <= shell; ++j) {
        if (std::max(std::abs(i), std::abs(j)) != shell) continue;
        for (std::size_t k = 0; k < table.scatterers().size(); ++k) {
          const auto& d = table.scatterers()[k];
          const double mx = d.cx + i - state.px;
          const double my = d.cy + j - state.py;
          const double b = -(mx * state.dx + my * state.dy);  // t^2 + 2bt + c = 0
          const double c = mx * mx + my * my - d.rho * d.rho;
          const double disc = b * b - c;
          if (disc <= 0.0) continue;
          const double sq = std::sqrt(disc);
          const double q = b > 0.0 ? -(b + sq) : -(b - sq);
          const double t1 = q;        // roots q and c/q
          const double t2 = c / q;
          for (double t : {std::min(t1, t2), std::max(t1, t2)}) {
            if (t > 1e-12 && t < best_t) {
              best_t = t;
              best_disk = static_cast<int>(k);
              break;
            }
          }
        }
      }
    }
  }
  if (best_disk < 0 || best_t > time_cap) throw HorizonEscapeError(time_cap);

  NextCollision nc;
  nc.free_time = best_t;
  nc.scatterer = best_disk;
  nc.impact.dx = state.dx;
  nc.impact.dy = state.dy;
  double ix = state.px + best_t * state.dx;
  double iy = state.py + best_t * state.dy;
  // project onto the scatterer boundary to pin the impact at 1e-12 absolute
  const auto& d = table.scatterers()[static_cast<std::size_t>(best_disk)];
  double cx = d.cx + std::round(ix - d.cx);
  double cy = d.cy + std::round(iy - d.cy);
  const double nn = std::hypot(ix - cx, iy - cy);
  ix = cx + (ix - cx) * d.rho / nn;
  iy = cy + (iy - cy) * d.rho / nn;
  nc.impact.px = wrap01(ix);
  nc.impact.py = wrap01(iy);
  return nc;
}

CollisionState billiard_map(const BilliardTable& table, const CollisionState& c, double time_cap) {
  const FlowState2D out = to_flow_state(table, c);
  const NextCollision nc = next_collision(table, out, time_cap);
  return reflect_at(table, nc.impact, nc.scatterer);
}

CollisionState random_collision_state(const BilliardTable& table, std::mt19937_64& rng) {
  const double total = table.boundary_length();
  double pick = util::uniform01(rng) * total;
  std::size_t k = 0;
  for (; k + 1 < table.scatterers().size(); ++k) {
    const double len = 2.0 * M_PI * table.scatterers()[k].rho;
    if (pick < len) break;
    pick -= len;
  }
  CollisionState c;
  c.scatterer = static_cast<int>(k);
  c.arclength = pick;
  c.theta = std::asin(2.0 * util::uniform01(rng) - 1.0);
  return c;
}

HorizonReport finite_horizon_check(const BilliardTable& table, const HorizonOptions& opts) {
  HorizonReport rep;
  rep.flight_bound = static_cast<double>(opts.q_max);

  // Direction (p,q): project centers onto the unit normal; translates tile the
  // projection with period 1/|(p,q)|.  A corridor is an uncovered arc.
  auto check_direction = [&](int p, int q) -> std::optional<Corridor> {
    const double len = std::hypot(static_cast<double>(p), static_cast<double>(q));
    const double period = 1.0 / len;
    std::vector<std::pair<double, double>> blocked;
    for (const auto& d : table.scatterers()) {
      if (2.0 * d.rho >= period) return std::nullopt;  // this direction is fully blocked
      double s = (-q * d.cx + p * d.cy) / len;
      s -= std::floor(s / period) * period;
      blocked.emplace_back(s - d.rho, s + d.rho);
    }
    std::sort(blocked.begin(), blocked.end());
    // merge on the circle of circumference `period`
    double gap_best = 0.0, gap_mid = 0.0;
    double cover_end = blocked.front().second;
    for (std::size_t i = 1; i < blocked.size(); ++i) {
      if (blocked[i].first > cover_end) {
        const double gap = blocked[i].first - cover_end;
        if (gap > gap_best) {
          gap_best = gap;
          gap_mid = 0.5 * (cover_end + blocked[i].first);
        }
      }
      cover_end = std::max(cover_end, blocked[i].second);
    }
    // wrap-around gap between the last covered point and the first + period
    const double wrap_gap = blocked.front().first + period - cover_end;
    if (wrap_gap > gap_best) {
      gap_best = wrap_gap;
      gap_mid = 0.5 * (cover_end + blocked.front().first + period);
    }
    if (gap_best <= 0.0) return std::nullopt;
    Corridor cor;
    cor.p = p;
    cor.q = q;
    cor.offset = gap_mid - std::floor(gap_mid / period) * period;
    cor.clearance = 0.5 * gap_best;
    return cor;
  };

  // shortest directions first, so the witness is the widest/simplest corridor
  std::vector<std::pair<int, int>> directions{{1, 0}, {0, 1}};
  for (int p = 1; p <= opts.q_max; ++p)
    for (int q = -opts.q_max; q <= opts.q_max; ++q)
      if (q != 0 && std::gcd(p, std::abs(q)) == 1) directions.emplace_back(p, q);
  std::stable_sort(directions.begin(), directions.end(), [](const auto& a, const auto& b) {
    return a.first * a.first + a.second * a.second < b.first * b.first + b.second * b.second;
  });
  for (const auto& [p, q] : directions) {
    rep.corridor = check_direction(p, q);
    if (rep.corridor) break;
  }

  auto rng = util::make_engine(opts.seed);
  rep.flight_samples = opts.flight_samples;
  double max_flight = 0.0;
  for (std::size_t i = 0; i < opts.flight_samples; ++i) {
    const auto c = random_collision_state(table, rng);
    try {
      const auto nc = next_collision(table, to_flow_state(table, c), rep.flight_bound);
      max_flight = std::max(max_flight, nc.free_time);
    } catch (const HorizonEscapeError& e) {
      max_flight = std::max(max_flight, e.elapsed);
    }
  }
  rep.empirical_max_flight = max_flight;
  rep.finite = !rep.corridor && max_flight < rep.flight_bound;
  return rep;
}

ChiSquareReport cos_theta_invariance(const BilliardTable& table, std::size_t samples, int bins_r,
                                     int bins_theta, std::uint64_t seed) {
  if (bins_r < 2 || bins_theta < 2) throw ParameterError("cos_theta_invariance: need >= 2 bins");
  auto rng = util::make_engine(seed);
  const double total_len = table.boundary_length();
  std::vector<double> offsets(table.scatterers().size(), 0.0);
  for (std::size_t k = 1; k < table.scatterers().size(); ++k)
    offsets[k] = offsets[k - 1] + 2.0 * M_PI * table.scatterers()[k - 1].rho;

  std::vector<std::uint64_t> counts(static_cast<std::size_t>(bins_r * bins_theta), 0);
  std::size_t kept = 0, skips = 0;
  while (kept < samples) {
    const auto c0 = random_collision_state(table, rng);
    CollisionState c1;
    try {
      c1 = billiard_map(table, c0);
    } catch (const HorizonEscapeError&) {
      ++skips;
      continue;
    }
    if (c1.tangency) {
      ++skips;
      continue;
    }
    const double global_r = offsets[static_cast<std::size_t>(c1.scatterer)] + c1.arclength;
    int br = std::min(static_cast<int>(global_r / total_len * bins_r), bins_r - 1);
    const double st = 0.5 * (std::sin(c1.theta) + 1.0);  // cos-measure CDF in theta
    int bt = std::min(static_cast<int>(st * bins_theta), bins_theta - 1);
    ++counts[static_cast<std::size_t>(br * bins_theta + bt)];
    ++kept;
  }

  // expected counts: uniform in arclength x sin(theta)
  const double expected = static_cast<double>(samples) / static_cast<double>(bins_r * bins_theta);
  double chi2 = 0.0;
  for (const auto c : counts) {
    const double d = static_cast<double>(c) - expected;
    chi2 += d * d / expected;
  }
  ChiSquareReport rep;
  rep.statistic = chi2;
  rep.dof = static_cast<double>(bins_r * bins_theta - 1);
  rep.p_value = util::chi_square_sf(chi2, rep.dof);
  rep.samples = samples;
  rep.tangency_skips = skips;
  return rep;
}

std::vector<FlowRunPoint> lorentz_flow_observable_run(const BilliardTable& table,
                                                      const FlowObservable& psi, double t_total,
                                                      double emit_dt, std::uint64_t seed,
                                                      double time_cap) {
  if (!(t_total > 0.0) || !(emit_dt > 0.0))
    throw ParameterError("lorentz_flow_observable_run: need positive durations");
  auto rng = util::make_engine(seed);
  FlowState2D state = to_flow_state(table, random_collision_state(table, rng));

  std::vector<FlowRunPoint> out;
  double t = 0.0;
  double acc = 0.0;
  double next_emit = emit_dt;
  while (t < t_total) {
    const auto nc = next_collision(table, state, time_cap);
    const double seg = std::min(nc.free_time, t_total - t);
    const FlowState2D s = state;
    auto along = [&](double u) {
      return psi(wrap01(s.px + u * s.dx), wrap01(s.py + u * s.dy), s.dx, s.dy);
    };
    // split the segment at emission times
    double done = 0.0;
    while (t + seg >= next_emit - 1e-12 && next_emit <= t_total + 1e-12) {
      const double upto = next_emit - t;
      acc += util::integrate(along, done, upto, 1e-8);
      done = upto;
      out.push_back({next_emit, acc});
      next_emit += emit_dt;
    }
    acc += util::integrate(along, done, seg, 1e-8);
    t += seg;
    if (seg == nc.free_time) {
      const auto c = reflect_at(table, nc.impact, nc.scatterer);
      state = to_flow_state(table, c);
    } else {
      break;
    }
  }
  return out;
}

}  // namespace towerlimits
