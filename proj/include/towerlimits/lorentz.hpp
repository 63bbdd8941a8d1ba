#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "towerlimits/errors.hpp"

namespace towerlimits {

struct Disk {
  double cx = 0.5;
  double cy = 0.5;
  double rho = 0.25;
};

// Circular scatterers on the unit torus.  Validation checks positive radii and
// disjointness across the 3x3 block of translates.
class BilliardTable {
 public:
  explicit BilliardTable(std::vector<Disk> scatterers);

  const std::vector<Disk>& scatterers() const { return disks_; }
  double free_area() const;       // 1 - sum pi rho^2
  double boundary_length() const; // sum 2 pi rho
  double max_radius() const;

  // Santalo mean free time pi * area / perimeter for unit-speed flight.
  double mean_free_time_formula() const;

 private:
  std::vector<Disk> disks_;
};

// Collision coordinates: arclength along the scatterer boundary and the angle
// between the outgoing velocity and the outward normal, in [-pi/2, pi/2].
struct CollisionState {
  int scatterer = 0;
  double arclength = 0.0;
  double theta = 0.0;
  bool tangency = false;  // |theta| within 1e-10 of pi/2; excluded from statistics
};

struct FlowState2D {
  double px = 0.0, py = 0.0;  // position in the unit cell, outside all scatterers
  double dx = 1.0, dy = 0.0;  // unit direction
};

struct NextCollision {
  FlowState2D impact;      // position on the scatterer, incoming direction
  double free_time = 0.0;
  int scatterer = 0;
};

// Outgoing ray of a collision state.
FlowState2D to_flow_state(const BilliardTable& table, const CollisionState& c);

// Specular reflection at an impact point.
CollisionState reflect_at(const BilliardTable& table, const FlowState2D& impact, int scatterer);

// Exact ray-circle intersection against scatterer translates in expanding square
// shells; throws HorizonEscapeError when no collision occurs within time_cap.
NextCollision next_collision(const BilliardTable& table, const FlowState2D& state,
                             double time_cap = 64.0);

CollisionState billiard_map(const BilliardTable& table, const CollisionState& c,
                            double time_cap = 64.0);

// Draw from the invariant collision measure, cos(theta) d(arclength) d(theta).
CollisionState random_collision_state(const BilliardTable& table, std::mt19937_64& rng);

struct Corridor {
  int p = 0, q = 0;       // direction of the free lines
  double offset = 0.0;    // signed distance of the corridor midline from the origin
  double clearance = 0.0; // distance from the midline to the nearest scatterer boundary
};

struct HorizonReport {
  bool finite = false;
  std::optional<Corridor> corridor;
  double empirical_max_flight = 0.0;
  double flight_bound = 0.0;
  std::size_t flight_samples = 0;
};

struct HorizonOptions {
  int q_max = 12;
  std::size_t flight_samples = 1000000;
  std::uint64_t seed = 1;
};

HorizonReport finite_horizon_check(const BilliardTable& table, const HorizonOptions& opts = {});

struct ChiSquareReport {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 0.0;
  std::size_t samples = 0;
  std::size_t tangency_skips = 0;
};

// One-step invariance of the cos(theta) measure under the billiard map, on a
// bins_r x bins_theta grid over (total arclength) x theta.
ChiSquareReport cos_theta_invariance(const BilliardTable& table, std::size_t samples, int bins_r,
                                     int bins_theta, std::uint64_t seed);

struct FlowRunPoint {
  double t = 0.0;
  double integral = 0.0;  // Birkhoff integral of psi up to t
};

// Observable on the flow phase space: position (wrapped) and unit direction.
using FlowObservable = std::function<double(double px, double py, double dx, double dy)>;

std::vector<FlowRunPoint> lorentz_flow_observable_run(const BilliardTable& table,
                                                      const FlowObservable& psi, double t_total,
                                                      double emit_dt, std::uint64_t seed,
                                                      double time_cap = 64.0);

}  // namespace towerlimits
