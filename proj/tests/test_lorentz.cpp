#include <cmath>

#include "doctest.h"
#include "towerlimits/lorentz.hpp"
#include "towerlimits/util/rng.hpp"

using namespace towerlimits;

namespace {

BilliardTable two_disk() { return BilliardTable({{0.0, 0.0, 0.45}, {0.5, 0.5, 0.2}}); }

}  // namespace

TEST_CASE("table validation rejects bad geometry") {
  CHECK_THROWS_AS(BilliardTable({{0.5, 0.5, 0.4}, {0.0, 0.0, 0.4}}), GeometryError);
  CHECK_THROWS_AS(BilliardTable({{0.5, 0.5, 0.6}}), GeometryError);
  CHECK_THROWS_AS(BilliardTable({{0.5, 0.5, -0.1}}), GeometryError);
  CHECK_THROWS_AS(BilliardTable({}), GeometryError);
  CHECK_NOTHROW(two_disk());
}

TEST_CASE("a particle aimed at a scatterer center hits it radially") {
  const BilliardTable table({{0.5, 0.5, 0.2}});
  FlowState2D s{0.1, 0.5, 1.0, 0.0};
  const auto nc = next_collision(table, s, 8.0);
  CHECK(nc.free_time == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(nc.impact.px == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(nc.impact.py == doctest::Approx(0.5).epsilon(1e-12));
  const auto c = reflect_at(table, nc.impact, nc.scatterer);
  CHECK(std::fabs(c.theta) < 1e-12);  // normal impact reflects straight back
}

TEST_CASE("free flight reversibility returns to the start point") {
  const auto table = two_disk();
  auto rng = util::make_engine(3);
  for (int i = 0; i < 200; ++i) {
    const auto start = to_flow_state(table, random_collision_state(table, rng));
    const auto nc = next_collision(table, start, 16.0);
    FlowState2D back = nc.impact;
    back.dx = -back.dx;
    back.dy = -back.dy;
    const auto rc = next_collision(table, back, 16.0);
    CHECK(rc.free_time == doctest::Approx(nc.free_time).epsilon(1e-9));
    const double dx = std::fabs(rc.impact.px - start.px);
    const double dy = std::fabs(rc.impact.py - start.py);
    CHECK(std::min(dx, 1.0 - dx) < 1e-9);
    CHECK(std::min(dy, 1.0 - dy) < 1e-9);
  }
}

TEST_CASE("head-on impact on the symmetry axis returns along the same line") {
  const auto table = two_disk();
  CollisionState c;
  c.scatterer = 0;
  c.theta = 0.0;
  c.arclength = std::atan2(0.5, 0.5) * 0.45;  // outward normal along the diagonal
  const auto c1 = billiard_map(table, c, 16.0);
  CHECK(c1.scatterer == 1);
  CHECK(std::fabs(c1.theta) < 1e-12);
  const auto c2 = billiard_map(table, c1, 16.0);
  CHECK(c2.scatterer == 0);
  CHECK(std::fabs(c2.theta) < 1e-12);
}

TEST_CASE("speed and the specular law hold to rounding per collision") {
  const auto table = two_disk();
  auto rng = util::make_engine(5);
  FlowState2D s = to_flow_state(table, random_collision_state(table, rng));
  double speed_defect = 0.0, specular_defect = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const auto nc = next_collision(table, s, 16.0);
    const auto& d = table.scatterers()[static_cast<std::size_t>(nc.scatterer)];
    const double cx = d.cx + std::round(nc.impact.px - d.cx);
    const double cy = d.cy + std::round(nc.impact.py - d.cy);
    const double nx = (nc.impact.px - cx) / d.rho, ny = (nc.impact.py - cy) / d.rho;
    const double speed_in = std::hypot(nc.impact.dx, nc.impact.dy);
    const double dot = nc.impact.dx * nx + nc.impact.dy * ny;
    s.px = nc.impact.px;
    s.py = nc.impact.py;
    s.dx = nc.impact.dx - 2.0 * dot * nx;
    s.dy = nc.impact.dy - 2.0 * dot * ny;
    speed_defect = std::max(speed_defect, std::fabs(std::hypot(s.dx, s.dy) - speed_in));
    specular_defect = std::max(specular_defect, std::fabs(s.dx * nx + s.dy * ny + dot));
  }
  CHECK(speed_defect <= 1e-12);
  CHECK(specular_defect <= 1e-12);
}

TEST_CASE("negating the angle inverts the billiard map step by step") {
  const auto table = two_disk();
  auto rng = util::make_engine(7);
  CollisionState c = random_collision_state(table, rng);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto c1 = billiard_map(table, c, 16.0);
    CollisionState back = c1;
    back.theta = -back.theta;
    auto c0 = billiard_map(table, back, 16.0);
    c0.theta = -c0.theta;
    REQUIRE(c0.scatterer == c.scatterer);
    const double perim = 2.0 * M_PI * table.scatterers()[c.scatterer].rho;
    double dr = std::fabs(c0.arclength - c.arclength);
    dr = std::min(dr, perim - dr);
    worst = std::max({worst, dr, std::fabs(c0.theta - c.theta)});
    c = c1;
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("mean free time matches the area-perimeter identity") {
  const auto table = two_disk();
  // the identity itself, cross-checked by grid quadrature of the free area
  const int g = 2000;
  int outside = 0;
  for (int i = 0; i < g; ++i) {
    for (int j = 0; j < g; ++j) {
      const double x = (i + 0.5) / g, y = (j + 0.5) / g;
      bool in = false;
      for (const auto& d : table.scatterers()) {
        const double dx = x - (d.cx + std::round(x - d.cx));
        const double dy = y - (d.cy + std::round(y - d.cy));
        if (dx * dx + dy * dy < d.rho * d.rho) in = true;
      }
      if (!in) ++outside;
    }
  }
  const double area_quad = static_cast<double>(outside) / (g * g);
  CHECK(table.free_area() == doctest::Approx(area_quad).epsilon(2e-3));

  auto rng = util::make_engine(9);
  double mft = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i)
    mft += next_collision(table, to_flow_state(table, random_collision_state(table, rng)), 16.0)
               .free_time;
  mft /= n;
  CHECK(mft == doctest::Approx(table.mean_free_time_formula()).epsilon(0.02));
}

TEST_CASE("the collision measure is invariant under one map step") {
  const auto rep = cos_theta_invariance(two_disk(), 200000, 20, 20, 11);
  CHECK(rep.p_value > 0.01);
  CHECK(rep.dof == 399.0);
}

TEST_CASE("horizon classification distinguishes the reference tables") {
  const auto single = finite_horizon_check(BilliardTable({{0.5, 0.5, 0.3}}), {12, 100000, 13});
  CHECK_FALSE(single.finite);
  REQUIRE(single.corridor.has_value());
  CHECK(single.corridor->p == 1);
  CHECK(single.corridor->q == 0);
  CHECK(single.corridor->clearance == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(std::fabs(single.corridor->offset) < 1e-9);

  const auto two = finite_horizon_check(two_disk(), {12, 100000, 13});
  CHECK(two.finite);
  CHECK_FALSE(two.corridor.has_value());
  CHECK(two.empirical_max_flight < 3.0);
}

TEST_CASE("finite-horizon max flight is stable under tenfold sampling") {
  const auto small = finite_horizon_check(two_disk(), {12, 20000, 13});
  const auto large = finite_horizon_check(two_disk(), {12, 200000, 13});
  CHECK(large.empirical_max_flight <= small.empirical_max_flight * 1.5);
  CHECK(large.empirical_max_flight < large.flight_bound);
}

TEST_CASE("flights down a corridor escape past any cap") {
  const BilliardTable table({{0.5, 0.5, 0.3}});
  FlowState2D s{0.0, 0.0, 1.0, 0.0};  // the corridor witness line y = 0
  CHECK_THROWS_AS(next_collision(table, s, 64.0), HorizonEscapeError);
}

TEST_CASE("grazing angles raise the tangency flag") {
  const auto table = two_disk();
  // an impact whose incoming ray is within 1e-12 of tangent
  const auto& d = table.scatterers()[1];
  FlowState2D impact;
  impact.px = d.cx + d.rho;
  impact.py = d.cy;
  const double eps = 1e-13;
  impact.dx = -eps;
  impact.dy = std::sqrt(1.0 - eps * eps);
  const auto c = reflect_at(table, impact, 1);
  CHECK(c.tangency);
  CHECK(std::fabs(c.theta) <= M_PI_2);
}

TEST_CASE("flow integrals track elapsed time for the constant observable") {
  const auto table = two_disk();
  const auto zero = lorentz_flow_observable_run(
      table, [](double, double, double, double) { return 0.0; }, 20.0, 1.0, 17);
  for (const auto& p : zero) CHECK(p.integral == 0.0);
  const auto unit = lorentz_flow_observable_run(
      table, [](double, double, double, double) { return 1.0; }, 20.0, 1.0, 17);
  REQUIRE(unit.size() == 20);
  for (const auto& p : unit) CHECK(p.integral == doctest::Approx(p.t).epsilon(1e-9));
}
