#include <doctest.h>

#include <cmath>

#include "e2r/simulator.hpp"
#include "support.hpp"

using namespace e2r;

namespace {

// Circle through three points.
double circumradius(Vec2 a, Vec2 b, Vec2 c) {
  const double A = distance(b, c), B = distance(a, c), C = distance(a, b);
  return A * B * C / (2.0 * std::abs(cross(b - a, c - a)));
}

std::vector<std::pair<Vec2, Vec2>> room(double half) {
  const Vec2 a{-half, -half}, b{half, -half}, c{half, half}, d{-half, half};
  return {{a, b}, {b, c}, {c, d}, {d, a}};
}

}  // namespace

TEST_SUITE("simulator") {
  TEST_CASE("straight-line integration") {
    sim::SimConfig cfg;
    sim::VehicleState s{0, 0, 0.3, 5.0, 0.0};
    for (int i = 0; i < 100; ++i) s = sim::integrate(s, {5.0, 0.0}, cfg);
    CHECK(std::hypot(s.x, s.y) == doctest::Approx(5.0).epsilon(1e-6));
    CHECK(std::atan2(s.y, s.x) == doctest::Approx(0.3));
  }

  TEST_CASE("turning radius law") {
    sim::SimConfig cfg;
    for (double delta : {0.05, 0.1, 0.2}) {
      CAPTURE(delta);
      sim::VehicleState s{0, 0, 0, 3.0, delta};
      std::vector<Vec2> pts;
      const double r_expect = cfg.wheelbase / std::tan(delta);
      const int steps = static_cast<int>(2 * M_PI * r_expect / (3.0 * cfg.dt));
      for (int i = 0; i < steps; ++i) {
        s = sim::integrate(s, {3.0, delta}, cfg);
        pts.push_back(s.position());
      }
      const double r = circumradius(pts[0], pts[pts.size() / 3], pts[2 * pts.size() / 3]);
      CHECK(std::abs(r - r_expect) / r_expect < 0.005);
    }
    CHECK(cfg.wheelbase / std::tan(0.1) == doctest::Approx(3.2889).epsilon(1e-4));
  }

  TEST_CASE("rest state only advances time") {
    sim::SimConfig cfg;
    const auto trk = testing::stadium();
    sim::WorldState w(trk, {sim::VehicleState{5, -5, 0, 0, 0}});
    const auto before = w.agents[0];
    sim::step(w, {{0.0, 0.0}}, cfg);
    CHECK(w.agents[0] == before);
    CHECK(w.time(cfg) == doctest::Approx(cfg.dt));
  }

  TEST_CASE("braking reaches zero in time and never speeds up") {
    sim::SimConfig cfg;
    sim::VehicleState s{0, 0, 0, 6.0, 0};
    const double limit = 6.0 / std::abs(cfg.a_min) + cfg.dt;
    double t = 0.0, v_prev = s.v;
    while (s.v > 0.0) {
      s = sim::integrate(s, {0.0, 0.0}, cfg);
      t += cfg.dt;
      CHECK(s.v <= v_prev);
      v_prev = s.v;
      REQUIRE(t <= limit + 1e-9);
    }
  }

  TEST_CASE("steering moves at the rate limit toward the clamped command") {
    sim::SimConfig cfg;
    sim::VehicleState s{0, 0, 0, 1.0, 0};
    s = sim::integrate(s, {1.0, 5.0}, cfg);
    CHECK(s.delta == doctest::Approx(cfg.steer_rate_max * cfg.dt));
    for (int i = 0; i < 100; ++i) s = sim::integrate(s, {1.0, 5.0}, cfg);
    CHECK(s.delta == doctest::Approx(cfg.delta_max));
  }

  TEST_CASE("square room LiDAR") {
    const auto segs = room(4.0);
    const auto scan = sim::cast_rays({0, 0}, 0.0, segs, {}, 360, 30.0);
    REQUIRE(scan.ranges.size() == 360);
    for (int i : {0, 90, 180, 270}) CHECK(std::abs(scan.ranges[i] - 4.0) < 1e-6);
    CHECK(std::abs(scan.ranges[45] - 4.0 * std::sqrt(2.0)) < 1e-6);
    // Every beam against the analytic distance to the square.
    for (int i = 0; i < 360; ++i) {
      const double a = 2 * M_PI * i / 360.0;
      const double expect = 4.0 / std::max(std::abs(std::cos(a)), std::abs(std::sin(a)));
      CHECK(std::abs(scan.ranges[i] - expect) < 1e-6);
    }
  }

  TEST_CASE("corridor: perpendicular wall and left-right symmetry") {
    const std::vector<std::pair<Vec2, Vec2>> walls{{{-50, 1.5}, {50, 1.5}}, {{-50, -1.5}, {50, -1.5}}};
    const auto scan = sim::cast_rays({0, 0}, 0.0, walls, {}, 360, 30.0);
    CHECK(std::abs(scan.ranges[90] - 1.5) < 1e-6);
    for (int i = 1; i < 180; ++i) CHECK(std::abs(scan.ranges[i] - scan.ranges[360 - i]) < 1e-6);
    CHECK(scan.ranges[0] == 30.0);
  }

  TEST_CASE("opponent dead ahead occludes beam 0") {
    sim::SimConfig cfg;
    const auto trk = testing::stadium();
    const sim::VehicleState ego{5, -5, 0, 0, 0}, opp{7, -5, 0, 0, 0};
    sim::WorldState w(trk, {ego, opp});
    const auto scan = sim::scan_lidar(w, 0, cfg);
    CHECK(scan.ranges[0] < 2.0);
    CHECK(scan.ranges[0] >= 2.0 - cfg.veh_length);
  }

  TEST_CASE("beam dropout counts") {
    Rng rng(5);
    sim::LidarScan scan;
    scan.ranges.assign(360, 3.0);
    auto noisy = scan;
    sim::apply_noise(noisy, 0.0, rng);
    CHECK(noisy.ranges == scan.ranges);
    noisy = scan;
    sim::apply_noise(noisy, 0.3, rng);
    CHECK(std::count(noisy.ranges.begin(), noisy.ranges.end(), 0.0) == 108);
    CHECK(sim::dropped_beam_count(0.3, 360) == 108);
    noisy = scan;
    sim::apply_noise(noisy, 1.0, rng);
    CHECK(std::count(noisy.ranges.begin(), noisy.ranges.end(), 0.0) == 360);
    // Same seed, same beams.
    auto a = scan, b = scan;
    Rng r1(9), r2(9);
    sim::apply_noise(a, 0.5, r1);
    sim::apply_noise(b, 0.5, r2);
    CHECK(a.ranges == b.ranges);
  }

  TEST_CASE("collisions are closed and latch") {
    sim::SimConfig cfg;
    const auto trk = testing::stadium();
    SUBCASE("identical poses") {
      sim::WorldState w(trk, {sim::VehicleState{5, -5, 0, 0, 0}, sim::VehicleState{5, -5, 0, 0, 0}});
      const auto ev = sim::check_collision(w, cfg);
      CHECK(ev[0]);
      CHECK(ev[1]);
    }
    SUBCASE("far apart on the track") {
      sim::WorldState w(trk, {sim::VehicleState{2, -5, 0, 0, 0}, sim::VehicleState{12, -5, 0, 0, 0}});
      const auto ev = sim::check_collision(w, cfg);
      CHECK_FALSE(ev[0]);
      CHECK_FALSE(ev[1]);
    }
    SUBCASE("latching after driving into the wall") {
      // Lower straight runs along y = -5 with 1.5 m either side; aim at the outer wall.
      sim::WorldState w(trk, {sim::VehicleState{5, -5, -M_PI / 2, 3.0, 0}});
      int hit = -1;
      for (int i = 0; i < 200; ++i) {
        sim::step(w, {{3.0, 0.0}}, cfg);
        if (w.collided[0] && hit < 0) hit = i;
      }
      REQUIRE(hit >= 0);
      CHECK(hit < 60);  // 1.5 m to the wall at 3 m/s
      CHECK(w.collided[0]);
    }
  }

  TEST_CASE("stepping is deterministic") {
    sim::SimConfig cfg;
    const auto trk = testing::stadium();
    auto run = [&] {
      sim::WorldState w(trk, {sim::VehicleState{2, -5, 0, 2, 0}, sim::VehicleState{6, -4.5, 0, 1, 0}});
      for (int i = 0; i < 300; ++i) sim::step(w, {{4.0, 0.1}, {2.0, -0.05}}, cfg);
      return w.agents;
    };
    CHECK(run() == run());
  }

  TEST_CASE("non-finite commands are rejected") {
    sim::SimConfig cfg;
    const auto trk = testing::stadium();
    sim::WorldState w(trk, {sim::VehicleState{5, -5, 0, 2, 0}});
    CHECK_THROWS_AS(sim::step(w, {{std::nan(""), 0.0}}, cfg), sim::SimError);
  }
}
