#include <doctest.h>

#include <cmath>

#include "e2r/expert.hpp"
#include "e2r/scenario.hpp"
#include "support.hpp"

using namespace e2r;

namespace {

expert::ExpertConfig hand_weights() {
  expert::ExpertConfig c;
  c.lambda_v = 1.0;
  c.lambda_p = 0.5;
  c.lambda_d = 1.0;
  c.lambda_kappa = 0.1;
  c.d_scale = 0.8;
  return c;
}

// Wide loop so the full lattice fits on the straights. The lower straight
// runs along y = -8 for x in [0, 24.8].
track::TrackModel wide_track() { return track::TrackModel::from_waypoints(track::make_stadium(100.0, 8.0, 8.0)); }

std::vector<expert::CandidateTrajectory> random_set(Rng& rng, std::size_t n) {
  std::vector<expert::CandidateTrajectory> out(n);
  for (auto& c : out) {
    c.lateral_offset = 0.25 * static_cast<double>(rng.below(9)) - 1.0;
    // Coarse rewards so exact ties are common.
    c.reward = 0.5 * static_cast<double>(rng.below(6));
  }
  return out;
}

std::size_t brute_force_argmax(const std::vector<expert::CandidateTrajectory>& c) {
  double best = -INFINITY;
  for (const auto& x : c) best = std::max(best, x.reward);
  double best_off = INFINITY;
  for (const auto& x : c)
    if (x.reward == best) best_off = std::min(best_off, std::abs(x.lateral_offset));
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c[i].reward == best && std::abs(c[i].lateral_offset) == best_off) return i;
  return c.size();
}

}  // namespace

TEST_SUITE("expert") {
  TEST_CASE("composite reward hand case") {
    const auto cfg = hand_weights();
    // d_l = d_scale gives phi = e^-1.
    const double r = expert::sample_reward(5.0, 0.2, cfg.d_scale, 0.1, cfg);
    CHECK(std::abs(r - (std::log(5.0) - 0.1 - std::exp(-1.0) - 0.05)) < 1e-9);
    // With phi at its 4-digit value the result is 1.0915 to 4 decimals.
    const double d_l = -cfg.d_scale * std::log(0.3679);
    CHECK(std::abs(expert::sample_reward(5.0, 0.2, d_l, 0.1, cfg) - 1.0915) < 5e-5);
  }

  TEST_CASE("zero weights give zero reward; speed is rewarded") {
    expert::ExpertConfig z;
    z.lambda_v = z.lambda_p = z.lambda_d = z.lambda_kappa = 0.0;
    CHECK(expert::sample_reward(3.0, 0.4, 0.2, 0.3, z) == 0.0);
    auto c = hand_weights();
    c.lambda_d = c.lambda_kappa = 0.0;
    CHECK(expert::sample_reward(4.0, 0.1, 1.0, 0.2, c) > expert::sample_reward(3.0, 0.1, 1.0, 0.2, c));
    CHECK_THROWS_AS(expert::sample_reward(0.0, 0.0, 1.0, 0.0, c), expert::ExpertError);
  }

  TEST_CASE("pure pursuit steering") {
    const double d = expert::pure_pursuit_steer(M_PI / 6, 1.0, 0.33, 1.0);
    CHECK(std::abs(d - std::atan(0.33)) < 1e-9);
    CHECK(std::abs(d - 0.3187) < 5e-5);
    CHECK(expert::pure_pursuit_steer(-M_PI / 6, 1.0, 0.33, 1.0) == -d);
    CHECK(expert::pure_pursuit_steer(0.0, 1.0, 0.33, 1.0) == 0.0);
    double prev = -INFINITY;
    for (double a = -1.5; a <= 1.5; a += 0.01) {
      const double v = expert::pure_pursuit_steer(a, 1.0, 0.33, 10.0);
      CHECK(v > prev);
      prev = v;
    }
    CHECK(expert::pure_pursuit_steer(1.2, 1.0, 0.33, 0.4189) == doctest::Approx(0.4189));
  }

  TEST_CASE("selection equals brute-force argmax over 1000 sets") {
    Rng rng(21);
    for (int trial = 0; trial < 1000; ++trial) {
      const auto set = random_set(rng, 1 + rng.below(25));
      REQUIRE(expert::select_trajectory(set) == brute_force_argmax(set));
    }
  }

  TEST_CASE("selection tie-break and shift invariance") {
    std::vector<expert::CandidateTrajectory> c(3);
    c[0].lateral_offset = 0.3;
    c[1].lateral_offset = -0.3;
    c[2].lateral_offset = 0.0;
    for (auto& x : c) x.reward = 1.25;
    CHECK(expert::select_trajectory(c) == 2);
    CHECK(expert::select_trajectory(std::span(c).first(1)) == 0);
    CHECK_THROWS_AS(expert::select_trajectory({}), expert::ExpertError);

    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
      auto set = random_set(rng, 12);
      for (auto& x : set) x.reward += rng.uniform(-0.1, 0.1);
      const auto before = expert::select_trajectory(set);
      for (auto& x : set) x.reward += 7.0;
      CHECK(expert::select_trajectory(set) == before);
    }
  }

  TEST_CASE("lattice grid on a wide straight") {
    const auto trk = wide_track();
    const auto rl = track::generate_raceline(trk, track::kCenterOffset);
    expert::ExpertConfig cfg;
    cfg.n_lateral = 5;
    cfg.n_speed = 3;
    const sim::VehicleState s{5.0, -8.0, 0.0, 4.0, 0.0};
    const auto cands = expert::sample_lattice(s, rl, trk, cfg);
    CHECK(cands.size() == 15);
    for (const auto& c : cands) {
      REQUIRE_FALSE(c.samples.empty());
      for (const auto& smp : c.samples) CHECK(smp.v > 0.0);
      if (c.lateral_offset == 0.0)
        for (const auto& smp : c.samples) CHECK(std::abs(smp.d_r) < 1e-3);
    }
  }

  TEST_CASE("narrow corridor drops candidates that leave the track") {
    const auto trk = track::TrackModel::from_waypoints(track::make_stadium(100.0, 1.6, 8.0));
    const auto rl = track::generate_raceline(trk, track::kCenterOffset);
    expert::ExpertConfig cfg;
    cfg.n_lateral = 5;
    cfg.n_speed = 3;
    const auto cands = expert::sample_lattice({5.0, -8.0, 0.0, 3.0, 0.0}, rl, trk, cfg);
    CHECK(cands.size() < 15);
    CHECK(cands.size() > 0);
    for (const auto& c : cands)
      for (const auto& smp : c.samples) CHECK(trk.lateral_clearance(smp.p) >= 0.0);
  }

  TEST_CASE("free road picks the full-speed raceline candidate") {
    const auto trk = wide_track();
    const auto rl = track::generate_raceline(trk, track::kCenterOffset);
    expert::ExpertConfig cfg;
    auto cands = expert::sample_lattice({3.0, -8.0, 0.0, 5.0, 0.0}, rl, trk, cfg);
    for (auto& c : cands) c.reward = expert::score_candidate(c, {}, rl, cfg);
    const auto& best = cands[expert::select_trajectory(cands)];
    CHECK(best.speed_scale == 1.0);
    CHECK(std::abs(best.lateral_offset) < 1e-12);
  }

  TEST_CASE("a blocker on the raceline lowers the straight-ahead reward") {
    const auto trk = wide_track();
    const auto rl = track::generate_raceline(trk, track::kCenterOffset);
    expert::ExpertConfig cfg;
    const sim::VehicleState ego{3.0, -8.0, 0.0, 5.0, 0.0};
    // Footprints 1 m apart, blocker cruising at the slowest lattice speed.
    const sim::VehicleState blocker{4.0 + cfg.vehicle_length, -8.0, 0.0, 4.0, 0.0};
    const auto pred = expert::predict_opponent(blocker, trk, cfg.sample_dt,
                                               static_cast<std::size_t>(std::llround(cfg.horizon / cfg.sample_dt)));
    auto cands = expert::sample_lattice(ego, rl, trk, cfg);
    std::size_t center = cands.size();
    for (std::size_t i = 0; i < cands.size(); ++i)
      if (cands[i].lateral_offset == 0.0 && cands[i].speed_scale == 1.0) center = i;
    REQUIRE(center < cands.size());
    const double free_r = expert::score_candidate(cands[center], {}, rl, cfg);
    for (auto& c : cands) c.reward = expert::score_candidate(c, pred, rl, cfg);
    CHECK(cands[center].reward < free_r);
    const auto& best = cands[expert::select_trajectory(cands)];
    CHECK((best.lateral_offset != 0.0 || best.speed_scale < 1.0));
  }

  TEST_CASE("opponent prediction keeps along-track speed on a straight") {
    const auto trk = wide_track();
    const auto pred = expert::predict_opponent({10.0, -7.5, 0.0, 2.0, 0.0}, trk, 0.1, 10);
    REQUIRE(pred.size() == 10);
    CHECK(pred.back().p.x == doctest::Approx(12.0).epsilon(1e-6));
    CHECK(pred.back().p.y == doctest::Approx(-7.5).epsilon(1e-6));
  }

  TEST_CASE("footprint gap") {
    expert::ExpertConfig cfg;
    CHECK(expert::footprint_gap({{0, 0}, 0}, {{0, 0}, 0}, cfg) == 0.0);
    CHECK(expert::footprint_gap({{0, 0}, 0}, {{2.0, 0}, 0}, cfg) == doctest::Approx(2.0 - cfg.vehicle_length));
  }

  TEST_CASE("leader follows the discounted profile and ignores the ego") {
    const auto trk = testing::stadium();
    const auto rl = track::generate_raceline(trk, track::kCenterOffset);
    expert::ExpertConfig cfg;
    cfg.leader_speed_discount = 0.6;
    const sim::VehicleState leader = scenario::spawn_state(rl, trk, 25.0, 3.0);
    const auto cmd = expert::leader_action(leader, rl, cfg);
    CHECK(std::abs(cmd.v_cmd - rl.speed_at(track::project(leader.position(), rl).s) * 0.6) < 1e-9);

    sim::WorldState w1(trk, {sim::VehicleState{5, -5, 0, 1, 0}, leader});
    sim::WorldState w2(trk, {sim::VehicleState{10, -5.8, 0.3, 4, 0.1}, leader});
    CHECK(expert::expert_action(w1, 1, expert::Role::Leader, rl, cfg) ==
          expert::expert_action(w2, 1, expert::Role::Leader, rl, cfg));
  }
}
