#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "e2r/episode_store.hpp"
#include "e2r/expert.hpp"
#include "e2r/scenario.hpp"
#include "support.hpp"

using namespace e2r;

namespace {

scenario::ScenarioConfig one_line(int k) {
  scenario::ScenarioConfig c;
  c.racelines = {track::kCenterOffset};
  c.k_positions = k;
  return c;
}

/// Constant command, recording the instants it was asked.
class FixedController : public scenario::EgoController {
 public:
  explicit FixedController(sim::VehicleCommand c) : cmd_(c) {}
  sim::VehicleCommand act(const scenario::EgoContext& ctx) override {
    times.push_back(ctx.t);
    return cmd_;
  }
  std::vector<double> times;

 private:
  sim::VehicleCommand cmd_;
};

/// Tracks its own raceline slowly, like a leader.
class SlowFollower : public scenario::EgoController {
 public:
  sim::VehicleCommand act(const scenario::EgoContext& ctx) override {
    expert::ExpertConfig c;
    c.leader_speed_discount = 0.3;
    return expert::leader_action(ctx.world.agents[ctx.agent], ctx.raceline, c);
  }
};

scenario::EpisodeRecord fake_episode(std::uint64_t id, scenario::Outcome o, int frames) {
  scenario::EpisodeRecord e;
  e.scenario_id = id;
  e.outcome = o;
  e.frames.resize(static_cast<std::size_t>(frames));
  return e;
}

}  // namespace

TEST_SUITE("scenario") {
  TEST_CASE("spawns are evenly spaced") {
    const auto trk = testing::stadium();
    const auto set = scenario::enumerate_scenarios(one_line(4), trk, {});
    REQUIRE(set.scenarios.size() == 4);
    const double L = trk.total_length();
    for (int i = 0; i < 4; ++i) {
      CHECK(set.scenarios[i].ego_s == doctest::Approx(i * L / 4));
      CHECK(set.scenarios[i].gap == doctest::Approx(6.0));
    }
    auto c = one_line(4);
    c.spawn_phase = 0.5;
    const auto held = scenario::enumerate_scenarios(c, trk, {});
    CHECK(held.scenarios[0].ego_s == doctest::Approx(L / 8));
  }

  TEST_CASE("raceline pairs cycle through the cross product") {
    const auto trk = testing::stadium();
    scenario::ScenarioConfig c;
    c.k_positions = 18;
    const auto set = scenario::enumerate_scenarios(c, trk, {});
    REQUIRE(set.scenarios.size() + set.skipped == 18);
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& s : set.scenarios) pairs.insert({s.ego_raceline, s.leader_raceline});
    CHECK(pairs.size() == 9);
  }

  TEST_CASE("invalid geometry is rejected") {
    const auto trk = testing::stadium();
    auto c = one_line(4);
    c.d_gap = trk.total_length() + 1.0;
    CHECK_THROWS_AS(scenario::enumerate_scenarios(c, trk, {}), scenario::ScenarioError);
    c = one_line(4);
    c.d_gap = 0.3;  // shorter than a car
    CHECK_THROWS_AS(scenario::enumerate_scenarios(c, trk, {}), scenario::ScenarioError);
  }

  TEST_CASE("an 8 s collision-free rollout has 80 frames at 0.1 s spacing") {
    const auto trk = testing::stadium();
    const auto set = scenario::enumerate_scenarios(one_line(4), trk, {});
    FixedController slow({0.5, 0.0});
    sim::SimConfig sim;
    scenario::RolloutOptions ro;
    // The straight is 20 m long; crawling ahead at 0.5 m/s stays on it.
    const auto ep = scenario::rollout(set.scenarios[0], set, trk, slow, {}, 0.6, sim, ro);
    CHECK(ep.outcome != scenario::Outcome::Collision);
    CHECK(ep.frames.size() == 80);
    REQUIRE(slow.times.size() == 80);
    for (std::size_t i = 1; i < slow.times.size(); ++i) CHECK(std::abs(slow.times[i] - slow.times[i - 1] - 0.1) < 1e-12);
    CHECK(ep.frames[0].scan.size() == 360);
  }

  TEST_CASE("collision truncates the recording at the last query instant") {
    const auto trk = testing::stadium();
    const auto set = scenario::enumerate_scenarios(one_line(4), trk, {});
    FixedController wall({3.0, -0.4});
    sim::SimConfig sim;
    const auto ep = scenario::rollout(set.scenarios[0], set, trk, wall, {}, 0.6, sim, {});
    REQUIRE(ep.outcome == scenario::Outcome::Collision);
    const auto steps = std::llround(ep.duration_actual / sim.dt);
    // A collision on step n (t = n dt) follows queries at steps 0, 10, ..., 10 floor((n - 1)/10).
    CHECK(static_cast<long long>(ep.frames.size()) == (steps - 1) / 10 + 1);
    CHECK(ep.frames.size() <= 80);
    // Worked example: collision at t = 3.27 s.
    CHECK((327 - 1) / 10 + 1 == 33);
  }

  TEST_CASE("a fast leader far ahead means car following") {
    const auto trk = testing::stadium();
    auto c = one_line(4);
    c.d_gap = 15.0;
    const auto set = scenario::enumerate_scenarios(c, trk, {});
    SlowFollower ego;
    const auto ep = scenario::rollout(set.scenarios[0], set, trk, ego, {}, 1.0, {}, {});
    CHECK(ep.outcome == scenario::Outcome::CarFollowing);
    CHECK(ep.leader_progress > ep.ego_progress);
  }

  TEST_CASE("outcome classification") {
    using scenario::Outcome;
    CHECK(scenario::classify_outcome(false, false, 52.1, 49.3) == Outcome::Overtaking);
    CHECK(scenario::classify_outcome(true, false, 52.1, 49.3) == Outcome::Collision);
    CHECK(scenario::classify_outcome(false, true, 10.0, 49.3) == Outcome::Collision);
    CHECK(scenario::classify_outcome(false, false, 49.3, 49.3) == Outcome::CarFollowing);
    CHECK(scenario::classify_outcome(false, false, 49.3 + 5e-10, 49.3) == Outcome::CarFollowing);
    CHECK(scenario::classify_outcome(false, false, 40.0, 49.3) == Outcome::CarFollowing);
  }

  TEST_CASE("dataset assembly drops collisions") {
    using scenario::Outcome;
    std::vector<scenario::EpisodeRecord> pool;
    std::uint64_t id = 0;
    for (int i = 0; i < 194; ++i) pool.push_back(fake_episode(id++, Outcome::CarFollowing, 80));
    for (int i = 0; i < 378; ++i) pool.push_back(fake_episode(id++, Outcome::Overtaking, 80));
    for (int i = 0; i < 28; ++i) pool.push_back(fake_episode(id++, Outcome::Collision, 33));
    const auto ds = scenario::build_dataset(pool);
    CHECK(ds.episodes.size() == 572);
    CHECK(ds.total_samples == 45760);
    CHECK(ds.pool.summary() == "194/378/28");
    for (const auto& e : ds.episodes) CHECK(e.outcome != Outcome::Collision);

    std::vector<scenario::EpisodeRecord> bad{fake_episode(0, Outcome::Collision, 5)};
    CHECK_THROWS_AS(scenario::build_dataset(bad), scenario::ScenarioError);
  }

  TEST_CASE("expert rollouts are reproducible and worker-count independent") {
    const auto trk = testing::stadium();
    auto c = one_line(3);
    c.seed = 17;
    const auto set = scenario::enumerate_scenarios(c, trk, {});
    scenario::ControllerFactory f = [] { return std::make_unique<scenario::ExpertController>(expert::ExpertConfig{}); };
    scenario::RolloutOptions ro;
    ro.duration = 2.0;
    ro.eta = 0.2;
    const auto a = scenario::rollout_all(set, trk, f, {}, 0.6, {}, ro, 1);
    const auto b = scenario::rollout_all(set, trk, f, {}, 0.6, {}, ro, 3);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      std::stringstream sa, sb;
      store::write_episode(sa, a[i]);
      store::write_episode(sb, b[i]);
      CHECK(sa.str() == sb.str());
    }
  }

  TEST_CASE("episode store round trip and manifest") {
    Rng rng(2);
    auto ep = testing::random_episode(rng, 7, 360, 30.0);
    ep.scenario_id = 42;
    ep.seed = 99;
    ep.outcome = scenario::Outcome::Overtaking;
    ep.duration_actual = 8.0;
    ep.ego_progress = 30.5;
    ep.leader_progress = 28.25;
    std::stringstream ss;
    store::write_episode(ss, ep);
    CHECK(ss.str().size() == 4 + 4 + 8 + 8 + 4 + 4 + 4 + 8 * 3 + 7 * 363 * 4);
    const auto back = store::read_episode(ss);
    CHECK(back.scenario_id == 42);
    CHECK(back.seed == 99);
    CHECK(back.outcome == scenario::Outcome::Overtaking);
    CHECK(back.ego_progress == 30.5);
    REQUIRE(back.frames.size() == 7);
    for (std::size_t i = 0; i < 7; ++i) {
      CHECK(back.frames[i].scan == ep.frames[i].scan);
      CHECK(back.frames[i].v_cmd == ep.frames[i].v_cmd);
    }

    std::stringstream full;
    store::write_episode(full, ep);
    std::stringstream cut(full.str().substr(0, full.str().size() - 3));
    CHECK_THROWS_AS(store::read_episode(cut), store::StoreError);

    const auto dir = std::filesystem::temp_directory_path() / "e2r_store_test";
    std::filesystem::remove_all(dir);
    auto crash = fake_episode(7, scenario::Outcome::Collision, 0);
    crash.frames = ep.frames;
    const auto manifest = store::write_dataset(dir, {ep, crash});
    const auto ds = store::load_dataset(manifest);
    CHECK(ds.episodes.size() == 1);
    CHECK(ds.total_samples == 7);
    CHECK(ds.pool.total() == 2);
    CHECK(ds.pool.collision == 1);
    std::filesystem::remove_all(dir);
  }
}
