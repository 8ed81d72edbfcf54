#include <doctest.h>

#include <cmath>
#include <sstream>

#include "e2r/evaluator.hpp"
#include "e2r/render.hpp"
#include "support.hpp"

using namespace e2r;
using scenario::Outcome;

namespace {

std::vector<Outcome> outcomes(std::size_t f, std::size_t o, std::size_t c) {
  std::vector<Outcome> v;
  v.insert(v.end(), f, Outcome::CarFollowing);
  v.insert(v.end(), o, Outcome::Overtaking);
  v.insert(v.end(), c, Outcome::Collision);
  return v;
}

scenario::ControllerFactory expert_factory() {
  return [] { return std::make_unique<scenario::ExpertController>(expert::ExpertConfig{}); };
}

}  // namespace

TEST_SUITE("evaluator") {
  TEST_CASE("rate identities") {
    const auto r = eval::summarize_h2h(outcomes(210, 355, 35));
    CHECK(r.counts.total() == 600);
    CHECK(r.overtake_rate == doctest::Approx(59.2).epsilon(1e-3));
    CHECK(r.safety_rate == doctest::Approx(94.2).epsilon(1e-3));
    CHECK(std::abs(r.overtake_rate * 600 / 100 - 355) < 1e-9);
    CHECK(std::abs(r.safety_rate + 35.0 / 600 * 100 - 100.0) < 1e-9);

    const auto all_crash = eval::summarize_h2h(outcomes(0, 0, 12));
    CHECK(all_crash.safety_rate == 0.0);
    CHECK(all_crash.overtake_rate == 0.0);

    std::ostringstream csv;
    eval::write_h2h_csv(csv, r, "Summary");
    CHECK(csv.str() == "Track,Car Following,Overtaking,Collision,Overtake Rate (%),Safety Rate (%)\n"
                       "Summary,210,355,35,59.2,94.2\n");
  }

  TEST_CASE("expert single-agent laps on the stadium") {
    const auto trk = testing::stadium();
    scenario::ExpertController ego({});
    eval::SingleAgentOptions so;
    so.laps_target = 2;
    const auto r = eval::run_single_agent(ego, trk, {}, so);
    CHECK_FALSE(r.collided);
    CHECK(r.laps_completed == 2.0);
    REQUIRE(r.lap_times.size() == 2);
    REQUIRE(r.mean_laptime);
    CHECK(*r.mean_laptime > 0.0);
    CHECK(r.speed_variance >= 0.0);
    CHECK(r.mean_speed > 1.0);
    CHECK(*r.laptime_variance >= 0.0);
  }

  TEST_CASE("a stalled ego reports a fractional lap and no lap time") {
    const auto trk = testing::stadium();
    class Stop : public scenario::EgoController {
      sim::VehicleCommand act(const scenario::EgoContext&) override { return {0.0, 0.0}; }
    } ego;
    const auto r = eval::run_single_agent(ego, trk, {}, {});
    CHECK(r.stalled);
    CHECK(r.laps_completed < 1.0);
    CHECK(r.laps_completed >= 0.0);
    CHECK_FALSE(r.mean_laptime);
    CHECK(eval::to_json(r).find("\"mean_laptime_s\": null") != std::string::npos);
  }

  TEST_CASE("head-to-head conserves outcomes and is reproducible") {
    const auto trk = testing::stadium();
    scenario::ScenarioConfig sc;
    sc.k_positions = 4;
    const auto set = scenario::enumerate_scenarios(sc, trk, {});
    eval::H2HOptions ho;
    ho.duration = 3.0;
    const auto a = eval::run_h2h(expert_factory(), set, trk, {}, {}, ho);
    ho.workers = 2;
    const auto b = eval::run_h2h(expert_factory(), set, trk, {}, {}, ho);
    CHECK(a.counts.total() == set.scenarios.size());
    CHECK(eval::to_json(a) == eval::to_json(b));
  }

  TEST_CASE("noise sweep levels") {
    const auto trk = testing::stadium();
    eval::SingleAgentOptions so;
    so.laps_target = 1;
    so.max_time = 6.0;
    so.seed = 5;
    CHECK_THROWS_AS(eval::run_noise_sweep(expert_factory(), trk, {}, {0.3, 0.1}, so, nullptr, {}, {}),
                    std::invalid_argument);
    const auto sweep = eval::run_noise_sweep(expert_factory(), trk, {}, {0.0, 0.2}, so, nullptr, {}, {});
    REQUIRE(sweep.levels.size() == 2);
    CHECK_FALSE(sweep.levels[0].h2h);
    scenario::ExpertController ego({});
    const auto plain = eval::run_single_agent(ego, trk, {}, so);
    CHECK(eval::to_json(*sweep.levels[0].single) == eval::to_json(plain));
    std::ostringstream csv;
    eval::write_noise_csv(csv, sweep);
    const std::string text = csv.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  }

  TEST_CASE("latency report on a tiny network") {
    policy::PolicyConfig c;
    c.n_beams = 4;
    c.embed_dim = 4;
    c.hidden_multiplier = 4;  // H = 32
    Rng rng(1);
    const auto p = policy::init_params(c, rng);
    const auto a = eval::bench_latency(p, c, 2000, eval::Precision::Float32, 1);
    const auto b = eval::bench_latency(p, c, 2000, eval::Precision::Float32, 1);
    CHECK(a.samples == 2000);
    CHECK(a.hidden_dim == 32);
    CHECK(a.median_ms <= a.p99_ms);
    CHECK(a.p99_ms <= a.max_ms);
    CHECK(a.median_ms < 0.01);
    CHECK(std::max(a.median_ms, b.median_ms) <= 1.5 * std::min(a.median_ms, b.median_ms));
  }

  TEST_CASE("episode render is well-formed SVG with a collision marker") {
    const auto trk = testing::stadium();
    sim::SimConfig cfg;
    std::vector<sim::TraceRow> rows;
    for (int k = 0; k <= 100; ++k) {
      const double t = k * 0.01;
      rows.push_back({t, 0, sim::VehicleState{5.0 + 2.0 * t, -0.5, 0, 2, 0}, false});
      rows.push_back({t, 1, sim::VehicleState{8.0 + 1.0 * t, 0.5, 0, 1, 0}, k == 100});
    }
    const auto svg = render::episode_svg(trk, rows, cfg, "car_following");
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("</svg>\n") == svg.size() - 7);
    CHECK(svg.find("stroke=\"blue\"") != std::string::npos);
    CHECK(svg.find("stroke=\"red\"") != std::string::npos);
    CHECK(svg.find("<line") != std::string::npos);
    CHECK(svg.find("car_following") != std::string::npos);
    CHECK_THROWS_AS(render::episode_svg(trk, {}, cfg), std::invalid_argument);
    const auto plain = render::track_svg(trk);
    CHECK(plain.find("<line") == std::string::npos);
  }
}
