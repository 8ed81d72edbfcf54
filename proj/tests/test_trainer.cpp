#include <doctest.h>

#include <cmath>
#include <sstream>

#include "e2r/trainer.hpp"
#include "support.hpp"

using namespace e2r;
using train::Params;

namespace {

policy::PolicyConfig tiny() {
  policy::PolicyConfig c;
  c.n_beams = 8;
  c.embed_dim = 2;
  c.hidden_multiplier = 2;
  return c;
}

scenario::Dataset dataset_of(std::vector<scenario::EpisodeRecord> eps) {
  for (auto& e : eps) e.outcome = scenario::Outcome::Overtaking;
  return scenario::build_dataset(std::move(eps));
}

double max_abs(const Params& p) {
  double m = 0.0;
  p.visit([&](const char*, const double* d, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) m = std::max(m, std::abs(d[i]));
  });
  return m;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("weighted loss composition") {
    const auto c = tiny();
    Rng rng(1);
    auto ep = testing::random_episode(rng, 6, 8);
    // Zero parameters predict (0, 0), so the terms are the label second moments.
    for (auto& f : ep.frames) {
      f.v_cmd = 2.0f;
      f.delta_cmd = 0.1f;
    }
    const std::vector<std::uint8_t> mask(6, 0);
    const auto lb = train::sequence_loss(Params::zeros(c), c, ep, mask);
    CHECK(lb.l_speed == doctest::Approx(4.0));
    CHECK(lb.l_steer == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(lb.loss == doctest::Approx(0.21).epsilon(1e-6));
    CHECK(std::abs(lb.loss - (0.05 * lb.l_speed + lb.l_steer)) < 1e-12);

    const auto p = policy::init_params(c, rng);
    const auto lr = train::sequence_loss(p, c, testing::random_episode(rng, 9, 8), std::vector<std::uint8_t>(9, 0));
    CHECK(lr.loss >= 0.0);
    CHECK(std::abs(lr.loss - (0.05 * lr.l_speed + lr.l_steer)) < 1e-12);
  }

  TEST_CASE("empty episodes and batches are rejected") {
    const auto c = tiny();
    scenario::EpisodeRecord empty;
    CHECK_THROWS_AS(train::sequence_loss(Params::zeros(c), c, empty, {}), train::TrainError);
    CHECK_THROWS_AS(train::train(scenario::Dataset{}, c, train::TrainerConfig{}), train::TrainError);
  }

  TEST_CASE("batched loss equals the mean of per-episode losses") {
    const auto c = tiny();
    Rng rng(2);
    const auto p = policy::init_params(c, rng);
    std::vector<scenario::EpisodeRecord> eps{testing::random_episode(rng, 5, 8), testing::random_episode(rng, 3, 8),
                                             testing::random_episode(rng, 7, 8)};
    std::vector<std::vector<std::uint8_t>> masks{{0, 1, 0, 0, 1}, {1, 0, 0}, {0, 0, 0, 1, 0, 0, 1}};
    std::vector<const scenario::EpisodeRecord*> batch{&eps[0], &eps[1], &eps[2]};
    Params g;
    const double l = train::backward(p, c, batch, masks, 0.05, g);
    double ref = 0.0;
    for (int i = 0; i < 3; ++i) ref += train::sequence_loss(p, c, eps[i], masks[i]).loss;
    CHECK(std::abs(l - ref / 3.0) < 1e-12);
  }

  TEST_CASE("zero-loss batch has zero gradient") {
    const auto c = tiny();
    Rng rng(3);
    auto ep = testing::random_episode(rng, 4, 8);
    for (auto& f : ep.frames) f.v_cmd = f.delta_cmd = 0.0f;
    std::vector<const scenario::EpisodeRecord*> batch{&ep};
    std::vector<std::vector<std::uint8_t>> masks{{0, 1, 0, 0}};
    Params g;
    CHECK(train::backward(Params::zeros(c), c, batch, masks, 0.05, g) == 0.0);
    CHECK(max_abs(g) == 0.0);
  }

  TEST_CASE("e_mask gradient vanishes without masked frames") {
    const auto c = tiny();
    Rng rng(4);
    const auto p = policy::init_params(c, rng);
    auto ep = testing::random_episode(rng, 5, 8);
    std::vector<const scenario::EpisodeRecord*> batch{&ep};
    Params g;
    std::vector<std::vector<std::uint8_t>> none{{0, 0, 0, 0, 0}};
    train::backward(p, c, batch, none, 0.05, g);
    CHECK(g.e_mask.cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.speed_w.cwiseAbs().maxCoeff() > 0.0);
    std::vector<std::vector<std::uint8_t>> all{{1, 1, 1, 1, 1}};
    train::backward(p, c, batch, all, 0.05, g);
    CHECK(g.e_mask.cwiseAbs().maxCoeff() > 0.0);
    CHECK(g.speed_w.cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("full masking makes the loss independent of recorded speeds") {
    const auto c = tiny();
    Rng rng(5);
    const auto p = policy::init_params(c, rng);
    auto a = testing::random_episode(rng, 6, 8);
    auto b = a;
    for (auto& f : b.frames) f.ego_v += 3.0f;
    const std::vector<std::uint8_t> all(6, 1);
    CHECK(train::sequence_loss(p, c, a, all).loss == train::sequence_loss(p, c, b, all).loss);
    const std::vector<std::uint8_t> none(6, 0);
    CHECK(train::sequence_loss(p, c, a, none).loss != train::sequence_loss(p, c, b, none).loss);
  }

  TEST_CASE("first Adam step moves each parameter by about lr against its gradient") {
    const auto c = tiny();
    Rng rng(6);
    auto state = train::TrainState::start(policy::init_params(c, rng), 1e-3);
    const Params before = state.params;
    Params g = Params::zeros(c);
    g.visit([&](const char*, double* d, Eigen::Index n) {
      for (Eigen::Index i = 0; i < n; ++i) d[i] = rng.uniform(-2.0, 2.0);
    });
    train::adam_update(state, g, {});
    CHECK(state.step == 1);
    std::vector<const double*> gd, bd;
    g.visit([&](const char*, const double* d, Eigen::Index) { gd.push_back(d); });
    before.visit([&](const char*, const double* d, Eigen::Index) { bd.push_back(d); });
    std::size_t k = 0;
    state.params.visit([&](const char*, const double* d, Eigen::Index n) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double gi = gd[k][i];
        const double expect = -1e-3 * gi / (std::abs(gi) + 1e-8);
        CHECK(std::abs((d[i] - bd[k][i]) - expect) < 1e-15);
      }
      ++k;
    });
  }

  TEST_CASE("zero gradient leaves parameters and decays moments") {
    const auto c = tiny();
    Rng rng(7);
    auto state = train::TrainState::start(policy::init_params(c, rng), 1e-3);
    Params g = Params::zeros(c);
    g.b2.setConstant(1.0);
    train::adam_update(state, g, {});
    const Params p1 = state.params;
    const double m1 = state.m.b2[0], v1 = state.v.b2[0];
    g.b2.setZero();
    train::adam_update(state, g, {});
    CHECK(state.m.b2[0] == doctest::Approx(0.9 * m1));
    CHECK(state.v.b2[0] == doctest::Approx(0.999 * v1));
    CHECK(state.params.W_h == p1.W_h);
  }

  TEST_CASE("plateau scheduler") {
    train::SchedulerConfig sc;
    SUBCASE("constant loss halves at epochs 11 and 22") {
      auto s = train::TrainState::start(Params{}, 1e-3);
      std::vector<int> halvings;
      for (int epoch = 1; epoch <= 30; ++epoch) {
        const double lr = s.lr;
        train::lr_schedule_step(s, 1.0, sc);
        if (s.lr < lr) halvings.push_back(epoch);
      }
      CHECK(halvings == std::vector<int>{11, 22});
      CHECK(s.lr == doctest::Approx(2.5e-4));
    }
    SUBCASE("strictly decreasing loss keeps lr0") {
      auto s = train::TrainState::start(Params{}, 1e-3);
      for (int epoch = 1; epoch <= 50; ++epoch) train::lr_schedule_step(s, 10.0 - 0.01 * epoch, sc);
      CHECK(s.lr == 1e-3);
    }
    SUBCASE("floor at lr_min") {
      auto s = train::TrainState::start(Params{}, 1e-6);
      for (int epoch = 1; epoch <= 40; ++epoch) train::lr_schedule_step(s, 1.0, sc);
      CHECK(s.lr == 1e-6);
    }
  }

  TEST_CASE("training is deterministic and masking changes the curve") {
    const auto c = tiny();
    Rng rng(8);
    const auto ds = dataset_of({testing::random_episode(rng, 6, 8), testing::random_episode(rng, 4, 8),
                                testing::random_episode(rng, 5, 8)});
    train::TrainerConfig tc;
    tc.epochs = 5;
    tc.batch_size = 2;
    tc.seed = 3;
    const auto a = train::train(ds, c, tc);
    const auto b = train::train(ds, c, tc);
    CHECK(a.final_params == b.final_params);
    REQUIRE(a.history.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(a.history[i].mean_loss == b.history[i].mean_loss);
      CHECK(std::isfinite(a.history[i].mean_loss));
    }
    tc.mask_p = 0.0;
    const auto m0 = train::train(ds, c, tc);
    CHECK(m0.history.back().mean_loss != a.history.back().mean_loss);

    std::ostringstream csv;
    train::write_loss_curve_csv(csv, a.history);
    CHECK(csv.str().rfind("epoch,mean_loss,lr\n1,", 0) == 0);
  }

  TEST_CASE("best parameters come from the lowest-loss epoch") {
    const auto c = tiny();
    Rng rng(9);
    const auto ds = dataset_of({testing::random_episode(rng, 6, 8)});
    train::TrainerConfig tc;
    tc.epochs = 8;
    tc.mask_p = 0.0;
    const auto r = train::train(ds, c, tc);
    double best = INFINITY;
    int at = 0;
    for (const auto& h : r.history)
      if (h.mean_loss < best) best = h.mean_loss, at = h.epoch;
    CHECK(r.best_epoch == at);
    CHECK(r.best_loss == best);
    tc.epochs = at;
    CHECK(train::train(ds, c, tc).final_params == r.best_params);
  }
}
