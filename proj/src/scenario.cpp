#include "e2r/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace e2r::scenario {

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::CarFollowing:
      return "car_following";
    case Outcome::Overtaking:
      return "overtaking";
    case Outcome::Collision:
      return "collision";
  }
  return "unknown";
}

void ScenarioConfig::validate(const sim::SimConfig& sim) const {
  using K = ScenarioError::Kind;
  if (racelines.empty()) throw ScenarioError(K::InvalidConfig, "scenario.racelines must not be empty");
  if (k_positions < 1) throw ScenarioError(K::InvalidConfig, "scenario.k_positions must be >= 1");
  if (!(d_gap > sim.veh_length))
    throw ScenarioError(K::InvalidConfig, "scenario.d_gap must exceed the vehicle length");
  if (!(v_ell_discount > 0.0 && v_ell_discount <= 1.0))
    throw ScenarioError(K::InvalidConfig, "scenario.v_ell_discount must be in (0, 1]");
  if (!(duration > 0.0)) throw ScenarioError(K::InvalidConfig, "scenario.duration must be > 0");
  if (!(spawn_phase >= 0.0 && spawn_phase < 1.0))
    throw ScenarioError(K::InvalidConfig, "scenario.spawn_phase must be in [0, 1)");
}

std::vector<track::Raceline> build_racelines(const track::TrackModel& track, const std::vector<double>& offsets,
                                             const track::RacelineConfig& cfg) {
  std::vector<track::Raceline> out;
  out.reserve(offsets.size());
  for (double o : offsets) out.push_back(track::generate_raceline(track, o, cfg));
  return out;
}

double raceline_s_at(const track::Raceline& raceline, const track::TrackModel& track, double s) {
  const auto& center = track.centerline();
  const std::size_t i = center.segment_at(s);
  const auto& ca = center.arc();
  const auto& ra = raceline.path().arc();
  const double f = (center.wrap(s) - ca[i]) / (ca[i + 1] - ca[i]);
  return ra[i] + f * (ra[i + 1] - ra[i]);
}

sim::VehicleState spawn_state(const track::Raceline& raceline, const track::TrackModel& track, double s, double v) {
  const double rs = raceline_s_at(raceline, track, s);
  const Vec2 p = raceline.position(rs);
  return {p.x, p.y, raceline.heading_at(rs), v, 0.0};
}

ScenarioSet enumerate_scenarios(const ScenarioConfig& cfg, const track::TrackModel& track,
                                const sim::SimConfig& sim, const track::RacelineConfig& rl_cfg) {
  cfg.validate(sim);
  const double length = track.total_length();
  if (cfg.d_gap >= length)
    throw ScenarioError(ScenarioError::Kind::InvalidConfig, "scenario.d_gap exceeds the track length");

  ScenarioSet set;
  set.racelines = build_racelines(track, cfg.racelines, rl_cfg);
  const std::size_t r = set.racelines.size();
  const std::size_t k = static_cast<std::size_t>(cfg.k_positions);

  for (std::size_t i = 0; i < k; ++i) {
    Scenario sc;
    sc.id = i;
    const std::size_t pair = i % (r * r);
    sc.ego_raceline = pair / r;
    sc.leader_raceline = pair % r;
    sc.ego_s = track.centerline().wrap((static_cast<double>(i) + cfg.spawn_phase) * length / static_cast<double>(k));
    sc.leader_s = track.centerline().wrap(sc.ego_s + cfg.d_gap);
    sc.gap = cfg.d_gap;
    sc.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));

    const auto& erl = set.racelines[sc.ego_raceline];
    const auto& lrl = set.racelines[sc.leader_raceline];
    const auto e = spawn_state(erl, track, sc.ego_s, 1.0);
    const auto l = spawn_state(lrl, track, sc.leader_s, 1.0);
    const auto fe = sim::footprint(e, sim);
    const auto fl = sim::footprint(l, sim);
    if (sim::box_hits_track(fe, track) || sim::box_hits_track(fl, track) || boxes_intersect(fe, fl)) {
      ++set.skipped;
      continue;
    }
    set.scenarios.push_back(sc);
  }
  if (set.scenarios.empty())
    throw ScenarioError(ScenarioError::Kind::NoValidSpawn, "every scenario spawn collides at t = 0");
  return set;
}

sim::VehicleCommand ExpertController::act(const EgoContext& ctx) {
  return expert::expert_action(ctx.world, ctx.agent, expert::Role::Ego, ctx.raceline, cfg_);
}

ProgressTracker::ProgressTracker(const track::TrackModel& track, Vec2 p, double origin)
    : track_(&track), progress_(origin) {
  const auto pr = track.centerline().project(p);
  last_s_ = pr.s;
  hint_ = pr.segment;
}

void ProgressTracker::update(Vec2 p) {
  const auto& center = track_->centerline();
  const auto pr = center.project_near(p, hint_, 8);
  const double length = center.length();
  double ds = pr.s - last_s_;
  if (ds > 0.5 * length) ds -= length;
  if (ds < -0.5 * length) ds += length;
  progress_ += ds;
  last_s_ = pr.s;
  hint_ = pr.segment;
}

Outcome classify_outcome(bool ego_collided, bool leader_collided, double ego_progress, double leader_progress) {
  if (ego_collided || leader_collided) return Outcome::Collision;
  return ego_progress - leader_progress > 1e-9 ? Outcome::Overtaking : Outcome::CarFollowing;
}

namespace {

std::vector<float> to_float(const std::vector<double>& v) { return {v.begin(), v.end()}; }

}  // namespace

EpisodeRecord rollout(const Scenario& scenario, const ScenarioSet& set, const track::TrackModel& track,
                      EgoController& ego, const expert::ExpertConfig& leader_cfg, double leader_discount,
                      const sim::SimConfig& sim, const RolloutOptions& opts) {
  const auto& erl = set.racelines.at(scenario.ego_raceline);
  const auto& lrl = set.racelines.at(scenario.leader_raceline);
  const double ve = erl.speed_at(raceline_s_at(erl, track, scenario.ego_s));
  const double vl = lrl.speed_at(raceline_s_at(lrl, track, scenario.leader_s)) * leader_discount;
  sim::WorldState world(track, {spawn_state(erl, track, scenario.ego_s, ve),
                                spawn_state(lrl, track, scenario.leader_s, vl)});

  expert::ExpertConfig lcfg = leader_cfg;
  lcfg.leader_speed_discount = leader_discount;
  Rng noise(derive_seed(scenario.seed, "lidar-noise"));

  EpisodeRecord rec;
  rec.scenario_id = scenario.id;
  rec.seed = scenario.seed;
  ProgressTracker pe(track, world.agents[0].position(), 0.0);
  ProgressTracker pl(track, world.agents[1].position(), scenario.gap);

  const auto n_steps = static_cast<std::uint64_t>(std::llround(opts.duration / sim.dt));
  const auto every = static_cast<std::uint64_t>(std::max(1, opts.control_every));
  std::vector<sim::VehicleCommand> cmds(2);
  ego.reset();
  auto trace = [&] {
    for (int a = 0; a < 2; ++a)
      rec.trace.push_back({world.time(sim), a, world.agents[a], world.collided[a] != 0});
  };
  if (opts.record_trace) trace();

  for (std::uint64_t k = 0; k < n_steps; ++k) {
    if (k % every == 0) {
      sim::LidarScan scan = sim::scan_lidar(world, 0, sim);
      if (opts.eta > 0.0) sim::apply_noise(scan, opts.eta, noise);
      cmds[0] = ego.act({world, 0, scan, erl, world.time(sim)});
      cmds[1] = expert::leader_action(world.agents[1], lrl, lcfg);
      if (opts.record_frames)
        rec.frames.push_back({to_float(scan.ranges), static_cast<float>(world.agents[0].v),
                              static_cast<float>(cmds[0].v_cmd), static_cast<float>(cmds[0].delta_cmd)});
    }
    sim::step(world, cmds, sim);
    pe.update(world.agents[0].position());
    pl.update(world.agents[1].position());
    if (opts.record_trace) trace();
    if (world.any_collision()) break;
  }

  rec.duration_actual = world.time(sim);
  rec.ego_progress = pe.progress();
  rec.leader_progress = pl.progress();
  rec.outcome = classify_outcome(world.collided[0] != 0, world.collided[1] != 0, rec.ego_progress,
                                 rec.leader_progress);
  return rec;
}

std::vector<EpisodeRecord> rollout_all(const ScenarioSet& set, const track::TrackModel& track,
                                       const ControllerFactory& make_ego, const expert::ExpertConfig& leader_cfg,
                                       double leader_discount, const sim::SimConfig& sim, const RolloutOptions& opts,
                                       int workers) {
  const std::size_t n = set.scenarios.size();
  std::vector<EpisodeRecord> out(n);
  const std::size_t w = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), 1, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;

  auto work = [&] {
    auto ego = make_ego();
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = rollout(set.scenarios[i], set, track, *ego, leader_cfg, leader_discount, sim, opts);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  if (w == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < w; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

void OutcomeCounts::add(Outcome o) {
  switch (o) {
    case Outcome::CarFollowing:
      ++car_following;
      break;
    case Outcome::Overtaking:
      ++overtaking;
      break;
    case Outcome::Collision:
      ++collision;
      break;
  }
}

std::string OutcomeCounts::summary() const {
  return std::to_string(car_following) + "/" + std::to_string(overtaking) + "/" + std::to_string(collision);
}

Dataset build_dataset(std::vector<EpisodeRecord> episodes) {
  Dataset ds;
  for (auto& e : episodes) {
    ds.pool.add(e.outcome);
    if (e.outcome == Outcome::Collision) continue;
    ds.total_samples += e.frames.size();
    ds.episodes.push_back(std::move(e));
  }
  if (ds.episodes.empty())
    throw ScenarioError(ScenarioError::Kind::EmptyDataset, "every episode ended in a collision");
  return ds;
}

}  // namespace e2r::scenario
