#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "e2r/expert.hpp"
#include "e2r/simulator.hpp"
#include "e2r/track.hpp"

namespace e2r::scenario {

enum class Outcome : std::uint32_t { CarFollowing = 0, Overtaking = 1, Collision = 2 };

const char* outcome_name(Outcome o);

class ScenarioError : public std::runtime_error {
 public:
  enum class Kind { InvalidConfig, NoValidSpawn, EmptyDataset };
  ScenarioError(Kind k, const std::string& what) : std::runtime_error(what), kind_(k) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct ScenarioConfig {
  /// Raceline offset fractions (see track::kLeftOffset etc). Ego/leader pairs
  /// are the cross product, assigned to spawn slots cyclically.
  std::vector<double> racelines{track::kCenterOffset, track::kLeftOffset, track::kRightOffset};
  int k_positions = 100;
  double d_gap = 6.0;  // leader lead along the centerline
  double v_ell_discount = 0.6;
  double duration = 8.0;
  std::uint64_t seed = 0;
  /// Shifts every spawn by phase * L / k; 0.5 interleaves a held-out set.
  double spawn_phase = 0.0;

  void validate(const sim::SimConfig& sim) const;
};

struct Scenario {
  std::uint64_t id = 0;
  std::size_t ego_raceline = 0;
  std::size_t leader_raceline = 0;
  double ego_s = 0.0;     // centerline arc position
  double leader_s = 0.0;  // centerline arc position, ego_s + d_gap wrapped
  double gap = 0.0;       // centerline lead of the leader at t = 0
  std::uint64_t seed = 0;
};

struct ScenarioSet {
  std::vector<track::Raceline> racelines;
  std::vector<Scenario> scenarios;
  std::size_t skipped = 0;  // spawns rejected for colliding at t = 0
};

std::vector<track::Raceline> build_racelines(const track::TrackModel& track, const std::vector<double>& offsets,
                                             const track::RacelineConfig& cfg = {});

/// Raceline arc position of the point on `raceline` that corresponds to
/// centerline arc position s (racelines share the waypoint indexing).
double raceline_s_at(const track::Raceline& raceline, const track::TrackModel& track, double s);

/// Pose on a raceline at centerline arc position s, moving at speed v.
sim::VehicleState spawn_state(const track::Raceline& raceline, const track::TrackModel& track, double s, double v);

/// Throws ScenarioError{InvalidConfig} or {NoValidSpawn}.
ScenarioSet enumerate_scenarios(const ScenarioConfig& cfg, const track::TrackModel& track,
                                const sim::SimConfig& sim, const track::RacelineConfig& rl_cfg = {});

struct Frame {
  std::vector<float> scan;  // raw ranges, noisy when eta > 0
  float ego_v = 0.0f;
  float v_cmd = 0.0f;
  float delta_cmd = 0.0f;
};

struct EpisodeRecord {
  std::uint64_t scenario_id = 0;
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::CarFollowing;
  double duration_actual = 0.0;
  double ego_progress = 0.0;     // unwrapped centerline progress from the ego spawn
  double leader_progress = 0.0;  // same origin, so it starts at `gap`
  std::vector<Frame> frames;
  std::vector<sim::TraceRow> trace;
};

struct EgoContext {
  const sim::WorldState& world;
  std::size_t agent;
  const sim::LidarScan& scan;  // as recorded (after noise)
  const track::Raceline& raceline;
  double t;
};

/// Anything that drives the ego at 10 Hz. reset() is called at the start of
/// every episode.
class EgoController {
 public:
  virtual ~EgoController() = default;
  virtual void reset() {}
  virtual sim::VehicleCommand act(const EgoContext& ctx) = 0;
};

class ExpertController : public EgoController {
 public:
  explicit ExpertController(expert::ExpertConfig cfg) : cfg_(cfg) {}
  sim::VehicleCommand act(const EgoContext& ctx) override;

 private:
  expert::ExpertConfig cfg_;
};

struct RolloutOptions {
  double duration = 8.0;
  int control_every = 10;  // sim steps per controller query (10 Hz at dt = 0.01)
  double eta = 0.0;        // beam dropout applied to every recorded scan
  bool record_frames = true;
  bool record_trace = false;
};

/// Advances unwrapped centerline progress with a windowed projection.
class ProgressTracker {
 public:
  ProgressTracker(const track::TrackModel& track, Vec2 p, double origin);
  void update(Vec2 p);
  double progress() const { return progress_; }

 private:
  const track::TrackModel* track_;
  double last_s_;
  std::size_t hint_;
  double progress_;
};

/// One two-agent episode. The leader is the expert Leader role on its own
/// raceline at v_ref * leader_discount.
EpisodeRecord rollout(const Scenario& scenario, const ScenarioSet& set, const track::TrackModel& track,
                      EgoController& ego, const expert::ExpertConfig& leader_cfg, double leader_discount,
                      const sim::SimConfig& sim, const RolloutOptions& opts);

/// Collision dominates; otherwise Overtaking needs ego_progress to exceed
/// leader_progress by more than 1e-9.
Outcome classify_outcome(bool ego_collided, bool leader_collided, double ego_progress, double leader_progress);

using ControllerFactory = std::function<std::unique_ptr<EgoController>()>;

/// Rolls every scenario, `workers` at a time. Results are in scenario order
/// and do not depend on the worker count.
std::vector<EpisodeRecord> rollout_all(const ScenarioSet& set, const track::TrackModel& track,
                                       const ControllerFactory& make_ego, const expert::ExpertConfig& leader_cfg,
                                       double leader_discount, const sim::SimConfig& sim, const RolloutOptions& opts,
                                       int workers);

struct OutcomeCounts {
  std::size_t car_following = 0;
  std::size_t overtaking = 0;
  std::size_t collision = 0;
  std::size_t total() const { return car_following + overtaking + collision; }
  void add(Outcome o);
  /// "following/overtake/collision", e.g. "194/378/28".
  std::string summary() const;
};

struct Dataset {
  std::vector<EpisodeRecord> episodes;  // collision-free only
  OutcomeCounts pool;
  std::size_t total_samples = 0;
};

/// Drops Collision episodes. Throws ScenarioError{EmptyDataset} if none remain.
Dataset build_dataset(std::vector<EpisodeRecord> episodes);

}  // namespace e2r::scenario
