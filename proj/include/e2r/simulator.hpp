#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "e2r/geometry.hpp"
#include "e2r/rng.hpp"
#include "e2r/track.hpp"

namespace e2r::sim {

struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v = 0.0;
  double delta = 0.0;

  Vec2 position() const { return {x, y}; }
  bool operator==(const VehicleState&) const = default;
};

struct VehicleCommand {
  double v_cmd = 0.0;
  double delta_cmd = 0.0;
  bool operator==(const VehicleCommand&) const = default;
};

/// 1/10-scale defaults.
struct SimConfig {
  double dt = 0.01;
  double wheelbase = 0.33;
  double veh_length = 0.58;
  double veh_width = 0.31;
  double delta_max = 0.4189;
  double steer_rate_max = 3.2;
  double a_max = 9.51;
  double a_min = -9.51;
  double v_hard_max = 10.0;
  double speed_gain = 2.0;
  double lidar_range_max = 30.0;
  int n_beams = 360;

  /// Throws std::invalid_argument on a non-physical configuration.
  void validate() const;
};

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Footprint centred midway between the axles; the reference point is the rear axle.
OrientedBox footprint(const VehicleState& s, const SimConfig& cfg);

struct WorldState {
  const track::TrackModel* track = nullptr;
  std::vector<VehicleState> agents;  // [0] ego, [1] opponent when present
  std::vector<std::uint8_t> collided;  // latching per-agent flag
  std::uint64_t steps = 0;

  WorldState() = default;
  WorldState(const track::TrackModel& t, std::vector<VehicleState> a)
      : track(&t), agents(std::move(a)), collided(agents.size(), 0) {}

  /// steps * dt, so time never drifts from the step count.
  double time(const SimConfig& cfg) const { return static_cast<double>(steps) * cfg.dt; }
  bool any_collision() const;
};

struct LidarScan {
  std::vector<double> ranges;  // beam i at heading + i * 2*pi/n
};

/// Advances every agent by one dt, then updates the latching collision flags.
/// `commands` must have one entry per agent.
void step(WorldState& world, const std::vector<VehicleCommand>& commands, const SimConfig& cfg);

/// One-agent kinematic update (no collision handling).
VehicleState integrate(const VehicleState& s, const VehicleCommand& cmd, const SimConfig& cfg);

LidarScan scan_lidar(const WorldState& world, std::size_t agent, const SimConfig& cfg);

/// Ray cast against an explicit segment list and obstacle boxes.
LidarScan cast_rays(Vec2 origin, double heading, std::span<const std::pair<Vec2, Vec2>> segments,
                    std::span<const OrientedBox> boxes, int n_beams, double range_max);

/// Sets floor(eta * n) distinct beams, drawn uniformly without replacement, to zero.
void apply_noise(LidarScan& scan, double eta, Rng& rng);
std::size_t dropped_beam_count(double eta, std::size_t n_beams);

/// Fresh (non-latching) collision events per agent.
std::vector<std::uint8_t> check_collision(const WorldState& world, const SimConfig& cfg);

bool box_hits_track(const OrientedBox& box, const track::TrackModel& track);

struct TraceRow {
  double t = 0.0;
  int agent = 0;
  VehicleState state;
  bool collided = false;
};

/// Columns t_s, agent, x_m, y_m, theta_rad, v_mps, delta_rad, collided.
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows);

}  // namespace e2r::sim
