#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

#include "e2r/simulator.hpp"
#include "e2r/track.hpp"

namespace e2r::expert {

struct ExpertConfig {
  // Reward weights.
  double lambda_v = 1.0;
  double lambda_p = 0.3;
  double lambda_d = 6.0;
  double lambda_kappa = 0.05;
  double d_scale = 0.3;  // phi(d) = exp(-d / d_scale)

  // Lattice.
  double horizon = 2.0;
  double sample_dt = 0.01;
  int n_lateral = 7;
  int n_speed = 3;
  double speed_scale_min = 0.5;
  double max_lateral_offset = 0.8;
  double boundary_margin = 0.4;  // required clearance of every sample (reference point) to the track edge

  // Tracking.
  double lookahead_min = 0.8;
  double lookahead_gain = 0.3;  // lookahead = max(lookahead_min, gain * v)
  double wheelbase = 0.33;
  double delta_max = 0.4189;
  double speed_preview = 0.5;  // commanded speed = min over this leading window of the plan

  double leader_speed_discount = 0.6;

  // Footprint used for the opponent gap d_l; centred wheelbase/2 ahead of
  // the reference point like the simulator's.
  double vehicle_length = 0.58;
  double vehicle_width = 0.31;

  void validate() const;
  double lookahead(double v) const { return std::max(lookahead_min, lookahead_gain * v); }
};

class ExpertError : public std::runtime_error {
 public:
  enum class Kind { NoFeasibleCandidate, NonPositiveSpeed, EmptyCandidateSet };
  ExpertError(Kind k, const std::string& what) : std::runtime_error(what), kind_(k) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct TrajectorySample {
  double t = 0.0;
  Vec2 p;
  double heading = 0.0;
  double v = 0.0;
  double s = 0.0;    // raceline arc position
  double d_r = 0.0;  // lateral deviation from the raceline, positive left
};

struct Pose {
  Vec2 p;
  double heading = 0.0;
};

struct CandidateTrajectory {
  std::vector<TrajectorySample> samples;
  double lateral_offset = 0.0;  // target deviation from the raceline
  double speed_scale = 1.0;
  double reward = 0.0;
};

/// n_lateral x n_speed grid of cubic lateral blends toward offset lines,
/// minus candidates that leave the track. Throws NoFeasibleCandidate.
std::vector<CandidateTrajectory> sample_lattice(const sim::VehicleState& state, const track::Raceline& raceline,
                                                const track::TrackModel& track, const ExpertConfig& cfg);

/// Constant velocity in the track frame: the opponent keeps its lateral
/// offset and along-track speed. One pose per sample instant t = k * dt, k = 1..n.
std::vector<Pose> predict_opponent(const sim::VehicleState& opponent, const track::TrackModel& track, double dt,
                                   std::size_t n);

double proximity_cost(double d_l, double d_scale);

/// Per-sample composite reward
///   lambda_v ln v - lambda_p |d_r| - lambda_d phi(d_l) - lambda_kappa |kappa| v.
double sample_reward(double v, double d_r, double d_l, double kappa, const ExpertConfig& cfg);

/// Gap between the two vehicle footprints (0 on contact).
double footprint_gap(const Pose& ego, const Pose& opponent, const ExpertConfig& cfg);

/// Mean sample reward, with d_l the footprint gap to the time-aligned
/// opponent pose. An empty prediction means no opponent (phi = 0).
double score_candidate(const CandidateTrajectory& cand, std::span<const Pose> opponent_pred,
                       const track::Raceline& raceline, const ExpertConfig& cfg);

/// Argmax reward; ties go to the smaller |lateral_offset|, then the lower index.
std::size_t select_trajectory(std::span<const CandidateTrajectory> candidates);

/// delta = atan(2 L sin(alpha) / lookahead), clamped to +-delta_max.
double pure_pursuit_steer(double alpha, double lookahead, double wheelbase, double delta_max);

/// Steers toward the first plan sample at least `lookahead` away (or the last one).
double pure_pursuit(const sim::VehicleState& state, const CandidateTrajectory& traj, const ExpertConfig& cfg);

enum class Role { Ego, Leader };

/// Ego: lattice + reward + pure pursuit, braking straight when nothing is
/// feasible. Leader: pure pursuit on its own raceline at the discounted
/// reference speed, blind to every other agent.
sim::VehicleCommand expert_action(const sim::WorldState& world, std::size_t agent, Role role,
                                  const track::Raceline& raceline, const ExpertConfig& cfg);

/// Leader command from its own state only.
sim::VehicleCommand leader_action(const sim::VehicleState& state, const track::Raceline& raceline,
                                  const ExpertConfig& cfg);

}  // namespace e2r::expert
