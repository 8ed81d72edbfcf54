#include "e2r/expert.hpp"

#include <cmath>
#include <limits>

namespace e2r::expert {

using sim::VehicleCommand;
using sim::VehicleState;

void ExpertConfig::validate() const {
  for (double w : {lambda_v, lambda_p, lambda_d, lambda_kappa})
    if (!(w >= 0.0)) throw std::invalid_argument("expert weights must be >= 0");
  if (!(horizon > 0.0)) throw std::invalid_argument("expert.horizon must be > 0");
  if (!(sample_dt > 0.0) || sample_dt > horizon) throw std::invalid_argument("expert.sample_dt must be in (0, horizon]");
  if (n_lateral < 1 || n_speed < 1) throw std::invalid_argument("expert lattice needs n_lateral, n_speed >= 1");
  if (!(speed_scale_min > 0.0 && speed_scale_min <= 1.0))
    throw std::invalid_argument("expert.speed_scale_min must be in (0, 1]");
  if (!(max_lateral_offset >= 0.0)) throw std::invalid_argument("expert.max_lateral_offset must be >= 0");
  if (!(lookahead_min > 0.0) || lookahead_gain < 0.0) throw std::invalid_argument("expert lookahead must be > 0");
  if (!(d_scale > 0.0)) throw std::invalid_argument("expert.d_scale must be > 0");
  if (!(wheelbase > 0.0) || !(delta_max > 0.0)) throw std::invalid_argument("expert vehicle limits must be > 0");
  if (!(leader_speed_discount > 0.0 && leader_speed_discount <= 1.0))
    throw std::invalid_argument("expert.leader_speed_discount must be in (0, 1]");
}

namespace {

std::vector<double> evenly_spaced(double lo, double hi, int n) {
  if (n == 1) return {0.5 * (lo + hi)};
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return out;
}

// Exactly symmetric about zero, with an exact 0 in the middle for odd n.
std::vector<double> symmetric_offsets(double max_abs, int n) {
  if (n == 1) return {0.0};
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = max_abs * (2 * i - (n - 1)) / (n - 1);
  return out;
}

std::size_t horizon_samples(const ExpertConfig& cfg) {
  return static_cast<std::size_t>(std::max(1.0, std::round(cfg.horizon / cfg.sample_dt)));
}

}  // namespace

std::vector<CandidateTrajectory> sample_lattice(const VehicleState& state, const track::Raceline& raceline,
                                                const track::TrackModel& track, const ExpertConfig& cfg) {
  const auto proj = track::project(state.position(), raceline);
  const std::size_t n = horizon_samples(cfg);
  const auto offsets = symmetric_offsets(cfg.max_lateral_offset, cfg.n_lateral);
  const auto scales = cfg.n_speed == 1 ? std::vector<double>{1.0} : evenly_spaced(cfg.speed_scale_min, 1.0, cfg.n_speed);
  const double lateral_rate =
      state.v * std::sin(wrap_angle(state.theta - raceline.heading_at(proj.s)));
  const std::size_t start_hint = track.centerline().project(state.position()).segment;
  constexpr std::size_t window = 3;

  // Raceline quantities depend only on the speed scale, so they are shared
  // by every lateral offset.
  struct Along {
    double s, v, psi;
    Vec2 p;
  };
  std::vector<std::vector<Along>> along(scales.size(), std::vector<Along>(n));
  for (std::size_t j = 0; j < scales.size(); ++j) {
    double s = proj.s;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = scales[j] * raceline.speed_at(s);
      s += v * cfg.sample_dt;
      along[j][i] = {s, v, raceline.heading_at(s), raceline.position(s)};
    }
  }

  std::vector<CandidateTrajectory> out;
  out.reserve(offsets.size() * scales.size());
  for (double target : offsets) {
    for (std::size_t j = 0; j < scales.size(); ++j) {
      CandidateTrajectory c;
      c.lateral_offset = target;
      c.speed_scale = scales[j];
      c.samples.reserve(n);
      std::size_t hint = start_hint;
      bool inside = true;
      for (std::size_t i = 1; i <= n; ++i) {
        const Along& a = along[j][i - 1];
        const double tau = static_cast<double>(i) / static_cast<double>(n);
        // Cubic Hermite in time: starts at the current offset and lateral
        // rate, ends on the target line with zero lateral rate.
        const double h00 = (1.0 + 2.0 * tau) * (1.0 - tau) * (1.0 - tau);
        const double h10 = tau * (1.0 - tau) * (1.0 - tau);
        const double h01 = tau * tau * (3.0 - 2.0 * tau);
        const double l = h00 * proj.d_r + h10 * cfg.horizon * lateral_rate + h01 * target;
        const double dh00 = 6.0 * tau * (tau - 1.0);
        const double dh10 = (1.0 - tau) * (1.0 - 3.0 * tau);
        const double l_dot = (dh00 * proj.d_r - dh00 * target) / cfg.horizon + dh10 * lateral_rate;
        const Vec2 p = a.p + left_normal(unit_from_angle(a.psi)) * l;

        const auto cp = track.centerline().project_near(p, hint, window);
        hint = cp.segment;
        if (track.clearance_of(cp) < cfg.boundary_margin) {
          inside = false;
          break;
        }
        TrajectorySample ts;
        ts.t = static_cast<double>(i) * cfg.sample_dt;
        ts.p = p;
        ts.v = a.v;
        ts.s = raceline.path().wrap(a.s);
        ts.d_r = l;
        ts.heading = a.psi + std::atan2(l_dot, std::max(a.v, 1e-6));
        c.samples.push_back(ts);
      }
      if (inside) out.push_back(std::move(c));
    }
  }
  if (out.empty()) throw ExpertError(ExpertError::Kind::NoFeasibleCandidate, "every lattice candidate leaves the track");
  return out;
}

std::vector<Pose> predict_opponent(const VehicleState& opponent, const track::TrackModel& track, double dt,
                                   std::size_t n) {
  const auto& center = track.centerline();
  const auto pr = center.project(opponent.position());
  const Vec2 t0 = center.tangent(pr.segment);
  const double v_along = opponent.v * dot(unit_from_angle(opponent.theta), t0);
  const double rel_heading = wrap_angle(opponent.theta - std::atan2(t0.y, t0.x));
  std::vector<Pose> out(n);
  for (std::size_t k = 1; k <= n; ++k) {
    const double s = pr.s + v_along * dt * static_cast<double>(k);
    const Vec2 tan = center.tangent(center.segment_at(s));
    out[k - 1] = {center.position(s) + left_normal(tan) * pr.lateral, std::atan2(tan.y, tan.x) + rel_heading};
  }
  return out;
}

double proximity_cost(double d_l, double d_scale) { return std::exp(-d_l / d_scale); }

double sample_reward(double v, double d_r, double d_l, double kappa, const ExpertConfig& cfg) {
  if (!(v > 0.0)) throw ExpertError(ExpertError::Kind::NonPositiveSpeed, "candidate speed must be > 0");
  const double phi = std::isinf(d_l) ? 0.0 : proximity_cost(d_l, cfg.d_scale);
  return cfg.lambda_v * std::log(v) - cfg.lambda_p * std::abs(d_r) - cfg.lambda_d * phi -
         cfg.lambda_kappa * std::abs(kappa) * v;
}

double footprint_gap(const Pose& ego, const Pose& opponent, const ExpertConfig& cfg) {
  auto box = [&](const Pose& p) {
    return OrientedBox{p.p + unit_from_angle(p.heading) * (0.5 * cfg.wheelbase), p.heading, 0.5 * cfg.vehicle_length,
                       0.5 * cfg.vehicle_width};
  };
  const OrientedBox a = box(ego);
  const OrientedBox b = box(opponent);
  return box_distance(a, b);
}

double score_candidate(const CandidateTrajectory& cand, std::span<const Pose> opponent_pred,
                       const track::Raceline& raceline, const ExpertConfig& cfg) {
  if (cand.samples.empty()) return -std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (std::size_t i = 0; i < cand.samples.size(); ++i) {
    const auto& smp = cand.samples[i];
    double d_l = std::numeric_limits<double>::infinity();
    if (!opponent_pred.empty())
      d_l = footprint_gap({smp.p, smp.heading}, opponent_pred[std::min(i, opponent_pred.size() - 1)], cfg);
    total += sample_reward(smp.v, smp.d_r, d_l, track::curvature_at(raceline, smp.s), cfg);
  }
  return total / static_cast<double>(cand.samples.size());
}

std::size_t select_trajectory(std::span<const CandidateTrajectory> candidates) {
  if (candidates.empty()) throw ExpertError(ExpertError::Kind::EmptyCandidateSet, "no candidates to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const auto& b = candidates[best];
    if (c.reward > b.reward || (c.reward == b.reward && std::abs(c.lateral_offset) < std::abs(b.lateral_offset)))
      best = i;
  }
  return best;
}

double pure_pursuit_steer(double alpha, double lookahead, double wheelbase, double delta_max) {
  const double delta = std::atan(2.0 * wheelbase * std::sin(alpha) / lookahead);
  return std::clamp(delta, -delta_max, delta_max);
}

namespace {

double steer_to(const VehicleState& state, Vec2 target, const ExpertConfig& cfg) {
  const Vec2 d = target - state.position();
  const double dist = norm(d);
  if (dist < 1e-9) return 0.0;
  const double alpha = wrap_angle(std::atan2(d.y, d.x) - state.theta);
  return pure_pursuit_steer(alpha, dist, cfg.wheelbase, cfg.delta_max);
}

}  // namespace

double pure_pursuit(const VehicleState& state, const CandidateTrajectory& traj, const ExpertConfig& cfg) {
  if (traj.samples.empty()) return 0.0;
  const Vec2 pos = state.position();
  const double ell = cfg.lookahead(state.v);
  std::size_t nearest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < traj.samples.size(); ++i) {
    const double d = distance(pos, traj.samples[i].p);
    if (d < best) {
      best = d;
      nearest = i;
    }
  }
  std::size_t target = traj.samples.size() - 1;
  for (std::size_t i = nearest; i < traj.samples.size(); ++i) {
    if (distance(pos, traj.samples[i].p) >= ell) {
      target = i;
      break;
    }
  }
  return steer_to(state, traj.samples[target].p, cfg);
}

VehicleCommand leader_action(const VehicleState& state, const track::Raceline& raceline, const ExpertConfig& cfg) {
  const auto pr = track::project(state.position(), raceline);
  const double ell = cfg.lookahead(state.v);
  // Walk forward along the line until the point is a full lookahead away.
  double s = pr.s + ell;
  Vec2 target = raceline.position(s);
  for (int k = 0; k < 50 && distance(target, state.position()) < ell; ++k) {
    s += 0.25 * ell;
    target = raceline.position(s);
  }
  return {raceline.speed_at(pr.s) * cfg.leader_speed_discount, steer_to(state, target, cfg)};
}

VehicleCommand expert_action(const sim::WorldState& world, std::size_t agent, Role role,
                             const track::Raceline& raceline, const ExpertConfig& cfg) {
  const VehicleState& state = world.agents.at(agent);
  if (role == Role::Leader) return leader_action(state, raceline, cfg);

  std::vector<CandidateTrajectory> cands;
  try {
    cands = sample_lattice(state, raceline, *world.track, cfg);
  } catch (const ExpertError& e) {
    if (e.kind() != ExpertError::Kind::NoFeasibleCandidate) throw;
    return {0.0, 0.0};
  }
  std::vector<Pose> opp;
  for (std::size_t j = 0; j < world.agents.size(); ++j) {
    if (j == agent) continue;
    opp = predict_opponent(world.agents[j], *world.track, cfg.sample_dt, horizon_samples(cfg));
    break;
  }
  for (auto& c : cands) c.reward = score_candidate(c, opp, raceline, cfg);
  const auto& best = cands[select_trajectory(cands)];

  double v_cmd = std::numeric_limits<double>::infinity();
  for (const auto& smp : best.samples) {
    if (smp.t > cfg.speed_preview + 1e-12) break;
    v_cmd = std::min(v_cmd, smp.v);
  }
  if (!std::isfinite(v_cmd)) v_cmd = best.samples.front().v;
  return {v_cmd, pure_pursuit(state, best, cfg)};
}

}  // namespace e2r::expert
