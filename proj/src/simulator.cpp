#include "e2r/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

namespace e2r::sim {

void SimConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string("sim.") + name + " must be > 0");
  };
  positive(dt, "dt");
  positive(wheelbase, "wheelbase");
  positive(veh_length, "veh_length");
  positive(veh_width, "veh_width");
  positive(delta_max, "delta_max");
  positive(steer_rate_max, "steer_rate_max");
  positive(a_max, "a_max");
  positive(-a_min, "-a_min");
  positive(v_hard_max, "v_hard_max");
  positive(speed_gain, "speed_gain");
  positive(lidar_range_max, "lidar_range_max");
  if (n_beams < 1) throw std::invalid_argument("sim.n_beams must be >= 1");
}

OrientedBox footprint(const VehicleState& s, const SimConfig& cfg) {
  const Vec2 c = s.position() + unit_from_angle(s.theta) * (0.5 * cfg.wheelbase);
  return {c, s.theta, 0.5 * cfg.veh_length, 0.5 * cfg.veh_width};
}

bool WorldState::any_collision() const {
  return std::any_of(collided.begin(), collided.end(), [](std::uint8_t c) { return c != 0; });
}

VehicleState integrate(const VehicleState& s, const VehicleCommand& cmd, const SimConfig& cfg) {
  VehicleState n = s;
  const double target_delta = std::clamp(cmd.delta_cmd, -cfg.delta_max, cfg.delta_max);
  const double max_step = cfg.steer_rate_max * cfg.dt;
  n.delta = s.delta + std::clamp(target_delta - s.delta, -max_step, max_step);

  const double v_cmd = std::clamp(cmd.v_cmd, 0.0, cfg.v_hard_max);
  // A zero speed command is a stop request and brakes at the full limit; the
  // proportional law alone would only decay exponentially toward rest.
  const double a = v_cmd <= 0.0 ? cfg.a_min : std::clamp(cfg.speed_gain * (v_cmd - s.v), cfg.a_min, cfg.a_max);

  n.x = s.x + s.v * std::cos(s.theta) * cfg.dt;
  n.y = s.y + s.v * std::sin(s.theta) * cfg.dt;
  n.theta = wrap_angle(s.theta + s.v / cfg.wheelbase * std::tan(n.delta) * cfg.dt);
  n.v = std::clamp(s.v + a * cfg.dt, 0.0, cfg.v_hard_max);
  return n;
}

void step(WorldState& world, const std::vector<VehicleCommand>& commands, const SimConfig& cfg) {
  if (commands.size() != world.agents.size()) throw std::invalid_argument("one command per agent required");
  for (std::size_t i = 0; i < world.agents.size(); ++i) {
    const VehicleState n = integrate(world.agents[i], commands[i], cfg);
    if (!std::isfinite(n.x) || !std::isfinite(n.y) || !std::isfinite(n.theta) || !std::isfinite(n.v) ||
        !std::isfinite(n.delta))
      throw SimError("non-finite vehicle state for agent " + std::to_string(i));
    world.agents[i] = n;
  }
  const auto events = check_collision(world, cfg);
  for (std::size_t i = 0; i < events.size(); ++i) world.collided[i] |= events[i];
  ++world.steps;
}

bool box_hits_track(const OrientedBox& box, const track::TrackModel& track) {
  const double r = box.bounding_radius();
  for (const auto* boundary : {&track.left_boundary(), &track.right_boundary()}) {
    const auto& b = *boundary;
    const std::size_t n = b.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 a = b[i];
      const Vec2 c = b[(i + 1) % n];
      const Vec2 mid = (a + c) * 0.5;
      if (distance(mid, box.center) > r + 0.5 * distance(a, c)) continue;
      if (box_intersects_segment(box, a, c)) return true;
    }
  }
  return false;
}

std::vector<std::uint8_t> check_collision(const WorldState& world, const SimConfig& cfg) {
  const std::size_t n = world.agents.size();
  std::vector<OrientedBox> boxes(n);
  for (std::size_t i = 0; i < n; ++i) boxes[i] = footprint(world.agents[i], cfg);
  std::vector<std::uint8_t> hit(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (world.track && box_hits_track(boxes[i], *world.track)) hit[i] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (boxes_intersect(boxes[i], boxes[j])) hit[i] = hit[j] = 1;
    }
  }
  return hit;
}

LidarScan cast_rays(Vec2 origin, double heading, std::span<const std::pair<Vec2, Vec2>> segments,
                    std::span<const OrientedBox> boxes, int n_beams, double range_max) {
  LidarScan scan;
  const auto n = static_cast<std::size_t>(n_beams);
  scan.ranges.assign(n, range_max);
  const double step = 2.0 * std::numbers::pi / n_beams;
  std::vector<Vec2> dirs(n);
  for (std::size_t i = 0; i < n; ++i) dirs[i] = unit_from_angle(heading + step * static_cast<double>(i));

  auto test = [&](std::size_t i, Vec2 a, Vec2 b) {
    const auto d = ray_segment_distance(origin, dirs[i], a, b);
    if (d && *d < scan.ranges[i]) scan.ranges[i] = *d;
  };
  // Each segment is only tested against the beams inside its angular span
  // (padded by one beam either side); the per-beam result is the same as
  // testing every segment.
  for (const auto& [a, b] : segments) {
    const Vec2 da = a - origin;
    const Vec2 db = b - origin;
    const double ta = wrap_angle(std::atan2(da.y, da.x) - heading);
    const double span = wrap_angle(std::atan2(db.y, db.x) - std::atan2(da.y, da.x));
    if (norm(da) < 1e-9 || norm(db) < 1e-9 || std::abs(span) > std::numbers::pi - 1e-3) {
      for (std::size_t i = 0; i < n; ++i) test(i, a, b);
      continue;
    }
    const double lo = std::min(ta, ta + span);
    const double hi = std::max(ta, ta + span);
    const auto first = static_cast<long>(std::floor(lo / step)) - 1;
    const auto last = static_cast<long>(std::ceil(hi / step)) + 1;
    const auto nl = static_cast<long>(n);
    for (long k = first; k <= last; ++k) test(static_cast<std::size_t>(((k % nl) + nl) % nl), a, b);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& box : boxes) {
      const auto d = ray_box_distance(origin, dirs[i], box);
      if (d && *d < scan.ranges[i]) scan.ranges[i] = *d;
    }
  }
  return scan;
}

LidarScan scan_lidar(const WorldState& world, std::size_t agent, const SimConfig& cfg) {
  const VehicleState& s = world.agents.at(agent);
  const Vec2 origin = s.position();
  std::vector<std::pair<Vec2, Vec2>> segs;
  if (world.track) {
    for (const auto* boundary : {&world.track->left_boundary(), &world.track->right_boundary()}) {
      const auto& b = *boundary;
      const std::size_t n = b.size();
      segs.reserve(segs.size() + n);
      for (std::size_t i = 0; i < n; ++i) {
        const Vec2 a = b[i];
        const Vec2 c = b[(i + 1) % n];
        // Cull segments entirely out of range.
        if (point_segment_distance(origin, a, c) > cfg.lidar_range_max) continue;
        segs.emplace_back(a, c);
      }
    }
  }
  std::vector<OrientedBox> boxes;
  for (std::size_t j = 0; j < world.agents.size(); ++j)
    if (j != agent) boxes.push_back(footprint(world.agents[j], cfg));
  return cast_rays(origin, s.theta, segs, boxes, cfg.n_beams, cfg.lidar_range_max);
}

std::size_t dropped_beam_count(double eta, std::size_t n_beams) {
  // The epsilon absorbs representation error, e.g. 0.3 * 360.
  const double k = std::floor(eta * static_cast<double>(n_beams) + 1e-9);
  return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(n_beams)));
}

void apply_noise(LidarScan& scan, double eta, Rng& rng) {
  if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("noise eta must be in [0, 1]");
  const std::size_t n = scan.ranges.size();
  const std::size_t k = dropped_beam_count(eta, n);
  if (k == 0) return;
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  // Partial Fisher-Yates: the first k slots become a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
    scan.ranges[idx[i]] = 0.0;
  }
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << "t_s,agent,x_m,y_m,theta_rad,v_mps,delta_rad,collided\n" << std::setprecision(17);
  for (const auto& r : rows)
    out << r.t << ',' << r.agent << ',' << r.state.x << ',' << r.state.y << ',' << r.state.theta << ','
        << r.state.v << ',' << r.state.delta << ',' << (r.collided ? 1 : 0) << '\n';
}

}  // namespace e2r::sim
