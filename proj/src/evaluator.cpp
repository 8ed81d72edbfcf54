#include "e2r/evaluator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace e2r::eval {

using nlohmann::ordered_json;

PolicyController::PolicyController(const policy::PolicyConfig& cfg, const policy::PolicyParams<double>& params)
    : net_(cfg, params), h_(net_.initial_state()) {}

void PolicyController::reset() { h_ = net_.initial_state(); }

sim::VehicleCommand PolicyController::act(const scenario::EgoContext& ctx) {
  const auto a = net_.forward_step(ctx.scan.ranges, ctx.world.agents[ctx.agent].v, h_);
  return {a.v, a.delta};
}

SingleAgentReport run_single_agent(scenario::EgoController& ego, const track::TrackModel& track,
                                   const sim::SimConfig& sim, const SingleAgentOptions& opts) {
  if (opts.laps_target < 1) throw std::invalid_argument("laps_target must be >= 1");
  const auto rl = track::generate_raceline(track, opts.raceline_offset);
  const double length = track.total_length();
  const double v0 = rl.speed_at(scenario::raceline_s_at(rl, track, opts.start_s));
  sim::WorldState world(track, {scenario::spawn_state(rl, track, opts.start_s, v0)});
  Rng noise(derive_seed(opts.seed, "lidar-noise"));
  scenario::ProgressTracker prog(track, world.agents[0].position(), 0.0);

  const double max_time = opts.max_time > 0.0 ? opts.max_time : opts.laps_target * length / 1.0;
  const auto n_steps = static_cast<std::uint64_t>(std::llround(max_time / sim.dt));
  const auto window = static_cast<std::size_t>(std::llround(opts.stall_window / (10 * sim.dt)));

  SingleAgentReport rep;
  std::deque<double> recent;  // progress at each control tick
  sim::VehicleCommand cmd;
  double sum_v = 0.0, sum_v2 = 0.0;
  std::uint64_t n_v = 0;
  double last_cross = 0.0;
  int laps = 0;
  ego.reset();
  if (opts.record_trace) rep.trace.push_back({0.0, 0, world.agents[0], false});

  for (std::uint64_t k = 0; k < n_steps; ++k) {
    if (k % 10 == 0) {
      recent.push_back(prog.progress());
      if (recent.size() > window + 1) recent.pop_front();
      if (window > 0 && recent.size() == window + 1 && recent.back() - recent.front() < opts.stall_distance) {
        rep.stalled = true;
        break;
      }
      sim::LidarScan scan = sim::scan_lidar(world, 0, sim);
      if (opts.eta > 0.0) sim::apply_noise(scan, opts.eta, noise);
      cmd = ego.act({world, 0, scan, rl, world.time(sim)});
    }
    const double p_prev = prog.progress();
    const double t_prev = world.time(sim);
    sim::step(world, {cmd}, sim);
    prog.update(world.agents[0].position());
    const double v = world.agents[0].v;
    sum_v += v;
    sum_v2 += v * v;
    ++n_v;
    if (opts.record_trace) rep.trace.push_back({world.time(sim), 0, world.agents[0], world.collided[0] != 0});

    const double p = prog.progress();
    while (laps < opts.laps_target && p >= (laps + 1) * length) {
      const double line = (laps + 1) * length;
      const double t_cross = t_prev + sim.dt * (line - p_prev) / (p - p_prev);
      rep.lap_times.push_back(t_cross - last_cross);
      last_cross = t_cross;
      ++laps;
    }
    if (world.collided[0]) {
      rep.collided = true;
      break;
    }
    if (laps >= opts.laps_target) break;
  }

  rep.sim_time = world.time(sim);
  if (n_v > 0) {
    rep.mean_speed = sum_v / static_cast<double>(n_v);
    rep.speed_variance = std::max(0.0, sum_v2 / static_cast<double>(n_v) - rep.mean_speed * rep.mean_speed);
  }
  if (!rep.lap_times.empty()) {
    double m = 0.0;
    for (double t : rep.lap_times) m += t;
    m /= static_cast<double>(rep.lap_times.size());
    double var = 0.0;
    for (double t : rep.lap_times) var += (t - m) * (t - m);
    rep.mean_laptime = m;
    rep.laptime_variance = var / static_cast<double>(rep.lap_times.size());
  }
  rep.laps_completed =
      laps >= opts.laps_target ? static_cast<double>(opts.laps_target) : std::max(0.0, prog.progress() / length);
  return rep;
}

H2HReport summarize_h2h(const std::vector<scenario::Outcome>& outcomes) {
  H2HReport r;
  r.outcomes = outcomes;
  for (auto o : outcomes) r.counts.add(o);
  const double n = static_cast<double>(outcomes.size());
  if (n > 0) {
    r.overtake_rate = 100.0 * static_cast<double>(r.counts.overtaking) / n;
    r.safety_rate = 100.0 * static_cast<double>(r.counts.total() - r.counts.collision) / n;
  }
  return r;
}

H2HReport run_h2h(const scenario::ControllerFactory& make_ego, const scenario::ScenarioSet& set,
                  const track::TrackModel& track, const expert::ExpertConfig& leader_cfg, const sim::SimConfig& sim,
                  const H2HOptions& opts) {
  scenario::RolloutOptions ro;
  ro.duration = opts.duration;
  ro.eta = opts.eta;
  ro.record_frames = false;
  ro.record_trace = opts.record_trace;
  auto eps = scenario::rollout_all(set, track, make_ego, leader_cfg, opts.leader_discount, sim, ro, opts.workers);
  std::vector<scenario::Outcome> outcomes;
  outcomes.reserve(eps.size());
  for (const auto& e : eps) outcomes.push_back(e.outcome);
  auto rep = summarize_h2h(outcomes);
  if (opts.record_trace)
    for (auto& e : eps) rep.traces.push_back(std::move(e.trace));
  return rep;
}

NoiseSweepReport run_noise_sweep(const scenario::ControllerFactory& make_ego, const track::TrackModel& track,
                                 const sim::SimConfig& sim, const std::vector<double>& levels,
                                 const SingleAgentOptions& single_opts, const scenario::ScenarioSet* set,
                                 const expert::ExpertConfig& leader_cfg, const H2HOptions& h2h_opts) {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] >= 0.0 && levels[i] <= 1.0)) throw std::invalid_argument("noise levels must be in [0, 1]");
    if (i > 0 && !(levels[i] > levels[i - 1])) throw std::invalid_argument("noise levels must be strictly increasing");
  }
  NoiseSweepReport rep;
  for (double eta : levels) {
    NoiseLevelReport lvl;
    lvl.eta = eta;
    SingleAgentOptions so = single_opts;
    so.eta = eta;
    auto ego = make_ego();
    lvl.single = run_single_agent(*ego, track, sim, so);
    if (set) {
      H2HOptions ho = h2h_opts;
      ho.eta = eta;
      lvl.h2h = run_h2h(make_ego, *set, track, leader_cfg, sim, ho);
    }
    rep.levels.push_back(std::move(lvl));
  }
  return rep;
}

namespace {

template <typename T>
std::vector<double> time_forward(const policy::Network<T>& net, const std::vector<std::vector<T>>& scans,
                                 std::size_t n_samples, std::size_t warmup) {
  auto h = net.initial_state();
  std::vector<double> ms;
  ms.reserve(n_samples);
  for (std::size_t i = 0; i < warmup + n_samples; ++i) {
    const auto& scan = scans[i % scans.size()];
    const T v = static_cast<T>(1.0 + static_cast<double>(i % 7));
    const auto t0 = std::chrono::steady_clock::now();
    const auto a = net.forward_step(scan, v, h);
    const auto t1 = std::chrono::steady_clock::now();
    // Keep the result observable so the call cannot be elided.
    if (!std::isfinite(a.v)) h.setZero();
    if (i >= warmup) ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return ms;
}

}  // namespace

LatencyReport bench_latency(const policy::PolicyParams<double>& params, const policy::PolicyConfig& cfg,
                            std::size_t n_samples, Precision precision, std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("latency needs at least one sample");
  constexpr std::size_t kWarmup = 100;
  Rng rng(derive_seed(seed, "latency-scans"));
  std::vector<std::vector<double>> scans(64, std::vector<double>(static_cast<std::size_t>(cfg.n_beams)));
  for (auto& s : scans)
    for (auto& r : s) r = rng.uniform(0.0, 30.0);

  std::vector<double> ms;
  if (precision == Precision::Float32) {
    std::vector<std::vector<float>> fs;
    for (const auto& s : scans) fs.emplace_back(s.begin(), s.end());
    const policy::Network<float> net(cfg, params.cast<float>());
    ms = time_forward(net, fs, n_samples, kWarmup);
  } else {
    const policy::Network<double> net(cfg, params);
    ms = time_forward(net, scans, n_samples, kWarmup);
  }
  std::sort(ms.begin(), ms.end());
  const std::size_t n = ms.size();
  LatencyReport r;
  r.samples = n;
  r.precision = precision;
  r.input_dim = cfg.input_dim();
  r.hidden_dim = cfg.hidden_dim();
  r.median_ms = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
  r.p99_ms = ms[static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(n))) - 1];
  r.max_ms = ms.back();
  return r;
}

namespace {

ordered_json opt(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json single_json(const SingleAgentReport& r) {
  return {{"track", r.track_id},
          {"mean_speed_mps", r.mean_speed},
          {"speed_variance_m2ps2", r.speed_variance},
          {"mean_laptime_s", opt(r.mean_laptime)},
          {"laptime_variance_s2", opt(r.laptime_variance)},
          {"lap_times_s", r.lap_times},
          {"laps_completed", r.laps_completed},
          {"collided", r.collided},
          {"stalled", r.stalled},
          {"sim_time_s", r.sim_time}};
}

ordered_json h2h_json(const H2HReport& r) {
  ordered_json outcomes = ordered_json::array();
  for (auto o : r.outcomes) outcomes.push_back(scenario::outcome_name(o));
  return {{"scenarios", r.counts.total()},
          {"car_following", r.counts.car_following},
          {"overtaking", r.counts.overtaking},
          {"collision", r.counts.collision},
          {"overtake_rate_pct", r.overtake_rate},
          {"safety_rate_pct", r.safety_rate},
          {"summary", r.counts.summary()},
          {"outcomes", outcomes}};
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string fmt(const std::optional<double>& v, int digits = 3) { return v ? fmt(*v, digits) : "-"; }

}  // namespace

std::string to_json(const SingleAgentReport& r) { return single_json(r).dump(2); }
std::string to_json(const H2HReport& r) { return h2h_json(r).dump(2); }

std::string to_json(const NoiseSweepReport& r) {
  ordered_json levels = ordered_json::array();
  for (const auto& l : r.levels) {
    ordered_json j = {{"eta", l.eta}};
    if (l.single) j["single"] = single_json(*l.single);
    if (l.h2h) j["h2h"] = h2h_json(*l.h2h);
    levels.push_back(j);
  }
  return ordered_json{{"levels", levels}}.dump(2);
}

std::string to_json(const LatencyReport& r) {
  return ordered_json{{"median_ms", r.median_ms},
                      {"p99_ms", r.p99_ms},
                      {"max_ms", r.max_ms},
                      {"samples", r.samples},
                      {"precision", r.precision == Precision::Float32 ? "float32" : "float64"},
                      {"input_dim", r.input_dim},
                      {"hidden_dim", r.hidden_dim}}
      .dump(2);
}

void write_single_csv(std::ostream& out, const SingleAgentReport& r) {
  out << "Track,Mean Speed (m/s),Speed Variance ((m/s)^2),Mean Laptime (s),Laptime Variance (s^2),Laps Completed\n";
  out << r.track_id << ',' << fmt(r.mean_speed) << ',' << fmt(r.speed_variance) << ',' << fmt(r.mean_laptime) << ','
      << fmt(r.laptime_variance) << ',' << fmt(r.laps_completed, 1) << '\n';
}

void write_h2h_csv(std::ostream& out, const H2HReport& r, const std::string& label) {
  out << "Track,Car Following,Overtaking,Collision,Overtake Rate (%),Safety Rate (%)\n";
  out << label << ',' << r.counts.car_following << ',' << r.counts.overtaking << ',' << r.counts.collision << ','
      << fmt(r.overtake_rate, 1) << ',' << fmt(r.safety_rate, 1) << '\n';
}

void write_noise_csv(std::ostream& out, const NoiseSweepReport& r) {
  out << "Noise (%),Mean Speed (m/s),Speed Variance ((m/s)^2),Mean Laptime (s),Laps Completed,"
         "Car Following,Overtaking,Collision,Overtake Rate (%),Safety Rate (%)\n";
  for (const auto& l : r.levels) {
    out << fmt(100.0 * l.eta, 0);
    if (l.single)
      out << ',' << fmt(l.single->mean_speed) << ',' << fmt(l.single->speed_variance) << ','
          << fmt(l.single->mean_laptime) << ',' << fmt(l.single->laps_completed, 1);
    else
      out << ",-,-,-,-";
    if (l.h2h)
      out << ',' << l.h2h->counts.car_following << ',' << l.h2h->counts.overtaking << ',' << l.h2h->counts.collision
          << ',' << fmt(l.h2h->overtake_rate, 1) << ',' << fmt(l.h2h->safety_rate, 1);
    else
      out << ",-,-,-,-,-";
    out << '\n';
  }
}

void write_latency_csv(std::ostream& out, const LatencyReport& r) {
  out << "precision,input_dim,hidden_dim,samples,median_ms,p99_ms,max_ms\n";
  out << (r.precision == Precision::Float32 ? "float32" : "float64") << ',' << r.input_dim << ',' << r.hidden_dim
      << ',' << r.samples << ',' << fmt(r.median_ms, 4) << ',' << fmt(r.p99_ms, 4) << ',' << fmt(r.max_ms, 4) << '\n';
}

}  // namespace e2r::eval
