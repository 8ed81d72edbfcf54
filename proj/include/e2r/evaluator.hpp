#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "e2r/policy.hpp"
#include "e2r/scenario.hpp"
#include "e2r/simulator.hpp"
#include "e2r/track.hpp"

namespace e2r::eval {

/// Learned ego: raw scan and measured speed in, (v_cmd, delta_cmd) out.
class PolicyController : public scenario::EgoController {
 public:
  PolicyController(const policy::PolicyConfig& cfg, const policy::PolicyParams<double>& params);
  void reset() override;
  sim::VehicleCommand act(const scenario::EgoContext& ctx) override;

 private:
  policy::Network<double> net_;
  policy::Network<double>::Vec h_;
};

struct SingleAgentOptions {
  int laps_target = 10;
  double eta = 0.0;
  std::uint64_t seed = 0;
  double start_s = 0.0;  // centerline arc position of the start line
  double raceline_offset = track::kCenterOffset;
  /// Abort when progress over the last stall_window seconds is below stall_distance.
  double stall_window = 5.0;
  double stall_distance = 0.5;
  double max_time = 0.0;  // 0: laps_target * length / 1 m/s
  bool record_trace = false;
};

struct SingleAgentReport {
  std::string track_id;
  double mean_speed = 0.0;      // m/s, over every sim step
  double speed_variance = 0.0;  // (m/s)^2, population
  std::optional<double> mean_laptime;
  std::optional<double> laptime_variance;
  std::vector<double> lap_times;
  double laps_completed = 0.0;  // fractional when the run ends early
  bool collided = false;
  bool stalled = false;
  double sim_time = 0.0;
  std::vector<sim::TraceRow> trace;
};

/// Ego alone from a flying start on the chosen raceline. Laps are counted
/// each time unwrapped centerline progress passes a multiple of the length.
SingleAgentReport run_single_agent(scenario::EgoController& ego, const track::TrackModel& track,
                                   const sim::SimConfig& sim, const SingleAgentOptions& opts);

struct H2HReport {
  scenario::OutcomeCounts counts;
  double overtake_rate = 0.0;  // percent
  double safety_rate = 0.0;    // percent
  std::vector<scenario::Outcome> outcomes;
  std::vector<std::vector<sim::TraceRow>> traces;  // per scenario, when recorded
};

H2HReport summarize_h2h(const std::vector<scenario::Outcome>& outcomes);

struct H2HOptions {
  double eta = 0.0;
  double leader_discount = 0.6;
  double duration = 8.0;
  int workers = 1;
  bool record_trace = false;
};

H2HReport run_h2h(const scenario::ControllerFactory& make_ego, const scenario::ScenarioSet& set,
                  const track::TrackModel& track, const expert::ExpertConfig& leader_cfg, const sim::SimConfig& sim,
                  const H2HOptions& opts);

struct NoiseLevelReport {
  double eta = 0.0;
  std::optional<SingleAgentReport> single;
  std::optional<H2HReport> h2h;
};

struct NoiseSweepReport {
  std::vector<NoiseLevelReport> levels;
};

/// Runs the single-agent suite (and the h2h suite when `set` is given) at
/// each eta. Levels must be strictly increasing.
NoiseSweepReport run_noise_sweep(const scenario::ControllerFactory& make_ego, const track::TrackModel& track,
                                 const sim::SimConfig& sim, const std::vector<double>& levels,
                                 const SingleAgentOptions& single_opts, const scenario::ScenarioSet* set,
                                 const expert::ExpertConfig& leader_cfg, const H2HOptions& h2h_opts);

enum class Precision { Float32, Float64 };

struct LatencyReport {
  double median_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
  std::size_t samples = 0;
  Precision precision = Precision::Float32;
  int input_dim = 0;
  int hidden_dim = 0;
};

/// Times single forward_step calls on random scans after 100 discarded
/// warm-up calls.
LatencyReport bench_latency(const policy::PolicyParams<double>& params, const policy::PolicyConfig& cfg,
                            std::size_t n_samples, Precision precision, std::uint64_t seed);

// Reports.
std::string to_json(const SingleAgentReport& r);
std::string to_json(const H2HReport& r);
std::string to_json(const NoiseSweepReport& r);
std::string to_json(const LatencyReport& r);
void write_single_csv(std::ostream& out, const SingleAgentReport& r);
void write_h2h_csv(std::ostream& out, const H2HReport& r, const std::string& label = "all");
void write_noise_csv(std::ostream& out, const NoiseSweepReport& r);
void write_latency_csv(std::ostream& out, const LatencyReport& r);

}  // namespace e2r::eval
