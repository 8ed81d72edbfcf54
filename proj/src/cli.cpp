#include "e2r/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "e2r/checkpoint.hpp"
#include "e2r/config.hpp"
#include "e2r/episode_store.hpp"
#include "e2r/evaluator.hpp"
#include "e2r/render.hpp"
#include "e2r/track_gen.hpp"

#ifndef E2R_VERSION
#define E2R_VERSION "0.0.0"
#endif

namespace e2r::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int workers = 1;
  std::vector<std::string> overrides;
};

/// Thrown to leave a command with a specific exit status.
struct Failure {
  int code;
  std::string message;
};

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

int default_workers() {
  if (const char* env = std::getenv("E2R_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

void add_common(CLI::App* app, CommonOptions& o, bool with_workers = true) {
  app->add_option("--config", o.config, "Config file");
  app->add_option("--seed", o.seed, "Global seed (overrides the config)");
  app->add_option("--out", o.out, "Output directory")->required();
  app->add_option("--set", o.overrides, "Override one value, section.key=value")->take_all();
  if (with_workers) app->add_option("--workers", o.workers, "Parallel rollouts (default $E2R_WORKERS or 1)")->check(CLI::PositiveNumber);
}

config::KitConfig load_kit(const CommonOptions& o) {
  try {
    config::KitConfig cfg = o.config.empty() ? config::KitConfig{} : config::load_file(o.config);
    for (const auto& a : o.overrides) config::apply_override(cfg, a);
    if (o.seed) cfg.seed = *o.seed;
    cfg.validate();
    return cfg;
  } catch (const config::ConfigError& ex) {
    throw Failure{kUsage, ex.what()};
  }
}

/// Records outputs and writes run_manifest.json atomically at the end.
class RunRecorder {
 public:
  RunRecorder(std::string command, const config::KitConfig& cfg, fs::path out)
      : command_(std::move(command)), cfg_(cfg), out_(std::move(out)), started_(utc_now()) {
    fs::create_directories(out_);
  }

  fs::path path(const std::string& name) {
    outputs_.push_back(name);
    return out_ / name;
  }

  void write_text(const std::string& name, const std::string& text) {
    std::ofstream f(path(name), std::ios::binary);
    f << text;
    if (!f) throw std::runtime_error("cannot write " + (out_ / name).string());
  }

  void finish() {
    std::sort(outputs_.begin(), outputs_.end());
    ordered_json j = {{"command", command_},
                      {"config_hash", config::config_hash(cfg_)},
                      {"seed", cfg_.seed},
                      {"version", E2R_VERSION},
                      {"started_at", started_},
                      {"finished_at", utc_now()},
                      {"outputs", outputs_}};
    const fs::path tmp = out_ / "run_manifest.json.tmp";
    {
      std::ofstream f(tmp, std::ios::binary);
      f << j.dump(2) << '\n';
      if (!f) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, out_ / "run_manifest.json");
  }

 private:
  std::string command_;
  config::KitConfig cfg_;
  fs::path out_;
  std::string started_;
  std::vector<std::string> outputs_;
};

struct LoadedTrack {
  track::TrackModel model;
  std::string id;
};

LoadedTrack load_track(const config::KitConfig& cfg) {
  try {
    if (!cfg.paths.track_file.empty())
      return {track::load_track_file(cfg.paths.track_file), fs::path(cfg.paths.track_file).stem().string()};
    const auto& t = cfg.track;
    return {track::TrackModel::from_waypoints(track::make_shape(t.shape, t.length, t.width, t.spacing)), t.shape};
  } catch (const track::TrackError& ex) {
    throw Failure{kTrack, ex.what()};
  } catch (const std::invalid_argument& ex) {
    throw Failure{kTrack, ex.what()};
  }
}

std::string raceline_name(double offset, std::size_t i) {
  if (offset == track::kLeftOffset) return "left";
  if (offset == track::kCenterOffset) return "center";
  if (offset == track::kRightOffset) return "right";
  return "offset" + std::to_string(i);
}

std::string string_of(const std::function<void(std::ostream&)>& write) {
  std::ostringstream os;
  write(os);
  return os.str();
}

// ---- track -----------------------------------------------------------------

struct TrackGenArgs {
  CommonOptions common;
  std::optional<std::string> shape;
  std::optional<double> length, width, spacing;
};

int cmd_track_gen(const TrackGenArgs& a) {
  auto cfg = load_kit(a.common);
  if (a.shape) cfg.track.shape = *a.shape;
  if (a.length) cfg.track.length = *a.length;
  if (a.width) cfg.track.width = *a.width;
  if (a.spacing) cfg.track.spacing = *a.spacing;
  cfg.paths.track_file.clear();
  const auto trk = load_track(cfg);
  std::vector<track::Raceline> racelines;
  try {
    racelines = scenario::build_racelines(trk.model, cfg.scenario.racelines, cfg.raceline);
  } catch (const std::exception& ex) {
    throw Failure{kTrack, ex.what()};
  }
  RunRecorder rec("track gen", cfg, a.common.out);
  rec.write_text("track.csv", string_of([&](std::ostream& o) { track::write_track_csv(o, trk.model); }));
  rec.write_text("boundaries.csv", string_of([&](std::ostream& o) { track::write_boundaries_csv(o, trk.model); }));
  for (std::size_t i = 0; i < racelines.size(); ++i)
    rec.write_text("raceline_" + raceline_name(cfg.scenario.racelines[i], i) + ".csv",
                   string_of([&](std::ostream& o) { track::write_raceline_csv(o, racelines[i]); }));
  rec.write_text("preview.svg", render::track_svg(trk.model, racelines));
  rec.finish();
  std::cout << "track " << trk.id << ": " << trk.model.waypoints().size() << " waypoints, length "
            << std::setprecision(6) << trk.model.total_length() << " m -> " << a.common.out << "\n";
  return kOk;
}

struct TrackInfoArgs {
  std::string config;
  std::string track_file;
  std::vector<std::string> overrides;
};

int cmd_track_info(const TrackInfoArgs& a) {
  CommonOptions c;
  c.config = a.config;
  c.overrides = a.overrides;
  auto cfg = load_kit(c);
  if (!a.track_file.empty()) cfg.paths.track_file = a.track_file;
  const auto trk = load_track(cfg);
  double wmin = 1e300, wmax = 0.0;
  for (const auto& w : trk.model.waypoints()) {
    wmin = std::min(wmin, w.w_left + w.w_right);
    wmax = std::max(wmax, w.w_left + w.w_right);
  }
  std::cout << std::setprecision(9) << "track = " << trk.id << "\n"
            << "waypoints = " << trk.model.waypoints().size() << "\n"
            << "total_length_m = " << trk.model.total_length() << "\n"
            << "min_width_m = " << wmin << "\n"
            << "max_width_m = " << wmax << "\n"
            << "direction = " << (trk.model.counter_clockwise() ? "counter-clockwise" : "clockwise") << "\n";
  return kOk;
}

// ---- collect ---------------------------------------------------------------

struct CollectArgs {
  CommonOptions common;
  std::optional<int> k;
  std::optional<double> phase;
};

scenario::ScenarioSet make_scenarios(const config::KitConfig& cfg, const track::TrackModel& trk,
                                     std::uint64_t seed) {
  auto sc = cfg.scenario;
  sc.seed = seed;
  try {
    return scenario::enumerate_scenarios(sc, trk, cfg.sim, cfg.raceline);
  } catch (const scenario::ScenarioError& ex) {
    throw Failure{kScenario, ex.what()};
  }
}

int cmd_collect(const CollectArgs& a) {
  auto cfg = load_kit(a.common);
  if (a.k) cfg.scenario.k_positions = *a.k;
  if (a.phase) cfg.scenario.spawn_phase = *a.phase;
  try {
    cfg.validate();
  } catch (const config::ConfigError& ex) {
    throw Failure{kUsage, ex.what()};
  }
  const auto trk = load_track(cfg);
  const auto set = make_scenarios(cfg, trk.model, cfg.scenario_resolved().seed);
  if (set.skipped > 0) std::cerr << "warning: " << set.skipped << " spawn(s) skipped (not collision-free)\n";

  scenario::RolloutOptions ro;
  ro.duration = cfg.scenario.duration;
  const auto expert_cfg = cfg.expert;
  const scenario::ControllerFactory factory = [expert_cfg] {
    return std::make_unique<scenario::ExpertController>(expert_cfg);
  };
  auto episodes = scenario::rollout_all(set, trk.model, factory, cfg.expert, cfg.scenario.v_ell_discount, cfg.sim, ro,
                                        a.common.workers);

  RunRecorder rec("collect", cfg, a.common.out);
  try {
    store::write_dataset(a.common.out, episodes);
  } catch (const std::exception& ex) {
    throw Failure{kScenario, ex.what()};
  }
  for (const auto& e : episodes) rec.path(store::episode_file_name(e.scenario_id));
  rec.path("manifest.json");
  rec.finish();

  scenario::OutcomeCounts counts;
  std::size_t samples = 0;
  for (const auto& e : episodes) {
    counts.add(e.outcome);
    if (e.outcome != scenario::Outcome::Collision) samples += e.frames.size();
  }
  std::cout << "collected " << episodes.size() << " episodes (following/overtaking/collision " << counts.summary()
            << "), " << samples << " training samples -> " << a.common.out << "\n";
  if (counts.collision == counts.total()) {
    std::cerr << "error: every episode ended in a collision\n";
    return kScenario;
  }
  return kOk;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  CommonOptions common;
  std::string dataset;
  std::string ablation;
  std::optional<int> epochs;
  std::optional<int> multiplier;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  auto cfg = load_kit(a.common);
  if (a.epochs) cfg.trainer.epochs = *a.epochs;
  if (a.multiplier) cfg.policy.hidden_multiplier = *a.multiplier;
  if (a.ablation == "lidar-only") cfg.policy.use_speed_input = false;
  else if (!a.ablation.empty() && a.ablation != "none") throw Failure{kUsage, "unknown ablation \"" + a.ablation + "\""};
  try {
    cfg.validate();
  } catch (const config::ConfigError& ex) {
    throw Failure{kUsage, ex.what()};
  }
  const fs::path manifest = a.dataset.empty() ? fs::path(cfg.paths.dataset_dir) / "manifest.json" : fs::path(a.dataset);

  scenario::Dataset data;
  try {
    data = store::load_dataset(fs::is_directory(manifest) ? manifest / "manifest.json" : manifest);
  } catch (const std::exception& ex) {
    throw Failure{kTrain, ex.what()};
  }

  train::TrainResult result;
  try {
    result = train::train(data, cfg.policy, cfg.trainer_resolved(), [&](const train::EpochRecord& r) {
      if (!a.quiet && (r.epoch == 1 || r.epoch % 10 == 0 || r.epoch == cfg.trainer.epochs))
        std::cout << "epoch " << r.epoch << " loss " << std::setprecision(6) << r.mean_loss << " lr " << r.lr << "\n"
                  << std::flush;
    });
  } catch (const train::TrainError& ex) {
    throw Failure{kTrain, ex.what()};
  }

  RunRecorder rec("train", cfg, a.common.out);
  policy::save_checkpoint_file(rec.path("checkpoint.e2r"), result.best_params, cfg.policy);
  policy::save_checkpoint_file(rec.path("final.e2r"), result.final_params, cfg.policy);
  rec.write_text("loss_curve.csv", string_of([&](std::ostream& o) { train::write_loss_curve_csv(o, result.history); }));
  rec.write_text("train_summary.json",
                 ordered_json{{"episodes", data.episodes.size()},
                              {"total_samples", data.total_samples},
                              {"epochs", result.history.size()},
                              {"best_epoch", result.best_epoch},
                              {"best_loss", result.best_loss},
                              {"final_loss", result.history.empty() ? 0.0 : result.history.back().mean_loss},
                              {"hidden_multiplier", cfg.policy.hidden_multiplier},
                              {"use_speed_input", cfg.policy.use_speed_input}}
                         .dump(2) +
                     "\n");
  rec.finish();
  std::cout << "best loss " << std::setprecision(6) << result.best_loss << " at epoch " << result.best_epoch << " -> "
            << a.common.out << "\n";
  return kOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  CommonOptions common;
  std::string checkpoint;
  bool expert = false;
  double eta = 0.0;
  int laps = 10;
  std::optional<int> scenarios;
  std::optional<double> phase;
  bool svg = false;
  std::string levels = "0,0.1,0.2,0.3,0.4,0.5";
  std::string suite = "both";
  std::size_t samples = 10000;
  std::string precision = "float32";
  bool full = false;
};

struct EgoSource {
  scenario::ControllerFactory factory;
  std::string label;
};

EgoSource ego_source(const EvalArgs& a, const config::KitConfig& cfg) {
  if (a.expert) {
    const auto ec = cfg.expert;
    return {[ec] { return std::make_unique<scenario::ExpertController>(ec); }, "expert"};
  }
  const std::string path = a.checkpoint.empty() ? cfg.paths.checkpoint : a.checkpoint;
  std::shared_ptr<const policy::Checkpoint> ck;
  try {
    ck = std::make_shared<const policy::Checkpoint>(policy::load_checkpoint_file(path));
  } catch (const std::exception& ex) {
    throw Failure{kEval, ex.what()};
  }
  if (ck->config.n_beams != cfg.sim.n_beams) throw Failure{kEval, "checkpoint n_beams does not match sim.n_beams"};
  return {[ck] { return std::make_unique<eval::PolicyController>(ck->config, ck->params); }, path};
}

eval::SingleAgentOptions single_options(const EvalArgs& a, const config::KitConfig& cfg) {
  eval::SingleAgentOptions so;
  so.laps_target = a.laps;
  so.eta = a.eta;
  so.seed = cfg.stage_seed("eval-single");
  return so;
}

eval::H2HOptions h2h_options(const EvalArgs& a, const config::KitConfig& cfg) {
  eval::H2HOptions ho;
  ho.eta = a.eta;
  ho.leader_discount = cfg.scenario.v_ell_discount;
  ho.duration = cfg.scenario.duration;
  ho.workers = a.common.workers;
  return ho;
}

config::KitConfig eval_config(const EvalArgs& a) {
  auto cfg = load_kit(a.common);
  if (a.scenarios) cfg.scenario.k_positions = *a.scenarios;
  if (a.phase) cfg.scenario.spawn_phase = *a.phase;
  if (a.laps < 1) throw Failure{kUsage, "--laps must be >= 1"};
  if (!(a.eta >= 0.0 && a.eta <= 1.0)) throw Failure{kUsage, "--eta must be in [0, 1]"};
  try {
    cfg.validate();
  } catch (const config::ConfigError& ex) {
    throw Failure{kUsage, ex.what()};
  }
  return cfg;
}

int cmd_eval_single(const EvalArgs& a) {
  const auto cfg = eval_config(a);
  const auto trk = load_track(cfg);
  const auto ego = ego_source(a, cfg);
  auto so = single_options(a, cfg);
  so.record_trace = a.svg;
  eval::SingleAgentReport rep;
  try {
    auto ctl = ego.factory();
    rep = eval::run_single_agent(*ctl, trk.model, cfg.sim, so);
  } catch (const std::exception& ex) {
    throw Failure{kEval, ex.what()};
  }
  rep.track_id = trk.id;
  RunRecorder rec("eval single", cfg, a.common.out);
  rec.write_text("single.json", eval::to_json(rep) + "\n");
  rec.write_text("single.csv", string_of([&](std::ostream& o) { eval::write_single_csv(o, rep); }));
  if (a.svg) {
    std::ostringstream label;
    label << "single agent: " << std::fixed << std::setprecision(1) << rep.laps_completed << " laps"
          << (rep.collided ? ", collision" : "");
    rec.write_text("single.svg", render::episode_svg(trk.model, rep.trace, cfg.sim, label.str()));
  }
  rec.finish();
  std::cout << std::fixed << std::setprecision(3) << "mean speed " << rep.mean_speed << " m/s, laps "
            << rep.laps_completed << (rep.collided ? ", collided" : "") << (rep.stalled ? ", stalled" : "") << "\n";
  return kOk;
}

void write_h2h_svgs(RunRecorder& rec, const eval::H2HReport& rep, const scenario::ScenarioSet& set,
                    const LoadedTrack& trk, const sim::SimConfig& sim, const std::string& prefix) {
  for (std::size_t i = 0; i < rep.traces.size(); ++i) {
    std::ostringstream name;
    name << prefix << std::setw(5) << std::setfill('0') << set.scenarios[i].id << ".svg";
    rec.write_text(name.str(), render::episode_svg(trk.model, rep.traces[i], sim,
                                                   std::string(scenario::outcome_name(rep.outcomes[i]))));
  }
}

int cmd_eval_h2h(const EvalArgs& a) {
  const auto cfg = eval_config(a);
  const auto trk = load_track(cfg);
  const auto set = make_scenarios(cfg, trk.model, cfg.stage_seed("eval-scenario"));
  const auto ego = ego_source(a, cfg);
  auto ho = h2h_options(a, cfg);
  ho.record_trace = a.svg;
  eval::H2HReport rep;
  try {
    rep = eval::run_h2h(ego.factory, set, trk.model, cfg.expert, cfg.sim, ho);
  } catch (const std::exception& ex) {
    throw Failure{kEval, ex.what()};
  }
  RunRecorder rec("eval h2h", cfg, a.common.out);
  rec.write_text("h2h.json", eval::to_json(rep) + "\n");
  rec.write_text("h2h.csv", string_of([&](std::ostream& o) { eval::write_h2h_csv(o, rep, trk.id); }));
  if (a.svg) write_h2h_svgs(rec, rep, set, trk, cfg.sim, "h2h_");
  rec.finish();
  std::cout << std::fixed << std::setprecision(1) << "scenarios " << rep.counts.total() << " (" << rep.counts.summary()
            << "), overtake rate " << rep.overtake_rate << "%, safety rate " << rep.safety_rate << "%\n";
  return kOk;
}

std::vector<double> parse_levels(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Failure{kUsage, "bad noise level \"" + item + "\""};
    }
  }
  if (out.empty()) throw Failure{kUsage, "--levels needs at least one value"};
  return out;
}

int cmd_eval_noise(const EvalArgs& a) {
  const auto cfg = eval_config(a);
  if (a.suite != "single" && a.suite != "h2h" && a.suite != "both") throw Failure{kUsage, "--suite must be single, h2h or both"};
  const auto levels = parse_levels(a.levels);
  const auto trk = load_track(cfg);
  const auto ego = ego_source(a, cfg);
  std::optional<scenario::ScenarioSet> set;
  if (a.suite != "single") set = make_scenarios(cfg, trk.model, cfg.stage_seed("eval-scenario"));
  eval::NoiseSweepReport rep;
  try {
    rep = eval::run_noise_sweep(ego.factory, trk.model, cfg.sim, levels, single_options(a, cfg),
                                set ? &*set : nullptr, cfg.expert, h2h_options(a, cfg));
  } catch (const std::invalid_argument& ex) {
    throw Failure{kUsage, ex.what()};
  } catch (const std::exception& ex) {
    throw Failure{kEval, ex.what()};
  }
  if (a.suite == "h2h")
    for (auto& l : rep.levels) l.single.reset();
  for (auto& l : rep.levels)
    if (l.single) l.single->track_id = trk.id;
  RunRecorder rec("eval noise", cfg, a.common.out);
  rec.write_text("noise.json", eval::to_json(rep) + "\n");
  rec.write_text("noise.csv", string_of([&](std::ostream& o) { eval::write_noise_csv(o, rep); }));
  rec.finish();
  for (const auto& l : rep.levels) {
    std::cout << std::fixed << std::setprecision(2) << "eta " << l.eta;
    if (l.single) std::cout << "  speed " << l.single->mean_speed << " m/s, laps " << l.single->laps_completed;
    if (l.h2h) std::cout << "  overtake " << l.h2h->overtake_rate << "%, safety " << l.h2h->safety_rate << "%";
    std::cout << "\n";
  }
  return kOk;
}

int cmd_eval_latency(const EvalArgs& a) {
  auto cfg = eval_config(a);
  eval::Precision prec;
  if (a.precision == "float32") prec = eval::Precision::Float32;
  else if (a.precision == "float64") prec = eval::Precision::Float64;
  else throw Failure{kUsage, "--precision must be float32 or float64"};
  if (a.samples < 1000) throw Failure{kUsage, "--samples must be >= 1000"};

  policy::PolicyConfig pc;
  policy::PolicyParams<double> params;
  if (a.full || (a.checkpoint.empty() && !fs::exists(cfg.paths.checkpoint))) {
    pc = policy::PolicyConfig{};  // 360 beams, E = 16, 4x hidden
    Rng rng(cfg.stage_seed("latency-init"));
    params = policy::init_params(pc, rng);
  } else {
    try {
      auto ck = policy::load_checkpoint_file(a.checkpoint.empty() ? cfg.paths.checkpoint : a.checkpoint);
      pc = ck.config;
      params = std::move(ck.params);
    } catch (const std::exception& ex) {
      throw Failure{kEval, ex.what()};
    }
  }
  const auto rep = eval::bench_latency(params, pc, a.samples, prec, cfg.stage_seed("latency"));
  RunRecorder rec("eval latency", cfg, a.common.out);
  rec.write_text("latency.json", eval::to_json(rep) + "\n");
  rec.write_text("latency.csv", string_of([&](std::ostream& o) { eval::write_latency_csv(o, rep); }));
  rec.finish();
  std::cout << std::fixed << std::setprecision(4) << "input " << rep.input_dim << ", hidden " << rep.hidden_dim
            << ": median " << rep.median_ms << " ms, p99 " << rep.p99_ms << " ms, max " << rep.max_ms << " ms over "
            << rep.samples << " samples\n";
  return kOk;
}

// ---- render ----------------------------------------------------------------

struct RenderArgs {
  EvalArgs eval;
  std::optional<std::uint64_t> scenario_id;
};

int cmd_render(const RenderArgs& r) {
  const EvalArgs& a = r.eval;
  const auto cfg = eval_config(a);
  const auto trk = load_track(cfg);
  RunRecorder rec("render", cfg, a.common.out);
  if (!r.scenario_id) {
    std::vector<track::Raceline> racelines;
    try {
      racelines = scenario::build_racelines(trk.model, cfg.scenario.racelines, cfg.raceline);
    } catch (const std::exception& ex) {
      throw Failure{kTrack, ex.what()};
    }
    rec.write_text("track.svg", render::track_svg(trk.model, racelines));
    rec.finish();
    return kOk;
  }
  const auto set = make_scenarios(cfg, trk.model, cfg.scenario_resolved().seed);
  const scenario::Scenario* sc = nullptr;
  for (const auto& s : set.scenarios)
    if (s.id == *r.scenario_id) sc = &s;
  if (!sc) throw Failure{kScenario, "no scenario with id " + std::to_string(*r.scenario_id)};
  const auto ego = ego_source(a, cfg);
  scenario::RolloutOptions ro;
  ro.duration = cfg.scenario.duration;
  ro.eta = a.eta;
  ro.record_frames = false;
  ro.record_trace = true;
  scenario::EpisodeRecord ep;
  try {
    auto ctl = ego.factory();
    ep = scenario::rollout(*sc, set, trk.model, *ctl, cfg.expert, cfg.scenario.v_ell_discount, cfg.sim, ro);
  } catch (const std::exception& ex) {
    throw Failure{kEval, ex.what()};
  }
  std::ostringstream name;
  name << "episode_" << std::setw(5) << std::setfill('0') << sc->id << ".svg";
  rec.write_text(name.str(), render::episode_svg(trk.model, ep.trace, cfg.sim,
                                                 std::string(scenario::outcome_name(ep.outcome))));
  rec.finish();
  std::cout << "scenario " << sc->id << ": " << scenario::outcome_name(ep.outcome) << "\n";
  return kOk;
}

void add_eval_common(CLI::App* sub, EvalArgs& a) {
  add_common(sub, a.common);
  sub->add_option("--checkpoint", a.checkpoint, "Policy checkpoint (default paths.checkpoint)");
  sub->add_flag("--expert", a.expert, "Drive the ego with the expert instead of a policy");
  sub->add_option("--eta", a.eta, "Beam dropout fraction");
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"End-to-end racing policy toolkit: tracks, expert data, training and evaluation", "e2r"};
  app.set_version_flag("--version", E2R_VERSION);
  app.require_subcommand(1);

  const int workers = default_workers();

  auto* track_cmd = app.add_subcommand("track", "Generate or inspect tracks");
  track_cmd->require_subcommand(1);
  TrackGenArgs tg;
  tg.common.workers = workers;
  auto* gen = track_cmd->add_subcommand("gen", "Generate a built-in track with racelines and a preview");
  add_common(gen, tg.common, false);
  gen->add_option("--shape", tg.shape, "circle, oval, stadium or serpentine");
  gen->add_option("--length", tg.length, "Centerline length in meters");
  gen->add_option("--width", tg.width, "Full track width in meters");
  gen->add_option("--spacing", tg.spacing, "Waypoint spacing in meters");
  TrackInfoArgs ti;
  auto* info = track_cmd->add_subcommand("info", "Validate a track and print its summary");
  info->add_option("--config", ti.config, "Config file");
  info->add_option("--track", ti.track_file, "Track CSV (default paths.track_file or the configured generator)");
  info->add_option("--set", ti.overrides, "Override one value, section.key=value")->take_all();

  CollectArgs ca;
  ca.common.workers = workers;
  auto* collect = app.add_subcommand("collect", "Roll out the expert over the scenario set and store episodes");
  add_common(collect, ca.common);
  collect->add_option("--k", ca.k, "Number of spawn positions");
  collect->add_option("--phase", ca.phase, "Spawn phase in [0, 1)");

  TrainArgs ta;
  ta.common.workers = workers;
  auto* train_cmd = app.add_subcommand("train", "Behavior cloning on a collected dataset");
  add_common(train_cmd, ta.common, false);
  train_cmd->add_option("--dataset", ta.dataset, "Dataset manifest or directory (default paths.dataset_dir)");
  train_cmd->add_option("--ablation", ta.ablation, "none or lidar-only");
  train_cmd->add_option("--epochs", ta.epochs, "Override trainer.epochs");
  train_cmd->add_option("--multiplier", ta.multiplier, "Override policy.hidden_multiplier");
  train_cmd->add_flag("--quiet", ta.quiet, "No per-epoch progress");

  auto* eval_cmd = app.add_subcommand("eval", "Closed-loop evaluation suites");
  eval_cmd->require_subcommand(1);
  EvalArgs es, eh, en, el;
  for (auto* e : {&es, &eh, &en, &el}) e->common.workers = workers;
  auto* single = eval_cmd->add_subcommand("single", "Ego alone for a number of laps");
  add_eval_common(single, es);
  single->add_option("--laps", es.laps, "Lap target");
  single->add_flag("--svg", es.svg, "Write single.svg");
  auto* h2h = eval_cmd->add_subcommand("h2h", "Ego against the non-reactive leader");
  add_eval_common(h2h, eh);
  h2h->add_option("--scenarios", eh.scenarios, "Number of scenarios (spawn positions)");
  h2h->add_option("--phase", eh.phase, "Spawn phase in [0, 1)");
  h2h->add_flag("--svg", eh.svg, "Write one SVG per scenario");
  auto* noise = eval_cmd->add_subcommand("noise", "Single-agent and head-to-head suites per dropout level");
  add_eval_common(noise, en);
  noise->add_option("--levels", en.levels, "Comma-separated increasing eta values");
  noise->add_option("--suite", en.suite, "single, h2h or both");
  noise->add_option("--laps", en.laps, "Lap target");
  noise->add_option("--scenarios", en.scenarios, "Number of scenarios (spawn positions)");
  noise->add_option("--phase", en.phase, "Spawn phase in [0, 1)");
  auto* latency = eval_cmd->add_subcommand("latency", "Time single forward steps");
  add_eval_common(latency, el);
  latency->add_option("--samples", el.samples, "Timed samples after warm-up");
  latency->add_option("--precision", el.precision, "float32 or float64");
  latency->add_flag("--full", el.full, "Random weights at the full 360/16/4x configuration");

  RenderArgs ra;
  ra.eval.common.workers = workers;
  auto* render_cmd = app.add_subcommand("render", "SVG of the track or of one scenario rollout");
  add_eval_common(render_cmd, ra.eval);
  render_cmd->add_option("--scenario", ra.scenario_id, "Scenario id to roll out (omit for the track only)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) return cmd_track_gen(tg);
    if (info->parsed()) return cmd_track_info(ti);
    if (collect->parsed()) return cmd_collect(ca);
    if (train_cmd->parsed()) return cmd_train(ta);
    if (single->parsed()) return cmd_eval_single(es);
    if (h2h->parsed()) return cmd_eval_h2h(eh);
    if (noise->parsed()) return cmd_eval_noise(en);
    if (latency->parsed()) return cmd_eval_latency(el);
    if (render_cmd->parsed()) {
      // Without a checkpoint the rollout is driven by the expert.
      if (ra.eval.checkpoint.empty()) ra.eval.expert = true;
      return cmd_render(ra);
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    if (collect->parsed()) return kScenario;
    if (train_cmd->parsed()) return kTrain;
    if (gen->parsed() || info->parsed()) return kTrack;
    return kEval;
  }
  return kUsage;
}

}  // namespace e2r::cli
