#include "e2r/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "e2r/rng.hpp"

namespace e2r::config {

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

double parse_double(const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw std::invalid_argument("expected a number, got \"" + v + "\"");
  return out;
}

template <typename I>
I parse_int(const std::string& v) {
  I out{};
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw std::invalid_argument("expected an integer, got \"" + v + "\"");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("expected true or false, got \"" + v + "\"");
}

std::string fmt_double(double d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

struct Field {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

using Section = std::map<std::string, Field>;
using Registry = std::map<std::string, Section>;

Field f(double& x) {
  return {[&x](const std::string& v) { x = parse_double(v); }, [&x] { return fmt_double(x); }};
}
Field f(int& x) {
  return {[&x](const std::string& v) { x = parse_int<int>(v); }, [&x] { return std::to_string(x); }};
}
Field f(std::uint64_t& x) {
  return {[&x](const std::string& v) { x = parse_int<std::uint64_t>(v); }, [&x] { return std::to_string(x); }};
}
Field f(bool& x) {
  return {[&x](const std::string& v) { x = parse_bool(v); }, [&x] { return std::string(x ? "true" : "false"); }};
}
Field f(std::string& x) {
  return {[&x](const std::string& v) { x = v; }, [&x] { return x; }};
}
Field f(std::vector<double>& x) {
  return {[&x](const std::string& v) {
            std::vector<double> out;
            std::stringstream ss(v);
            std::string item;
            while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item)));
            if (out.empty()) throw std::invalid_argument("expected a comma-separated list");
            x = std::move(out);
          },
          [&x] {
            std::string s;
            for (std::size_t i = 0; i < x.size(); ++i) s += (i ? ", " : "") + fmt_double(x[i]);
            return s;
          }};
}

// Top-level keys live in the "" section.
Registry registry(KitConfig& c) {
  Registry r;
  r[""] = {{"seed", f(c.seed)}};
  auto& s = c.sim;
  r["sim"] = {{"dt", f(s.dt)},
              {"wheelbase", f(s.wheelbase)},
              {"veh_length", f(s.veh_length)},
              {"veh_width", f(s.veh_width)},
              {"delta_max", f(s.delta_max)},
              {"steer_rate_max", f(s.steer_rate_max)},
              {"a_max", f(s.a_max)},
              {"a_min", f(s.a_min)},
              {"v_hard_max", f(s.v_hard_max)},
              {"speed_gain", f(s.speed_gain)},
              {"lidar_range_max", f(s.lidar_range_max)},
              {"n_beams", f(s.n_beams)}};
  auto& e = c.expert;
  r["expert"] = {{"lambda_v", f(e.lambda_v)},
                 {"lambda_p", f(e.lambda_p)},
                 {"lambda_d", f(e.lambda_d)},
                 {"lambda_kappa", f(e.lambda_kappa)},
                 {"d_scale", f(e.d_scale)},
                 {"horizon", f(e.horizon)},
                 {"sample_dt", f(e.sample_dt)},
                 {"n_lateral", f(e.n_lateral)},
                 {"n_speed", f(e.n_speed)},
                 {"speed_scale_min", f(e.speed_scale_min)},
                 {"max_lateral_offset", f(e.max_lateral_offset)},
                 {"boundary_margin", f(e.boundary_margin)},
                 {"lookahead_min", f(e.lookahead_min)},
                 {"lookahead_gain", f(e.lookahead_gain)},
                 {"wheelbase", f(e.wheelbase)},
                 {"delta_max", f(e.delta_max)},
                 {"speed_preview", f(e.speed_preview)},
                 {"vehicle_length", f(e.vehicle_length)},
                 {"vehicle_width", f(e.vehicle_width)}};
  auto& sc = c.scenario;
  r["scenario"] = {{"racelines", f(sc.racelines)},
                   {"k_positions", f(sc.k_positions)},
                   {"d_gap", f(sc.d_gap)},
                   {"v_ell_discount", f(sc.v_ell_discount)},
                   {"duration", f(sc.duration)},
                   {"spawn_phase", f(sc.spawn_phase)}};
  auto& p = c.policy;
  r["policy"] = {{"n_beams", f(p.n_beams)},
                 {"embed_dim", f(p.embed_dim)},
                 {"hidden_multiplier", f(p.hidden_multiplier)},
                 {"sigmoid_k", f(p.sigmoid_k)},
                 {"use_speed_input", f(p.use_speed_input)}};
  auto& t = c.trainer;
  r["trainer"] = {{"epochs", f(t.epochs)},
                  {"lr0", f(t.lr0)},
                  {"batch_size", f(t.batch_size)},
                  {"speed_loss_weight", f(t.speed_loss_weight)},
                  {"mask_p", f(t.mask_p)},
                  {"scheduler_factor", f(t.scheduler.factor)},
                  {"scheduler_patience", f(t.scheduler.patience)},
                  {"scheduler_threshold", f(t.scheduler.threshold)},
                  {"lr_min", f(t.scheduler.lr_min)},
                  {"adam_beta1", f(t.adam.beta1)},
                  {"adam_beta2", f(t.adam.beta2)},
                  {"adam_eps", f(t.adam.eps)}};
  auto& rl = c.raceline;
  r["raceline"] = {{"v_max", f(rl.v_max)},
                   {"a_lat_max", f(rl.a_lat_max)},
                   {"max_offset_fraction", f(rl.max_offset_fraction)},
                   {"min_margin", f(rl.min_margin)}};
  auto& tr = c.track;
  r["track"] = {{"shape", f(tr.shape)}, {"length", f(tr.length)}, {"width", f(tr.width)}, {"spacing", f(tr.spacing)}};
  auto& pa = c.paths;
  r["paths"] = {{"track_file", f(pa.track_file)},
                {"dataset_dir", f(pa.dataset_dir)},
                {"checkpoint", f(pa.checkpoint)},
                {"report_dir", f(pa.report_dir)}};
  return r;
}

void assign(Registry& reg, const std::string& section, const std::string& key, const std::string& value, int line) {
  const auto sit = reg.find(section);
  if (sit == reg.end()) throw ConfigError("unknown section [" + section + "]", line);
  const auto kit = sit->second.find(key);
  if (kit == sit->second.end())
    throw ConfigError("unknown key \"" + key + "\"" + (section.empty() ? "" : " in [" + section + "]"), line);
  try {
    kit->second.set(value);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(key + ": " + ex.what(), line);
  }
}

}  // namespace

void KitConfig::validate() const {
  try {
    sim.validate();
    expert.validate();
    scenario.validate(sim);
    policy.validate();
    trainer.validate();
  } catch (const std::exception& ex) {
    throw ConfigError(ex.what());
  }
  if (policy.n_beams != sim.n_beams) throw ConfigError("policy.n_beams must equal sim.n_beams");
  if (paths.track_file.empty() && !(track.length > 0.0 && track.width > 0.0 && track.spacing > 0.0))
    throw ConfigError("track length, width and spacing must be positive");
  if (!(raceline.v_max > 0.0 && raceline.a_lat_max > 0.0)) throw ConfigError("raceline v_max and a_lat_max must be positive");
}

std::uint64_t KitConfig::stage_seed(const std::string& stage) const { return derive_seed(seed, stage); }

scenario::ScenarioConfig KitConfig::scenario_resolved() const {
  auto s = scenario;
  s.seed = stage_seed("scenario");
  return s;
}

train::TrainerConfig KitConfig::trainer_resolved() const {
  auto t = trainer;
  t.seed = stage_seed("train");
  return t;
}

KitConfig parse(std::istream& in, KitConfig base) {
  KitConfig cfg = std::move(base);
  auto reg = registry(cfg);
  std::string section;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("malformed section header", line);
      section = trim(std::string_view(s).substr(1, s.size() - 2));
      if (section.empty() || !reg.contains(section)) throw ConfigError("unknown section [" + section + "]", line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", line);
    assign(reg, section, trim(std::string_view(s).substr(0, eq)), trim(std::string_view(s).substr(eq + 1)), line);
  }
  cfg.validate();
  return cfg;
}

KitConfig load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return parse(in);
  } catch (const ConfigError& ex) {
    if (ex.line() > 0) throw ConfigError(path.string() + ":" + std::to_string(ex.line()) + ": " + ex.what(), ex.line());
    throw ConfigError(path.string() + ": " + ex.what());
  }
}

void apply_override(KitConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override must look like section.key=value");
  const std::string lhs = trim(std::string_view(assignment).substr(0, eq));
  const std::string value = trim(std::string_view(assignment).substr(eq + 1));
  const auto dot = lhs.find('.');
  auto reg = registry(cfg);
  if (dot == std::string::npos) assign(reg, "", lhs, value, 0);
  else assign(reg, lhs.substr(0, dot), lhs.substr(dot + 1), value, 0);
}

std::string canonical(const KitConfig& cfg) {
  KitConfig copy = cfg;
  auto reg = registry(copy);
  std::string out;
  for (const auto& [section, fields] : reg) {
    if (!section.empty()) out += "[" + section + "]\n";
    for (const auto& [key, field] : fields) out += key + " = " + field.get() + "\n";
  }
  return out;
}

std::string config_hash(const KitConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical(cfg))));
  return buf;
}

}  // namespace e2r::config
