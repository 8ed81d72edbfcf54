#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "e2r/expert.hpp"
#include "e2r/policy.hpp"
#include "e2r/scenario.hpp"
#include "e2r/simulator.hpp"
#include "e2r/track.hpp"
#include "e2r/trainer.hpp"

namespace e2r::config {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0) : std::runtime_error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Built-in generator used when no track file is configured.
struct TrackSpec {
  std::string shape = "stadium";
  double length = 60.0;
  double width = 3.0;
  double spacing = 0.2;
};

struct Paths {
  std::string track_file;  // empty: generate from TrackSpec
  std::string dataset_dir = "dataset";
  std::string checkpoint = "checkpoint.e2r";
  std::string report_dir = "reports";
};

/// Every tunable of the pipeline. Per-stage seeds are derived from `seed`.
struct KitConfig {
  std::uint64_t seed = 0;
  sim::SimConfig sim;
  expert::ExpertConfig expert;
  scenario::ScenarioConfig scenario;
  policy::PolicyConfig policy;
  train::TrainerConfig trainer;
  track::RacelineConfig raceline;
  TrackSpec track;
  Paths paths;

  /// Runs every section's checks plus the cross-section ones.
  void validate() const;

  /// Scenario/trainer configs with seeds derived from the global seed.
  scenario::ScenarioConfig scenario_resolved() const;
  train::TrainerConfig trainer_resolved() const;
  std::uint64_t stage_seed(const std::string& stage) const;
};

/// INI-style text: `key = value` lines under `[section]` headers, `#` or `;`
/// comments, `seed` at top level. Unknown sections or keys are rejected.
KitConfig parse(std::istream& in, KitConfig base = {});
KitConfig load_file(const std::filesystem::path& path);

/// Applies one `section.key=value` override (`seed=N` for the global seed).
void apply_override(KitConfig& cfg, const std::string& assignment);

/// Every field as `[section]` blocks of sorted `key = value` lines. Parsing
/// the dump yields the same config.
std::string canonical(const KitConfig& cfg);

/// FNV-1a of the canonical dump as 16 hex digits.
std::string config_hash(const KitConfig& cfg);

}  // namespace e2r::config
