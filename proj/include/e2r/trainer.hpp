#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "e2r/policy.hpp"
#include "e2r/scenario.hpp"

namespace e2r::train {

using policy::PolicyConfig;
using Params = policy::PolicyParams<double>;

class TrainError : public std::runtime_error {
 public:
  enum class Kind { EmptyDataset, EmptyEpisode, NonFiniteGradient, InvalidConfig };
  TrainError(Kind k, const std::string& what) : std::runtime_error(what), kind_(k) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct SchedulerConfig {
  double factor = 0.5;
  int patience = 10;
  double threshold = 1e-4;  // absolute improvement required
  double lr_min = 1e-6;
};

struct TrainerConfig {
  int epochs = 500;
  double lr0 = 1e-3;
  int batch_size = 16;
  double speed_loss_weight = 0.05;
  double mask_p = 0.1;
  SchedulerConfig scheduler;
  AdamConfig adam;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LossBreakdown {
  double loss = 0.0;
  double l_speed = 0.0;  // mean squared speed error
  double l_steer = 0.0;  // mean squared steering error
};

/// Frame-by-frame rollout of one episode through the network from h = 0.
/// `mask` has one flag per frame (true: the speed embedding is replaced by e_mask).
LossBreakdown sequence_loss(const Params& params, const PolicyConfig& cfg, const scenario::EpisodeRecord& episode,
                            std::span<const std::uint8_t> mask, double speed_loss_weight = 0.05);

/// Mean of the per-episode sequence losses over the batch and its exact
/// gradient. Episodes of different lengths are advanced in lockstep; frames
/// past an episode's end carry zero loss weight and so contribute exactly
/// nothing to the gradient.
double backward(const Params& params, const PolicyConfig& cfg,
                std::span<const scenario::EpisodeRecord* const> batch,
                std::span<const std::vector<std::uint8_t>> masks, double speed_loss_weight, Params& grad);

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;  // rate used during the epoch
};

struct TrainState {
  Params params;
  Params m;  // Adam first moment
  Params v;  // Adam second moment
  std::uint64_t step = 0;
  double lr = 0.0;
  double best_loss = std::numeric_limits<double>::infinity();  // scheduler reference
  int stall = 0;
  std::vector<EpochRecord> history;

  static TrainState start(Params params, double lr0);
};

/// One bias-corrected Adam step at state.lr.
void adam_update(TrainState& state, const Params& grad, const AdamConfig& cfg);

/// Plateau halving. An epoch improves when loss < best - threshold. After
/// `patience` consecutive non-improving epochs the rate is multiplied by
/// `factor` (floored at lr_min), the stall count restarts and the reference
/// loss is cleared, so the next epoch becomes the new reference.
void lr_schedule_step(TrainState& state, double epoch_loss, const SchedulerConfig& cfg);

struct TrainResult {
  Params best_params;  // parameters after the lowest-loss epoch
  double best_loss = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  Params final_params;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(const scenario::Dataset& dataset, const PolicyConfig& policy_cfg, const TrainerConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Columns epoch, mean_loss, lr.
void write_loss_curve_csv(std::ostream& out, const std::vector<EpochRecord>& history);

}  // namespace e2r::train
