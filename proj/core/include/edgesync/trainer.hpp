#pragma once

// Cloud retraining loop: fixed hyperparameters, patience-based early
// stopping with a global time cap, and a best-epoch checkpoint.

#include <cstdint>
#include <span>
#include <vector>

#include "edgesync/clock.hpp"
#include "edgesync/types.hpp"

namespace edgesync {

/// What the trainer needs from a model. Only the trainable partition is
/// visible here; the frozen part is the model's own business.
class TrainableModel {
 public:
  virtual ~TrainableModel() = default;

  /// Resets optimizer state (momentum) at the start of a training session.
  virtual void begin_session() = 0;
  /// One pass over `batch`; returns mean training loss. Throws NonFiniteLoss.
  virtual double train_epoch(std::span<const LabeledSample> batch, const HyperParams& h) = 0;
  /// Accuracy in [0,1] over `holdout`.
  virtual double evaluate(std::span<const LabeledSample> holdout) const = 0;
  virtual std::vector<double> trainable_values() const = 0;
  virtual void set_trainable_values(std::span<const double> values) = 0;
};

struct TrainerConfig {
  int patience = 5;
  double max_time = 60.0;
  HyperParams hyperparams{0.05, 0.9, 1e-4};
  double eval_fraction = 0.2;
  std::uint64_t split_seed = 0;

  void validate() const;
};

enum class StopReason { Patience, TimeCap, EpochBudget };

const char* to_string(StopReason reason) noexcept;

struct TrainReport {
  int epochs_run = 0;
  double best_eval = 0.0;
  /// 1-based; 0 means no epoch beat the initial reference of 0 and the
  /// starting parameters were kept.
  int best_epoch = 0;
  StopReason stop_reason = StopReason::Patience;
  double wall_seconds = 0.0;
  std::vector<double> evaluations;
  std::vector<double> train_losses;
  /// Trainable values of the best epoch; what gets dispatched to the edge.
  std::vector<double> trainable;
};

struct HoldoutSplit {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> eval;
};

/// Seeded shuffle, then the first round(eval_fraction * n) (at least 1)
/// samples become the holdout. With a single sample it is used for both.
HoldoutSplit split_holdout(std::span<const LabeledSample> data, double eval_fraction,
                           std::uint64_t seed);

/// Trains epoch by epoch (1-based). After epoch e is evaluated the loop stops
/// when e - best_epoch > patience or elapsed >= max_time; the time cap is also
/// checked before each epoch. Improvement is strict (>). On return the model
/// holds the best epoch's parameters.
/// Errors: EmptyTrainSet, ModelRejectedHyperparams.
TrainReport train_until_stop(TrainableModel& model, std::span<const LabeledSample> train_set,
                             const TrainerConfig& cfg, const Clock& clock);

/// Fixed-epoch variant used by interval-based baselines: runs exactly
/// `epochs` epochs and keeps the last parameters.
TrainReport train_fixed_epochs(TrainableModel& model, std::span<const LabeledSample> train_set,
                               int epochs, const TrainerConfig& cfg, const Clock& clock);

}  // namespace edgesync
