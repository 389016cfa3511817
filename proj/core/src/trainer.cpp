#include "edgesync/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "edgesync/error.hpp"

namespace edgesync {

void TrainerConfig::validate() const {
  if (patience < 1) throw Error(Errc::InvalidArgument, "patience must be >= 1");
  if (!(max_time > 0.0)) throw Error(Errc::InvalidArgument, "max_time must be > 0");
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw Error(Errc::InvalidArgument, "eval_fraction must be in (0,1)");
  }
}

const char* to_string(StopReason reason) noexcept {
  switch (reason) {
    case StopReason::Patience: return "patience";
    case StopReason::TimeCap: return "time_cap";
    case StopReason::EpochBudget: return "epoch_budget";
  }
  return "unknown";
}

HoldoutSplit split_holdout(std::span<const LabeledSample> data, double eval_fraction,
                           std::uint64_t seed) {
  HoldoutSplit split;
  if (data.empty()) return split;
  if (data.size() == 1) {
    split.train.assign(data.begin(), data.end());
    split.eval.assign(data.begin(), data.end());
    return split;
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  auto n_eval = static_cast<std::size_t>(std::llround(eval_fraction * data.size()));
  n_eval = std::clamp<std::size_t>(n_eval, 1, data.size() - 1);
  split.eval.reserve(n_eval);
  split.train.reserve(data.size() - n_eval);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_eval ? split.eval : split.train).push_back(data[order[i]]);
  }
  return split;
}

namespace {

double run_epoch(TrainableModel& model, std::span<const LabeledSample> train,
                 const HyperParams& h, std::span<const double> fallback) {
  try {
    return model.train_epoch(train, h);
  } catch (const Error& e) {
    if (e.code() != Errc::NonFiniteLoss) throw;
    model.set_trainable_values(fallback);
    throw Error(Errc::ModelRejectedHyperparams, e.what());
  }
}

}  // namespace

TrainReport train_until_stop(TrainableModel& model, std::span<const LabeledSample> train_set,
                             const TrainerConfig& cfg, const Clock& clock) {
  cfg.validate();
  if (train_set.empty()) throw Error(Errc::EmptyTrainSet, "no labeled samples to train on");

  const auto split = split_holdout(train_set, cfg.eval_fraction, cfg.split_seed);
  const double start = clock.now();

  TrainReport report;
  report.trainable = model.trainable_values();
  const std::vector<double> initial = report.trainable;
  model.begin_session();

  int epoch = 0;
  report.stop_reason = StopReason::Patience;
  while (true) {
    if (clock.now() - start >= cfg.max_time) {
      report.stop_reason = StopReason::TimeCap;
      break;
    }
    ++epoch;
    report.train_losses.push_back(run_epoch(model, split.train, cfg.hyperparams, initial));
    const double evaluation = model.evaluate(split.eval);
    report.evaluations.push_back(evaluation);
    if (evaluation > report.best_eval) {
      report.best_eval = evaluation;
      report.best_epoch = epoch;
      report.trainable = model.trainable_values();
    }
    if (epoch - report.best_epoch > cfg.patience) {
      report.stop_reason = StopReason::Patience;
      break;
    }
  }
  report.epochs_run = epoch;
  report.wall_seconds = clock.now() - start;
  model.set_trainable_values(report.trainable);
  return report;
}

TrainReport train_fixed_epochs(TrainableModel& model, std::span<const LabeledSample> train_set,
                               int epochs, const TrainerConfig& cfg, const Clock& clock) {
  cfg.validate();
  if (train_set.empty()) throw Error(Errc::EmptyTrainSet, "no labeled samples to train on");
  if (epochs < 1) throw Error(Errc::InvalidArgument, "epoch budget must be >= 1");

  const auto split = split_holdout(train_set, cfg.eval_fraction, cfg.split_seed);
  const double start = clock.now();
  const std::vector<double> initial = model.trainable_values();
  model.begin_session();

  TrainReport report;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    report.train_losses.push_back(run_epoch(model, split.train, cfg.hyperparams, initial));
    const double evaluation = model.evaluate(split.eval);
    report.evaluations.push_back(evaluation);
    if (evaluation > report.best_eval) {
      report.best_eval = evaluation;
      report.best_epoch = epoch;
    }
  }
  report.epochs_run = epochs;
  report.stop_reason = StopReason::EpochBudget;
  report.wall_seconds = clock.now() - start;
  report.trainable = model.trainable_values();
  return report;
}

}  // namespace edgesync
