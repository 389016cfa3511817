#pragma once

// Shared fixtures for the unit tests: sample builders, a scripted trainable
// model and small exception matchers.

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "edgesync/error.hpp"
#include "edgesync/trainer.hpp"
#include "edgesync/types.hpp"

namespace edgesync::testing {

#define EXPECT_ERRC(stmt, errc)                                               \
  do {                                                                        \
    try {                                                                     \
      stmt;                                                                   \
      ADD_FAILURE() << "expected " << ::edgesync::to_string(errc) << " from " \
                    << #stmt;                                                 \
    } catch (const ::edgesync::Error& e__) {                                  \
      EXPECT_EQ(e__.code(), errc) << e__.what();                              \
    }                                                                         \
  } while (0)

inline Sample make_sample(std::uint64_t seq, double t, std::vector<double> features,
                          std::uint32_t cls = 0, EdgeId edge = "e1") {
  return Sample{std::move(edge), seq, t, std::move(features), cls};
}

inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> v(n);
  double sum = 0.0;
  for (auto& x : v) sum += (x = ex(rng));
  for (auto& x : v) x /= sum;
  return v;
}

/// Trainable model whose holdout evaluations follow a script. The trainable
/// "parameters" are a single value equal to the epoch number, so the
/// checkpoint the trainer restores identifies the epoch it came from.
class ScriptedModel final : public TrainableModel {
 public:
  explicit ScriptedModel(std::vector<double> evals, std::function<void()> on_epoch = {})
      : evals_(std::move(evals)), on_epoch_(std::move(on_epoch)) {}

  void begin_session() override { epoch_ = 0; }
  double train_epoch(std::span<const LabeledSample>, const HyperParams&) override {
    ++epoch_;
    value_ = static_cast<double>(epoch_);
    if (on_epoch_) on_epoch_();
    return 1.0 / static_cast<double>(epoch_);
  }
  double evaluate(std::span<const LabeledSample>) const override {
    const auto i = static_cast<std::size_t>(epoch_ - 1);
    return i < evals_.size() ? evals_[i] : evals_.back();
  }
  std::vector<double> trainable_values() const override { return {value_}; }
  void set_trainable_values(std::span<const double> v) override { value_ = v[0]; }

  int epochs() const { return epoch_; }
  double value() const { return value_; }

 private:
  std::vector<double> evals_;
  std::function<void()> on_epoch_;
  int epoch_ = 0;
  double value_ = 0.0;
};

inline std::vector<LabeledSample> dummy_labeled(std::size_t n) {
  std::vector<LabeledSample> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = LabeledSample{{static_cast<double>(i)}, 0};
  return v;
}

}  // namespace edgesync::testing
