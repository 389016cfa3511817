#pragma once

// Desk-scale stand-ins for the video workloads and the student/teacher
// networks: Gaussian scene streams, a frozen-projection softmax student and
// an oracle teacher with optional label noise.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "edgesync/trainer.hpp"
#include "edgesync/types.hpp"

namespace edgesync {

struct SceneSpec {
  std::vector<std::vector<double>> class_means;  // C x feature_dim
  std::vector<double> class_priors;              // sums to 1
  double noise_scale = 1.0;
  double start_time = 0.0;
  double duration = 1.0;

  void validate(std::size_t feature_dim) const;
};

struct WorkloadSpec {
  EdgeId edge_id = "edge-0";
  std::vector<SceneSpec> scenes;
  std::size_t feature_dim = 16;
  double samples_per_second = 2.0;
  double total_seconds = 1000.0;
  std::uint64_t seed = 1;

  std::size_t class_count() const;
  std::size_t sample_count() const;
  /// Index of the scene active at time t (clamped to the last scene).
  std::size_t scene_at(double t) const;
  /// Scenes must tile [0, total_seconds) without gaps or overlap.
  void validate() const;
};

/// Draws C class means for one scene: a random scene centre of norm
/// ~center_scale plus per-class offsets of norm ~separation.
std::vector<std::vector<double>> random_class_means(std::size_t class_count,
                                                    std::size_t feature_dim, double separation,
                                                    double center_scale, std::uint64_t seed);

/// Deterministic sample stream for one workload.
class SampleStream {
 public:
  explicit SampleStream(const WorkloadSpec& spec);

  std::optional<Sample> next();
  std::size_t remaining() const noexcept { return total_ - produced_; }

 private:
  WorkloadSpec spec_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_{0.0, 1.0};
  std::size_t total_;
  std::size_t produced_ = 0;
};

std::vector<Sample> generate_stream(const WorkloadSpec& spec);

/// Samples from a single scene, independent of the workload's own stream
/// (used for pretraining and held-out evaluation).
std::vector<Sample> draw_scene_samples(const SceneSpec& scene, const EdgeId& edge_id,
                                       std::size_t count, std::uint64_t seed);

/// Frozen random projection (N(0, 1/feature_dim) entries) and zero head.
ModelParams make_initial_params(const ModelDims& dims, std::uint64_t seed);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // same layout as the trainable block
};

/// softmax(W * relu(P * x) + b). P is frozen; W|b is the trainable head,
/// stored row-major as C rows of (hidden weights..., bias).
class StudentModel final : public TrainableModel {
 public:
  StudentModel(ModelParams params, std::uint64_t rng_seed, std::size_t batch_size = 32);

  InferenceOutput infer(std::span<const double> features) const;
  std::vector<double> hidden(std::span<const double> features) const;

  /// Mean cross-entropy + 0.5 * weight_decay * |theta|^2 over `batch` and
  /// its analytic gradient with respect to the trainable block.
  LossAndGradient loss_and_gradient(std::span<const LabeledSample> batch,
                                    double weight_decay) const;

  void begin_session() override;
  double train_epoch(std::span<const LabeledSample> batch, const HyperParams& h) override;
  double evaluate(std::span<const LabeledSample> holdout) const override;
  std::vector<double> trainable_values() const override { return weights_; }
  void set_trainable_values(std::span<const double> values) override;

  /// Current parameters (frozen block shared with the root).
  ModelParams params() const;
  std::uint64_t version() const noexcept { return base_.version(); }
  /// Replaces the head with `values` and sets the version.
  void load(std::span<const double> values, std::uint64_t version);
  const ModelDims& dims() const noexcept { return base_.dims(); }

 private:
  std::vector<double> logits(std::span<const double> hidden_act) const;

  ModelParams base_;
  std::vector<double> weights_;
  std::vector<double> velocity_;
  std::mt19937_64 rng_;
  std::size_t batch_size_;
};

double softmax_in_place(std::vector<double>& logits);

/// Trains the head for `epochs` epochs on the given samples labelled by
/// their true class.
void pretrain(StudentModel& model, std::span<const Sample> samples, const HyperParams& h,
              int epochs);

/// Perfect oracle by default; with error_rate rho a label is flipped to a
/// uniformly chosen other class. The flip is a pure function of
/// (seed, edge_id, seq) so relabelling is stable.
class Teacher {
 public:
  Teacher(std::size_t class_count, double error_rate = 0.0, std::uint64_t seed = 0);

  std::uint32_t label(const Sample& sample) const;
  double error_rate() const noexcept { return error_rate_; }

 private:
  std::size_t class_count_;
  double error_rate_;
  std::uint64_t seed_;
};

std::vector<LabeledSample> to_labeled(std::span<const Sample> samples);

}  // namespace edgesync
