#pragma once

// Shared domain types. Everything here validates on construction and is
// immutable afterwards (ModelParams hands out new versions instead of
// mutating), so values can be shared freely between the edge loop, the
// coordinator and the simulator.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace edgesync {

using EdgeId = std::string;

/// One observation from a drifting stream. true_class is known to the
/// generator (and the teacher) but is never read by the student.
struct Sample {
  EdgeId edge_id;
  std::uint64_t seq = 0;
  double timestamp = 0.0;
  std::vector<double> features;
  std::uint32_t true_class = 0;

  bool operator==(const Sample&) const = default;
};

/// Throws DimensionMismatch / NonFinite / InvalidArgument on a malformed sample.
void validate_sample(const Sample& sample, std::size_t feature_dim);

/// Tracks the per-edge ordering invariants of a sample stream: seq strictly
/// increasing and timestamps non-decreasing.
class StreamOrderGuard {
 public:
  void admit(const Sample& sample);
  void reset() { seen_ = false; }

 private:
  bool seen_ = false;
  std::uint64_t last_seq_ = 0;
  double last_timestamp_ = 0.0;
};

class InferenceOutput {
 public:
  /// Normalizes and validates; see validate_probs.
  explicit InferenceOutput(std::vector<double> probs);

  const std::vector<double>& probs() const noexcept { return probs_; }
  std::uint32_t predicted() const noexcept { return predicted_; }
  std::size_t class_count() const noexcept { return probs_.size(); }

  bool operator==(const InferenceOutput&) const = default;

 private:
  std::vector<double> probs_;
  std::uint32_t predicted_ = 0;
};

/// Divides by the sum and picks argmax (lowest index on ties).
/// Errors: NonFinite, NegativeEntry, ZeroSum, InvalidArgument (empty).
InferenceOutput validate_probs(std::vector<double> v);

/// Index of the largest entry; ties go to the lowest index.
std::uint32_t argmax_lowest(std::span<const double> v);

enum class TimelinessDirection : std::uint8_t {
  FavorRecent = 0,  // 1/(1+exp(age/window)): newest sample scores highest
  FavorOlder = 1,   // 1/(1+exp(-age/window)): the formula with the printed sign
};

class FilterConfig {
 public:
  FilterConfig() = default;
  FilterConfig(double alpha, double beta, double keep_fraction, double window_seconds,
               TimelinessDirection direction = TimelinessDirection::FavorRecent);

  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }
  double keep_fraction() const noexcept { return keep_fraction_; }
  double window_seconds() const noexcept { return window_seconds_; }
  TimelinessDirection direction() const noexcept { return direction_; }

  FilterConfig with_window(double window_seconds) const;
  FilterConfig with_keep_fraction(double keep_fraction) const;

  bool operator==(const FilterConfig&) const = default;

 private:
  double alpha_ = 1.0;
  double beta_ = 1.0;
  double keep_fraction_ = 0.7;
  double window_seconds_ = 100.0;
  TimelinessDirection direction_ = TimelinessDirection::FavorRecent;
};

class ScoredSample {
 public:
  /// quality is recomputed from cfg and must match the supplied value
  /// within 1e-12.
  ScoredSample(Sample sample, InferenceOutput output, double adaptability, double timeliness,
               double quality, const FilterConfig& cfg);

  const Sample& sample() const noexcept { return sample_; }
  const InferenceOutput& output() const noexcept { return output_; }
  double adaptability() const noexcept { return adaptability_; }
  double timeliness() const noexcept { return timeliness_; }
  double quality() const noexcept { return quality_; }

  bool operator==(const ScoredSample&) const = default;

 private:
  Sample sample_;
  InferenceOutput output_;
  double adaptability_;
  double timeliness_;
  double quality_;
};

class HyperParams {
 public:
  HyperParams(double learning_rate, double momentum, double weight_decay);

  double learning_rate() const noexcept { return learning_rate_; }
  double momentum() const noexcept { return momentum_; }
  double weight_decay() const noexcept { return weight_decay_; }

  bool operator==(const HyperParams&) const = default;

 private:
  double learning_rate_;
  double momentum_;
  double weight_decay_;
};

struct ModelDims {
  std::size_t feature_dim = 16;
  std::size_t hidden_dim = 32;
  std::size_t class_count = 6;

  /// C x (hidden + 1): last-layer weights plus one bias per class.
  std::size_t trainable_size() const noexcept { return class_count * (hidden_dim + 1); }
  std::size_t frozen_size() const noexcept { return hidden_dim * feature_dim; }

  bool operator==(const ModelDims&) const = default;
};

/// Student parameters split into a frozen backbone projection and a
/// trainable head. The frozen block is shared by pointer between every
/// version derived from the same root, so it stays bitwise identical.
class ModelParams {
 public:
  ModelParams(ModelDims dims, std::vector<double> frozen, std::vector<double> trainable,
              std::uint64_t version = 0);

  const ModelDims& dims() const noexcept { return dims_; }
  std::span<const double> frozen() const noexcept { return *frozen_; }
  std::span<const double> trainable() const noexcept { return trainable_; }
  std::uint64_t version() const noexcept { return version_; }

  /// New version (this->version() + 1) sharing the frozen block.
  ModelParams with_trainable(std::vector<double> trainable) const;
  /// Same as with_trainable but with an explicit version (resync path).
  ModelParams with_trainable_at(std::vector<double> trainable, std::uint64_t version) const;

  /// FNV-1a over the little-endian bytes of the frozen block.
  std::uint64_t frozen_checksum() const noexcept;
  bool shares_frozen_with(const ModelParams& other) const noexcept {
    return frozen_ == other.frozen_;
  }

  bool operator==(const ModelParams& other) const;

 private:
  ModelDims dims_;
  std::shared_ptr<const std::vector<double>> frozen_;
  std::vector<double> trainable_;
  std::uint64_t version_ = 0;
};

/// after.trainable - before.trainable; throws InvalidArgument if the frozen
/// blocks differ bitwise or the shapes disagree.
std::vector<double> trainable_delta(const ModelParams& before, const ModelParams& after);

struct AccuracyRecord {
  AccuracyRecord(int correct, std::uint64_t seq);

  std::uint8_t correct;
  std::uint64_t seq;

  bool operator==(const AccuracyRecord&) const = default;
};

/// Feature vector with its teacher label, the unit the trainer consumes.
struct LabeledSample {
  std::vector<double> features;
  std::uint32_t label = 0;

  bool operator==(const LabeledSample&) const = default;
};

/// Bitwise FNV-1a 64 over the canonical little-endian encoding of doubles.
std::uint64_t fnv1a_doubles(std::span<const double> values) noexcept;

}  // namespace edgesync
