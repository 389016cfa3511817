#include "edgesync/types.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

#include "edgesync/error.hpp"

namespace edgesync {
namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(Errc::NonFinite, what);
}

}  // namespace

void validate_sample(const Sample& sample, std::size_t feature_dim) {
  if (sample.features.size() != feature_dim) {
    throw Error(Errc::DimensionMismatch, "sample has " + std::to_string(sample.features.size()) +
                                             " features, expected " +
                                             std::to_string(feature_dim));
  }
  for (double f : sample.features) require_finite(f, "sample feature");
  require_finite(sample.timestamp, "sample timestamp");
  if (sample.timestamp < 0.0) throw Error(Errc::InvalidArgument, "negative timestamp");
}

void StreamOrderGuard::admit(const Sample& sample) {
  if (seen_) {
    if (sample.seq <= last_seq_) throw Error(Errc::InvalidArgument, "seq must strictly increase");
    if (sample.timestamp < last_timestamp_) {
      throw Error(Errc::InvalidArgument, "timestamp must be non-decreasing");
    }
  }
  seen_ = true;
  last_seq_ = sample.seq;
  last_timestamp_ = sample.timestamp;
}

std::uint32_t argmax_lowest(std::span<const double> v) {
  std::uint32_t best = 0;
  for (std::uint32_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

InferenceOutput validate_probs(std::vector<double> v) { return InferenceOutput(std::move(v)); }

InferenceOutput::InferenceOutput(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw Error(Errc::InvalidArgument, "empty probability vector");
  double sum = 0.0;
  for (double p : probs_) {
    require_finite(p, "probability entry");
    if (p < 0.0) throw Error(Errc::NegativeEntry, "probability entry below zero");
    sum += p;
  }
  if (!(sum > 0.0)) throw Error(Errc::ZeroSum, "probability vector sums to zero");
  // Vectors already normalized to rounding precision are kept bit-for-bit
  // so that a decoded output compares equal to the encoded one.
  if (std::abs(sum - 1.0) > 1e-12) {
    for (double& p : probs_) p /= sum;
  }
  predicted_ = argmax_lowest(probs_);
}

FilterConfig::FilterConfig(double alpha, double beta, double keep_fraction,
                           double window_seconds, TimelinessDirection direction)
    : alpha_(alpha),
      beta_(beta),
      keep_fraction_(keep_fraction),
      window_seconds_(window_seconds),
      direction_(direction) {
  require_finite(alpha, "alpha");
  require_finite(beta, "beta");
  if (alpha < 0.0 || beta < 0.0) throw Error(Errc::InvalidArgument, "alpha/beta must be >= 0");
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw Error(Errc::InvalidArgument, "keep_fraction must be in (0,1]");
  }
  if (!(window_seconds > 0.0) || !std::isfinite(window_seconds)) {
    throw Error(Errc::NonPositiveWindow, "window_seconds must be > 0");
  }
}

FilterConfig FilterConfig::with_window(double window_seconds) const {
  return FilterConfig(alpha_, beta_, keep_fraction_, window_seconds, direction_);
}

FilterConfig FilterConfig::with_keep_fraction(double keep_fraction) const {
  return FilterConfig(alpha_, beta_, keep_fraction, window_seconds_, direction_);
}

ScoredSample::ScoredSample(Sample sample, InferenceOutput output, double adaptability,
                           double timeliness, double quality, const FilterConfig& cfg)
    : sample_(std::move(sample)),
      output_(std::move(output)),
      adaptability_(adaptability),
      timeliness_(timeliness),
      quality_(quality) {
  if (adaptability < 0.0) throw Error(Errc::InvalidArgument, "adaptability must be >= 0");
  if (!(timeliness > 0.0 && timeliness < 1.0)) {
    throw Error(Errc::InvalidArgument, "timeliness must be in (0,1)");
  }
  const double expect = cfg.alpha() * adaptability + cfg.beta() * timeliness;
  if (std::abs(expect - quality) > 1e-12) {
    throw Error(Errc::InvalidArgument, "quality does not match alpha*E + beta*T");
  }
}

HyperParams::HyperParams(double learning_rate, double momentum, double weight_decay)
    : learning_rate_(learning_rate), momentum_(momentum), weight_decay_(weight_decay) {
  require_finite(learning_rate, "learning_rate");
  require_finite(momentum, "momentum");
  require_finite(weight_decay, "weight_decay");
  if (!(learning_rate > 0.0)) throw Error(Errc::InvalidArgument, "learning_rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw Error(Errc::InvalidArgument, "momentum must be in [0,1)");
  }
  if (weight_decay < 0.0) throw Error(Errc::InvalidArgument, "weight_decay must be >= 0");
}

ModelParams::ModelParams(ModelDims dims, std::vector<double> frozen,
                         std::vector<double> trainable, std::uint64_t version)
    : dims_(dims),
      frozen_(std::make_shared<const std::vector<double>>(std::move(frozen))),
      trainable_(std::move(trainable)),
      version_(version) {
  if (dims.feature_dim == 0 || dims.hidden_dim == 0 || dims.class_count < 2) {
    throw Error(Errc::InvalidArgument, "model dims must be positive with >= 2 classes");
  }
  if (frozen_->size() != dims.frozen_size()) {
    throw Error(Errc::DimensionMismatch, "frozen block size does not match dims");
  }
  if (trainable_.size() != dims.trainable_size()) {
    throw Error(Errc::DimensionMismatch, "trainable block size does not match dims");
  }
  for (double v : *frozen_) require_finite(v, "frozen parameter");
  for (double v : trainable_) require_finite(v, "trainable parameter");
}

ModelParams ModelParams::with_trainable(std::vector<double> trainable) const {
  return with_trainable_at(std::move(trainable), version_ + 1);
}

ModelParams ModelParams::with_trainable_at(std::vector<double> trainable,
                                           std::uint64_t version) const {
  if (trainable.size() != dims_.trainable_size()) {
    throw Error(Errc::DimensionMismatch, "trainable block size does not match dims");
  }
  for (double v : trainable) require_finite(v, "trainable parameter");
  ModelParams next = *this;
  next.trainable_ = std::move(trainable);
  next.version_ = version;
  return next;
}

std::uint64_t ModelParams::frozen_checksum() const noexcept { return fnv1a_doubles(*frozen_); }

bool ModelParams::operator==(const ModelParams& other) const {
  if (!(dims_ == other.dims_) || version_ != other.version_) return false;
  auto bits_equal = [](std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size_bytes()) == 0;
  };
  return bits_equal(*frozen_, *other.frozen_) && bits_equal(trainable_, other.trainable_);
}

std::vector<double> trainable_delta(const ModelParams& before, const ModelParams& after) {
  if (!(before.dims() == after.dims())) {
    throw Error(Errc::DimensionMismatch, "model dims differ");
  }
  if (before.frozen_checksum() != after.frozen_checksum() ||
      std::memcmp(before.frozen().data(), after.frozen().data(),
                  before.frozen().size_bytes()) != 0) {
    throw Error(Errc::InvalidArgument, "frozen partitions differ");
  }
  std::vector<double> delta(before.trainable().size());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    delta[i] = after.trainable()[i] - before.trainable()[i];
  }
  return delta;
}

AccuracyRecord::AccuracyRecord(int correct_flag, std::uint64_t seq_index)
    : correct(static_cast<std::uint8_t>(correct_flag)), seq(seq_index) {
  if (correct_flag != 0 && correct_flag != 1) {
    throw Error(Errc::InvalidArgument, "accuracy record must be 0 or 1");
  }
}

std::uint64_t fnv1a_doubles(std::span<const double> values) noexcept {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      hash ^= (bits >> (8 * b)) & 0xffU;
      hash *= 0x100000001b3ULL;
    }
  }
  return hash;
}

}  // namespace edgesync
