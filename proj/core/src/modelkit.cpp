#include "edgesync/modelkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "edgesync/error.hpp"

namespace edgesync {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_string(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void SceneSpec::validate(std::size_t feature_dim) const {
  if (class_means.size() < 2) throw Error(Errc::InvalidArgument, "scene needs >= 2 classes");
  if (class_priors.size() != class_means.size()) {
    throw Error(Errc::DimensionMismatch, "class_priors length differs from class_means");
  }
  for (const auto& mean : class_means) {
    if (mean.size() != feature_dim) {
      throw Error(Errc::DimensionMismatch, "class mean has wrong feature dimension");
    }
    for (double v : mean) {
      if (!std::isfinite(v)) throw Error(Errc::NonFinite, "class mean");
    }
  }
  double sum = 0.0;
  for (double p : class_priors) {
    if (!(p >= 0.0)) throw Error(Errc::NegativeEntry, "class prior");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(Errc::InvalidArgument, "priors must sum to 1");
  if (!(noise_scale > 0.0)) throw Error(Errc::InvalidArgument, "noise_scale must be > 0");
  if (!(duration > 0.0)) throw Error(Errc::InvalidArgument, "scene duration must be > 0");
}

std::size_t WorkloadSpec::class_count() const {
  return scenes.empty() ? 0 : scenes.front().class_means.size();
}

std::size_t WorkloadSpec::sample_count() const {
  return static_cast<std::size_t>(std::floor(total_seconds * samples_per_second + 1e-9));
}

std::size_t WorkloadSpec::scene_at(double t) const {
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (t < scenes[i].start_time + scenes[i].duration) return i;
  }
  return scenes.size() - 1;
}

void WorkloadSpec::validate() const {
  if (scenes.empty()) throw Error(Errc::InvalidArgument, "workload has no scenes");
  if (feature_dim == 0) throw Error(Errc::InvalidArgument, "feature_dim must be positive");
  if (!(samples_per_second > 0.0)) {
    throw Error(Errc::InvalidArgument, "samples_per_second must be > 0");
  }
  if (!(total_seconds > 0.0)) throw Error(Errc::InvalidArgument, "total_seconds must be > 0");
  double cursor = 0.0;
  for (const auto& scene : scenes) {
    scene.validate(feature_dim);
    if (scene.class_means.size() != class_count()) {
      throw Error(Errc::DimensionMismatch, "scenes disagree on class count");
    }
    if (std::abs(scene.start_time - cursor) > 1e-9) {
      throw Error(Errc::InvalidArgument, "scenes must tile the timeline without gaps");
    }
    cursor = scene.start_time + scene.duration;
  }
  if (std::abs(cursor - total_seconds) > 1e-9) {
    throw Error(Errc::InvalidArgument, "scenes must end exactly at total_seconds");
  }
}

std::vector<std::vector<double>> random_class_means(std::size_t class_count,
                                                    std::size_t feature_dim, double separation,
                                                    double center_scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double unit = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  std::vector<double> center(feature_dim);
  for (double& c : center) c = gauss(rng) * unit * center_scale;
  std::vector<std::vector<double>> means(class_count, std::vector<double>(feature_dim));
  for (auto& mean : means) {
    for (std::size_t j = 0; j < feature_dim; ++j) {
      mean[j] = center[j] + gauss(rng) * unit * separation;
    }
  }
  return means;
}

SampleStream::SampleStream(const WorkloadSpec& spec)
    : spec_(spec), rng_(spec.seed), total_(spec.sample_count()) {
  spec_.validate();
}

std::optional<Sample> SampleStream::next() {
  if (produced_ >= total_) return std::nullopt;
  Sample s;
  s.edge_id = spec_.edge_id;
  s.seq = produced_;
  s.timestamp = static_cast<double>(produced_) / spec_.samples_per_second;
  const auto& scene = spec_.scenes[spec_.scene_at(s.timestamp)];
  std::discrete_distribution<std::uint32_t> pick(scene.class_priors.begin(),
                                                 scene.class_priors.end());
  s.true_class = pick(rng_);
  s.features.resize(spec_.feature_dim);
  const auto& mean = scene.class_means[s.true_class];
  for (std::size_t j = 0; j < spec_.feature_dim; ++j) {
    s.features[j] = mean[j] + scene.noise_scale * noise_(rng_);
  }
  ++produced_;
  return s;
}

std::vector<Sample> generate_stream(const WorkloadSpec& spec) {
  SampleStream stream(spec);
  std::vector<Sample> out;
  out.reserve(stream.remaining());
  while (auto s = stream.next()) out.push_back(std::move(*s));
  return out;
}

std::vector<Sample> draw_scene_samples(const SceneSpec& scene, const EdgeId& edge_id,
                                       std::size_t count, std::uint64_t seed) {
  WorkloadSpec spec;
  spec.edge_id = edge_id;
  spec.feature_dim = scene.class_means.front().size();
  SceneSpec only = scene;
  only.start_time = 0.0;
  only.duration = static_cast<double>(count);
  spec.scenes = {only};
  spec.samples_per_second = 1.0;
  spec.total_seconds = static_cast<double>(count);
  spec.seed = seed;
  return generate_stream(spec);
}

ModelParams make_initial_params(const ModelDims& dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(dims.feature_dim)));
  std::vector<double> frozen(dims.frozen_size());
  for (double& v : frozen) v = gauss(rng);
  return ModelParams(dims, std::move(frozen), std::vector<double>(dims.trainable_size(), 0.0));
}

double softmax_in_place(std::vector<double>& logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& z : logits) {
    z = std::exp(z - peak);
    sum += z;
  }
  for (double& z : logits) z /= sum;
  return peak + std::log(sum);  // log-sum-exp
}

StudentModel::StudentModel(ModelParams params, std::uint64_t rng_seed, std::size_t batch_size)
    : base_(std::move(params)),
      weights_(base_.trainable().begin(), base_.trainable().end()),
      velocity_(weights_.size(), 0.0),
      rng_(rng_seed),
      batch_size_(std::max<std::size_t>(1, batch_size)) {}

std::vector<double> StudentModel::hidden(std::span<const double> features) const {
  const auto& d = dims();
  if (features.size() != d.feature_dim) {
    throw Error(Errc::DimensionMismatch, "expected " + std::to_string(d.feature_dim) +
                                             " features, got " + std::to_string(features.size()));
  }
  const auto frozen = base_.frozen();
  std::vector<double> h(d.hidden_dim);
  for (std::size_t r = 0; r < d.hidden_dim; ++r) {
    const double* row = frozen.data() + r * d.feature_dim;
    double acc = 0.0;
    for (std::size_t j = 0; j < d.feature_dim; ++j) acc += row[j] * features[j];
    h[r] = acc > 0.0 ? acc : 0.0;
  }
  return h;
}

std::vector<double> StudentModel::logits(std::span<const double> hidden_act) const {
  const auto& d = dims();
  const std::size_t stride = d.hidden_dim + 1;
  std::vector<double> z(d.class_count);
  for (std::size_t c = 0; c < d.class_count; ++c) {
    const double* row = weights_.data() + c * stride;
    double acc = row[d.hidden_dim];
    for (std::size_t r = 0; r < d.hidden_dim; ++r) acc += row[r] * hidden_act[r];
    z[c] = acc;
  }
  return z;
}

InferenceOutput StudentModel::infer(std::span<const double> features) const {
  auto z = logits(hidden(features));
  softmax_in_place(z);
  return InferenceOutput(std::move(z));
}

LossAndGradient StudentModel::loss_and_gradient(std::span<const LabeledSample> batch,
                                                double weight_decay) const {
  const auto& d = dims();
  const std::size_t stride = d.hidden_dim + 1;
  LossAndGradient out;
  out.gradient.assign(weights_.size(), 0.0);
  if (batch.empty()) return out;
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  for (const auto& s : batch) {
    if (s.label >= d.class_count) throw Error(Errc::InvalidArgument, "label out of range");
    const auto h = hidden(s.features);
    auto p = logits(h);
    const double lse = softmax_in_place(p);
    const double z_label = [&] {
      const double* row = weights_.data() + s.label * stride;
      double acc = row[d.hidden_dim];
      for (std::size_t r = 0; r < d.hidden_dim; ++r) acc += row[r] * h[r];
      return acc;
    }();
    out.loss += (lse - z_label) * inv_n;
    for (std::size_t c = 0; c < d.class_count; ++c) {
      const double err = (p[c] - (c == s.label ? 1.0 : 0.0)) * inv_n;
      double* g = out.gradient.data() + c * stride;
      for (std::size_t r = 0; r < d.hidden_dim; ++r) g[r] += err * h[r];
      g[d.hidden_dim] += err;
    }
  }
  if (weight_decay > 0.0) {
    double sq = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      sq += weights_[i] * weights_[i];
      out.gradient[i] += weight_decay * weights_[i];
    }
    out.loss += 0.5 * weight_decay * sq;
  }
  return out;
}

void StudentModel::begin_session() { std::fill(velocity_.begin(), velocity_.end(), 0.0); }

double StudentModel::train_epoch(std::span<const LabeledSample> batch, const HyperParams& h) {
  if (batch.empty()) throw Error(Errc::EmptyTrainSet, "empty training batch");
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);

  double loss_sum = 0.0;
  std::vector<LabeledSample> mini;
  mini.reserve(batch_size_);
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size_) {
    const std::size_t end = std::min(order.size(), begin + batch_size_);
    mini.clear();
    for (std::size_t i = begin; i < end; ++i) mini.push_back(batch[order[i]]);
    const auto lg = loss_and_gradient(mini, h.weight_decay());
    if (!std::isfinite(lg.loss)) throw Error(Errc::NonFiniteLoss, "training loss diverged");
    loss_sum += lg.loss * static_cast<double>(end - begin);
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      velocity_[i] = h.momentum() * velocity_[i] + lg.gradient[i];
      weights_[i] -= h.learning_rate() * velocity_[i];
    }
  }
  for (double w : weights_) {
    if (!std::isfinite(w)) throw Error(Errc::NonFiniteLoss, "parameters diverged");
  }
  return loss_sum / static_cast<double>(batch.size());
}

double StudentModel::evaluate(std::span<const LabeledSample> holdout) const {
  if (holdout.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& s : holdout) {
    const auto z = logits(hidden(s.features));
    if (argmax_lowest(z) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(holdout.size());
}

void StudentModel::set_trainable_values(std::span<const double> values) {
  if (values.size() != weights_.size()) {
    throw Error(Errc::DimensionMismatch, "trainable block size mismatch");
  }
  weights_.assign(values.begin(), values.end());
}

ModelParams StudentModel::params() const {
  return base_.with_trainable_at(weights_, base_.version());
}

void StudentModel::load(std::span<const double> values, std::uint64_t version) {
  base_ = base_.with_trainable_at(std::vector<double>(values.begin(), values.end()), version);
  weights_.assign(values.begin(), values.end());
}

void pretrain(StudentModel& model, std::span<const Sample> samples, const HyperParams& h,
              int epochs) {
  const auto labeled = to_labeled(samples);
  model.begin_session();
  for (int e = 0; e < epochs; ++e) model.train_epoch(labeled, h);
}

Teacher::Teacher(std::size_t class_count, double error_rate, std::uint64_t seed)
    : class_count_(class_count), error_rate_(error_rate), seed_(seed) {
  if (class_count < 2) throw Error(Errc::InvalidArgument, "teacher needs >= 2 classes");
  if (!(error_rate >= 0.0 && error_rate <= 1.0)) {
    throw Error(Errc::InvalidArgument, "teacher error rate must be in [0,1]");
  }
}

std::uint32_t Teacher::label(const Sample& sample) const {
  if (error_rate_ == 0.0) return sample.true_class;
  const std::uint64_t h1 = splitmix64(seed_ ^ splitmix64(hash_string(sample.edge_id) ^ sample.seq));
  const double u = static_cast<double>(h1 >> 11) * 0x1.0p-53;
  if (u >= error_rate_) return sample.true_class;
  const std::uint64_t h2 = splitmix64(h1);
  const auto offset = static_cast<std::uint32_t>(1 + h2 % (class_count_ - 1));
  return static_cast<std::uint32_t>((sample.true_class + offset) % class_count_);
}

std::vector<LabeledSample> to_labeled(std::span<const Sample> samples) {
  std::vector<LabeledSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(LabeledSample{s.features, s.true_class});
  return out;
}

}  // namespace edgesync
