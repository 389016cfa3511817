#include "edgesync/coordinator.hpp"

#include <algorithm>

#include "edgesync/error.hpp"
#include "log.hpp"

namespace edgesync {
namespace {

// Charges the simulated per-epoch training cost through the spend hook.
class CostedModel final : public TrainableModel {
 public:
  CostedModel(TrainableModel& inner, double seconds_per_sample_epoch,
              const std::function<void(double)>& spend)
      : inner_(inner), rate_(seconds_per_sample_epoch), spend_(spend) {}

  void begin_session() override { inner_.begin_session(); }
  double train_epoch(std::span<const LabeledSample> batch, const HyperParams& h) override {
    const double loss = inner_.train_epoch(batch, h);
    if (rate_ > 0.0) spend_(rate_ * static_cast<double>(batch.size()));
    return loss;
  }
  double evaluate(std::span<const LabeledSample> holdout) const override {
    return inner_.evaluate(holdout);
  }
  std::vector<double> trainable_values() const override { return inner_.trainable_values(); }
  void set_trainable_values(std::span<const double> values) override {
    inner_.set_trainable_values(values);
  }

 private:
  TrainableModel& inner_;
  double rate_;
  const std::function<void(double)>& spend_;
};

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void CoordinatorConfig::validate() const {
  trainer.validate();
  if (buffer_capacity == 0) throw Error(Errc::Config, "buffer_capacity must be positive");
  if (!(min_urgency >= 0.0)) throw Error(Errc::Config, "min_urgency must be >= 0");
  if (!(accuracy_floor >= 0.0 && accuracy_floor <= 1.0)) {
    throw Error(Errc::Config, "accuracy_floor must be in [0,1]");
  }
  if (batch_size == 0) throw Error(Errc::Config, "batch_size must be positive");
  const auto& c = costs;
  for (double v : {c.label_seconds_per_sample, c.train_seconds_per_sample_epoch, c.seconds_per_byte,
                   c.profiling_seconds_per_cycle}) {
    if (!(v >= 0.0)) throw Error(Errc::Config, "costs must be non-negative");
  }
}

Coordinator::Coordinator(CoordinatorConfig cfg, const Clock& clock,
                         std::shared_ptr<const LabelSource> labels, Spend spend)
    : cfg_(std::move(cfg)), clock_(clock), labels_(std::move(labels)), spend_(std::move(spend)) {
  cfg_.validate();
  if (!labels_) throw Error(Errc::InvalidArgument, "coordinator needs a label source");
}

void Coordinator::spend(double seconds) const {
  if (seconds > 0.0 && spend_) spend_(seconds);
}

std::optional<proto::ModelUpdate> Coordinator::register_edge(const proto::Register& msg,
                                                             StudentModel initial) {
  const auto params = initial.params();
  if (msg.feature_dim != params.dims().feature_dim || msg.class_count != params.dims().class_count) {
    throw Error(Errc::DimensionMismatch, "edge '" + msg.edge_id + "' reports different dimensions");
  }
  if (msg.frozen_checksum != params.frozen_checksum()) {
    throw Error(Errc::ChecksumMismatch, "edge '" + msg.edge_id + "' runs a different backbone");
  }
  std::lock_guard lock(mu_);
  if (auto it = edges_.find(msg.edge_id); it != edges_.end()) {
    detail::logger().info("event=resync edge={} version={}", msg.edge_id, it->second.model.version());
    if (it->second.model.version() == 0) return std::nullopt;
    return proto::ModelUpdate{msg.edge_id, it->second.model.version(),
                              it->second.model.trainable_values()};
  }
  edges_.emplace(msg.edge_id, Entry{msg.edge_id, EdgeBank(msg.edge_id, cfg_.urgency.capacity()),
                                    {}, std::move(initial), 0, clock_.now(), 0, 0, false, {}});
  detail::logger().info("event=register edge={}", msg.edge_id);
  return std::nullopt;
}

Coordinator::Labeled Coordinator::label_batch(const proto::SampleBatch& batch) const {
  std::vector<const proto::UploadedSample*> ordered;
  ordered.reserve(batch.samples.size());
  for (const auto& s : batch.samples) ordered.push_back(&s);
  // Uploads arrive in quality order; the bank wants stream order.
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->seq < b->seq; });

  Labeled out;
  out.samples.reserve(ordered.size());
  out.records.reserve(ordered.size());
  for (const auto* s : ordered) {
    const auto label = labels_->label(batch.edge_id, *s);
    out.samples.push_back(LabeledSample{s->features, label});
    out.records.emplace_back(s->predicted == label ? 1 : 0, s->seq);
  }
  return out;
}

void Coordinator::apply_labeled(Entry& entry, std::vector<LabeledSample> samples,
                                const std::vector<AccuracyRecord>& records) {
  for (const auto& r : records) entry.bank.record(r.correct, r.seq);
  for (auto& s : samples) {
    entry.buffer.push_back(std::move(s));
    if (entry.buffer.size() > cfg_.buffer_capacity) entry.buffer.pop_front();
  }
}

void Coordinator::ingest_batch(const proto::SampleBatch& batch) {
  {
    std::lock_guard lock(mu_);
    if (!edges_.contains(batch.edge_id)) {
      throw Error(Errc::UnknownEdge, "batch from unregistered edge '" + batch.edge_id + "'");
    }
  }
  const double t0 = clock_.now();
  auto labeled = label_batch(batch);
  spend(cfg_.costs.label_seconds_per_sample * static_cast<double>(batch.samples.size()));
  const double elapsed = clock_.now() - t0;

  std::lock_guard lock(mu_);
  auto& entry = edges_.at(batch.edge_id);
  entry.samples_ingested += labeled.samples.size();
  pending_label_seconds_ += elapsed;
  if (entry.training) {
    entry.held.emplace_back(std::move(labeled.samples), std::move(labeled.records));
    return;
  }
  apply_labeled(entry, std::move(labeled.samples), labeled.records);
}

void Coordinator::acknowledge(const proto::UpdateAck& ack) {
  std::lock_guard lock(mu_);
  auto it = edges_.find(ack.edge_id);
  if (it == edges_.end()) throw Error(Errc::UnknownEdge, "ack from '" + ack.edge_id + "'");
  it->second.acked_version = std::max(it->second.acked_version, ack.version);
}

double Coordinator::take_label_seconds() {
  const double s = pending_label_seconds_;
  pending_label_seconds_ = 0.0;
  return s;
}

CycleResult Coordinator::run_cycle() {
  std::unique_lock lock(mu_);
  CycleRecord record;
  record.cycle_id = next_cycle_++;
  record.start_time = clock_.now();
  record.label_seconds = take_label_seconds();

  std::vector<EdgeCandidate> eligible;
  for (const auto& [id, entry] : edges_) {
    const double d = bank_urgency(entry.bank, cfg_.urgency);
    record.urgencies.emplace_back(id, d);
    if (entry.training || !entry.bank.full()) continue;
    std::size_t hits = 0;
    for (const auto& r : entry.bank.records()) hits += static_cast<std::size_t>(r.correct);
    const double acc = static_cast<double>(hits) / static_cast<double>(entry.bank.size());
    if (d > cfg_.min_urgency || acc < cfg_.accuracy_floor) {
      eligible.push_back(EdgeCandidate{id, d, entry.last_update_time});
    }
  }
  if (eligible.empty()) {
    detail::logger().debug("event=cycle cycle={} idle=true", record.cycle_id);
    return CycleResult{std::move(record), std::nullopt};
  }
  const EdgeId chosen = select_edge(eligible);
  return train_locked_edge(lock, edges_.at(chosen), std::move(record), std::nullopt);
}

CycleResult Coordinator::train_edge(const EdgeId& edge_id, std::optional<int> fixed_epochs) {
  std::unique_lock lock(mu_);
  auto it = edges_.find(edge_id);
  if (it == edges_.end()) throw Error(Errc::UnknownEdge, "no edge '" + edge_id + "'");
  CycleRecord record;
  record.cycle_id = next_cycle_++;
  record.start_time = clock_.now();
  record.label_seconds = take_label_seconds();
  for (const auto& [id, entry] : edges_) {
    record.urgencies.emplace_back(id, bank_urgency(entry.bank, cfg_.urgency));
  }
  return train_locked_edge(lock, it->second, std::move(record), fixed_epochs);
}

CycleResult Coordinator::train_locked_edge(std::unique_lock<std::mutex>& lock, Entry& entry,
                                           CycleRecord record, std::optional<int> fixed_epochs) {
  if (entry.buffer.empty()) throw Error(Errc::EmptyTrainSet, "no labelled data for " + entry.edge_id);
  record.selected = entry.edge_id;
  std::vector<LabeledSample> data(entry.buffer.begin(), entry.buffer.end());
  StudentModel model = entry.model;
  // Holdout split depends only on the edge and how often it was trained, so
  // identical edges see identical sessions regardless of scheduling.
  const std::uint64_t split_seed =
      cfg_.trainer.split_seed ^ name_hash(entry.edge_id) ^ (entry.updates * 0x9E3779B97F4A7C15ULL);
  entry.training = true;
  lock.unlock();

  CycleResult result;
  try {
    const double p0 = clock_.now();
    spend(cfg_.costs.profiling_seconds_per_cycle);
    record.profiling_seconds = clock_.now() - p0;

    TrainerConfig tcfg = cfg_.trainer;
    tcfg.split_seed = split_seed;
    const std::function<void(double)> charge = [this](double s) { spend(s); };
    CostedModel costed(model, cfg_.costs.train_seconds_per_sample_epoch, charge);
    const double t0 = clock_.now();
    const TrainReport report = fixed_epochs
                                   ? train_fixed_epochs(costed, data, *fixed_epochs, tcfg, clock_)
                                   : train_until_stop(costed, data, tcfg, clock_);
    record.train_seconds = clock_.now() - t0;
    record.train_set_size = data.size();
    record.epochs = report.epochs_run;
    record.best_epoch = report.best_epoch;
    record.best_eval = report.best_eval;
    record.stop_reason = to_string(report.stop_reason);

    const auto values = model.trainable_values();
    model.load(values, entry.model.version() + 1);
    record.version = model.version();
    result.update = proto::ModelUpdate{entry.edge_id, model.version(), values};
  } catch (...) {
    lock.lock();
    entry.training = false;
    throw;
  }

  record.end_time = clock_.now();
  lock.lock();
  entry.model = std::move(model);
  entry.last_update_time = clock_.now();
  entry.bank.clear();
  ++entry.updates;
  entry.training = false;
  // Held-back batches were inferred by the previous model, so only their
  // samples are kept; the fresh bank should reflect the new version.
  for (auto& [samples, records] : entry.held) apply_labeled(entry, std::move(samples), {});
  entry.held.clear();

  detail::logger().info(
      "event=cycle cycle={} edge={} version={} train_set={} epochs={} best_epoch={} best_eval={:.4f} "
      "stop={} label_s={:.3f} train_s={:.3f}",
      record.cycle_id, record.selected, record.version, record.train_set_size, record.epochs,
      record.best_epoch, record.best_eval, record.stop_reason, record.label_seconds,
      record.train_seconds);
  result.record = std::move(record);
  return result;
}

std::vector<EdgeSnapshot> Coordinator::snapshot() const {
  std::lock_guard lock(mu_);
  std::vector<EdgeSnapshot> out;
  for (const auto& [id, e] : edges_) {
    out.push_back(EdgeSnapshot{id, e.model.version(), e.acked_version, e.last_update_time,
                               e.bank.size(), e.buffer.size(), e.samples_ingested, e.updates,
                               bank_urgency(e.bank, cfg_.urgency)});
  }
  return out;
}

std::vector<EdgeId> Coordinator::edge_ids() const {
  std::lock_guard lock(mu_);
  std::vector<EdgeId> out;
  for (const auto& [id, e] : edges_) out.push_back(id);
  return out;
}

std::optional<proto::ModelUpdate> Coordinator::current_model(const EdgeId& edge_id) const {
  std::lock_guard lock(mu_);
  auto it = edges_.find(edge_id);
  if (it == edges_.end()) return std::nullopt;
  return proto::ModelUpdate{edge_id, it->second.model.version(), it->second.model.trainable_values()};
}

std::uint64_t Coordinator::cycles_run() const {
  std::lock_guard lock(mu_);
  return next_cycle_;
}

}  // namespace edgesync
