#pragma once

// Cloud-side coordinator: labels uploaded samples with the teacher, keeps a
// per-edge accuracy bank and training buffer, picks the most urgent edge
// each cycle, retrains its head with early stopping and produces the update.
//
// Thread-safe. Training runs outside the registry lock, so ingest for other
// edges proceeds while one edge trains; batches for the edge being trained
// are held back and applied once its update is produced.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "edgesync/clock.hpp"
#include "edgesync/modelkit.hpp"
#include "edgesync/proto.hpp"
#include "edgesync/trainer.hpp"
#include "edgesync/urgency.hpp"

namespace edgesync {

/// Source of ground-truth labels for uploaded samples (the teacher model).
class LabelSource {
 public:
  virtual ~LabelSource() = default;
  virtual std::uint32_t label(const EdgeId& edge_id, const proto::UploadedSample& sample) const = 0;
};

/// Simulated resource costs, in seconds. They are charged through the
/// coordinator's Spend hook: a simulation advances its clock, a live
/// deployment normally leaves them at zero.
struct CostModel {
  double label_seconds_per_sample = 0.0;
  double train_seconds_per_sample_epoch = 0.0;
  double seconds_per_byte = 0.0;
  double profiling_seconds_per_cycle = 0.0;
};

using Spend = std::function<void(double seconds)>;

struct CoordinatorConfig {
  UrgencyConfig urgency;
  TrainerConfig trainer;
  CostModel costs;
  std::size_t buffer_capacity = 2000;
  /// An edge is only retrained when its urgency exceeds this. Keeps stable
  /// edges from being retrained on accuracy noise.
  double min_urgency = 50.0;
  /// A full bank whose mean accuracy is below this also makes an edge
  /// eligible. Urgency only sees decline relative to the first batch after
  /// an update, so a model that is already poor when its bank starts would
  /// otherwise never be picked again. 0 disables.
  double accuracy_floor = 0.6;
  std::size_t batch_size = 32;

  void validate() const;
};

struct CycleRecord {
  std::uint64_t cycle_id = 0;
  double start_time = 0.0;
  double end_time = 0.0;
  std::string selected;  // empty when the cycle was idle
  std::vector<std::pair<EdgeId, double>> urgencies;
  std::size_t train_set_size = 0;
  int epochs = 0;
  int best_epoch = 0;
  double best_eval = 0.0;
  std::string stop_reason;
  std::uint64_t version = 0;

  double label_seconds = 0.0;
  double train_seconds = 0.0;
  double profiling_seconds = 0.0;
  double communication_seconds = 0.0;  // filled in by whoever moves the bytes

  bool idle() const noexcept { return selected.empty(); }
  double total_seconds() const noexcept {
    return label_seconds + train_seconds + profiling_seconds + communication_seconds;
  }
};

struct CycleResult {
  CycleRecord record;
  std::optional<proto::ModelUpdate> update;
};

struct EdgeSnapshot {
  EdgeId edge_id;
  std::uint64_t version = 0;
  std::uint64_t acked_version = 0;
  double last_update_time = 0.0;
  std::size_t bank_size = 0;
  std::size_t buffer_size = 0;
  std::size_t samples_ingested = 0;
  std::size_t updates = 0;
  double urgency = 0.0;
};

class Coordinator {
 public:
  Coordinator(CoordinatorConfig cfg, const Clock& clock, std::shared_ptr<const LabelSource> labels,
              Spend spend = {});

  /// Registers an edge with the model it starts from. The frozen checksum and
  /// dimensions must match `initial` (ChecksumMismatch / DimensionMismatch).
  /// Re-registering a known edge is a resync request: its state is kept and
  /// the current model is returned for re-sending when one was dispatched.
  std::optional<proto::ModelUpdate> register_edge(const proto::Register& msg, StudentModel initial);

  /// Labels the batch, records accuracy in the bank (in seq order) and
  /// appends to the training buffer. Throws UnknownEdge.
  void ingest_batch(const proto::SampleBatch& batch);

  void acknowledge(const proto::UpdateAck& ack);

  /// One urgency-driven cycle. Eligible edges have a full bank and either
  /// urgency above min_urgency or bank accuracy below accuracy_floor; the
  /// most urgent eligible edge is trained. Idle (no update) when none is.
  CycleResult run_cycle();

  /// Retrains one edge unconditionally: early stopping, or exactly
  /// `fixed_epochs` epochs when given. Throws UnknownEdge, EmptyTrainSet.
  CycleResult train_edge(const EdgeId& edge_id, std::optional<int> fixed_epochs = {});

  std::vector<EdgeSnapshot> snapshot() const;
  std::vector<EdgeId> edge_ids() const;
  std::optional<proto::ModelUpdate> current_model(const EdgeId& edge_id) const;
  const CoordinatorConfig& config() const noexcept { return cfg_; }
  std::uint64_t cycles_run() const;

 private:
  struct Entry {
    EdgeId edge_id;
    EdgeBank bank;
    std::deque<LabeledSample> buffer;
    StudentModel model;
    std::uint64_t acked_version = 0;
    double last_update_time = 0.0;
    std::size_t samples_ingested = 0;
    std::size_t updates = 0;
    bool training = false;
    std::vector<std::pair<std::vector<LabeledSample>, std::vector<AccuracyRecord>>> held;
  };

  struct Labeled {
    std::vector<LabeledSample> samples;
    std::vector<AccuracyRecord> records;
  };

  void spend(double seconds) const;
  Labeled label_batch(const proto::SampleBatch& batch) const;
  void apply_labeled(Entry& entry, std::vector<LabeledSample> samples,
                     const std::vector<AccuracyRecord>& records);
  CycleResult train_locked_edge(std::unique_lock<std::mutex>& lock, Entry& entry,
                                CycleRecord record, std::optional<int> fixed_epochs);
  double take_label_seconds();

  CoordinatorConfig cfg_;
  const Clock& clock_;
  std::shared_ptr<const LabelSource> labels_;
  Spend spend_;

  mutable std::mutex mu_;
  std::map<EdgeId, Entry> edges_;
  std::uint64_t next_cycle_ = 0;
  double pending_label_seconds_ = 0.0;
};

}  // namespace edgesync
