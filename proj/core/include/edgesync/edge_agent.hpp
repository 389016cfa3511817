#pragma once

// Edge-side agent: runs the student over the local stream, caches every
// inference for the current window, filters and packages the window on
// close, and applies model updates pushed by the coordinator.

#include <cstdint>
#include <optional>
#include <vector>

#include "edgesync/filter.hpp"
#include "edgesync/modelkit.hpp"
#include "edgesync/proto.hpp"

namespace edgesync {

struct InferenceRecord {
  std::uint64_t seq = 0;
  double timestamp = 0.0;
  InferenceOutput output;
  std::uint64_t version = 0;
  std::optional<bool> correct;
};

struct WindowStats {
  std::uint64_t window_id = 0;
  std::size_t cache_size = 0;
  std::size_t uploaded = 0;
  std::size_t scored = 0;  // inferences with a known label
  std::size_t correct = 0;
  std::uint64_t version = 0;
  double window_start = 0.0;
  double window_end = 0.0;

  double mean_accuracy() const noexcept {
    return scored == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(scored);
  }
};

struct WindowClose {
  std::optional<proto::SampleBatch> batch;  // empty window: nothing to send
  WindowStats stats;
};

enum class UpdateStatus { Applied, Stale, Gap };

struct UpdateOutcome {
  UpdateStatus status = UpdateStatus::Applied;
  /// What the agent sends back: an ack, or a Register to resynchronise.
  proto::Message reply;
};

class EdgeAgent {
 public:
  EdgeAgent(EdgeId edge_id, StudentModel model, FilterConfig filter, double start_time = 0.0);

  /// Infers with the current model version and caches the result.
  /// teacher_label, when known (simulation), feeds the accuracy counters.
  /// Throws DimensionMismatch.
  InferenceRecord step(const Sample& sample, std::optional<std::uint32_t> teacher_label = {});

  /// Filters the cache with this agent's FilterConfig. The timeliness window
  /// is the actual window length (now - window start) when positive. The
  /// window id advances even when the cache is empty.
  WindowClose close_window(double now);
  WindowClose close_window(const FilterConfig& cfg, double now);

  /// Requires msg.version == version + 1 unless a resync is pending.
  /// Throws UnknownEdge, StaleVersion or VersionGap; state is unchanged on error.
  void apply_update(const proto::ModelUpdate& msg);

  /// apply_update with the protocol reactions folded in: Applied and Stale
  /// reply with an ack of the current version, Gap replies with Register and
  /// arms the resync.
  UpdateOutcome handle_update(const proto::ModelUpdate& msg);

  proto::Register registration() const;

  const EdgeId& edge_id() const noexcept { return edge_id_; }
  std::uint64_t version() const noexcept { return model_.version(); }
  std::uint64_t window_id() const noexcept { return window_id_; }
  const FilterCache& cache() const noexcept { return cache_; }
  const StudentModel& model() const noexcept { return model_; }
  const FilterConfig& filter_config() const noexcept { return filter_; }
  bool awaiting_resync() const noexcept { return awaiting_resync_; }

  std::size_t total_inferences() const noexcept { return total_inferences_; }
  std::size_t total_correct() const noexcept { return total_correct_; }

 private:
  EdgeId edge_id_;
  StudentModel model_;
  FilterConfig filter_;
  FilterCache cache_;
  StreamOrderGuard order_;
  std::uint64_t window_id_ = 0;
  bool awaiting_resync_ = false;

  std::size_t window_scored_ = 0;
  std::size_t window_correct_ = 0;
  std::size_t total_inferences_ = 0;
  std::size_t total_correct_ = 0;
};

}  // namespace edgesync
