#pragma once

// Live edge service: drives an EdgeAgent over a replayed stream and talks to
// the coordinator through a Transport.
//
// Two activities: the inference loop, which owns the agent, and a reader
// that queues incoming control messages. The loop applies them between
// inference steps. Outgoing messages go through an AsyncSender, so a stalled
// coordinator never slows inference down.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <span>
#include <thread>

#include "edgesync/edge_agent.hpp"
#include "edgesync/transport.hpp"

namespace edgesync {

struct EdgeRunnerConfig {
  /// Stream seconds per wall second. 0 replays as fast as possible.
  double speed = 0.0;
  /// Close and upload every this many stream seconds without waiting for a
  /// request (interval baselines). 0: only on RequestBatch.
  double local_window_seconds = 0.0;
  /// Wall seconds to keep answering requests once the stream is exhausted.
  double linger_seconds = 0.0;
  std::size_t max_queued = 1024;
};

struct EdgeRunStats {
  std::size_t inferences = 0;
  std::size_t scored = 0;
  std::size_t correct = 0;
  std::size_t windows = 0;
  std::size_t batches_sent = 0;
  std::size_t updates_applied = 0;
  std::size_t stale_updates = 0;
  std::size_t resyncs = 0;
  std::size_t dropped = 0;
  std::uint64_t version = 0;

  double accuracy() const noexcept {
    return scored == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(scored);
  }
};

class EdgeRunner {
 public:
  EdgeRunner(EdgeAgent agent, Transport& transport, EdgeRunnerConfig cfg = {});
  ~EdgeRunner();
  EdgeRunner(const EdgeRunner&) = delete;
  EdgeRunner& operator=(const EdgeRunner&) = delete;

  /// Registers, then steps through `stream`. teacher_labels (same length as
  /// the stream, or empty) only feed the accuracy counters. Call once.
  EdgeRunStats run(std::span<const Sample> stream, std::span<const std::uint32_t> teacher_labels = {});

  /// Thread-safe; makes run() return after the current step.
  void stop();

  /// Only meaningful once run() has returned.
  const EdgeAgent& agent() const noexcept { return agent_; }

 private:
  void read_loop();
  bool drain_inbox(double now, EdgeRunStats& stats);
  void handle(const proto::Message& msg, double now, EdgeRunStats& stats);
  void close_and_upload(double now, EdgeRunStats& stats);

  EdgeAgent agent_;
  Transport& transport_;
  EdgeRunnerConfig cfg_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<proto::Message> inbox_;
  bool peer_closed_ = false;
  std::atomic<bool> stop_{false};
  std::unique_ptr<AsyncSender> sender_;
  std::thread reader_;
};

}  // namespace edgesync
