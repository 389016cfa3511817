#pragma once

// Live coordinator service. One reader per edge connection feeds a mailbox;
// a single ingest activity applies mailbox messages to the Coordinator, and
// a single cycle activity requests batches, runs the urgency cycle and sends
// the resulting update. Training never blocks ingest for other edges.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "edgesync/coordinator.hpp"
#include "edgesync/transport.hpp"

namespace edgesync {

/// Builds the cloud's copy of an edge's starting model. Throwing rejects
/// the registration.
using ModelFactory = std::function<StudentModel(const proto::Register&)>;

struct CloudServerConfig {
  /// Wall seconds between the starts of consecutive cycles.
  double cycle_period_seconds = 5.0;
  /// How long a cycle waits for the requested batches before selecting.
  double batch_wait_seconds = 1.0;
  std::size_t max_queued_per_edge = 64;
};

struct ServerMetrics {
  std::size_t connections = 0;
  std::size_t registrations = 0;
  std::size_t rejected = 0;
  std::size_t batches = 0;
  std::size_t samples = 0;
  std::size_t acks = 0;
  std::size_t cycles = 0;
  std::size_t idle_cycles = 0;
  std::size_t updates_sent = 0;
  std::size_t updates_abandoned = 0;
  std::size_t bytes_in = 0;
  std::size_t bytes_out = 0;
  std::map<EdgeId, std::size_t> updates_per_edge;
  std::vector<CycleRecord> training_cycles;
};

std::string metrics_to_json(const ServerMetrics& metrics);

class CloudServer {
 public:
  CloudServer(Coordinator& coordinator, ModelFactory factory, CloudServerConfig cfg = {});
  ~CloudServer();
  CloudServer(const CloudServer&) = delete;
  CloudServer& operator=(const CloudServer&) = delete;

  /// Takes ownership of a connected transport and starts its reader.
  void attach(std::unique_ptr<Transport> transport);
  /// Accepts connections from `listener` on a background thread until stop().
  void listen(TcpListener& listener);
  /// Starts the ingest and cycle activities.
  void start();
  /// Graceful: a cycle in progress finishes training, but its update is
  /// abandoned rather than sent. Idempotent.
  void stop();

  /// One cycle, synchronously: request batches, wait, select, train, send.
  /// Used by the cycle activity; callable directly when start() was not.
  CycleResult cycle_once();

  /// Starts only the ingest activity (for driving cycle_once by hand).
  void start_ingest();

  /// Blocks until `count` edges are registered; false on timeout.
  bool wait_for_edges(std::size_t count, std::chrono::milliseconds timeout);
  /// Blocks until every message received so far has been ingested.
  void wait_idle();

  std::size_t registered_edges() const;
  ServerMetrics metrics() const;

 private:
  struct Connection {
    std::uint64_t id = 0;
    std::unique_ptr<Transport> transport;
    std::unique_ptr<AsyncSender> sender;
    std::thread reader;
    EdgeId edge_id;  // empty until registered
  };

  struct Mail {
    std::uint64_t connection = 0;
    proto::Message msg;
  };

  void read_loop(Connection& conn);
  void ingest_loop();
  void cycle_loop();
  void handle(const Mail& mail);
  void send_to(std::uint64_t connection, proto::Message msg);

  Coordinator& coordinator_;
  ModelFactory factory_;
  CloudServerConfig cfg_;

  mutable std::mutex conn_mu_;
  std::map<std::uint64_t, std::unique_ptr<Connection>> connections_;
  std::map<EdgeId, std::uint64_t> edge_connection_;
  std::uint64_t next_connection_ = 1;
  std::condition_variable registered_cv_;

  std::mutex mail_mu_;
  std::condition_variable mail_cv_;
  std::condition_variable drained_cv_;
  std::deque<Mail> mailbox_;
  bool ingesting_ = false;
  std::map<EdgeId, std::size_t> batches_seen_;

  mutable std::mutex metrics_mu_;
  ServerMetrics metrics_;

  std::atomic<bool> stopping_{false};
  std::mutex stop_mu_;
  std::condition_variable stop_cv_;
  TcpListener* listener_ = nullptr;
  std::thread accept_thread_;
  std::thread ingest_thread_;
  std::thread cycle_thread_;
  std::uint64_t next_request_ = 0;
};

}  // namespace edgesync
