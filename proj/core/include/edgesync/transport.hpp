#pragma once

// Message channels between an edge and the coordinator. The same agent and
// coordinator logic runs over an in-memory pair (tests, embedding) or a TCP
// byte stream carrying proto frames.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "edgesync/proto.hpp"

namespace edgesync {

class Transport {
 public:
  virtual ~Transport() = default;

  /// Thread-safe; one frame is written atomically. Throws Io once closed.
  virtual void send(const proto::Message& msg) = 0;
  /// Blocks for the next message. nullopt once the peer or this end closed.
  /// Malformed frames raise the decoder's error.
  virtual std::optional<proto::Message> receive() = 0;
  /// Idempotent; unblocks a pending receive.
  virtual void close() = 0;

  virtual std::size_t bytes_sent() const = 0;
  virtual std::size_t bytes_received() const = 0;
};

/// Two connected in-memory endpoints. Messages still go through
/// encode/decode so byte counts and codec behaviour match the wire.
std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_memory_pair();

/// Connects to host:port. Throws Io.
std::unique_ptr<Transport> tcp_connect(const std::string& host, std::uint16_t port);

/// Parses "host:port" (port required). Throws Config.
std::pair<std::string, std::uint16_t> split_address(const std::string& address);

class TcpListener {
 public:
  /// Port 0 picks a free port. Throws Io on bind failure.
  TcpListener(const std::string& host, std::uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const noexcept;
  /// Blocks for the next connection; nullptr after close().
  std::unique_ptr<Transport> accept();
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Sends on a background thread so the caller never waits on the network.
/// When more than max_queued messages are pending the oldest is dropped.
class AsyncSender {
 public:
  explicit AsyncSender(Transport& transport, std::size_t max_queued = 1024);
  ~AsyncSender();
  AsyncSender(const AsyncSender&) = delete;
  AsyncSender& operator=(const AsyncSender&) = delete;

  void post(proto::Message msg);
  /// Waits until the queue is empty or the transport failed. Returns false
  /// on timeout.
  bool flush(std::chrono::milliseconds timeout);
  /// Stops after the queued messages are sent (or the transport fails).
  void stop();

  std::size_t dropped() const;
  std::size_t failed() const;

 private:
  void loop();

  Transport& transport_;
  std::size_t max_queued_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<proto::Message> queue_;
  bool sending_ = false;
  bool stopping_ = false;
  std::size_t dropped_ = 0;
  std::size_t failed_ = 0;
  std::thread worker_;
};

}  // namespace edgesync
