#include "edgesync/edge_runner.hpp"

#include <chrono>

#include "edgesync/error.hpp"
#include "log.hpp"

namespace edgesync {

EdgeRunner::EdgeRunner(EdgeAgent agent, Transport& transport, EdgeRunnerConfig cfg)
    : agent_(std::move(agent)), transport_(transport), cfg_(cfg) {
  if (cfg_.speed < 0.0 || cfg_.local_window_seconds < 0.0 || cfg_.linger_seconds < 0.0) {
    throw Error(Errc::Config, "edge runner speeds and durations must be >= 0");
  }
}

EdgeRunner::~EdgeRunner() {
  stop();
  if (reader_.joinable()) {
    transport_.close();
    reader_.join();
  }
}

void EdgeRunner::stop() {
  stop_ = true;
  cv_.notify_all();
}

void EdgeRunner::read_loop() {
  for (;;) {
    std::optional<proto::Message> msg;
    try {
      msg = transport_.receive();
    } catch (const Error& e) {
      detail::logger().warn("event=receive_failed edge={} error=\"{}\"", agent_.edge_id(), e.what());
    }
    std::lock_guard lock(mu_);
    if (!msg) {
      peer_closed_ = true;
      cv_.notify_all();
      return;
    }
    inbox_.push_back(std::move(*msg));
    cv_.notify_all();
  }
}

bool EdgeRunner::drain_inbox(double now, EdgeRunStats& stats) {
  std::deque<proto::Message> pending;
  bool closed = false;
  {
    std::lock_guard lock(mu_);
    pending.swap(inbox_);
    closed = peer_closed_;
  }
  for (const auto& msg : pending) handle(msg, now, stats);
  return closed;
}

void EdgeRunner::close_and_upload(double now, EdgeRunStats& stats) {
  auto closed = agent_.close_window(now);
  ++stats.windows;
  const auto& w = closed.stats;
  detail::logger().info(
      "event=window edge={} window_id={} accuracy={:.4f} version={} cache_size={} uploaded={}",
      agent_.edge_id(), w.window_id, w.mean_accuracy(), w.version, w.cache_size, w.uploaded);
  if (closed.batch) {
    sender_->post(std::move(*closed.batch));
    ++stats.batches_sent;
  }
}

void EdgeRunner::handle(const proto::Message& msg, double now, EdgeRunStats& stats) {
  if (std::holds_alternative<proto::RequestBatch>(msg)) {
    close_and_upload(now, stats);
  } else if (const auto* update = std::get_if<proto::ModelUpdate>(&msg)) {
    std::optional<UpdateOutcome> result;
    try {
      result = agent_.handle_update(*update);
    } catch (const Error& e) {
      detail::logger().warn("event=update_rejected edge={} error=\"{}\"", agent_.edge_id(), e.what());
      return;
    }
    auto& outcome = *result;
    switch (outcome.status) {
      case UpdateStatus::Applied:
        ++stats.updates_applied;
        detail::logger().info("event=update edge={} version={} t={:.3f}", agent_.edge_id(),
                              agent_.version(), now);
        break;
      case UpdateStatus::Stale:
        ++stats.stale_updates;
        break;
      case UpdateStatus::Gap:
        ++stats.resyncs;
        detail::logger().warn("event=resync edge={} have={} got={}", agent_.edge_id(),
                              agent_.version(), update->version);
        break;
    }
    sender_->post(std::move(outcome.reply));
  } else {
    detail::logger().warn("event=unexpected_message edge={} tag={}", agent_.edge_id(),
                          proto::to_string(proto::tag_of(msg)));
  }
}

EdgeRunStats EdgeRunner::run(std::span<const Sample> stream,
                             std::span<const std::uint32_t> teacher_labels) {
  if (reader_.joinable()) throw Error(Errc::InvalidArgument, "EdgeRunner::run called twice");
  if (!teacher_labels.empty() && teacher_labels.size() != stream.size()) {
    throw Error(Errc::LengthMismatch, "teacher labels must match the stream length");
  }
  using WallClock = std::chrono::steady_clock;
  EdgeRunStats stats;
  sender_ = std::make_unique<AsyncSender>(transport_, cfg_.max_queued);
  reader_ = std::thread([this] { read_loop(); });
  sender_->post(agent_.registration());

  const auto wall_start = WallClock::now();
  const double t0 = stream.empty() ? 0.0 : stream.front().timestamp;
  double now = t0;
  double last_close = t0;
  bool peer_closed = false;

  for (std::size_t i = 0; i < stream.size() && !stop_ && !peer_closed; ++i) {
    const Sample& sample = stream[i];
    if (cfg_.speed > 0.0) {
      const auto due = wall_start + std::chrono::duration_cast<WallClock::duration>(
                                        std::chrono::duration<double>((sample.timestamp - t0) / cfg_.speed));
      // Wake early for control messages so requests are not held for a
      // whole inter-sample gap.
      for (;;) {
        {
          std::unique_lock lock(mu_);
          cv_.wait_until(lock, due, [&] { return stop_ || peer_closed_ || !inbox_.empty(); });
        }
        peer_closed = drain_inbox(now, stats);
        if (stop_ || peer_closed || WallClock::now() >= due) break;
      }
    } else {
      peer_closed = drain_inbox(now, stats);
    }
    if (stop_ || peer_closed) break;

    now = sample.timestamp;
    std::optional<std::uint32_t> label;
    if (!teacher_labels.empty()) label = teacher_labels[i];
    const auto rec = agent_.step(sample, label);
    ++stats.inferences;
    if (rec.correct) {
      ++stats.scored;
      if (*rec.correct) ++stats.correct;
    }
    if (cfg_.local_window_seconds > 0.0 && now - last_close >= cfg_.local_window_seconds) {
      close_and_upload(now, stats);
      last_close = now;
    }
  }

  const auto linger_end = WallClock::now() + std::chrono::duration_cast<WallClock::duration>(
                                                 std::chrono::duration<double>(cfg_.linger_seconds));
  while (!stop_ && !peer_closed && WallClock::now() < linger_end) {
    {
      std::unique_lock lock(mu_);
      cv_.wait_until(lock, linger_end, [&] { return stop_ || peer_closed_ || !inbox_.empty(); });
    }
    peer_closed = drain_inbox(now, stats);
  }

  sender_->flush(std::chrono::seconds(2));
  stats.dropped = sender_->dropped();
  stats.version = agent_.version();
  transport_.close();
  sender_->stop();
  reader_.join();
  return stats;
}

}  // namespace edgesync
