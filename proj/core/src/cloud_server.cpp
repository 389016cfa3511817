#include "edgesync/cloud_server.hpp"

#include <json.hpp>

#include "edgesync/error.hpp"
#include "log.hpp"

namespace edgesync {

namespace {

using Json = nlohmann::ordered_json;

template <class Rep, class Period>
std::chrono::steady_clock::time_point after(std::chrono::duration<Rep, Period> d) {
  return std::chrono::steady_clock::now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(d);
}

std::chrono::duration<double> seconds(double s) { return std::chrono::duration<double>(s); }

}  // namespace

std::string metrics_to_json(const ServerMetrics& m) {
  Json j;
  j["connections"] = m.connections;
  j["registrations"] = m.registrations;
  j["rejected"] = m.rejected;
  j["batches"] = m.batches;
  j["samples"] = m.samples;
  j["acks"] = m.acks;
  j["cycles"] = m.cycles;
  j["idle_cycles"] = m.idle_cycles;
  j["updates_sent"] = m.updates_sent;
  j["updates_abandoned"] = m.updates_abandoned;
  j["bytes_in"] = m.bytes_in;
  j["bytes_out"] = m.bytes_out;
  Json per_edge = Json::object();
  for (const auto& [id, n] : m.updates_per_edge) per_edge[id] = n;
  j["updates_per_edge"] = per_edge;
  Json cycles = Json::array();
  for (const auto& c : m.training_cycles) {
    cycles.push_back(Json{{"cycle_id", c.cycle_id},
                          {"selected", c.selected},
                          {"start_time", c.start_time},
                          {"end_time", c.end_time},
                          {"train_set_size", c.train_set_size},
                          {"epochs", c.epochs},
                          {"best_epoch", c.best_epoch},
                          {"best_eval", c.best_eval},
                          {"stop_reason", c.stop_reason},
                          {"version", c.version},
                          {"label_seconds", c.label_seconds},
                          {"train_seconds", c.train_seconds}});
  }
  j["training_cycles"] = cycles;
  return j.dump(2) + "\n";
}

CloudServer::CloudServer(Coordinator& coordinator, ModelFactory factory, CloudServerConfig cfg)
    : coordinator_(coordinator), factory_(std::move(factory)), cfg_(cfg) {
  if (!factory_) throw Error(Errc::Config, "cloud server needs a model factory");
  if (!(cfg_.cycle_period_seconds > 0.0) || cfg_.batch_wait_seconds < 0.0) {
    throw Error(Errc::Config, "cycle period must be > 0 and batch wait >= 0");
  }
}

CloudServer::~CloudServer() { stop(); }

void CloudServer::attach(std::unique_ptr<Transport> transport) {
  std::lock_guard lock(conn_mu_);
  if (stopping_) {
    transport->close();
    return;
  }
  auto conn = std::make_unique<Connection>();
  conn->id = next_connection_++;
  conn->transport = std::move(transport);
  conn->sender = std::make_unique<AsyncSender>(*conn->transport, cfg_.max_queued_per_edge);
  Connection& ref = *conn;
  connections_.emplace(conn->id, std::move(conn));
  ref.reader = std::thread([this, &ref] { read_loop(ref); });
  std::lock_guard mlock(metrics_mu_);
  ++metrics_.connections;
}

void CloudServer::listen(TcpListener& listener) {
  if (accept_thread_.joinable()) throw Error(Errc::InvalidArgument, "already listening");
  listener_ = &listener;
  accept_thread_ = std::thread([this, &listener] {
    while (!stopping_) {
      std::unique_ptr<Transport> t;
      try {
        t = listener.accept();
      } catch (const Error& e) {
        detail::logger().warn("event=accept_failed error=\"{}\"", e.what());
        continue;
      }
      if (!t) break;
      attach(std::move(t));
    }
  });
}

void CloudServer::start_ingest() {
  if (!ingest_thread_.joinable()) ingest_thread_ = std::thread([this] { ingest_loop(); });
}

void CloudServer::start() {
  start_ingest();
  if (!cycle_thread_.joinable()) cycle_thread_ = std::thread([this] { cycle_loop(); });
}

void CloudServer::stop() {
  if (stopping_.exchange(true)) return;
  stop_cv_.notify_all();
  mail_cv_.notify_all();
  drained_cv_.notify_all();
  if (listener_ != nullptr) listener_->close();
  if (accept_thread_.joinable()) accept_thread_.join();
  if (cycle_thread_.joinable()) cycle_thread_.join();
  if (ingest_thread_.joinable()) ingest_thread_.join();

  std::vector<Connection*> conns;
  {
    std::lock_guard lock(conn_mu_);
    for (auto& [id, c] : connections_) conns.push_back(c.get());
  }
  for (auto* c : conns) {
    c->sender->flush(std::chrono::milliseconds(500));
    c->transport->close();
    c->sender->stop();
    if (c->reader.joinable()) c->reader.join();
  }
  const auto m = metrics();
  detail::logger().info("event=shutdown cycles={} updates_sent={} abandoned={} batches={}", m.cycles,
                        m.updates_sent, m.updates_abandoned, m.batches);
}

void CloudServer::read_loop(Connection& conn) {
  for (;;) {
    std::optional<proto::Message> msg;
    try {
      msg = conn.transport->receive();
    } catch (const Error& e) {
      detail::logger().warn("event=receive_failed connection={} error=\"{}\"", conn.id, e.what());
    }
    if (!msg) break;
    {
      std::lock_guard lock(mail_mu_);
      mailbox_.push_back(Mail{conn.id, std::move(*msg)});
    }
    mail_cv_.notify_one();
  }
  std::lock_guard lock(conn_mu_);
  if (!conn.edge_id.empty()) {
    auto it = edge_connection_.find(conn.edge_id);
    if (it != edge_connection_.end() && it->second == conn.id) edge_connection_.erase(it);
    detail::logger().info("event=disconnect edge={} connection={}", conn.edge_id, conn.id);
  }
}

void CloudServer::ingest_loop() {
  std::unique_lock lock(mail_mu_);
  for (;;) {
    mail_cv_.wait(lock, [&] { return stopping_ || !mailbox_.empty(); });
    if (mailbox_.empty()) break;
    Mail mail = std::move(mailbox_.front());
    mailbox_.pop_front();
    ingesting_ = true;
    lock.unlock();
    try {
      handle(mail);
    } catch (const Error& e) {
      detail::logger().warn("event=ingest_failed connection={} tag={} error=\"{}\"", mail.connection,
                            proto::to_string(proto::tag_of(mail.msg)), e.what());
    }
    lock.lock();
    ingesting_ = false;
    drained_cv_.notify_all();
  }
  ingesting_ = false;
  drained_cv_.notify_all();
}

void CloudServer::handle(const Mail& mail) {
  EdgeId sender_edge;
  {
    std::lock_guard lock(conn_mu_);
    auto it = connections_.find(mail.connection);
    if (it == connections_.end()) return;
    sender_edge = it->second->edge_id;
  }

  if (const auto* reg = std::get_if<proto::Register>(&mail.msg)) {
    std::optional<proto::ModelUpdate> resend;
    try {
      resend = coordinator_.register_edge(*reg, factory_(*reg));
    } catch (const Error& e) {
      detail::logger().warn("event=register_rejected edge={} connection={} error=\"{}\"", reg->edge_id,
                            mail.connection, e.what());
      {
        std::lock_guard lock(metrics_mu_);
        ++metrics_.rejected;
      }
      std::lock_guard lock(conn_mu_);
      connections_.at(mail.connection)->transport->close();
      return;
    }
    {
      std::lock_guard lock(conn_mu_);
      connections_.at(mail.connection)->edge_id = reg->edge_id;
      edge_connection_[reg->edge_id] = mail.connection;
    }
    {
      std::lock_guard lock(metrics_mu_);
      ++metrics_.registrations;
    }
    registered_cv_.notify_all();
    detail::logger().info("event=register edge={} connection={} resend={}", reg->edge_id, mail.connection,
                          resend.has_value());
    if (resend) send_to(mail.connection, std::move(*resend));
    return;
  }

  if (const auto* batch = std::get_if<proto::SampleBatch>(&mail.msg)) {
    if (batch->edge_id != sender_edge) {
      throw Error(Errc::UnknownEdge, "batch for '" + batch->edge_id + "' on a connection registered as '" +
                                         sender_edge + "'");
    }
    coordinator_.ingest_batch(*batch);
    {
      std::lock_guard lock(metrics_mu_);
      ++metrics_.batches;
      metrics_.samples += batch->samples.size();
    }
    std::lock_guard lock(mail_mu_);
    ++batches_seen_[batch->edge_id];
    return;
  }

  if (const auto* ack = std::get_if<proto::UpdateAck>(&mail.msg)) {
    if (ack->edge_id != sender_edge) throw Error(Errc::UnknownEdge, "ack from an unregistered connection");
    coordinator_.acknowledge(*ack);
    std::lock_guard lock(metrics_mu_);
    ++metrics_.acks;
    return;
  }

  detail::logger().warn("event=unexpected_message connection={} tag={}", mail.connection,
                        proto::to_string(proto::tag_of(mail.msg)));
}

void CloudServer::send_to(std::uint64_t connection, proto::Message msg) {
  std::lock_guard lock(conn_mu_);
  auto it = connections_.find(connection);
  if (it == connections_.end()) return;
  it->second->sender->post(std::move(msg));
}

CycleResult CloudServer::cycle_once() {
  std::vector<std::pair<EdgeId, std::uint64_t>> targets;
  {
    std::lock_guard lock(conn_mu_);
    targets.assign(edge_connection_.begin(), edge_connection_.end());
  }
  std::map<EdgeId, std::size_t> before;
  {
    std::lock_guard lock(mail_mu_);
    for (const auto& [id, conn] : targets) before[id] = batches_seen_[id];
  }
  const proto::RequestBatch request{next_request_++};
  for (const auto& [id, conn] : targets) send_to(conn, request);

  if (!targets.empty() && cfg_.batch_wait_seconds > 0.0) {
    std::unique_lock lock(mail_mu_);
    drained_cv_.wait_until(lock, after(seconds(cfg_.batch_wait_seconds)), [&] {
      if (stopping_) return true;
      if (!mailbox_.empty() || ingesting_) return false;
      for (const auto& [id, n] : before) {
        if (batches_seen_[id] <= n) return false;
      }
      return true;
    });
  }

  auto result = coordinator_.run_cycle();
  std::lock_guard lock(metrics_mu_);
  ++metrics_.cycles;
  if (result.record.idle()) {
    ++metrics_.idle_cycles;
    return result;
  }
  metrics_.training_cycles.push_back(result.record);
  if (!result.update) return result;
  if (stopping_) {
    ++metrics_.updates_abandoned;
    detail::logger().info("event=update_abandoned edge={} version={}", result.update->edge_id,
                          result.update->version);
    return result;
  }
  std::optional<std::uint64_t> conn;
  {
    std::lock_guard conn_lock(conn_mu_);
    auto it = edge_connection_.find(result.update->edge_id);
    if (it != edge_connection_.end()) conn = it->second;
  }
  if (conn) {
    send_to(*conn, *result.update);
    ++metrics_.updates_sent;
    ++metrics_.updates_per_edge[result.update->edge_id];
  } else {
    // Delivered on the edge's next Register, which resends the current model.
    detail::logger().warn("event=update_undeliverable edge={} version={}", result.update->edge_id,
                          result.update->version);
  }
  return result;
}

void CloudServer::cycle_loop() {
  while (!stopping_) {
    const auto next = after(seconds(cfg_.cycle_period_seconds));
    try {
      cycle_once();
    } catch (const Error& e) {
      detail::logger().error("event=cycle_failed error=\"{}\"", e.what());
    }
    std::unique_lock lock(stop_mu_);
    stop_cv_.wait_until(lock, next, [&] { return stopping_.load(); });
  }
}

bool CloudServer::wait_for_edges(std::size_t count, std::chrono::milliseconds timeout) {
  std::unique_lock lock(conn_mu_);
  return registered_cv_.wait_for(lock, timeout, [&] { return edge_connection_.size() >= count; });
}

void CloudServer::wait_idle() {
  std::unique_lock lock(mail_mu_);
  drained_cv_.wait(lock, [&] { return stopping_ || (mailbox_.empty() && !ingesting_); });
}

std::size_t CloudServer::registered_edges() const {
  std::lock_guard lock(conn_mu_);
  return edge_connection_.size();
}

ServerMetrics CloudServer::metrics() const {
  ServerMetrics m;
  {
    std::lock_guard lock(metrics_mu_);
    m = metrics_;
  }
  std::lock_guard lock(conn_mu_);
  for (const auto& [id, c] : connections_) {
    m.bytes_in += c->transport->bytes_received();
    m.bytes_out += c->transport->bytes_sent();
  }
  return m;
}

}  // namespace edgesync
