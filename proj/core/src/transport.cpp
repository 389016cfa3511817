#include "edgesync/transport.hpp"

#include <array>
#include <atomic>
#include <charconv>

#include <sys/socket.h>

#include <boost/asio.hpp>

#include "edgesync/error.hpp"
#include "log.hpp"

namespace edgesync {

namespace asio = boost::asio;
using asio::ip::tcp;

namespace {

struct Pipe {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::vector<std::uint8_t>> frames;
  bool closed = false;
};

class MemoryTransport final : public Transport {
 public:
  MemoryTransport(std::shared_ptr<Pipe> in, std::shared_ptr<Pipe> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~MemoryTransport() override { close(); }

  void send(const proto::Message& msg) override {
    auto frame = proto::encode(msg);
    const auto n = frame.size();
    {
      std::lock_guard lock(out_->mu);
      if (out_->closed) throw Error(Errc::Io, "memory transport closed");
      out_->frames.push_back(std::move(frame));
    }
    out_->cv.notify_one();
    sent_ += n;
  }

  std::optional<proto::Message> receive() override {
    std::vector<std::uint8_t> frame;
    {
      std::unique_lock lock(in_->mu);
      in_->cv.wait(lock, [&] { return in_->closed || !in_->frames.empty(); });
      if (in_->frames.empty()) return std::nullopt;
      frame = std::move(in_->frames.front());
      in_->frames.pop_front();
    }
    received_ += frame.size();
    return proto::decode(frame);
  }

  void close() override {
    for (auto* p : {in_.get(), out_.get()}) {
      {
        std::lock_guard lock(p->mu);
        p->closed = true;
      }
      p->cv.notify_all();
    }
  }

  std::size_t bytes_sent() const override { return sent_; }
  std::size_t bytes_received() const override { return received_; }

 private:
  std::shared_ptr<Pipe> in_;
  std::shared_ptr<Pipe> out_;
  std::atomic<std::size_t> sent_{0};
  std::atomic<std::size_t> received_{0};
};

class TcpTransport final : public Transport {
 public:
  TcpTransport(std::shared_ptr<asio::io_context> io, tcp::socket socket)
      : io_(std::move(io)), socket_(std::move(socket)) {
    boost::system::error_code ec;
    socket_.set_option(tcp::no_delay(true), ec);
  }
  ~TcpTransport() override { close(); }

  void send(const proto::Message& msg) override {
    const auto frame = proto::encode(msg);
    std::lock_guard lock(send_mu_);
    boost::system::error_code ec;
    asio::write(socket_, asio::buffer(frame), ec);
    if (ec) throw Error(Errc::Io, "send: " + ec.message());
    sent_ += frame.size();
  }

  std::optional<proto::Message> receive() override {
    std::lock_guard lock(recv_mu_);
    std::array<std::uint8_t, proto::kHeaderSize> header{};
    boost::system::error_code ec;
    asio::read(socket_, asio::buffer(header), ec);
    if (ec) {
      if (ec == asio::error::eof || closed_) return std::nullopt;
      throw Error(Errc::Io, "receive: " + ec.message());
    }
    const std::uint32_t length = proto::read_header(header);
    std::vector<std::uint8_t> frame(proto::kHeaderSize + length);
    std::copy(header.begin(), header.end(), frame.begin());
    asio::read(socket_, asio::buffer(frame.data() + proto::kHeaderSize, length), ec);
    if (ec) {
      if (closed_) return std::nullopt;
      throw Error(Errc::Truncated, "connection closed mid-frame: " + ec.message());
    }
    received_ += frame.size();
    return proto::decode(frame);
  }

  void close() override {
    if (closed_.exchange(true)) return;
    // shutdown() wakes a reader blocked on this socket; the descriptor itself
    // is released by the destructor once no thread can be using it.
    ::shutdown(socket_.native_handle(), SHUT_RDWR);
  }

  std::size_t bytes_sent() const override { return sent_; }
  std::size_t bytes_received() const override { return received_; }

 private:
  std::shared_ptr<asio::io_context> io_;
  tcp::socket socket_;
  std::mutex send_mu_;
  std::mutex recv_mu_;
  std::atomic<bool> closed_{false};
  std::atomic<std::size_t> sent_{0};
  std::atomic<std::size_t> received_{0};
};

}  // namespace

std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_memory_pair() {
  auto a_to_b = std::make_shared<Pipe>();
  auto b_to_a = std::make_shared<Pipe>();
  return {std::make_unique<MemoryTransport>(b_to_a, a_to_b),
          std::make_unique<MemoryTransport>(a_to_b, b_to_a)};
}

std::pair<std::string, std::uint16_t> split_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon + 1 == address.size()) {
    throw Error(Errc::Config, "address must be host:port, got '" + address + "'");
  }
  std::string host = address.substr(0, colon);
  if (host.empty()) host = "0.0.0.0";
  unsigned port = 0;
  const char* first = address.data() + colon + 1;
  const char* last = address.data() + address.size();
  const auto [ptr, ec] = std::from_chars(first, last, port);
  if (ec != std::errc{} || ptr != last || port > 65535) {
    throw Error(Errc::Config, "bad port in '" + address + "'");
  }
  return {host, static_cast<std::uint16_t>(port)};
}

std::unique_ptr<Transport> tcp_connect(const std::string& host, std::uint16_t port) {
  auto io = std::make_shared<asio::io_context>();
  tcp::resolver resolver(*io);
  boost::system::error_code ec;
  const auto endpoints = resolver.resolve(host, std::to_string(port), ec);
  if (ec) throw Error(Errc::Io, "resolve " + host + ": " + ec.message());
  tcp::socket socket(*io);
  asio::connect(socket, endpoints, ec);
  if (ec) throw Error(Errc::Io, "connect " + host + ":" + std::to_string(port) + ": " + ec.message());
  return std::make_unique<TcpTransport>(io, std::move(socket));
}

struct TcpListener::Impl {
  std::shared_ptr<asio::io_context> io = std::make_shared<asio::io_context>();
  tcp::acceptor acceptor{*io};
  std::atomic<bool> closed{false};
};

TcpListener::TcpListener(const std::string& host, std::uint16_t port) : impl_(std::make_unique<Impl>()) {
  boost::system::error_code ec;
  const auto address = asio::ip::make_address(host, ec);
  if (ec) throw Error(Errc::Io, "bad bind address '" + host + "': " + ec.message());
  const tcp::endpoint endpoint(address, port);
  impl_->acceptor.open(endpoint.protocol(), ec);
  if (!ec) impl_->acceptor.set_option(tcp::acceptor::reuse_address(true), ec);
  if (!ec) impl_->acceptor.bind(endpoint, ec);
  if (!ec) impl_->acceptor.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) throw Error(Errc::Io, "bind " + host + ":" + std::to_string(port) + ": " + ec.message());
}

TcpListener::~TcpListener() { close(); }

std::uint16_t TcpListener::port() const noexcept {
  boost::system::error_code ec;
  return impl_->acceptor.local_endpoint(ec).port();
}

std::unique_ptr<Transport> TcpListener::accept() {
  tcp::socket socket(*impl_->io);
  boost::system::error_code ec;
  impl_->acceptor.accept(socket, ec);
  if (ec) {
    if (impl_->closed) return nullptr;
    throw Error(Errc::Io, "accept: " + ec.message());
  }
  return std::make_unique<TcpTransport>(impl_->io, std::move(socket));
}

void TcpListener::close() {
  if (!impl_ || impl_->closed.exchange(true)) return;
  // shutdown() on the listening socket wakes a thread blocked in accept().
  ::shutdown(impl_->acceptor.native_handle(), SHUT_RDWR);
}

AsyncSender::AsyncSender(Transport& transport, std::size_t max_queued)
    : transport_(transport), max_queued_(max_queued == 0 ? 1 : max_queued) {
  worker_ = std::thread([this] { loop(); });
}

AsyncSender::~AsyncSender() { stop(); }

void AsyncSender::post(proto::Message msg) {
  {
    std::lock_guard lock(mu_);
    if (stopping_) return;
    if (queue_.size() >= max_queued_) {
      queue_.pop_front();
      ++dropped_;
    }
    queue_.push_back(std::move(msg));
  }
  cv_.notify_one();
}

bool AsyncSender::flush(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  return idle_cv_.wait_for(lock, timeout, [&] { return queue_.empty() && !sending_; });
}

void AsyncSender::stop() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

std::size_t AsyncSender::dropped() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

std::size_t AsyncSender::failed() const {
  std::lock_guard lock(mu_);
  return failed_;
}

void AsyncSender::loop() {
  std::unique_lock lock(mu_);
  for (;;) {
    cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
    if (queue_.empty()) break;
    auto msg = std::move(queue_.front());
    queue_.pop_front();
    sending_ = true;
    lock.unlock();
    bool ok = true;
    try {
      transport_.send(msg);
    } catch (const Error& e) {
      ok = false;
      detail::logger().warn("event=send_failed tag={} error=\"{}\"",
                            proto::to_string(proto::tag_of(msg)), e.what());
    }
    lock.lock();
    sending_ = false;
    if (!ok) {
      // The peer is gone; later messages cannot be delivered either.
      failed_ += 1 + queue_.size();
      queue_.clear();
    }
    if (queue_.empty()) idle_cv_.notify_all();
  }
  sending_ = false;
  idle_cv_.notify_all();
}

}  // namespace edgesync
