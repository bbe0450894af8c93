#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <deque>
#include <nlohmann/json.hpp>

#include "pipeforge/teleop.hpp"

namespace pipeforge {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

// State frames beyond this backlog are dropped for a slow client; replies never are.
constexpr std::size_t kMaxBacklog = 32;

}  // namespace

struct TeleopServer::Impl {
  class Client;

  Impl(Config config, TeleopOptions options, unsigned short port, double tick_hz)
      : acceptor(io),
        session(std::move(config), std::move(options)),
        period(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(1.0 / tick_hz))),
        timer(io) {
    const tcp::endpoint endpoint(net::ip::address_v4::loopback(), port);
    boost::system::error_code ec;
    acceptor.open(endpoint.protocol(), ec);
    if (!ec) acceptor.bind(endpoint, ec);
    if (!ec) acceptor.listen(net::socket_base::max_listen_connections, ec);
    if (ec) {
      throw std::runtime_error("cannot listen on port " + std::to_string(port) + ": " +
                               ec.message());
    }
  }

  void accept();
  void start_ticks();
  void on_tick(const boost::system::error_code& ec);
  void on_disconnect(const Client* c);

  net::io_context io{1};
  tcp::acceptor acceptor;
  TeleopSession session;
  std::chrono::steady_clock::duration period;
  net::steady_timer timer;
  std::chrono::steady_clock::time_point next_tick;
  std::shared_ptr<Client> client;
  bool ticking = false;
  std::atomic<long> ticks{0};
};

class TeleopServer::Impl::Client : public std::enable_shared_from_this<Client> {
 public:
  Client(Impl& owner, tcp::socket socket, bool busy)
      : owner_(owner), ws_(std::move(socket)), busy_(busy) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  void send(std::string frame, bool droppable) {
    if (closed_ || (droppable && outbox_.size() >= kMaxBacklog)) return;
    outbox_.push_back(std::move(frame));
    if (outbox_.size() == 1) write_next();
  }

  bool ready() const { return open_ && !closed_; }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return fail();
    if (busy_) {
      ws_.text(true);
      auto frame = std::make_shared<std::string>(
          nlohmann::json{{"type", "error"}, {"detail", "busy"}}.dump());
      ws_.async_write(net::buffer(*frame),
                      [self = shared_from_this(), frame](beast::error_code, std::size_t) {
                        self->ws_.async_close(websocket::close_code::try_again_later,
                                              [self](beast::error_code) {});
                      });
      return;
    }
    open_ = true;
    ws_.text(true);
    send(owner_.session.state_message(), true);
    owner_.start_ticks();
    read();
  }

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->fail();
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      for (auto& reply : self->owner_.session.handle_message(text)) {
        self->send(std::move(reply), false);
      }
      self->read();
    });
  }

  void write_next() {
    ws_.async_write(net::buffer(outbox_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) return self->fail();
                      self->outbox_.pop_front();
                      if (!self->outbox_.empty()) self->write_next();
                    });
  }

  void fail() {
    if (closed_) return;
    closed_ = true;
    outbox_.clear();
    if (!busy_) owner_.on_disconnect(this);
  }

  Impl& owner_;
  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  bool busy_;
  bool open_ = false;
  bool closed_ = false;
};

void TeleopServer::Impl::accept() {
  acceptor.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    const bool busy = client != nullptr;
    auto c = std::make_shared<Client>(*this, std::move(socket), busy);
    if (!busy) client = c;
    c->start();
    accept();
  });
}

void TeleopServer::Impl::start_ticks() {
  if (ticking) return;
  ticking = true;
  next_tick = std::chrono::steady_clock::now() + period;
  timer.expires_at(next_tick);
  timer.async_wait([this](const boost::system::error_code& ec) { on_tick(ec); });
}

void TeleopServer::Impl::on_tick(const boost::system::error_code& ec) {
  if (ec || !client) {
    ticking = false;
    return;
  }
  if (client->ready()) {
    client->send(session.tick(), true);
    ++ticks;
  }
  next_tick += period;
  timer.expires_at(next_tick);
  timer.async_wait([this](const boost::system::error_code& e) { on_tick(e); });
}

void TeleopServer::Impl::on_disconnect(const Client* c) {
  if (client.get() != c) return;
  client.reset();
  timer.cancel();
}

TeleopServer::TeleopServer(Config config, TeleopOptions options, unsigned short port,
                           double tick_hz)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(options), port, tick_hz)) {}

TeleopServer::~TeleopServer() = default;

unsigned short TeleopServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void TeleopServer::run() {
  impl_->accept();
  impl_->io.run();
}

void TeleopServer::stop() { impl_->io.stop(); }

long TeleopServer::ticks() const { return impl_->ticks.load(); }

}  // namespace pipeforge
