#include "ws_server.hpp"

#include <atomic>
#include <chrono>
#include <deque>
#include <fstream>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast.hpp>

#include "softorgan/error.hpp"

namespace softorgan::service {

namespace {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

std::string mime_type(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

struct Shared {
  Session& session;
  ServerOptions opts;
  std::atomic<std::size_t> dropped{0};
};

class WsConnection : public std::enable_shared_from_this<WsConnection> {
 public:
  WsConnection(tcp::socket socket, Shared& shared)
      : ws_(std::move(socket)), shared_(shared) {}

  ~WsConnection() { detach(); }

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->on_open();
    });
  }

  // Any thread.
  void deliver(const wire::ServerMessage& msg) {
    auto text = std::make_shared<std::string>(wire::encode(msg));
    const bool droppable = std::holds_alternative<wire::Frame>(msg);
    net::post(ws_.get_executor(), [self = shared_from_this(), text, droppable] {
      self->enqueue(text, droppable);
    });
  }

 private:
  struct Outgoing {
    std::shared_ptr<std::string> text;
    bool droppable = false;
  };

  void on_open() {
    enqueue(std::make_shared<std::string>(wire::encode(shared_.session.hello())), false);
    std::weak_ptr<WsConnection> weak = shared_from_this();
    subscription_ = shared_.session.subscribe([weak](const wire::ServerMessage& m) {
      if (auto self = weak.lock()) self->deliver(m);
    });
    do_read();
  }

  void enqueue(std::shared_ptr<std::string> text, bool droppable) {
    if (closed_) return;
    if (droppable && queued_frames_ >= shared_.opts.max_queued_frames) {
      ++shared_.dropped;
      return;
    }
    if (droppable) ++queued_frames_;
    queue_.push_back({std::move(text), droppable});
    if (queue_.size() == 1) do_write();
  }

  void do_write() {
    ws_.text(true);
    ws_.async_write(net::buffer(*queue_.front().text),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) return self->detach();
                      if (self->queue_.front().droppable) --self->queued_frames_;
                      self->queue_.pop_front();
                      if (!self->queue_.empty()) self->do_write();
                    });
  }

  void do_read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->detach();
      self->on_message(beast::buffers_to_string(self->buffer_.data()));
      self->buffer_.consume(self->buffer_.size());
      self->do_read();
    });
  }

  void on_message(const std::string& text) {
    std::weak_ptr<WsConnection> weak = shared_from_this();
    auto reply = [weak](const wire::ServerMessage& m) {
      if (auto self = weak.lock()) self->deliver(m);
    };
    try {
      shared_.session.submit(wire::decode_client(text), reply);
    } catch (const Error& e) {
      enqueue(std::make_shared<std::string>(wire::encode(wire::Error{e.what()})), false);
    }
  }

  void detach() {
    if (closed_) return;
    closed_ = true;
    if (subscription_ >= 0) shared_.session.unsubscribe(subscription_);
    subscription_ = -1;
    queue_.clear();
  }

  websocket::stream<beast::tcp_stream> ws_;
  Shared& shared_;
  beast::flat_buffer buffer_;
  std::deque<Outgoing> queue_;
  std::size_t queued_frames_ = 0;
  int subscription_ = -1;
  bool closed_ = false;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket socket, Shared& shared) : stream_(std::move(socket)), shared_(shared) {}

  void run() {
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       if (ec) return;
                       self->on_request();
                     });
  }

 private:
  void on_request() {
    if (websocket::is_upgrade(req_)) {
      stream_.expires_never();
      std::make_shared<WsConnection>(stream_.release_socket(), shared_)->run(std::move(req_));
      return;
    }
    res_ = std::make_shared<http::response<http::string_body>>(serve_file());
    res_->keep_alive(false);
    res_->prepare_payload();
    http::async_write(stream_, *res_,
                      [self = shared_from_this()](beast::error_code, std::size_t) {
                        beast::error_code ignored;
                        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
                      });
  }

  http::response<http::string_body> serve_file() {
    http::response<http::string_body> res{http::status::not_found, req_.version()};
    res.set(http::field::content_type, "text/plain");
    res.body() = "not found\n";
    const std::string target(req_.target());
    if (req_.method() != http::verb::get || shared_.opts.static_dir.empty() ||
        target.empty() || target[0] != '/' || target.find("..") != std::string::npos) {
      return res;
    }
    auto rel = target.substr(1, target.find('?') == std::string::npos ? std::string::npos
                                                                      : target.find('?') - 1);
    if (rel.empty() || rel.back() == '/') rel += "index.html";
    const auto path = shared_.opts.static_dir / rel;
    std::ifstream in(path, std::ios::binary);
    if (!in) return res;
    std::ostringstream body;
    body << in.rdbuf();
    res.result(http::status::ok);
    res.set(http::field::content_type, mime_type(path));
    res.body() = body.str();
    return res;
  }

  beast::tcp_stream stream_;
  Shared& shared_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  std::shared_ptr<http::response<http::string_body>> res_;
};

}  // namespace

struct Server::Impl {
  Impl(Session& session, ServerOptions opts) : shared{session, std::move(opts)} {}

  void do_accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<HttpConnection>(std::move(socket), shared)->run();
      do_accept();
    });
  }

  void sim_loop() {
    using clock = std::chrono::steady_clock;
    const auto dt = std::chrono::duration_cast<clock::duration>(
        std::chrono::duration<double>(shared.session.config().sim.dt));
    const int cap = std::max(1, shared.opts.max_catchup_steps);
    auto deadline = clock::now();
    while (!stopping) {
      auto now = clock::now();
      if (now < deadline) {
        std::this_thread::sleep_until(std::min(deadline, now + std::chrono::milliseconds(5)));
        shared.session.process_commands();
        continue;
      }
      auto due = 1 + static_cast<int>((now - deadline) / dt);
      if (due > cap) {
        // Too far behind: run the cap and forget the rest of the backlog.
        deadline = now - cap * dt;
        due = cap;
      }
      shared.session.advance(static_cast<std::size_t>(due));
      if (shared.session.running()) {
        deadline += due * dt;
      } else {
        deadline = clock::now() + dt;
      }
    }
  }

  Shared shared;
  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::thread io_thread;
  std::thread sim_thread;
  std::atomic<bool> stopping{false};
  bool started = false;
  unsigned short bound_port = 0;
};

Server::Server(Session& session, ServerOptions opts)
    : impl_(std::make_unique<Impl>(session, std::move(opts))) {}

Server::~Server() { stop(); }

void Server::start() {
  if (impl_->started) return;
  beast::error_code ec;
  const auto address = net::ip::make_address(impl_->shared.opts.address, ec);
  if (ec) throw IoError("bad address '" + impl_->shared.opts.address + "': " + ec.message());
  const tcp::endpoint endpoint{address, impl_->shared.opts.port};
  auto& acc = impl_->acceptor;
  acc.open(endpoint.protocol(), ec);
  if (!ec) acc.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) acc.bind(endpoint, ec);
  if (!ec) acc.listen(net::socket_base::max_listen_connections, ec);
  if (ec) {
    throw IoError("cannot listen on " + impl_->shared.opts.address + ":" +
                  std::to_string(impl_->shared.opts.port) + ": " + ec.message());
  }
  impl_->bound_port = acc.local_endpoint().port();
  impl_->started = true;
  impl_->do_accept();
  impl_->io_thread = std::thread([this] { impl_->ioc.run(); });
  impl_->sim_thread = std::thread([this] { impl_->sim_loop(); });
}

void Server::stop() {
  if (!impl_->started) return;
  impl_->started = false;
  impl_->stopping = true;
  if (impl_->sim_thread.joinable()) impl_->sim_thread.join();
  net::post(impl_->ioc, [this] {
    beast::error_code ignored;
    impl_->acceptor.close(ignored);
  });
  impl_->ioc.stop();
  if (impl_->io_thread.joinable()) impl_->io_thread.join();
}

unsigned short Server::port() const { return impl_->bound_port; }

std::size_t Server::dropped_frames() const { return impl_->shared.dropped; }

}  // namespace softorgan::service
