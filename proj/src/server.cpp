#include "hitl/server.hpp"

#include <atomic>
#include <deque>
#include <memory>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "hitl/error.hpp"
#include "hitl/store.hpp"
#include "json_codec.hpp"

namespace hitl {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using codec::ojson;

namespace {

constexpr std::size_t kBodyLimit = 1 << 20;

// Open connections, touched only on the I/O thread, so stop() can close them.
using Connections = std::vector<std::weak_ptr<beast::tcp_stream>>;

void track(Connections& open, std::shared_ptr<beast::tcp_stream> stream) {
  std::erase_if(open, [](const auto& w) { return w.expired(); });
  open.push_back(std::move(stream));
}

http::status status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownSession: return http::status::not_found;
    case ErrorCode::IllegalTransition:
    case ErrorCode::NotAwaiting:
    case ErrorCode::InvalidState: return http::status::conflict;
    case ErrorCode::SessionLimit: return http::status::too_many_requests;
    case ErrorCode::IOFailure: return http::status::internal_server_error;
    default: return http::status::bad_request;
  }
}

ojson error_json(ErrorCode code, const std::string& message) {
  return ojson{{"error", error_code_name(code)}, {"message", message}};
}

ojson state_value(const SessionState& s) { return ojson::parse(encode_state(s)); }

FeedbackDecision decision_from(const ojson& j) {
  FeedbackDecision d;
  d.accepted = j.at("accepted").get<bool>();
  if (auto it = j.find("human_reward"); it != j.end() && !it->is_null()) {
    d.human_reward = it->get<double>();
  }
  return d;
}

struct Target {
  std::string session;  // empty for the collection
  std::string action;   // start, pause, ..., artifacts, stream
  std::string artifact;
  std::optional<std::uint64_t> from_seq;
  bool valid = false;
};

Target parse_target(std::string_view target) {
  Target t;
  std::string_view query;
  if (auto q = target.find('?'); q != std::string_view::npos) {
    query = target.substr(q + 1);
    target = target.substr(0, q);
  }
  constexpr std::string_view prefix = "/api/sessions";
  if (target.substr(0, prefix.size()) != prefix) return t;
  target.remove_prefix(prefix.size());
  if (!target.empty() && target.back() == '/') target.remove_suffix(1);
  std::vector<std::string> parts;
  while (!target.empty()) {
    if (target.front() != '/') return t;
    target.remove_prefix(1);
    const auto slash = target.find('/');
    parts.emplace_back(target.substr(0, slash));
    target = slash == std::string_view::npos ? std::string_view{} : target.substr(slash);
  }
  if (parts.size() > 3) return t;
  if (parts.size() >= 1) t.session = parts[0];
  if (parts.size() >= 2) t.action = parts[1];
  if (parts.size() == 3) {
    if (t.action != "artifacts") return t;
    t.artifact = parts[2];
  }
  constexpr std::string_view seq_key = "from_seq=";
  if (auto p = query.find(seq_key); p != std::string_view::npos) {
    try {
      t.from_seq = std::stoull(std::string(query.substr(p + seq_key.size())));
    } catch (const std::exception&) {
      return t;
    }
  }
  t.valid = true;
  return t;
}

std::string content_type_for(std::string_view name) {
  if (name.size() >= 5 && name.substr(name.size() - 5) == ".json") return "application/json";
  if (name.size() >= 4 && name.substr(name.size() - 4) == ".csv") return "text/csv; charset=utf-8";
  if (name.size() >= 7 && name.substr(name.size() - 7) == ".ndjson") return "application/x-ndjson";
  return "text/plain; charset=utf-8";
}

http::response<http::string_body> route(SessionManager& sessions,
                                        const http::request<http::string_body>& req) {
  auto reply = [&](http::status status, std::string body, std::string type = "application/json") {
    http::response<http::string_body> res{status, req.version()};
    res.set(http::field::server, "hitl");
    res.set(http::field::content_type, type);
    res.set(http::field::access_control_allow_origin, "*");
    res.keep_alive(req.keep_alive());
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
  };

  if (req.method() == http::verb::options) {
    auto res = reply(http::status::no_content, "");
    res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
    res.set(http::field::access_control_allow_headers, "Content-Type");
    return res;
  }
  if (req.target() == "/api/health") return reply(http::status::ok, R"({"ok":true})");

  const Target t = parse_target(std::string_view(req.target().data(), req.target().size()));
  if (!t.valid) {
    return reply(http::status::not_found,
                 error_json(ErrorCode::InvalidArgument, "no such route").dump());
  }

  try {
    const bool get = req.method() == http::verb::get;
    const bool post = req.method() == http::verb::post;
    if (t.session.empty()) {
      if (get) return reply(http::status::ok, ojson{{"sessions", sessions.list()}}.dump());
      if (post) {
        ojson body;
        try {
          body = ojson::parse(req.body());
        } catch (const nlohmann::json::exception& ex) {
          fail(ErrorCode::MalformedDocument, ex.what());
        }
        const ojson config_doc = body.contains("config") ? body.at("config") : body;
        SessionOptions options;
        if (auto it = body.find("options"); it != body.end()) {
          if (auto v = it->find("throttle_ms"); v != it->end()) options.throttle_ms = v->get<int>();
          options.feedback_timeout_ms = it->value("feedback_timeout_ms", 0);
          options.window = it->value("window", kDefaultRewardWindow);
        }
        RunConfig run;
        try {
          run = decode_run_config(config_doc.dump());
        } catch (const Error& e) {
          if (e.code() == ErrorCode::MalformedDocument) fail(ErrorCode::InvalidConfig, e.what());
          throw;
        }
        const std::string id = sessions.create_session(run, options);
        ojson out{{"id", id}, {"state", state_value(sessions.state(id))}};
        return reply(http::status::created, out.dump());
      }
    } else if (t.action.empty() && get) {
      return reply(http::status::ok, encode_state(sessions.state(t.session)));
    } else if (t.action == "artifacts" && get && !t.artifact.empty()) {
      return reply(http::status::ok, sessions.artifact(t.session, t.artifact),
                   content_type_for(t.artifact));
    } else if (post) {
      SessionState s;
      if (t.action == "start") {
        s = sessions.start(t.session);
      } else if (t.action == "pause") {
        s = sessions.pause(t.session);
      } else if (t.action == "resume") {
        s = sessions.resume(t.session);
      } else if (t.action == "abort") {
        s = sessions.abort(t.session);
      } else if (t.action == "speed") {
        s = sessions.set_speed(t.session, ojson::parse(req.body()).at("throttle_ms").get<int>());
      } else if (t.action == "feedback") {
        s = sessions.submit_feedback(t.session, decision_from(ojson::parse(req.body())));
      } else {
        return reply(http::status::not_found,
                     error_json(ErrorCode::InvalidArgument, "no such route").dump());
      }
      return reply(http::status::ok, encode_state(s));
    }
    return reply(http::status::method_not_allowed,
                 error_json(ErrorCode::InvalidArgument, "method not allowed").dump());
  } catch (const Error& e) {
    return reply(status_for(e.code()), error_json(e.code(), e.what()).dump());
  } catch (const nlohmann::json::exception& e) {
    return reply(http::status::bad_request, error_json(ErrorCode::MalformedDocument, e.what()).dump());
  }
}

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, SessionManager& sessions, Target target)
      : ws_(std::move(socket)), sessions_(sessions), target_(std::move(target)) {}

  void run(http::request<http::string_body> req, Connections& open) {
    track(open, {shared_from_this(), &beast::get_lowest_layer(ws_)});
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.text(true);
    ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    std::weak_ptr<WsSession> weak = shared_from_this();
    auto executor = ws_.get_executor();
    try {
      subscription_ = sessions_.subscribe(
          target_.session,
          [weak, executor](const std::string& frame) {
            net::post(executor, [weak, frame] {
              if (auto self = weak.lock()) self->send(frame);
            });
          },
          target_.from_seq);
    } catch (const Error& e) {
      send(ojson{{"type", "command_error"}, {"code", error_code_name(e.code())}, {"message", e.what()}}
               .dump());
      closing_ = true;
      return;
    }
    do_read();
  }

  void do_read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      subscription_.reset();
      return;
    }
    const std::string frame = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    send(handle_command(sessions_, target_.session, frame));
    do_read();
  }

  void send(std::string frame) {
    queue_.push_back(std::move(frame));
    if (queue_.size() == 1) do_write();
  }

  void do_write() {
    ws_.async_write(net::buffer(queue_.front()),
                    beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) {
      subscription_.reset();
      queue_.clear();
      return;
    }
    queue_.pop_front();
    if (!queue_.empty()) {
      do_write();
    } else if (closing_) {
      ws_.async_close(websocket::close_code::policy_error,
                      [self = shared_from_this()](beast::error_code) {});
    }
  }

  websocket::stream<beast::tcp_stream> ws_;
  SessionManager& sessions_;
  Target target_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  Subscription subscription_;
  bool closing_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, SessionManager& sessions, Connections& open)
      : stream_(std::move(socket)), sessions_(sessions), open_(open) {}

  void run() {
    track(open_, {shared_from_this(), &stream_});
    net::dispatch(stream_.get_executor(),
                  beast::bind_front_handler(&HttpSession::do_read, shared_from_this()));
  }

 private:
  void do_read() {
    parser_.emplace();
    parser_->body_limit(kBodyLimit);
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, *parser_,
                     beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    auto req = parser_->release();
    if (websocket::is_upgrade(req)) {
      Target t = parse_target(std::string_view(req.target().data(), req.target().size()));
      if (t.valid && t.action == "stream") {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), sessions_, std::move(t))
            ->run(std::move(req), open_);
        return;
      }
    }
    response_ = std::make_shared<http::response<http::string_body>>(route(sessions_, req));
    http::async_write(stream_, *response_,
                      beast::bind_front_handler(&HttpSession::on_write, shared_from_this(),
                                                response_->keep_alive()));
  }

  void on_write(bool keep_alive, beast::error_code ec, std::size_t) {
    if (ec) return;
    response_.reset();
    if (!keep_alive) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    do_read();
  }

  beast::tcp_stream stream_;
  SessionManager& sessions_;
  Connections& open_;
  beast::flat_buffer buffer_;
  std::optional<http::request_parser<http::string_body>> parser_;
  std::shared_ptr<http::response<http::string_body>> response_;
};

}  // namespace

std::string handle_command(SessionManager& sessions, const std::string& id, std::string_view frame) {
  std::string command = "?";
  try {
    ojson j;
    try {
      j = ojson::parse(frame);
      command = j.at("type").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      fail(ErrorCode::MalformedDocument, std::string("bad command frame: ") + ex.what());
    }
    SessionState s;
    if (command == "start_training") {
      s = sessions.start(id);
    } else if (command == "feedback") {
      FeedbackDecision d;
      try {
        d = decision_from(j);
      } catch (const nlohmann::json::exception& ex) {
        fail(ErrorCode::InvalidDecision, std::string("bad feedback frame: ") + ex.what());
      }
      s = sessions.submit_feedback(id, d);
    } else if (command == "control") {
      const std::string action = j.value("action", "");
      if (action == "pause") {
        s = sessions.pause(id);
      } else if (action == "resume") {
        s = sessions.resume(id);
      } else if (action == "abort") {
        s = sessions.abort(id);
      } else if (action == "set_speed") {
        s = sessions.set_speed(id, j.value("throttle_ms", 0));
      } else {
        fail(ErrorCode::InvalidArgument, "unknown control action '" + action + "'");
      }
      command += ":" + action;
    } else {
      fail(ErrorCode::InvalidArgument, "unknown command '" + command + "'");
    }
    return ojson{{"type", "ack"}, {"command", command}, {"state", state_value(s)}}.dump();
  } catch (const Error& e) {
    return ojson{{"type", "command_error"},
                 {"command", command},
                 {"code", error_code_name(e.code())},
                 {"message", e.what()}}
        .dump();
  } catch (const std::exception& e) {
    return ojson{{"type", "command_error"},
                 {"command", command},
                 {"code", error_code_name(ErrorCode::InvalidArgument)},
                 {"message", e.what()}}
        .dump();
  }
}

class Server::Impl {
 public:
  explicit Impl(ServerOptions options)
      : options_(std::move(options)),
        sessions_(options_.artifact_root, SessionLimits{options_.max_live_sessions}),
        acceptor_(ioc_) {
    beast::error_code ec;
    const tcp::endpoint endpoint{net::ip::make_address(options_.address, ec), options_.port};
    if (ec) fail(ErrorCode::InvalidConfig, "bad listen address '" + options_.address + "'");
    acceptor_.open(endpoint.protocol(), ec);
    if (!ec) acceptor_.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(endpoint, ec);
    if (!ec) acceptor_.listen(net::socket_base::max_listen_connections, ec);
    if (ec) fail(ErrorCode::IOFailure, "cannot listen on " + options_.address + ":" +
                                           std::to_string(options_.port) + ": " + ec.message());
    do_accept();
  }

  ~Impl() {
    stop();
    sessions_.shutdown();
  }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }
  SessionManager& sessions() { return sessions_; }

  void run() { ioc_.run(); }
  void start_background() {
    thread_ = std::thread([this] { ioc_.run(); });
  }
  void stop() {
    if (!ioc_.stopped()) {
      net::post(ioc_, [this] {
        beast::error_code ec;
        acceptor_.close(ec);
        for (auto& w : open_)
          if (auto s = w.lock()) s->socket().close(ec);
        open_.clear();
        ioc_.stop();
      });
    }
    if (!thread_.joinable()) ioc_.stop();
    if (thread_.joinable() && thread_.get_id() != std::this_thread::get_id()) thread_.join();
  }

 private:
  void do_accept() {
    acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
      if (!ec) std::make_shared<HttpSession>(std::move(socket), sessions_, open_)->run();
      if (acceptor_.is_open()) do_accept();
    });
  }

  ServerOptions options_;
  SessionManager sessions_;
  net::io_context ioc_{1};
  tcp::acceptor acceptor_;
  Connections open_;
  std::thread thread_;
};

Server::Server(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}
Server::~Server() = default;

unsigned short Server::port() const noexcept { return impl_->port(); }
SessionManager& Server::sessions() noexcept { return impl_->sessions(); }
void Server::run() { impl_->run(); }
void Server::start_background() { impl_->start_background(); }
void Server::stop() { impl_->stop(); }

}  // namespace hitl
