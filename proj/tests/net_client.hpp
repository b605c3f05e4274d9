#pragma once

// Minimal synchronous HTTP and WebSocket client for driving the server in tests.

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <string>

namespace test {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

struct HttpReply {
  int status = 0;
  std::string body;
};

inline HttpReply http_request(unsigned short port, http::verb verb, const std::string& target,
                              const std::string& body = {}) {
  net::io_context ioc;
  tcp::resolver resolver(ioc);
  beast::tcp_stream stream(ioc);
  stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));

  http::request<http::string_body> req{verb, target, 11};
  req.set(http::field::host, "127.0.0.1");
  if (!body.empty()) {
    req.set(http::field::content_type, "application/json");
    req.body() = body;
  }
  req.prepare_payload();
  http::write(stream, req);

  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(stream, buffer, res);
  beast::error_code ec;
  stream.socket().shutdown(tcp::socket::shutdown_both, ec);
  return {static_cast<int>(res.result_int()), res.body()};
}

inline HttpReply http_get(unsigned short port, const std::string& target) {
  return http_request(port, http::verb::get, target);
}

inline HttpReply http_post(unsigned short port, const std::string& target,
                           const std::string& body = {}) {
  return http_request(port, http::verb::post, target, body);
}

class WsClient {
 public:
  WsClient(unsigned short port, const std::string& target) : resolver_(ioc_), ws_(ioc_) {
    net::connect(ws_.next_layer(), resolver_.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", target);
  }

  ~WsClient() {
    beast::error_code ec;
    ws_.close(websocket::close_code::normal, ec);
  }

  std::string read() {
    beast::flat_buffer buffer;
    ws_.read(buffer);
    return beast::buffers_to_string(buffer.data());
  }

  void send(const std::string& frame) { ws_.write(net::buffer(frame)); }

 private:
  net::io_context ioc_;
  tcp::resolver resolver_;
  websocket::stream<tcp::socket> ws_;
};

}  // namespace test
