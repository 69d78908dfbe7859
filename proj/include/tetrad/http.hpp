#pragma once

#include <memory>
#include <string>
#include <thread>

#include "tetrad/service.hpp"

namespace httplib {
class Server;
}

namespace tetrad {

// Serves TetradService::handle over HTTP/1.1.
class HttpServer {
public:
  explicit HttpServer(TetradService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws IoError.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void serve();
  // serve() on a background thread; returns once accepting.
  void start();
  void stop();

private:
  TetradService& service_;
  std::unique_ptr<httplib::Server> server_;
  std::jthread thread_;
};

// Sends one request to base_url (e.g. "http://127.0.0.1:8080"). Throws IoError
// when the server cannot be reached.
ApiResponse http_call(const std::string& base_url, const ApiRequest& request);

}  // namespace tetrad
