#include "tetrad/http.hpp"

#include "httplib.h"

namespace tetrad {

HttpServer::HttpServer(TetradService& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    ApiRequest api{req.method, req.path, {}, req.body};
    for (const auto& [k, v] : req.params) api.query.emplace(k, v);
    const ApiResponse out = service_.handle(api);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  server_->Get(".*", forward);
  server_->Post(".*", forward);
  server_->Put(".*", forward);
  server_->Delete(".*", forward);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::serve() { server_->listen_after_bind(); }

void HttpServer::start() {
  thread_ = std::jthread([this] { serve(); });
  server_->wait_until_ready();
}

void HttpServer::stop() {
  if (server_->is_running()) server_->stop();
  if (thread_.joinable()) thread_.join();
}

ApiResponse http_call(const std::string& base_url, const ApiRequest& request) {
  httplib::Client client(base_url);
  client.set_connection_timeout(5);
  client.set_read_timeout(30);
  std::string path = request.path;
  if (!request.query.empty()) {
    httplib::Params params(request.query.begin(), request.query.end());
    path = httplib::append_query_params(path, params);
  }
  httplib::Result res = request.method == "GET"
                            ? client.Get(path)
                            : client.Post(path, request.body, "application/json");
  if (!res) throw IoError("request to " + base_url + " failed: " + httplib::to_string(res.error()));
  return ApiResponse{res->status, res->get_header_value("Content-Type"), res->body};
}

}  // namespace tetrad
