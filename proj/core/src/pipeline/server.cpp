#include <httplib.h>

#include "tender/pipeline/server.hpp"

#include <thread>

#include "tender/error.hpp"

namespace tender::pipeline {

struct ListingServer::Impl {
  httplib::Server server;
  std::string body;
  std::string run_id;
  int port = 0;
  std::thread thread;
};

ListingServer::ListingServer(Manifest manifest, int port, const std::string& host) : impl_(std::make_unique<Impl>()) {
  impl_->body = manifest_to_json(manifest);
  impl_->run_id = manifest.run_id;
  auto& srv = impl_->server;
  // The library default sets SO_REUSEPORT, which would let a second listener
  // share the port silently.
  srv.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  srv.Get("/health", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
  srv.Get("/notices", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(impl_->body, "application/json");
  });
  srv.Get(R"(/notices/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    if (req.matches[1] == impl_->run_id) {
      res.set_content(impl_->body, "application/json");
    } else {
      res.status = 404;
      res.set_content(R"({"error":"unknown run id"})", "application/json");
    }
  });
  if (port == 0) {
    impl_->port = srv.bind_to_any_port(host);
    if (impl_->port <= 0) throw Error(ErrorCode::PortInUse, "could not bind any port on " + host);
  } else {
    if (!srv.bind_to_port(host, port)) throw Error(ErrorCode::PortInUse, host + ":" + std::to_string(port) + " is in use");
    impl_->port = port;
  }
}

ListingServer::~ListingServer() { stop(); }

int ListingServer::port() const { return impl_->port; }

void ListingServer::start() {
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void ListingServer::run() { impl_->server.listen_after_bind(); }

void ListingServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void serve_listing(const Manifest& manifest, int port) {
  ListingServer server(manifest, port, "0.0.0.0");
  server.run();
}

}  // namespace tender::pipeline
