#pragma once

#include <memory>
#include <string>

#include "tender/pipeline/manifest.hpp"

namespace tender::pipeline {

// Read-only HTTP listing over an immutable manifest snapshot:
//   GET /health            -> 200 "ok"
//   GET /notices           -> the manifest JSON
//   GET /notices/{run_id}  -> the manifest JSON, or 404 for another run id
class ListingServer {
 public:
  // Binds immediately; port 0 picks a free port. Throws PortInUse.
  ListingServer(Manifest manifest, int port, const std::string& host = "127.0.0.1");
  ~ListingServer();
  ListingServer(const ListingServer&) = delete;
  ListingServer& operator=(const ListingServer&) = delete;

  int port() const;
  void start();  // serve on a background thread
  void run();    // serve on the calling thread until stop()
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Blocks until the process is interrupted.
void serve_listing(const Manifest& manifest, int port);

}  // namespace tender::pipeline
