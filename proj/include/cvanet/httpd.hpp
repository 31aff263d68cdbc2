#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "cvanet/storage.hpp"

namespace cvanet {

struct ServiceOptions {
  std::filesystem::path data_dir;
  std::size_t workers = 2;                          // runs executing at once
  std::size_t max_upload_bytes = std::size_t{256} << 20;
  std::optional<std::filesystem::path> static_dir;  // web UI assets, served at /
  unsigned feature_threads = 1;
};

/// HTTP/1.1 front end of the simulator under /api/v1:
///
///   POST   /scenarios?name=            upload FCD XML or CSV
///   GET    /scenarios, /scenarios/{id}
///   GET    /algorithms
///   POST   /runs                       {scenario_id, algorithm, range_m, params}
///   GET    /runs, /runs/{id}
///   DELETE /runs/{id}                  cancel
///   GET    /runs/{id}/summary | /graph.csv | /report.jsonl?offset=&limit=
///
/// Runs execute on a FIFO pool of `workers` threads. Runs still queued in the
/// store when the service starts are resubmitted.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket. Port 0 picks a free port. Returns the bound
  /// port, or nullopt when the address cannot be bound.
  std::optional<int> bind(const std::string& host, int port);
  /// Serves until stop(). Requires a successful bind().
  void listen();
  /// Stops accepting requests, interrupts running runs (they are marked
  /// failed "interrupted") and joins the workers. Idempotent.
  void stop();

  Store& store();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits "host:port". Throws ConfigError on malformed input.
std::pair<std::string, int> parse_address(const std::string& addr);

}  // namespace cvanet
