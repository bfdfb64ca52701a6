#pragma once

#include <map>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "hydat/datastore.hpp"
#include "hydat/pipeline.hpp"
#include "hydat/unitdispatch.hpp"

namespace hydat {

struct ServiceOptions {
  std::size_t workers = 2;
  std::size_t max_queued_jobs = 64;
  /// Defaults for POST /api/train; the request's "config" overrides fields.
  TrainConfig train_defaults;
  /// Longest window GET .../timeseries will expand, in hours.
  std::size_t max_timeseries_hours = 24 * 366 * 5;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// The JSON API under /api. `handle` routes one request without any socket
/// so it can be exercised directly; `listen` serves it over HTTP.
///
///   GET  /api/health
///   GET  /api/plants
///   GET  /api/plants/{name}/timeseries?start=&end=&fields=
///   POST /api/dispatch        -> 202 {run_id}
///   GET  /api/dispatch/{id}
///   POST /api/train           -> 202 {job_id}
///   GET  /api/train/{id}
///
/// Errors carry {"error": {"code", "message", "details"}}.
class Service {
 public:
  Service(Store& store, ModelRepository models, ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  ApiResponse handle(const std::string& method, const std::string& path,
                     const std::multimap<std::string, std::string>& query, const std::string& body);

  /// Binds and serves until stop(). Returns false when binding fails.
  bool listen(const std::string& host, int port);
  /// Binds to an ephemeral port and serves on a background thread.
  int start_background(const std::string& host = "127.0.0.1");
  void stop();

  /// Blocks until every queued and running job has finished.
  void wait_idle();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hydat
