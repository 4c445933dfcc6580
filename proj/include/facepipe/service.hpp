#pragma once

#include <map>
#include <memory>
#include <string>

#include "facepipe/pipeline.hpp"

namespace facepipe {

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;
};

/// Read-only HTTP front end over one immutable source model:
///   GET /health                      -> 200 {"version":1,"status":"ok","map_ready":bool}
///   GET /map                         -> appearance-map JSON
///   GET /view?yaw=..&pitch=..&roll=.. -> PNG of render_pose, with headers
///                                       X-Triangle-Id and X-Weights ([[vertex, weight], ...])
/// Malformed or out-of-range queries get 400 with {"version":1,"error":...};
/// /map and /view answer 503 while no map is loaded.
class PoseService {
 public:
  explicit PoseService(std::shared_ptr<const SourceModel> model = nullptr);

  /// Dispatches one GET request; safe to call concurrently.
  HttpReply handle(const std::string& path, const std::multimap<std::string, std::string>& params) const;

  /// Binds host:port (0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); requires a successful bind().
  void listen();
  void stop();

 private:
  std::shared_ptr<const SourceModel> model_;
  std::string map_json_;
  struct Server;
  std::shared_ptr<Server> server_;
};

}  // namespace facepipe
