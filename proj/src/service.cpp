#include "facepipe/service.hpp"

#include <cmath>

#include "facepipe/annotations.hpp"
#include "facepipe/image_io.hpp"
#include "httplib.h"

namespace facepipe {

struct PoseService::Server {
  httplib::Server http;
};

PoseService::PoseService(std::shared_ptr<const SourceModel> model)
    : model_(std::move(model)), server_(std::make_shared<Server>()) {
  if (model_) map_json_ = map_to_json(model_->map).dump();
}

namespace {

HttpReply json_reply(int status, const nlohmann::json& body) {
  HttpReply r;
  r.status = status;
  r.body = body.dump();
  return r;
}

HttpReply error_reply(int status, const std::string& message) {
  return json_reply(status, {{"version", kSchemaVersion}, {"error", message}});
}

double number_param(const std::multimap<std::string, std::string>& params, const std::string& name, double limit) {
  const auto it = params.find(name);
  if (it == params.end()) throw Error("missing query parameter '" + name + "'");
  const std::string& text = it->second;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (text.empty() || used != text.size() || !std::isfinite(v))
    throw Error("query parameter '" + name + "' is not a finite number");
  if (std::abs(v) > limit)
    throw Error("query parameter '" + name + "' outside [-" + std::to_string(static_cast<int>(limit)) + ", " +
                std::to_string(static_cast<int>(limit)) + "]");
  return v;
}

}  // namespace

HttpReply PoseService::handle(const std::string& path, const std::multimap<std::string, std::string>& params) const {
  if (path == "/health")
    return json_reply(200, {{"version", kSchemaVersion}, {"status", "ok"}, {"map_ready", model_ != nullptr}});
  if (path != "/map" && path != "/view") return error_reply(404, "unknown endpoint " + path);
  if (!model_) return error_reply(503, "appearance map is not built");
  if (path == "/map") {
    HttpReply r;
    r.body = map_json_;
    return r;
  }
  PoseAngles pose;
  try {
    pose.yaw = number_param(params, "yaw", kMapBound);
    pose.pitch = number_param(params, "pitch", kMapBound);
    pose.roll = params.contains("roll") ? number_param(params, "roll", 180.0) : 0.0;
  } catch (const Error& e) {
    return error_reply(400, e.what());
  }
  try {
    const PoseView view = render_pose(*model_, pose);
    const auto png = encode_png(view.image);
    HttpReply r;
    r.content_type = "image/png";
    r.body.assign(png.begin(), png.end());
    nlohmann::json weights = nlohmann::json::array();
    for (const auto& w : view.answer.weights) weights.push_back({w.vertex, w.weight});
    r.headers["X-Triangle-Id"] = std::to_string(view.answer.triangle);
    r.headers["X-Weights"] = weights.dump();
    r.headers["X-Roll-Correction"] = nlohmann::json(view.roll_correction).dump();
    return r;
  } catch (const Error& e) {
    return error_reply(400, e.what());
  }
}

int PoseService::bind(const std::string& host, int port) {
  auto& http = server_->http;
  http.Get(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
    std::multimap<std::string, std::string> params(req.params.begin(), req.params.end());
    const HttpReply reply = handle(req.path, params);
    res.status = reply.status;
    for (const auto& [k, v] : reply.headers) res.set_header(k, v);
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Expose-Headers", "X-Triangle-Id, X-Weights, X-Roll-Correction");
    res.set_content(reply.body, reply.content_type);
  });
  const int bound = port == 0 ? http.bind_to_any_port(host) : (http.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void PoseService::listen() {
  server_->http.listen_after_bind();
}

void PoseService::stop() { server_->http.stop(); }

}  // namespace facepipe
