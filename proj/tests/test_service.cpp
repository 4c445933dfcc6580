#include <doctest.h>

#include <fstream>
#include <iterator>
#include <thread>

#include "facepipe/image_io.hpp"
#include "facepipe/service.hpp"
#include "facepipe/synthetic.hpp"
#include "httplib.h"
#include "support.hpp"

using namespace facepipe;
namespace fs = std::filesystem;
using Params = std::multimap<std::string, std::string>;

namespace {

PipelineConfig service_config() {
  PipelineConfig c;
  c.crop_size = 64;
  return c;
}

FrameSequence service_frames() {
  SyntheticSequenceSpec s;
  s.frames = 6;
  s.width = 128;
  s.height = 128;
  s.scale = 30.0;
  s.seed = 21;
  return synthetic_sequence(s);
}

// Source frames on disk, shared by the service and the command-line route.
const std::filesystem::path& source_dir() {
  static const test::TempDir dir("service");
  static const bool written = (write_sequence(service_frames(), dir / "src"), true);
  static const fs::path src = written ? dir / "src" : fs::path();
  return src;
}

PipelineConfig source_config() {
  PipelineConfig c = service_config();
  c.source_dir = source_dir();
  return c;
}

std::shared_ptr<const SourceModel> shared_model() {
  static const auto model = std::make_shared<const SourceModel>(build_source_model(source_config()));
  return model;
}

// First interior vertex, queried at its own pose.
Params vertex_query(const SourceModel& m, int* vertex = nullptr) {
  int v = 0;
  while (m.map.vertices[v].boundary) ++v;
  if (vertex) *vertex = v;
  // Shortest round-trip text, so the parsed query hits the vertex exactly.
  return {{"yaw", nlohmann::json(m.map.vertices[v].yaw).dump()}, {"pitch", nlohmann::json(m.map.vertices[v].pitch).dump()}};
}

nlohmann::json body_json(const HttpReply& r) { return nlohmann::json::parse(r.body); }

}  // namespace

TEST_CASE("health answers with or without a map") {
  const PoseService empty;
  const HttpReply a = empty.handle("/health", {});
  CHECK(a.status == 200);
  CHECK(body_json(a)["map_ready"] == false);
  CHECK(body_json(a)["status"] == "ok");
  const HttpReply b = PoseService(shared_model()).handle("/health", {});
  CHECK(b.status == 200);
  CHECK(body_json(b)["map_ready"] == true);
}

TEST_CASE("map and view are unavailable until a map is built") {
  const PoseService empty;
  for (const char* path : {"/map", "/view"}) {
    const HttpReply r = empty.handle(path, {{"yaw", "0"}, {"pitch", "0"}});
    CHECK(r.status == 503);
    CHECK(body_json(r)["version"] == 1);
    CHECK(body_json(r).contains("error"));
  }
  CHECK(empty.handle("/nope", {}).status == 404);
}

TEST_CASE("the map endpoint serves the built triangulation") {
  const auto model = shared_model();
  const HttpReply r = PoseService(model).handle("/map", {});
  CHECK(r.status == 200);
  CHECK(r.content_type == "application/json");
  const auto j = body_json(r);
  CHECK(j == map_to_json(model->map));
  CHECK(j["triangles"].size() == model->map.triangles.size());
}

TEST_CASE("malformed view queries get 400") {
  const PoseService service(shared_model());
  const std::vector<Params> bad = {
      {},
      {{"yaw", "0"}},
      {{"pitch", "0"}},
      {{"yaw", "abc"}, {"pitch", "0"}},
      {{"yaw", "1x"}, {"pitch", "0"}},
      {{"yaw", ""}, {"pitch", "0"}},
      {{"yaw", "nan"}, {"pitch", "0"}},
      {{"yaw", "inf"}, {"pitch", "0"}},
      {{"yaw", "75.5"}, {"pitch", "0"}},
      {{"yaw", "0"}, {"pitch", "-76"}},
      {{"yaw", "0"}, {"pitch", "0"}, {"roll", "181"}},
  };
  for (const auto& q : bad) {
    const HttpReply r = service.handle("/view", q);
    CHECK(r.status == 400);
    CHECK(body_json(r)["error"].is_string());
  }
  CHECK(service.handle("/view", {{"yaw", "75"}, {"pitch", "-75"}, {"roll", "-180"}}).status != 400);
}

TEST_CASE("a view at a vertex pose is that vertex's pose reenactment") {
  const auto model = shared_model();
  int vertex = 0;
  Params q = vertex_query(*model, &vertex);
  const HttpReply r = PoseService(model).handle("/view", q);
  REQUIRE(r.status == 200);
  CHECK(r.content_type == "image/png");
  const PoseAngles pose{std::stod(q.find("yaw")->second), std::stod(q.find("pitch")->second), 0.0};
  const PoseView direct = render_pose(*model, pose);
  const auto png = encode_png(direct.image);
  CHECK(r.body == std::string(png.begin(), png.end()));
  CHECK(r.headers.at("X-Triangle-Id") == std::to_string(direct.answer.triangle));
  const auto weights = nlohmann::json::parse(r.headers.at("X-Weights"));
  double own = 0.0, total = 0.0;
  for (const auto& w : weights) {
    total += w[1].get<double>();
    if (w[0] == vertex) own = w[1].get<double>();
  }
  CHECK(own == 1.0);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(nlohmann::json::parse(r.headers.at("X-Roll-Correction")).get<double>() ==
        doctest::Approx(direct.roll_correction));

  // Same bytes as the command-line pose reenactment of that single pose.
  test::TempDir dir("service_out");
  PipelineConfig c = source_config();
  c.output_dir = dir / "out";
  run_pose_reenact(c, {pose});
  std::ifstream in(dir / "out" / "000000.png", std::ios::binary);
  CHECK(r.body == std::string(std::istreambuf_iterator<char>(in), {}));
}

TEST_CASE("the HTTP server answers real requests with CORS headers") {
  PoseService service(shared_model());
  const int port = service.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread server([&] { service.listen(); });

  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(60, 0);
  const auto health = client.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

  const auto map = client.Get("/map");
  REQUIRE(map);
  CHECK(nlohmann::json::parse(map->body) == map_to_json(shared_model()->map));

  CHECK(client.Get("/view?yaw=90&pitch=0")->status == 400);
  CHECK(client.Get("/other")->status == 404);

  const Params q = vertex_query(*shared_model());
  const std::string url = "/view?yaw=" + q.find("yaw")->second + "&pitch=" + q.find("pitch")->second + "&roll=5";
  const HttpReply expected = service.handle("/view", {q.begin(), q.end()});
  Params rolled = q;
  rolled.emplace("roll", "5");
  const HttpReply expected_rolled = service.handle("/view", rolled);
  CHECK(expected.body != expected_rolled.body);

  // Concurrent identical requests return identical bytes.
  std::vector<std::string> bodies(4);
  std::vector<std::string> triangles(4);
  std::vector<std::thread> clients;
  for (int i = 0; i < 4; ++i)
    clients.emplace_back([&, i] {
      httplib::Client c("127.0.0.1", port);
      c.set_read_timeout(60, 0);
      if (const auto res = c.Get(url); res && res->status == 200) {
        bodies[i] = res->body;
        triangles[i] = res->get_header_value("X-Triangle-Id");
      }
    });
  for (auto& t : clients) t.join();
  for (int i = 0; i < 4; ++i) {
    CHECK(bodies[i] == expected_rolled.body);
    CHECK(triangles[i] == expected_rolled.headers.at("X-Triangle-Id"));
  }

  const auto view = client.Get(url);
  REQUIRE(view);
  CHECK(view->get_header_value("Content-Type") == "image/png");
  CHECK(view->get_header_value("Access-Control-Expose-Headers").find("X-Weights") != std::string::npos);
  CHECK(decode_png(std::vector<std::uint8_t>(view->body.begin(), view->body.end())).width() == 64);

  service.stop();
  server.join();
}
