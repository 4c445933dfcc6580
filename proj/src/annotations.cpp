#include "facepipe/annotations.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "facepipe/image_io.hpp"

namespace facepipe {

using nlohmann::json;

json to_json(const LandmarkSet& p) {
  json arr = json::array();
  for (const auto& q : p.points()) arr.push_back({q.x, q.y});
  return arr;
}

LandmarkSet landmarks_from_json(const json& j) {
  if (!j.is_array()) throw Error("landmarks must be an array");
  std::vector<Point2> pts;
  pts.reserve(j.size());
  for (const auto& q : j) {
    if (!q.is_array() || q.size() != 2) throw Error("landmark entries must be [x, y]");
    pts.push_back({q[0].get<double>(), q[1].get<double>()});
  }
  return LandmarkSet(pts);
}

json to_json(const PoseAngles& pose) {
  return {{"yaw", pose.yaw}, {"pitch", pose.pitch}, {"roll", pose.roll}};
}

PoseAngles pose_from_json(const json& j) {
  PoseAngles p{j.at("yaw").get<double>(), j.at("pitch").get<double>(), j.at("roll").get<double>()};
  if (!p.finite()) throw Error("pose angles must be finite");
  return p;
}

json to_json(const FrameRecord& r) {
  json j = {{"version", kSchemaVersion},
            {"frame", r.index},
            {"image", r.image_path},
            {"bbox", {{"cx", r.bbox.cx}, {"cy", r.bbox.cy}, {"w", r.bbox.w}, {"h", r.bbox.h}}},
            {"landmarks", to_json(r.landmarks)},
            {"pose", to_json(r.pose)}};
  if (r.mask_path) j["mask"] = *r.mask_path;
  return j;
}

FrameRecord frame_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (j.contains("version") && j["version"].get<int>() != kSchemaVersion)
    throw Error("unsupported annotation version " + j["version"].dump());
  FrameRecord r;
  r.index = j.at("frame").get<int>();
  const auto& b = j.at("bbox");
  r.bbox = {b.at("cx").get<double>(), b.at("cy").get<double>(), b.at("w").get<double>(),
            b.at("h").get<double>()};
  r.bbox.validate();
  r.landmarks = landmarks_from_json(j.at("landmarks"));
  r.pose = pose_from_json(j.at("pose"));
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return (path.is_absolute() ? path : base_dir / path).string();
  };
  if (j.contains("image")) r.image_path = resolve(j["image"].get<std::string>());
  if (j.contains("mask") && !j["mask"].is_null()) r.mask_path = resolve(j["mask"].get<std::string>());
  return r;
}

FrameDirectory load_frame_directory(const std::filesystem::path& dir, bool load_payloads) {
  if (!std::filesystem::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());

  FrameDirectory out;
  std::map<int, FrameRecord> by_index;
  for (const auto& f : files) {
    try {
      std::ifstream in(f);
      const json j = json::parse(in);
      if (!j.is_object() || !j.contains("landmarks")) continue;  // not an annotation
      FrameRecord r = frame_from_json(j, dir);
      if (r.image_path.empty()) r.image_path = (dir / f.stem()).string() + ".png";
      if (load_payloads) {
        r.image = std::make_shared<const ImageBuffer>(load_image(r.image_path));
        if (r.mask_path) r.mask = std::make_shared<const SegMask>(load_mask(*r.mask_path));
      }
      if (by_index.contains(r.index)) throw Error("duplicate frame index " + std::to_string(r.index));
      by_index.emplace(r.index, std::move(r));
    } catch (const std::exception& e) {
      out.errors.push_back({f, e.what()});
    }
  }
  std::vector<FrameRecord> frames;
  for (auto& [_, r] : by_index) frames.push_back(std::move(r));
  out.sequence = FrameSequence(std::move(frames));
  return out;
}

void write_annotation(const FrameRecord& record, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  FrameRecord rel = record;
  const auto base = file.parent_path();
  auto relative = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.parent_path() == base ? path.filename().string() : p;
  };
  rel.image_path = relative(record.image_path);
  if (rel.mask_path) rel.mask_path = relative(*record.mask_path);
  out << to_json(rel).dump(2) << "\n";
}

}  // namespace facepipe
