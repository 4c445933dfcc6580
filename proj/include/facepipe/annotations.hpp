#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "facepipe/core.hpp"
#include "json.hpp"

namespace facepipe {

inline constexpr int kSchemaVersion = 1;

// Per-frame annotation file:
//   {"version": 1, "frame": int, "image": "000000.png",
//    "bbox": {"cx","cy","w","h"}, "landmarks": [[x,y] x 98],
//    "pose": {"yaw","pitch","roll"}, "mask": "000000_mask.png"}
// "image" defaults to the annotation stem + ".png"; "mask" is optional.
// Relative paths resolve against the annotation's directory.

nlohmann::json to_json(const FrameRecord& record);
FrameRecord frame_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

nlohmann::json to_json(const LandmarkSet& p);
LandmarkSet landmarks_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PoseAngles& pose);
PoseAngles pose_from_json(const nlohmann::json& j);

struct FrameLoadError {
  std::filesystem::path file;
  std::string message;
};

struct FrameDirectory {
  FrameSequence sequence;
  std::vector<FrameLoadError> errors;
};

/// Reads every *.json annotation in `dir`, ordered by frame index.
/// Malformed files are reported in `errors` instead of aborting.
/// With `load_payloads`, images and masks are decoded into the records.
FrameDirectory load_frame_directory(const std::filesystem::path& dir, bool load_payloads);

void write_annotation(const FrameRecord& record, const std::filesystem::path& file);

}  // namespace facepipe
