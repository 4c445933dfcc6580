#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "facepipe/appearance_map.hpp"
#include "facepipe/core.hpp"
#include "facepipe/metrics.hpp"
#include "facepipe/poisson.hpp"
#include "facepipe/renderer.hpp"
#include "facepipe/tracking.hpp"
#include "facepipe/transformer.hpp"

namespace facepipe {

struct PipelineConfig {
  std::filesystem::path source_dir;
  std::filesystem::path target_dir;
  std::filesystem::path output_dir;
  std::string renderer = "warp";
  /// Reenactment steps per view; above 1 needs a transformer checkpoint.
  int iterations = 1;
  std::optional<std::filesystem::path> transformer_checkpoint;
  double prune_radius = kDefaultPruneRadius;
  double blur_threshold = 0.0;  // disabled
  bool smooth = true;
  SmoothingParams smoothing;
  double blend_tolerance = 1e-8;
  double erode_width = 7.0;
  int crop_size = 256;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Thrown for unusable configuration or inputs (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Greedy farthest-point selection on flattened landmark vectors: start with
/// the frame farthest from the mean, then repeatedly add the frame whose
/// minimum distance to the selection is largest (ties: earliest). Returns the
/// chosen frames in their original order.
FrameSequence curate_sequence(const FrameSequence& sequence, std::size_t max_frames);

/// Source views in crop space: each frame's box resampled to size x size,
/// landmarks mapped into the crop.
FrameSequence crop_views(const FrameSequence& sequence, int size);

/// Appearance map plus the renderer (and optional transformer) that draws from it.
struct SourceModel {
  AppearanceMap map;
  std::unique_ptr<Renderer> renderer;
  std::optional<MlpTransformer> transformer;
  int crop_size = 256;
};

/// Loads the source directory and runs smooth -> crop -> mirror fill -> blur
/// filter -> prune -> build_map. Throws ConfigError when no map can be built.
SourceModel build_source_model(const PipelineConfig& config);
/// Same stages over an in-memory sequence whose frames carry images.
SourceModel build_source_model(const FrameSequence& source, const PipelineConfig& config);

/// Weighted blend of the renderer outputs of the answer's views toward
/// `target` (crop space). With a transformer and iterations > 1 each view is
/// reenacted iteratively along T's intermediate landmarks, ending at `target`.
ImageBuffer render_views(const SourceModel& model, const ViewAnswer& answer, const LandmarkSet& target,
                         const PoseAngles& target_pose, int iterations);

struct FrameFailure {
  int frame = -1;  // -1 when the frame index is unknown
  std::string file;
  std::string message;
};

struct SwapFrameStats {
  int frame = 0;
  std::filesystem::path output;
  PoissonChannelStats worst_channel;
};

struct SwapResult {
  MetricReport report;
  std::vector<SwapFrameStats> frames;
  std::vector<FrameFailure> failures;
  int exit_code() const { return failures.empty() ? 0 : 1; }
};

/// Face swap of every target frame: locate the target pose in the source map,
/// render the weighted views toward the target landmarks (heatmap
/// conditioned), Poisson-blend into the target crop under the target face
/// mask, soft-erode, composite and paste back. Writes NNNNNN.png per frame,
/// report.json, report.csv and map.json to the output directory.
SwapResult run_swap(const PipelineConfig& config);

struct PoseView {
  ImageBuffer image;
  LandmarkSet landmarks;
  ViewAnswer answer;
  double roll_correction = 0.0;  // degrees the blended view was rotated by
};

/// One pose-only reenactment frame: blend the views at (yaw, pitch) toward
/// their blended landmarks, then rotate image and landmarks about the crop
/// center so that the blended roll matches the requested roll.
PoseView render_pose(const SourceModel& model, const PoseAngles& pose);

/// Reads {"version": 1, "poses": [{"yaw", "pitch", "roll"}, ...]} or a bare array.
std::vector<PoseAngles> load_pose_path(const std::filesystem::path& file);

/// render_pose for each pose, written as NNNNNN.png and NNNNNN.json.
std::vector<PoseView> run_pose_reenact(const PipelineConfig& config, const std::vector<PoseAngles>& path);

struct ExpressionResult {
  std::vector<std::filesystem::path> outputs;
  std::vector<FrameFailure> failures;
};

/// Expression-only reenactment: frame i of the target gets the mouth of
/// frame i of the source (swap_mouth_landmarks in crop space), rendered from
/// the target crop and pasted back under the soft face mask.
ExpressionResult run_expression_reenact(const PipelineConfig& config);

}  // namespace facepipe
