#include "facepipe/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <thread>

#include "facepipe/annotations.hpp"
#include "facepipe/heatmap.hpp"
#include "facepipe/image_io.hpp"
#include "facepipe/image_ops.hpp"

namespace facepipe {

namespace fs = std::filesystem;

void PipelineConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (iterations > 1 && !transformer_checkpoint)
    throw ConfigError("more than one reenactment iteration needs a transformer checkpoint");
  if (!(prune_radius >= 0.0)) throw ConfigError("prune radius must be non-negative");
  if (!(blend_tolerance > 0.0)) throw ConfigError("blend tolerance must be positive");
  if (!(erode_width >= 0.0)) throw ConfigError("erode width must be non-negative");
  if (crop_size < 8 || crop_size > 4096) throw ConfigError("crop size must lie in [8, 4096]");
  if (renderer != "warp" && renderer != "identity") throw ConfigError("unknown renderer '" + renderer + "'");
  try {
    smoothing.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

namespace {

std::string frame_name(int index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d%s", index, ext);
  return buf;
}

// Box shrunk to its intersection with the frame.
BoundingBox fit_to_frame(const BoundingBox& b, int width, int height) {
  const double x0 = std::max(0.0, b.left());
  const double y0 = std::max(0.0, b.top());
  const double x1 = std::min(static_cast<double>(width), b.right());
  const double y1 = std::min(static_cast<double>(height), b.bottom());
  if (!(x1 > x0 && y1 > y0)) throw Error("bounding box lies outside the frame");
  return BoundingBox::from_corners(x0, y0, x1, y1);
}

// Runs job(i) for i in [0, n) on up to thread_budget() workers.
template <class Job>
void parallel_for(std::size_t n, Job&& job) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(thread_budget()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) job(i);
    });
  for (auto& t : pool) t.join();
}

FrameDirectory load_dir(const fs::path& dir, const char* what) {
  try {
    return load_frame_directory(dir, true);
  } catch (const Error& e) {
    throw ConfigError(std::string(what) + " directory: " + e.what());
  }
}

std::vector<FrameFailure> to_failures(const std::vector<FrameLoadError>& errors) {
  std::vector<FrameFailure> out;
  for (const auto& e : errors) out.push_back({-1, e.file.string(), e.message});
  return out;
}

// Images in `dir` that no annotation refers to.
std::vector<FrameFailure> unannotated_images(const fs::path& dir, const FrameSequence& frames,
                                             const std::vector<FrameLoadError>& load_errors) {
  std::set<fs::path> referenced;
  for (const auto& f : frames) {
    referenced.insert(fs::weakly_canonical(f.image_path));
    if (f.mask_path) referenced.insert(fs::weakly_canonical(*f.mask_path));
  }
  std::set<std::string> failed_stems;
  for (const auto& e : load_errors) failed_stems.insert(e.file.stem().string());
  std::vector<fs::path> orphans;
  for (const auto& e : fs::directory_iterator(dir)) {
    const fs::path& p = e.path();
    if (!e.is_regular_file() || p.extension() != ".png") continue;
    const std::string stem = p.stem().string();
    if (stem.ends_with("_mask") || failed_stems.contains(stem)) continue;
    if (!referenced.contains(fs::weakly_canonical(p))) orphans.push_back(p);
  }
  std::sort(orphans.begin(), orphans.end());
  std::vector<FrameFailure> out;
  for (const auto& p : orphans) out.push_back({-1, p.string(), "image has no annotation"});
  return out;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << text;
}

}  // namespace

FrameSequence curate_sequence(const FrameSequence& sequence, std::size_t max_frames) {
  const std::size_t n = sequence.size();
  if (n <= max_frames) return sequence;
  if (max_frames == 0) return FrameSequence();
  const std::size_t d = 2 * kNumLandmarks;
  std::vector<double> flat(n * d), mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < kNumLandmarks; ++k) {
      flat[i * d + 2 * k] = sequence[i].landmarks[k].x;
      flat[i * d + 2 * k + 1] = sequence[i].landmarks[k].y;
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += flat[i * d + j];
  for (double& m : mean) m /= static_cast<double>(n);
  auto dist2 = [&](std::size_t i, const double* b) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += (flat[i * d + j] - b[j]) * (flat[i * d + j] - b[j]);
    return s;
  };
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = dist2(i, mean.data());
  std::vector<bool> chosen(n, false);
  for (std::size_t round = 0; round < max_frames; ++round) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!chosen[i] && (best == n || nearest[i] > nearest[best])) best = i;
    chosen[best] = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = dist2(i, flat.data() + best * d);
      nearest[i] = round == 0 ? v : std::min(nearest[i], v);
    }
  }
  std::vector<FrameRecord> out;
  for (std::size_t i = 0; i < n; ++i)
    if (chosen[i]) out.push_back(sequence[i]);
  return FrameSequence(std::move(out));
}

FrameSequence crop_views(const FrameSequence& sequence, int size) {
  std::vector<FrameRecord> out;
  for (const auto& f : sequence) {
    if (!f.image) throw Error("frame " + std::to_string(f.index) + " has no image");
    const BoundingBox box = fit_to_frame(f.bbox, f.image->width(), f.image->height());
    FrameRecord c = f;
    c.image = std::make_shared<const ImageBuffer>(crop_resize(*f.image, box, size, size));
    if (f.mask) c.mask = std::make_shared<const SegMask>(crop_resize(*f.mask, box, size, size));
    // Clamped so the warp always sees in-frame correspondences.
    c.landmarks = clamp_to_frame(to_crop(f.landmarks, box, size, size), size, size);
    c.bbox = {0.5 * size, 0.5 * size, static_cast<double>(size), static_cast<double>(size)};
    out.push_back(std::move(c));
  }
  return FrameSequence(std::move(out));
}

SourceModel build_source_model(const FrameSequence& source, const PipelineConfig& config) {
  config.validate();
  SourceModel model;
  model.crop_size = config.crop_size;
  model.renderer = make_renderer(config.renderer);
  if (config.transformer_checkpoint) {
    try {
      model.transformer = load_checkpoint(*config.transformer_checkpoint);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  if (source.empty()) throw ConfigError("source sequence has no frames");
  try {
    const FrameSequence smoothed = config.smooth ? smooth_sequence(source, config.smoothing) : source;
    FrameSequence views = crop_views(smoothed, config.crop_size);
    views = mirror_fill(views, config.crop_size);
    views = drop_blurred(views, config.blur_threshold);
    views = prune_views(views, config.prune_radius);
    if (views.empty()) throw Error("every source view was filtered out");
    model.map = build_map(views);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("cannot build appearance map: ") + e.what());
  }
  return model;
}

SourceModel build_source_model(const PipelineConfig& config) {
  const FrameDirectory dir = load_dir(config.source_dir, "source");
  if (!dir.errors.empty())
    throw ConfigError("source frame " + dir.errors.front().file.string() + ": " + dir.errors.front().message);
  return build_source_model(dir.sequence, config);
}

ImageBuffer render_views(const SourceModel& model, const ViewAnswer& answer, const LandmarkSet& target,
                         const PoseAngles& target_pose, int iterations) {
  const int S = model.crop_size;
  const LandmarkSet p = clamp_to_frame(target, S, S);
  if (!model.transformer || iterations <= 1) {
    const Heatmap heatmap = encode_heatmap(p, S, S);
    return interpolate_views(model.map, answer, *model.renderer, p, &heatmap);
  }
  std::vector<double> acc;
  int w = 0, h = 0, c = 0;
  for (const auto& vw : answer.weights) {
    const FrameRecord& view = model.map.views.at(model.map.vertices.at(vw.vertex).view);
    const ImageBuffer img = reenact_iterative(*model.renderer, *view.image, view.landmarks, view.pose, target_pose,
                                              iterations, *model.transformer, &p)
                                .image;
    if (acc.empty()) {
      w = img.width();
      h = img.height();
      c = img.channels();
      acc.assign(img.size(), 0.0);
    }
    for (std::size_t i = 0; i < img.size(); ++i) acc[i] += vw.weight * img.data()[i];
  }
  std::vector<float> out(acc.size());
  std::transform(acc.begin(), acc.end(), out.begin(),
                 [](double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); });
  return ImageBuffer(w, h, c, std::move(out));
}

namespace {

struct SwapOutcome {
  std::optional<SwapFrameStats> stats;
  std::optional<FrameFailure> failure;
  double l1 = 0.0, pose_error = 0.0, landmark_error = 0.0, residual = 0.0;
};

SwapOutcome swap_frame(const SourceModel& model, const FrameRecord& f, const PipelineConfig& config) {
  SwapOutcome out;
  try {
    if (!f.image) throw Error("image not loaded");
    if (!f.mask) throw Error("annotation has no face mask");
    const int S = config.crop_size;
    const ImageBuffer& frame = *f.image;
    const BoundingBox box = fit_to_frame(f.bbox, frame.width(), frame.height());
    const ImageBuffer target = crop_resize(frame, box, S, S);
    const ImageBuffer face = binary_face_mask(crop_resize(*f.mask, box, S, S));
    const LandmarkSet p_t = clamp_to_frame(to_crop(f.landmarks, box, S, S), S, S);

    const ViewAnswer answer = locate(model.map, f.pose);
    const ImageBuffer rendered =
        convert_channels(render_views(model, answer, p_t, f.pose, config.iterations), target.channels());

    PoissonProblem problem{target, rendered, face, config.blend_tolerance};
    const PoissonResult blended = poisson_solve(problem);
    const ImageBuffer soft = soft_erode(face, config.erode_width);
    const ImageBuffer swapped = composite(blended.image, target, soft);
    const ImageBuffer result = paste_back(frame, swapped, soft, box);

    SwapFrameStats stats;
    stats.frame = f.index;
    stats.output = config.output_dir / frame_name(f.index, ".png");
    for (const auto& ch : blended.channels)
      if (ch.relative_residual >= stats.worst_channel.relative_residual) stats.worst_channel = ch;
    save_image(result, stats.output);

    PoseAngles blended_pose{};
    for (const auto& vw : answer.weights) {
      blended_pose.yaw += vw.weight * model.map.vertices[vw.vertex].yaw;
      blended_pose.pitch += vw.weight * model.map.vertices[vw.vertex].pitch;
    }
    blended_pose.roll = blend_roll(model.map, answer);
    out.l1 = l1_distance(result, frame);
    out.pose_error = euler_distance(f.pose, blended_pose);
    out.landmark_error = landmark_distance(p_t, blend_landmarks(model.map, answer));
    out.residual = stats.worst_channel.relative_residual;
    out.stats = std::move(stats);
  } catch (const std::exception& e) {
    out.failure = FrameFailure{f.index, f.image_path, e.what()};
  }
  return out;
}

}  // namespace

SwapResult run_swap(const PipelineConfig& config) {
  config.validate();
  if (config.output_dir.empty()) throw ConfigError("output directory is required");
  auto same = [](const fs::path& a, const fs::path& b) {
    return !a.empty() && !b.empty() && fs::weakly_canonical(a) == fs::weakly_canonical(b);
  };
  if (same(config.output_dir, config.source_dir) || same(config.output_dir, config.target_dir))
    throw ConfigError("output directory must differ from the source and target directories");

  const SourceModel model = build_source_model(config);
  const FrameDirectory target = load_dir(config.target_dir, "target");
  SwapResult result;
  result.failures = to_failures(target.errors);
  for (auto& f : unannotated_images(config.target_dir, target.sequence, target.errors))
    result.failures.push_back(std::move(f));
  if (target.sequence.empty() && result.failures.empty()) throw ConfigError("target directory has no frames");

  fs::create_directories(config.output_dir);
  const FrameSequence frames = config.smooth ? smooth_sequence(target.sequence, config.smoothing) : target.sequence;
  std::vector<SwapOutcome> outcomes(frames.size());
  parallel_for(frames.size(), [&](std::size_t i) { outcomes[i] = swap_frame(model, frames[i], config); });

  for (auto& o : outcomes) {
    if (o.failure) {
      result.failures.push_back(std::move(*o.failure));
      continue;
    }
    result.report.add("l1", o.l1);
    result.report.add("view_pose_error", o.pose_error);
    result.report.add("view_landmark_error", o.landmark_error);
    result.report.add("poisson_residual", o.residual);
    result.frames.push_back(std::move(*o.stats));
  }

  nlohmann::json report = result.report.to_json();
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : result.failures) failures.push_back({{"frame", f.frame}, {"file", f.file}, {"error", f.message}});
  report["failures"] = failures;
  report["frames_written"] = result.frames.size();
  write_text(config.output_dir / "report.json", report.dump(2) + "\n");
  write_text(config.output_dir / "report.csv", result.report.to_csv());
  write_text(config.output_dir / "map.json", map_to_json(model.map).dump(2) + "\n");
  return result;
}

PoseView render_pose(const SourceModel& model, const PoseAngles& pose) {
  if (!pose.finite()) throw Error("pose must be finite");
  if (std::abs(pose.roll) > 180.0) throw Error("roll must lie in [-180, 180]");
  PoseView v;
  v.answer = locate(model.map, pose);
  const int S = model.crop_size;
  const LandmarkSet target = clamp_to_frame(blend_landmarks(model.map, v.answer), S, S);
  const Heatmap heatmap = encode_heatmap(target, S, S);
  const ImageBuffer image = interpolate_views(model.map, v.answer, *model.renderer, target, &heatmap);
  v.roll_correction = pose.roll - blend_roll(model.map, v.answer);
  v.image = rotate_about_center(image, v.roll_correction);
  const Point2 center{S / 2.0, S / 2.0};
  for (std::size_t i = 0; i < kNumLandmarks; ++i)
    v.landmarks[i] = v.roll_correction == 0.0 ? target[i] : rotate_about(target[i], center, v.roll_correction);
  return v;
}

std::vector<PoseAngles> load_pose_path(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open pose path " + file.string());
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    const nlohmann::json& list = j.is_array() ? j : j.at("poses");
    std::vector<PoseAngles> out;
    for (const auto& p : list) out.push_back(pose_from_json(p));
    return out;
  } catch (const std::exception& e) {
    throw ConfigError("pose path " + file.string() + ": " + e.what());
  }
}

std::vector<PoseView> run_pose_reenact(const PipelineConfig& config, const std::vector<PoseAngles>& path) {
  if (config.output_dir.empty()) throw ConfigError("output directory is required");
  const SourceModel model = build_source_model(config);
  fs::create_directories(config.output_dir);
  std::vector<PoseView> views;
  for (std::size_t i = 0; i < path.size(); ++i) {
    PoseView v = render_pose(model, path[i]);
    const int index = static_cast<int>(i);
    save_image(v.image, config.output_dir / frame_name(index, ".png"));
    nlohmann::json weights = nlohmann::json::array();
    for (const auto& w : v.answer.weights) weights.push_back({w.vertex, w.weight});
    const nlohmann::json j = {{"version", kSchemaVersion},
                              {"frame", index},
                              {"image", frame_name(index, ".png")},
                              {"pose", to_json(path[i])},
                              {"landmarks", to_json(v.landmarks)},
                              {"triangle", v.answer.triangle},
                              {"weights", weights},
                              {"roll_correction", v.roll_correction}};
    write_text(config.output_dir / frame_name(index, ".json"), j.dump(2) + "\n");
    views.push_back(std::move(v));
  }
  return views;
}

ExpressionResult run_expression_reenact(const PipelineConfig& config) {
  config.validate();
  if (config.output_dir.empty()) throw ConfigError("output directory is required");
  const FrameDirectory source = load_dir(config.source_dir, "source");
  const FrameDirectory target = load_dir(config.target_dir, "target");
  ExpressionResult result;
  result.failures = to_failures(target.errors);
  for (auto& f : to_failures(source.errors)) result.failures.push_back(std::move(f));
  const FrameSequence src = config.smooth ? smooth_sequence(source.sequence, config.smoothing) : source.sequence;
  const FrameSequence tgt = config.smooth ? smooth_sequence(target.sequence, config.smoothing) : target.sequence;
  if (src.empty() || tgt.empty()) throw ConfigError("expression reenactment needs source and target frames");

  const auto renderer = make_renderer(config.renderer);
  const int S = config.crop_size;
  fs::create_directories(config.output_dir);
  const std::size_t n = std::min(src.size(), tgt.size());
  for (std::size_t i = 0; i < n; ++i) {
    const FrameRecord& t = tgt[i];
    const FrameRecord& s = src[i];
    try {
      if (!t.image) throw Error("image not loaded");
      const BoundingBox tbox = fit_to_frame(t.bbox, t.image->width(), t.image->height());
      const BoundingBox sbox = fit_to_frame(s.bbox, s.image->width(), s.image->height());
      const ImageBuffer crop = crop_resize(*t.image, tbox, S, S);
      const LandmarkSet p_t = clamp_to_frame(to_crop(t.landmarks, tbox, S, S), S, S);
      const LandmarkSet p_s = to_crop(s.landmarks, sbox, S, S);
      const LandmarkSet edited = clamp_to_frame(swap_mouth_landmarks(p_t, p_s), S, S);
      const Heatmap heatmap = encode_heatmap(edited, S, S);
      const ImageBuffer rendered = renderer->render(crop, p_t, RenderTarget{edited, &heatmap});
      const ImageBuffer face = t.mask ? binary_face_mask(crop_resize(*t.mask, tbox, S, S)) : ImageBuffer(S, S, 1, 1.0f);
      const ImageBuffer soft = soft_erode(face, config.erode_width);
      const ImageBuffer out = paste_back(*t.image, composite(rendered, crop, soft), soft, tbox);
      const fs::path file = config.output_dir / frame_name(t.index, ".png");
      save_image(out, file);
      result.outputs.push_back(file);
    } catch (const std::exception& e) {
      result.failures.push_back({t.index, t.image_path, e.what()});
    }
  }
  return result;
}

}  // namespace facepipe
