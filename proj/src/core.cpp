#include "facepipe/core.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <sstream>

namespace facepipe {

ImageBuffer::ImageBuffer(int width, int height, int channels, float fill)
    : ImageBuffer(width, height, channels,
                  std::vector<float>(static_cast<std::size_t>(std::max(width, 0)) *
                                         std::max(height, 0) * std::max(channels, 0),
                                     fill)) {}

ImageBuffer::ImageBuffer(int width, int height, int channels, std::vector<float> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (width <= 0 || height <= 0) throw Error("image extent must be positive");
  if (channels != 1 && channels != 3) throw Error("image must have 1 or 3 channels");
  if (data_.size() != static_cast<std::size_t>(width) * height * channels)
    throw Error("image data length does not match width*height*channels");
}

void ImageBuffer::check_range() const {
  for (float v : data_)
    if (!(v >= 0.0f && v <= 1.0f)) throw Error("image value outside [0,1]");
}

void BoundingBox::validate() const {
  if (!(std::isfinite(cx) && std::isfinite(cy) && std::isfinite(w) && std::isfinite(h)))
    throw Error("bounding box has non-finite fields");
  if (!(w > 0.0 && h > 0.0)) throw Error("bounding box extent must be positive");
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.left(), b.left()));
  const double iy = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top()));
  const double inter = ix * iy;
  if (inter <= 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

const std::array<std::size_t, kNumLandmarks>& wflw_flip_permutation() {
  static const std::array<std::size_t, kNumLandmarks> table = [] {
    std::array<std::size_t, kNumLandmarks> t{};
    for (std::size_t i = 0; i < kNumLandmarks; ++i) t[i] = i;
    auto pair = [&t](std::size_t a, std::size_t b) {
      t[a] = b;
      t[b] = a;
    };
    for (std::size_t i = 0; i < 16; ++i) pair(i, 32 - i);
    // Brows: upper arcs 33-37 / 42-46, lower arcs 38-41 / 47-50.
    for (std::size_t i = 0; i < 5; ++i) pair(33 + i, 46 - i);
    for (std::size_t i = 0; i < 4; ++i) pair(38 + i, 50 - i);
    pair(55, 59);
    pair(56, 58);
    // Eyes: corners 60/64 and 68/72.
    for (std::size_t i = 0; i < 5; ++i) pair(60 + i, 72 - i);
    for (std::size_t i = 0; i < 3; ++i) pair(65 + i, 75 - i);
    // Outer lip 76-87, inner lip 88-95.
    for (std::size_t i = 0; i < 3; ++i) pair(76 + i, 82 - i);
    pair(83, 87);
    pair(84, 86);
    pair(88, 92);
    pair(89, 91);
    pair(93, 95);
    pair(96, 97);
    return t;
  }();
  return table;
}

LandmarkSet::LandmarkSet(const std::array<Point2, kNumLandmarks>& points) : points_(points) {
  if (!all_finite()) throw Error("landmarks must be finite");
}

LandmarkSet::LandmarkSet(const std::vector<Point2>& points) {
  if (points.size() != kNumLandmarks) {
    std::ostringstream os;
    os << "expected " << kNumLandmarks << " landmarks, got " << points.size();
    throw Error(os.str());
  }
  std::copy(points.begin(), points.end(), points_.begin());
  if (!all_finite()) throw Error("landmarks must be finite");
}

bool LandmarkSet::all_finite() const {
  return std::all_of(points_.begin(), points_.end(),
                     [](const Point2& p) { return std::isfinite(p.x) && std::isfinite(p.y); });
}

Point2 LandmarkSet::centroid(PartRange range) const {
  Point2 s{};
  for (std::size_t i = range.first; i <= range.last; ++i) s = s + points_[i];
  return s * (1.0 / static_cast<double>(range.size()));
}

LandmarkSet LandmarkSet::translated(Point2 d) const {
  LandmarkSet out = *this;
  for (auto& p : out.points_) p = p + d;
  return out;
}

double wrap_degrees(double angle) {
  double a = std::fmod(angle + 180.0, 360.0);
  if (a < 0.0) a += 360.0;
  return a - 180.0;
}

PoseAngles PoseAngles::canonical() const {
  return {wrap_degrees(yaw), wrap_degrees(pitch), wrap_degrees(roll)};
}

SegMask::SegMask(int width, int height, SegLabel fill)
    : SegMask(width, height,
              std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                            std::max(height, 0),
                                        static_cast<std::uint8_t>(fill))) {}

SegMask::SegMask(int width, int height, std::vector<std::uint8_t> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
  if (width <= 0 || height <= 0) throw Error("mask extent must be positive");
  if (labels_.size() != static_cast<std::size_t>(width) * height)
    throw Error("mask label count does not match extent");
  for (auto l : labels_)
    if (l > 2) throw Error("mask label outside {0,1,2}");
}

std::size_t SegMask::count(SegLabel l) const {
  return static_cast<std::size_t>(
      std::count(labels_.begin(), labels_.end(), static_cast<std::uint8_t>(l)));
}

ImageBuffer binary_face_mask(const SegMask& mask) {
  ImageBuffer out(mask.width(), mask.height(), 1);
  auto& d = out.data();
  const auto& labels = mask.labels();
  for (std::size_t i = 0; i < labels.size(); ++i)
    d[i] = labels[i] == static_cast<std::uint8_t>(SegLabel::kFace) ? 1.0f : 0.0f;
  return out;
}

FrameSequence::FrameSequence(std::vector<FrameRecord> frames) : frames_(std::move(frames)) {
  for (std::size_t i = 1; i < frames_.size(); ++i)
    if (frames_[i].index <= frames_[i - 1].index)
      throw Error("frame indices must be strictly increasing");
}

int thread_budget() {
  if (const char* env = std::getenv("FACEPIPE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(std::min<long>(v, 1024));
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

}  // namespace facepipe
