#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace facepipe {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
  Point2 operator+(const Point2& o) const { return {x + o.x, y + o.y}; }
  Point2 operator-(const Point2& o) const { return {x - o.x, y - o.y}; }
  Point2 operator*(double s) const { return {x * s, y * s}; }
};

inline double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Float image, row-major, interleaved channels, intensities in [0,1].
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, int channels, float fill = 0.0f);
  ImageBuffer(int width, int height, int channels, std::vector<float> data);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  float& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  bool same_extent(const ImageBuffer& o) const {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

  /// Throws unless every value lies in [0,1].
  void check_range() const;

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Axis-aligned box given by center and extent, in pixels.
struct BoundingBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 1.0;
  double h = 1.0;

  double left() const { return cx - 0.5 * w; }
  double right() const { return cx + 0.5 * w; }
  double top() const { return cy - 0.5 * h; }
  double bottom() const { return cy + 0.5 * h; }
  double area() const { return w * h; }

  /// Throws on non-positive or non-finite extent.
  void validate() const;

  static BoundingBox from_corners(double x0, double y0, double x1, double y1) {
    return {0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0};
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

double iou(const BoundingBox& a, const BoundingBox& b);

inline constexpr std::size_t kNumLandmarks = 98;

/// Index range [first, last] of one WFLW face part.
struct PartRange {
  std::size_t first;
  std::size_t last;
  std::size_t size() const { return last - first + 1; }
  bool contains(std::size_t i) const { return i >= first && i <= last; }
};

namespace parts {
inline constexpr PartRange kContour{0, 32};
inline constexpr PartRange kBrows{33, 50};
inline constexpr PartRange kNose{51, 59};
inline constexpr PartRange kEyes{60, 75};
inline constexpr PartRange kMouth{76, 95};
inline constexpr PartRange kPupils{96, 97};
inline constexpr std::array<PartRange, 6> kAll{kContour, kBrows, kNose, kEyes, kMouth, kPupils};
// Outer mouth corners.
inline constexpr std::size_t kMouthLeftCorner = 76;
inline constexpr std::size_t kMouthRightCorner = 82;
}  // namespace parts

/// Left/right index permutation of the 98-point layout under a horizontal flip.
const std::array<std::size_t, kNumLandmarks>& wflw_flip_permutation();

/// 98 WFLW-ordered points in pixel coordinates.
class LandmarkSet {
 public:
  LandmarkSet() = default;
  explicit LandmarkSet(const std::array<Point2, kNumLandmarks>& points);
  /// Throws unless exactly 98 finite points are given.
  explicit LandmarkSet(const std::vector<Point2>& points);

  const Point2& operator[](std::size_t i) const { return points_[i]; }
  Point2& operator[](std::size_t i) { return points_[i]; }
  static constexpr std::size_t size() { return kNumLandmarks; }
  const std::array<Point2, kNumLandmarks>& points() const { return points_; }

  bool all_finite() const;
  Point2 centroid(PartRange range) const;
  LandmarkSet translated(Point2 d) const;

  friend bool operator==(const LandmarkSet&, const LandmarkSet&) = default;

 private:
  std::array<Point2, kNumLandmarks> points_{};
};

/// Head pose in degrees.
struct PoseAngles {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;

  bool finite() const { return std::isfinite(yaw) && std::isfinite(pitch) && std::isfinite(roll); }
  /// Every angle wrapped into [-180, 180).
  PoseAngles canonical() const;

  friend bool operator==(const PoseAngles&, const PoseAngles&) = default;
};

double wrap_degrees(double angle);

/// Worker-thread cap: FACEPIPE_THREADS when set to a positive integer,
/// otherwise the hardware concurrency (at least 1).
int thread_budget();

enum class SegLabel : std::uint8_t { kBackground = 0, kFace = 1, kHair = 2 };

class SegMask {
 public:
  SegMask() = default;
  SegMask(int width, int height, SegLabel fill = SegLabel::kBackground);
  SegMask(int width, int height, std::vector<std::uint8_t> labels);

  int width() const { return width_; }
  int height() const { return height_; }
  SegLabel at(int x, int y) const { return static_cast<SegLabel>(labels_[idx(x, y)]); }
  void set(int x, int y, SegLabel l) { labels_[idx(x, y)] = static_cast<std::uint8_t>(l); }
  const std::vector<std::uint8_t>& labels() const { return labels_; }
  std::size_t count(SegLabel l) const;

  friend bool operator==(const SegMask&, const SegMask&) = default;

 private:
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> labels_;
};

/// 1 where the label is face, 0 elsewhere.
ImageBuffer binary_face_mask(const SegMask& mask);

struct FrameRecord {
  int index = 0;
  std::string image_path;
  BoundingBox bbox;
  LandmarkSet landmarks;
  PoseAngles pose;
  std::optional<std::string> mask_path;
  // In-memory payloads. Mirrored copies exist only here.
  std::shared_ptr<const ImageBuffer> image;
  std::shared_ptr<const SegMask> mask;
  bool mirrored = false;
};

/// Frames of one tracked identity with strictly increasing indices.
class FrameSequence {
 public:
  FrameSequence() = default;
  explicit FrameSequence(std::vector<FrameRecord> frames);

  const std::vector<FrameRecord>& frames() const { return frames_; }
  std::size_t size() const { return frames_.size(); }
  bool empty() const { return frames_.empty(); }
  const FrameRecord& operator[](std::size_t i) const { return frames_[i]; }
  auto begin() const { return frames_.begin(); }
  auto end() const { return frames_.end(); }

 private:
  std::vector<FrameRecord> frames_;
};

}  // namespace facepipe
