#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "facepipe/core.hpp"

namespace facepipe {

/// Channel-major C x H x W volume of doubles.
class Volume {
 public:
  Volume() = default;
  Volume(int channels, int height, int width, double fill = 0.0);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }

  double& at(int c, int y, int x) { return data_[offset(c) + static_cast<std::size_t>(y) * width_ + x]; }
  double at(int c, int y, int x) const { return data_[offset(c) + static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const double> channel(int c) const { return {data_.data() + offset(c), plane()}; }
  std::span<double> channel(int c) { return {data_.data() + offset(c), plane()}; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  std::size_t plane() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t offset(int c) const { return static_cast<std::size_t>(c) * plane(); }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

/// Raw landmark-network output, unbounded before normalization.
using ActivationVolume = Volume;
/// Landmark conditioning volume, values in [0,1].
using Heatmap = Volume;

inline constexpr double kHeatmapSupportThreshold = 0.8;
inline constexpr double kDecodeCutoff = 0.5;

struct ChannelDecode {
  Point2 point;
  bool fallback = false;  // true when the argmax pixel center was used
};

/// Decodes one H x W channel: normalize by the channel max, zero values below
/// 0.5, return the weight-normalized centroid of pixel centers (x+0.5, y+0.5).
/// Normalized activations are rounded to single precision before weighting so
/// that positive rescaling of the input does not perturb the result.
/// When the surviving blob touches the frame edge the centroid is biased
/// inward; such channels are instead located by fitting the support profile
/// to the visible pixels (falling back to the centroid if the fit fails).
/// A channel without a positive peak falls back to its argmax pixel center.
ChannelDecode decode_channel(std::span<const double> channel, int height, int width);

struct DecodedLandmarks {
  LandmarkSet landmarks;
  std::array<bool, kNumLandmarks> fallback{};
  bool any_fallback() const;
};

/// Requires 98 finite channels.
DecodedLandmarks decode_landmarks(const ActivationVolume& activations);

/// Unthresholded proximity 1 - |p - c| / sqrt(2) with both points normalized
/// to [0,1]^2 by the image extent.
double heatmap_proximity(const Point2& p, double cx, double cy, int height, int width);
/// Support max((proximity^8 - t) / (1 - t), 0).
double heatmap_support(double proximity, double t = kHeatmapSupportThreshold);

/// One channel per landmark. Throws when a point lies outside [0,W] x [0,H].
Heatmap encode_heatmap(const LandmarkSet& landmarks, int height, int width,
                       double t = kHeatmapSupportThreshold);
/// Single-point variant used by encode_heatmap.
void encode_point(const Point2& p, std::span<double> channel, int height, int width,
                  double t = kHeatmapSupportThreshold);

/// decode_landmarks(encode_heatmap(p)).
LandmarkSet roundtrip(const LandmarkSet& landmarks, int height, int width);

}  // namespace facepipe
