#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "facepipe/core.hpp"

namespace facepipe {

/// Parameters of the motion-adaptive temporal averaging filter.
///
/// Per frame the filter blends a centered moving average with the raw sample:
///   w_t   = min_weight + (1 - min_weight) * exp(-|v_t| / motion_scale)
///   out_t = w_t * mean(window around t) + (1 - w_t) * x_t
/// where v_t is the frame-to-frame displacement of the sample's point mean.
/// Fast motion drives w_t toward min_weight, so moving faces are not lagged.
struct SmoothingParams {
  double min_weight = 0.15;
  double motion_scale = 2.0;  // px / frame
  int window = 5;             // frames, odd

  void validate() const;
};

struct TrackedDetection {
  int frame = 0;          // position in the per-frame input
  std::size_t detection;  // index within that frame's list
  BoundingBox box;
};

using DetectionTrack = std::vector<TrackedDetection>;

inline constexpr double kDefaultGroupingIou = 0.75;

/// Chains detections of successive frames whose IoU exceeds `threshold`.
/// A detection extends the track (last seen in the previous frame) with the
/// highest IoU; ties go to the older track. Otherwise it starts a new track.
std::vector<DetectionTrack> group_detections(const std::vector<std::vector<BoundingBox>>& frames,
                                             double threshold = kDefaultGroupingIou);

/// A time series of samples; every sample has the same dimension, which is a
/// multiple of `point_dim`.
using Series = std::vector<std::vector<double>>;

Series motion_adaptive_smooth(const Series& series, const SmoothingParams& params,
                              std::size_t point_dim = 2);

/// Smooths box centers, box extents and each landmark part independently.
FrameSequence smooth_sequence(const FrameSequence& sequence, const SmoothingParams& params);

}  // namespace facepipe
