#include "facepipe/tracking.hpp"

#include <algorithm>
#include <cmath>

namespace facepipe {

void SmoothingParams::validate() const {
  if (!(min_weight > 0.0 && min_weight <= 1.0)) throw Error("min_weight must lie in (0,1]");
  if (!(motion_scale > 0.0)) throw Error("motion_scale must be positive");
  if (window < 1 || window % 2 == 0) throw Error("smoothing window must be odd and >= 1");
}

std::vector<DetectionTrack> group_detections(const std::vector<std::vector<BoundingBox>>& frames,
                                             double threshold) {
  std::vector<DetectionTrack> tracks;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const int frame = static_cast<int>(f);
    // Tracks whose last detection sits in the previous frame are open for extension.
    std::vector<bool> taken(tracks.size(), false);
    for (std::size_t d = 0; d < frames[f].size(); ++d) {
      const BoundingBox& box = frames[f][d];
      box.validate();
      std::size_t best = tracks.size();
      double best_iou = threshold;
      for (std::size_t t = 0; t < tracks.size(); ++t) {
        if (taken[t] || tracks[t].back().frame != frame - 1) continue;
        const double o = iou(tracks[t].back().box, box);
        if (o > best_iou) {  // strict: older track wins ties
          best_iou = o;
          best = t;
        }
      }
      if (best == tracks.size()) {
        tracks.push_back({{frame, d, box}});
        taken.push_back(true);
      } else {
        tracks[best].push_back({frame, d, box});
        taken[best] = true;
      }
    }
  }
  return tracks;
}

Series motion_adaptive_smooth(const Series& series, const SmoothingParams& params,
                              std::size_t point_dim) {
  params.validate();
  const std::size_t n = series.size();
  if (n == 0) return {};
  const std::size_t dim = series[0].size();
  if (point_dim == 0 || dim % point_dim != 0)
    throw Error("sample dimension must be a multiple of the point dimension");
  for (const auto& s : series)
    if (s.size() != dim) throw Error("series samples differ in dimension");

  const std::size_t npts = dim / point_dim;
  auto point_mean = [&](const std::vector<double>& s) {
    std::vector<double> m(point_dim, 0.0);
    for (std::size_t p = 0; p < npts; ++p)
      for (std::size_t k = 0; k < point_dim; ++k) m[k] += s[p * point_dim + k];
    for (double& v : m) v /= static_cast<double>(npts);
    return m;
  };
  std::vector<std::vector<double>> means(n);
  for (std::size_t t = 0; t < n; ++t) means[t] = point_mean(series[t]);

  auto speed_between = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t k = 0; k < point_dim; ++k) {
      const double d = means[b][k] - means[a][k];
      s += d * d;
    }
    return std::sqrt(s);
  };

  const std::ptrdiff_t half = params.window / 2;
  Series out(n, std::vector<double>(dim));
  for (std::size_t t = 0; t < n; ++t) {
    // Backward difference; the first frame borrows the forward one.
    double speed = 0.0;
    if (t > 0) speed = speed_between(t - 1, t);
    else if (n > 1) speed = speed_between(0, 1);
    const double w =
        params.min_weight + (1.0 - params.min_weight) * std::exp(-speed / params.motion_scale);

    const std::size_t lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(t) - half));
    const std::size_t hi = std::min(n - 1, t + static_cast<std::size_t>(half));
    const double count = static_cast<double>(hi - lo + 1);
    // w*mean + (1-w)*x written as x + w*mean(x_u - x): exact on constant windows.
    for (std::size_t k = 0; k < dim; ++k) {
      const double x = series[t][k];
      double dev = 0.0;
      for (std::size_t u = lo; u <= hi; ++u) dev += series[u][k] - x;
      out[t][k] = x + w * (dev / count);
    }
  }
  return out;
}

namespace {

Series point_series(const FrameSequence& seq, PartRange range) {
  Series s;
  s.reserve(seq.size());
  for (const auto& f : seq) {
    std::vector<double> v;
    v.reserve(range.size() * 2);
    for (std::size_t i = range.first; i <= range.last; ++i) {
      v.push_back(f.landmarks[i].x);
      v.push_back(f.landmarks[i].y);
    }
    s.push_back(std::move(v));
  }
  return s;
}

}  // namespace

FrameSequence smooth_sequence(const FrameSequence& sequence, const SmoothingParams& params) {
  params.validate();
  std::vector<FrameRecord> frames(sequence.begin(), sequence.end());
  if (frames.empty()) return sequence;

  Series centers, extents;
  for (const auto& f : frames) {
    centers.push_back({f.bbox.cx, f.bbox.cy});
    extents.push_back({f.bbox.w, f.bbox.h});
  }
  centers = motion_adaptive_smooth(centers, params);
  extents = motion_adaptive_smooth(extents, params);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    frames[t].bbox.cx = centers[t][0];
    frames[t].bbox.cy = centers[t][1];
    frames[t].bbox.w = extents[t][0];
    frames[t].bbox.h = extents[t][1];
  }

  for (const PartRange& range : parts::kAll) {
    const Series smoothed = motion_adaptive_smooth(point_series(sequence, range), params);
    for (std::size_t t = 0; t < frames.size(); ++t)
      for (std::size_t i = range.first; i <= range.last; ++i) {
        const std::size_t k = 2 * (i - range.first);
        frames[t].landmarks[i] = {smoothed[t][k], smoothed[t][k + 1]};
      }
  }
  return FrameSequence(std::move(frames));
}

}  // namespace facepipe
