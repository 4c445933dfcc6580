#include "facepipe/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

namespace facepipe {

Volume::Volume(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels <= 0 || height <= 0 || width <= 0) throw Error("volume extent must be positive");
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

ChannelDecode decode_channel(std::span<const double> channel, int height, int width) {
  if (channel.size() != static_cast<std::size_t>(height) * width)
    throw Error("channel size does not match extent");
  const auto max_it = std::max_element(channel.begin(), channel.end());
  const double peak = *max_it;
  if (std::any_of(channel.begin(), channel.end(), [](double v) { return !std::isfinite(v); }))
    throw Error("activation channel has non-finite values");
  const auto argmax_center = [&] {
    const auto i = static_cast<std::size_t>(max_it - channel.begin());
    return Point2{static_cast<double>(i % width) + 0.5, static_cast<double>(i / width) + 0.5};
  };
  // Nothing survives thresholding when the channel has no positive peak.
  if (!(peak > 0.0)) return {argmax_center(), true};

  // Normalized activations at or above the cutoff; everything else is zeroed.
  struct Kept {
    int x, y;
    double a;
  };
  std::vector<Kept> kept;
  bool left = false, right = false, top = false, bottom = false;
  double sum_w = 0.0, sum_x = 0.0, sum_y = 0.0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double a = static_cast<float>(channel[static_cast<std::size_t>(y) * width + x] / peak);
      if (a < kDecodeCutoff) continue;
      kept.push_back({x, y, a});
      sum_w += a;
      sum_x += a * (x + 0.5);
      sum_y += a * (y + 0.5);
      left |= x == 0;
      right |= x == width - 1;
      top |= y == 0;
      bottom |= y == height - 1;
    }
  Point2 p{sum_x / sum_w, sum_y / sum_w};
  if (!(left || right || top || bottom)) return {p, false};

  // A blob cut by the frame edge pulls the plain centroid inward. For such
  // channels fit the support profile a = alpha * f(s * |q - c|), with
  // f(u) = ((1 - u/sqrt2)^8 - t) / (1 - t) in frame-normalized coordinates,
  // by damped Gauss-Newton starting from the centroid. The fit uses only what
  // is visible: the kept pixels, the rule that their in-frame neighbors fell
  // below the cutoff, and a weak pull of the width scale s toward 1 so that
  // small blobs stay determined.
  std::vector<Kept> ring;
  {
    std::vector<char> is_kept(static_cast<std::size_t>(width) * height, 0);
    for (const Kept& k : kept) is_kept[static_cast<std::size_t>(k.y) * width + k.x] = 1;
    std::vector<char> in_ring(is_kept.size(), 0);
    for (const Kept& k : kept)
      for (int y = std::max(0, k.y - 1); y <= std::min(height - 1, k.y + 1); ++y)
        for (int x = std::max(0, k.x - 1); x <= std::min(width - 1, k.x + 1); ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * width + x;
          if (is_kept[i] || in_ring[i]) continue;
          in_ring[i] = 1;
          ring.push_back({x, y, 0.0});
        }
  }
  const double t = kHeatmapSupportThreshold;
  const double prior_weight = 1e-2;
  const double eps = 1e-3 / std::max(width, height);
  const Eigen::Index rows = static_cast<Eigen::Index>(kept.size() + ring.size() + 1);
  const auto residuals = [&](const Eigen::Vector4d& v, Eigen::MatrixX4d& jac) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(rows);
    jac.setZero();
    Eigen::Index row = 0;
    // Model value at k and its gradient with respect to (alpha, s, cx, cy).
    const auto model = [&](const Kept& k, Eigen::RowVector4d& grad) {
      const double dx = (k.x + 0.5 - v[2]) / width, dy = (k.y + 0.5 - v[3]) / height;
      const double d = std::sqrt(dx * dx + dy * dy + eps * eps);
      const double base = 1.0 - v[1] * d / std::numbers::sqrt2;
      const double b2 = base * base, b4 = b2 * b2, b7 = b4 * b2 * base;
      const double f = (b4 * b4 - t) / (1.0 - t);
      const double df = -8.0 * b7 / (std::numbers::sqrt2 * (1.0 - t));  // f'(s d)
      grad << f, v[0] * df * d, v[0] * df * v[1] * (-dx / (width * d)), v[0] * df * v[1] * (-dy / (height * d));
      return v[0] * f;
    };
    Eigen::RowVector4d grad;
    for (const Kept& k : kept) {
      r[row] = k.a - model(k, grad);
      jac.row(row++) = -grad;
    }
    for (const Kept& k : ring) {
      const double excess = model(k, grad) - kDecodeCutoff;
      if (excess > 0.0) {
        r[row] = excess;
        jac.row(row) = grad;
      }
      ++row;
    }
    r[row] = prior_weight * (v[1] - 1.0);
    jac(row, 1) = prior_weight;
    return r;
  };
  double reach = 1.0 / std::min(width, height);
  for (const Kept& k : kept)
    reach = std::max(reach, std::hypot((k.x + 0.5 - p.x) / width, (k.y + 0.5 - p.y) / height));
  Eigen::Vector4d v(1.0, 1.0, p.x, p.y);
  Eigen::MatrixX4d jac(rows, 4), trial_jac(rows, 4);
  Eigen::VectorXd r = residuals(v, jac);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  for (int it = 0; it < 200 && cost > 0.0; ++it) {
    const Eigen::Matrix4d jtj = jac.transpose() * jac;
    const Eigen::Vector4d g = jac.transpose() * r;
    Eigen::Matrix4d damped = jtj;
    damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
    const Eigen::Vector4d step = damped.ldlt().solve(-g);
    if (!step.allFinite()) break;
    const Eigen::Vector4d trial = v + step;
    const Eigen::VectorXd trial_r = residuals(trial, trial_jac);
    const double trial_cost = trial_r.squaredNorm();
    if (trial_cost < cost) {
      const bool settled = cost - trial_cost <= 1e-15 * cost && step.tail<2>().norm() < 1e-9;
      v = trial;
      jac = trial_jac;
      r = trial_r;
      cost = trial_cost;
      lambda = std::max(lambda * 0.3, 1e-12);
      if (settled) break;
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
  }
  // Keep the fit only when it is sane: a falling profile not farther from the
  // centroid than the blob reaches. Landmarks lie in the frame, so clamp.
  const Point2 c{std::clamp(v[2], 0.0, double(width)), std::clamp(v[3], 0.0, double(height))};
  const bool sane = v.allFinite() && v[1] > 0.0 && std::hypot((c.x - p.x) / width, (c.y - p.y) / height) <= reach;
  return {sane ? c : p, false};
}

bool DecodedLandmarks::any_fallback() const {
  return std::any_of(fallback.begin(), fallback.end(), [](bool b) { return b; });
}

DecodedLandmarks decode_landmarks(const ActivationVolume& activations) {
  if (activations.channels() != static_cast<int>(kNumLandmarks))
    throw Error("activation volume must have 98 channels, got " +
                std::to_string(activations.channels()));
  DecodedLandmarks out;
  std::array<Point2, kNumLandmarks> pts{};
  for (int c = 0; c < activations.channels(); ++c) {
    const ChannelDecode d = decode_channel(activations.channel(c), activations.height(), activations.width());
    pts[c] = d.point;
    out.fallback[c] = d.fallback;
  }
  out.landmarks = LandmarkSet(pts);
  return out;
}

double heatmap_proximity(const Point2& p, double cx, double cy, int height, int width) {
  const double dx = (p.x - cx) / width;
  const double dy = (p.y - cy) / height;
  return 1.0 - std::hypot(dx, dy) / std::numbers::sqrt2;
}

double heatmap_support(double proximity, double t) {
  const double p2 = proximity * proximity;
  const double p4 = p2 * p2;
  return std::max((p4 * p4 - t) / (1.0 - t), 0.0);
}

void encode_point(const Point2& p, std::span<double> channel, int height, int width, double t) {
  if (!(t >= 0.0 && t < 1.0)) throw Error("heatmap threshold must lie in [0,1)");
  if (!(p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= height))
    throw Error("landmark outside heatmap bounds");
  // Support radius in normalized units: proximity^8 >= t.
  const double r = (1.0 - std::pow(t, 0.125)) * std::numbers::sqrt2;
  const int x0 = std::max(0, static_cast<int>(std::floor(p.x - r * width - 1.0)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(p.x + r * width + 1.0)));
  const int y0 = std::max(0, static_cast<int>(std::floor(p.y - r * height - 1.0)));
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(p.y + r * height + 1.0)));
  std::fill(channel.begin(), channel.end(), 0.0);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      channel[static_cast<std::size_t>(y) * width + x] =
          heatmap_support(heatmap_proximity(p, x + 0.5, y + 0.5, height, width), t);
}

Heatmap encode_heatmap(const LandmarkSet& landmarks, int height, int width, double t) {
  Heatmap h(static_cast<int>(kNumLandmarks), height, width);
  for (int c = 0; c < h.channels(); ++c) encode_point(landmarks[c], h.channel(c), height, width, t);
  return h;
}

LandmarkSet roundtrip(const LandmarkSet& landmarks, int height, int width) {
  return decode_landmarks(encode_heatmap(landmarks, height, width)).landmarks;
}

}  // namespace facepipe
