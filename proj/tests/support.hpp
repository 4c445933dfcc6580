#pragma once

// Test helpers and independent reference implementations. Nothing here calls
// into the library code it is used to check.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "facepipe/core.hpp"
#include "facepipe/renderer.hpp"

namespace facepipe::test {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("facepipe_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline ImageBuffer random_image(int w, int h, int c, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ImageBuffer img(w, h, c);
  for (auto& v : img.data()) v = u(rng);
  return img;
}

/// Smooth image (sum of low-frequency sinusoids) with values in [0,1].
inline ImageBuffer smooth_image(int w, int h, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageBuffer img(w, h, c);
  for (int ch = 0; ch < c; ++ch) {
    const double fx = 1.0 + 3.0 * u(rng), fy = 1.0 + 3.0 * u(rng), ph = 6.28 * u(rng);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        img.at(x, y, ch) = static_cast<float>(
            0.5 + 0.25 * std::sin(fx * 6.28 * x / w + ph) + 0.2 * std::cos(fy * 6.28 * y / h + 0.5 * ph));
  }
  return img;
}

inline LandmarkSet random_landmarks(std::mt19937_64& rng, double x0, double y0, double x1, double y1) {
  std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
  std::vector<Point2> pts(kNumLandmarks);
  for (auto& p : pts) p = {ux(rng), uy(rng)};
  return LandmarkSet(pts);
}

inline double max_abs_diff(const ImageBuffer& a, const ImageBuffer& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a.data()[i]) - b.data()[i]));
  return m;
}

/// Counts render calls and returns the source unchanged.
class CountingRenderer final : public Renderer {
 public:
  std::string name() const override { return "counting"; }
  bool supports_heatmap_conditioning() const override { return true; }
  ImageBuffer render(const ImageBuffer& source, const LandmarkSet&, const RenderTarget& t) const override {
    ++calls;
    if (t.heatmap) ++heatmap_calls;
    return source;
  }
  mutable std::atomic<int> calls{0};
  mutable std::atomic<int> heatmap_calls{0};
};

namespace oracle {

/// Gaussian elimination with partial pivoting on a dense row-major system.
inline std::vector<double> dense_solve(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a[i * n + k]) > std::abs(a[piv * n + k])) piv = i;
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a[k * n + j], a[piv * n + j]);
      std::swap(b[k], b[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a[i * n + k] / a[k * n + k];
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) a[i * n + j] -= f * a[k * n + j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n);
  for (std::size_t k = n; k-- > 0;) {
    double s = b[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= a[k * n + j] * x[j];
    x[k] = s / a[k * n + k];
  }
  return x;
}

/// Direct solution of the discrete Poisson blend for one channel: for each
/// masked p, 4 f_p - sum f_q = 4 g_p - sum g_q over the 4 neighbors, with
/// f_q = target_q for unmasked in-frame neighbors and f_q = target_p, g_q = g_p
/// for neighbors outside the frame. Returns the full channel.
inline std::vector<double> poisson_dense(const ImageBuffer& target, const ImageBuffer& guidance,
                                         const ImageBuffer& mask, int channel) {
  const int w = target.width(), h = target.height();
  std::vector<int> id(static_cast<std::size_t>(w) * h, -1);
  int n = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask.at(x, y) == 1.0f) id[y * w + x] = n++;
  std::vector<double> out(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out[y * w + x] = target.at(x, y, channel);
  if (n == 0) return out;
  std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0), b(n, 0.0);
  const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int i = id[y * w + x];
      if (i < 0) continue;
      const double gp = guidance.at(x, y, channel);
      a[i * n + i] = 4.0;
      for (int k = 0; k < 4; ++k) {
        const int qx = x + dx[k], qy = y + dy[k];
        if (qx < 0 || qy < 0 || qx >= w || qy >= h) {
          b[i] += target.at(x, y, channel);
          continue;
        }
        b[i] += gp - guidance.at(qx, qy, channel);
        const int j = id[qy * w + qx];
        if (j >= 0)
          a[i * n + j] -= 1.0;
        else
          b[i] += target.at(qx, qy, channel);
      }
    }
  const auto f = dense_solve(std::move(a), std::move(b));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (id[y * w + x] >= 0) out[y * w + x] = f[id[y * w + x]];
  return out;
}

/// Brute-force distance from each pixel center to the nearest zero pixel.
inline std::vector<double> brute_distance(const ImageBuffer& mask) {
  const int w = mask.width(), h = mask.height();
  std::vector<double> d(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (mask.at(x, y) == 0.0f) {
        d[y * w + x] = 0.0;
        continue;
      }
      for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u)
          if (mask.at(u, v) == 0.0f) d[y * w + x] = std::min(d[y * w + x], std::hypot(double(x - u), double(y - v)));
    }
  return d;
}

/// Circumcircle in long double: center and squared radius.
struct Circle {
  long double cx, cy, r2;
};

inline Circle circumcircle(const Point2& a, const Point2& b, const Point2& c) {
  const long double ax = a.x, ay = a.y, bx = b.x, by = b.y, cx = c.x, cy = c.y;
  const long double d = 2.0L * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
  const long double a2 = ax * ax + ay * ay, b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
  const long double ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
  const long double uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
  return {ux, uy, (ax - ux) * (ax - ux) + (ay - uy) * (ay - uy)};
}

/// Number of (triangle, point) pairs where the point lies strictly inside the
/// triangle's circumcircle by more than `tol` (relative to the radius).
template <class Tri>
int empty_circle_violations(const std::vector<Point2>& pts, const std::vector<Tri>& tris, double tol) {
  int bad = 0;
  for (const auto& t : tris) {
    const Circle c = circumcircle(pts[t[0]], pts[t[1]], pts[t[2]]);
    const long double r = std::sqrt(c.r2);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (static_cast<int>(i) == t[0] || static_cast<int>(i) == t[1] || static_cast<int>(i) == t[2]) continue;
      const long double dx = pts[i].x - c.cx, dy = pts[i].y - c.cy;
      if (std::sqrt(dx * dx + dy * dy) < r - tol * std::max<long double>(1.0L, r)) ++bad;
    }
  }
  return bad;
}

/// Fréchet distance of two univariate Gaussians.
inline double frechet_1d(double m1, double s1, double m2, double s2) {
  return (m1 - m2) * (m1 - m2) + (s1 - s2) * (s1 - s2);
}

/// Heatmap support written out from its definition.
inline double support_by_hand(double px, double py, double cx, double cy, int h, int w, double t) {
  const double dx = px / w - cx / w, dy = py / h - cy / h;
  const double prox = 1.0 - std::sqrt(dx * dx + dy * dy) / std::sqrt(2.0);
  const double v = (std::pow(prox, 8) - t) / (1.0 - t);
  return v > 0.0 ? v : 0.0;
}

}  // namespace oracle
}  // namespace facepipe::test
