#include "facepipe/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "facepipe/delaunay.hpp"
#include "facepipe/image_ops.hpp"
#include "facepipe/predicates.hpp"
#include "facepipe/transformer.hpp"

namespace facepipe {

std::array<Point2, 8> border_anchors(int width, int height) {
  const double w = width;
  const double h = height;
  // Corners first, in the order the rectangle triangulation expects.
  return {Point2{0, 0}, {w, 0}, {w, h}, {0, h}, {0.5 * w, 0}, {w, 0.5 * h}, {0.5 * w, h}, {0, 0.5 * h}};
}

namespace {

void check_in_frame(const LandmarkSet& p, int width, int height, const char* what) {
  for (std::size_t i = 0; i < kNumLandmarks; ++i) {
    if (!(p[i].x >= 0.0 && p[i].x <= width && p[i].y >= 0.0 && p[i].y <= height))
      throw Error(std::string(what) + " landmark " + std::to_string(i) + " lies outside the image");
  }
}

// Maps target-space points to source space: s0 + (s1 - s0) l1 + (s2 - s0) l2.
struct TriangleMap {
  Point2 t0, e1, e2;  // target origin and edges
  double inv_det = 0.0;
  Point2 s0, f1, f2;  // source origin and edges

  Point2 apply(const Point2& p) const {
    const Point2 d = p - t0;
    const double l1 = (d.x * e2.y - d.y * e2.x) * inv_det;
    const double l2 = (e1.x * d.y - e1.y * d.x) * inv_det;
    return s0 + f1 * l1 + f2 * l2;
  }
};

}  // namespace

WarpResult warp_render(const ImageBuffer& source, const LandmarkSet& source_landmarks,
                       const LandmarkSet& target_landmarks) {
  if (source.empty()) throw Error("warp source image is empty");
  const int W = source.width();
  const int H = source.height();
  check_in_frame(source_landmarks, W, H, "source");
  check_in_frame(target_landmarks, W, H, "target");

  const auto anchors = border_anchors(W, H);
  std::vector<Point2> tgt(anchors.begin(), anchors.end());
  std::vector<Point2> src(anchors.begin(), anchors.end());
  for (std::size_t i = 0; i < kNumLandmarks; ++i) {
    tgt.push_back(target_landmarks[i]);
    src.push_back(source_landmarks[i]);
  }
  const geom::Triangulation tri = geom::triangulate_in_rectangle(tgt);

  const std::size_t nt = tri.triangles.size();
  std::vector<TriangleMap> maps(nt);
  std::vector<bool> valid(nt, false);
  WarpResult result;
  for (std::size_t k = 0; k < nt; ++k) {
    const auto& t = tri.triangles[k];
    TriangleMap& m = maps[k];
    m.t0 = tgt[t[0]];
    m.e1 = tgt[t[1]] - m.t0;
    m.e2 = tgt[t[2]] - m.t0;
    const double det = m.e1.x * m.e2.y - m.e1.y * m.e2.x;
    m.inv_det = det != 0.0 ? 1.0 / det : 0.0;
    m.s0 = src[t[0]];
    m.f1 = src[t[1]] - m.s0;
    m.f2 = src[t[2]] - m.s0;
    valid[k] = det != 0.0 && geom::orient2d(src[t[0]], src[t[1]], src[t[2]]) != 0;
    if (det != 0.0 && !valid[k]) ++result.degenerate_triangles;
  }
  // Zero-area source triangles borrow the map of the nearest valid triangle.
  auto centroid = [&](std::size_t k) {
    const auto& t = tri.triangles[k];
    return (tgt[t[0]] + tgt[t[1]] + tgt[t[2]]) * (1.0 / 3.0);
  };
  std::vector<std::size_t> use(nt);
  for (std::size_t k = 0; k < nt; ++k) {
    use[k] = k;
    if (valid[k] || maps[k].inv_det == 0.0) continue;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nt; ++j) {
      if (!valid[j]) continue;
      const double d = distance(centroid(k), centroid(j));
      if (d < best) {
        best = d;
        use[k] = j;
      }
    }
    if (!valid[use[k]]) throw Error("warp has no valid source triangle");
    TriangleMap borrowed = maps[use[k]];
    maps[k] = borrowed;
  }

  // Each pixel center belongs to the first triangle (canonical order) containing it.
  std::vector<int> owner(static_cast<std::size_t>(W) * H, -1);
  for (std::size_t k = 0; k < nt; ++k) {
    const auto& t = tri.triangles[k];
    const Point2 a = tgt[t[0]], b = tgt[t[1]], c = tgt[t[2]];
    if (geom::orient2d(a, b, c) == 0) continue;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x, b.x, c.x}) - 0.5)));
    const int x1 = std::min(W - 1, static_cast<int>(std::ceil(std::max({a.x, b.x, c.x}) - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y, b.y, c.y}) - 0.5)));
    const int y1 = std::min(H - 1, static_cast<int>(std::ceil(std::max({a.y, b.y, c.y}) - 0.5)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        int& o = owner[static_cast<std::size_t>(y) * W + x];
        if (o >= 0) continue;
        const Point2 p{x + 0.5, y + 0.5};
        if (geom::orient2d(a, b, p) >= 0 && geom::orient2d(b, c, p) >= 0 && geom::orient2d(c, a, p) >= 0)
          o = static_cast<int>(k);
      }
  }

  result.image = ImageBuffer(W, H, source.channels());
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int o = owner[static_cast<std::size_t>(y) * W + x];
      if (o < 0) throw Error("warp left a pixel uncovered");
      const Point2 s = maps[o].apply({x + 0.5, y + 0.5});
      for (int c = 0; c < source.channels(); ++c) result.image.at(x, y, c) = sample_bilinear(source, s.x, s.y, c);
    }
  return result;
}

ImageBuffer WarpRenderer::render(const ImageBuffer& source, const LandmarkSet& source_landmarks,
                                 const RenderTarget& target) const {
  return warp_render(source, source_landmarks, target.landmarks).image;
}

std::unique_ptr<Renderer> make_renderer(const std::string& name) {
  if (name == "warp") return std::make_unique<WarpRenderer>();
  if (name == "identity") return std::make_unique<IdentityRenderer>();
  throw Error("unknown renderer '" + name + "' (expected warp or identity)");
}

LandmarkSet clamp_to_frame(const LandmarkSet& p, int width, int height) {
  LandmarkSet out;
  for (std::size_t i = 0; i < kNumLandmarks; ++i)
    out[i] = {std::clamp(p[i].x, 0.0, static_cast<double>(width)), std::clamp(p[i].y, 0.0, static_cast<double>(height))};
  return out;
}

ReenactResult reenact_iterative(const Renderer& renderer, const ImageBuffer& source,
                                const LandmarkSet& source_landmarks, const PoseAngles& source_pose,
                                const PoseAngles& target_pose, int iterations, const MlpTransformer& transformer,
                                const LandmarkSet* target) {
  if (iterations < 1) throw Error("iterations must be >= 1");
  const int W = source.width();
  const int H = source.height();
  const auto normalized = intermediate_landmarks(transformer, normalize_landmarks(source_landmarks, W, H),
                                                 source_pose, target_pose, iterations);
  ReenactResult result;
  for (const auto& p : normalized) result.path.push_back(clamp_to_frame(denormalize_landmarks(p, W, H), W, H));
  if (target) result.path.back() = clamp_to_frame(*target, W, H);

  ImageBuffer current = source;
  LandmarkSet current_landmarks = source_landmarks;
  for (const auto& p : result.path) {
    const Heatmap heatmap = encode_heatmap(p, H, W);
    current = renderer.render(current, current_landmarks, RenderTarget{p, &heatmap});
    current_landmarks = p;
  }
  result.image = std::move(current);
  return result;
}

void EllipseOcclusionSpec::validate() const {
  if (min_count < 0 || max_count < min_count) throw Error("ellipse count range is invalid");
  if (!(min_axis_fraction > 0.0 && max_axis_fraction >= min_axis_fraction))
    throw Error("ellipse axis range must be positive and ordered");
}

SegMask occlude_ellipses(const SegMask& mask, const EllipseOcclusionSpec& spec) {
  spec.validate();
  const int W = mask.width();
  const int H = mask.height();
  auto is_face = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < W && y < H && mask.at(x, y) == SegLabel::kFace;
  };
  std::vector<Point2> border;
  int fx0 = W, fy0 = H, fx1 = -1, fy1 = -1;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (!is_face(x, y)) continue;
      fx0 = std::min(fx0, x);
      fy0 = std::min(fy0, y);
      fx1 = std::max(fx1, x);
      fy1 = std::max(fy1, y);
      if (!is_face(x - 1, y) || !is_face(x + 1, y) || !is_face(x, y - 1) || !is_face(x, y + 1))
        border.push_back({x + 0.5, y + 0.5});
    }
  SegMask out = mask;
  if (border.empty()) return out;

  std::mt19937_64 rng(spec.seed);
  const int count = std::uniform_int_distribution<int>(spec.min_count, spec.max_count)(rng);
  const double ew = fx1 - fx0 + 1;
  const double eh = fy1 - fy0 + 1;
  std::uniform_real_distribution<double> axis(spec.min_axis_fraction, spec.max_axis_fraction);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::uniform_int_distribution<std::size_t> pick(0, border.size() - 1);
  for (int e = 0; e < count; ++e) {
    const Point2 c = border[pick(rng)];
    const double a = std::max(0.5, axis(rng) * ew);
    const double b = std::max(0.5, axis(rng) * eh);
    const double phi = angle(rng);
    const double cs = std::cos(phi);
    const double sn = std::sin(phi);
    const double r = std::max(a, b);
    const int x0 = std::max(0, static_cast<int>(std::floor(c.x - r)));
    const int x1 = std::min(W - 1, static_cast<int>(std::ceil(c.x + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(c.y - r)));
    const int y1 = std::min(H - 1, static_cast<int>(std::ceil(c.y + r)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        if (out.at(x, y) != SegLabel::kFace) continue;
        const double dx = x + 0.5 - c.x;
        const double dy = y + 0.5 - c.y;
        const double u = (cs * dx + sn * dy) / a;
        const double v = (-sn * dx + cs * dy) / b;
        if (u * u + v * v <= 1.0) out.set(x, y, SegLabel::kBackground);
      }
  }
  return out;
}

}  // namespace facepipe
