#include <doctest.h>

#include <random>

#include "facepipe/image_ops.hpp"
#include "facepipe/renderer.hpp"
#include "facepipe/synthetic.hpp"
#include "facepipe/transformer.hpp"
#include "support.hpp"

using namespace facepipe;

namespace {

constexpr int kSize = 128;

LandmarkSet face_at(const Point2& center, double yaw = 0.0) {
  return project_face(mean_face_template(), PoseAngles{yaw, 0, 0}, center, 25.0);
}

LandmarkSet shifted(const LandmarkSet& p, const Point2& d) {
  LandmarkSet out;
  for (std::size_t i = 0; i < kNumLandmarks; ++i) out[i] = p[i] + d;
  return out;
}

LandmarkSet mirrored(const LandmarkSet& p, int width) {
  LandmarkSet out;
  for (std::size_t i = 0; i < kNumLandmarks; ++i) out[i] = {width - p[i].x, p[i].y};
  return out;
}

// Monotone-chain convex hull, counter-clockwise in a y-up sense.
std::vector<Point2> hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  const auto cross = [](const Point2& o, const Point2& a, const Point2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  std::vector<Point2> h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

// Signed distance from p to the inside of a counter-clockwise hull (positive inside).
double inside_margin(const std::vector<Point2>& h, const Point2& p) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < h.size(); ++i) {
    const Point2 a = h[i], b = h[(i + 1) % h.size()];
    const double len = distance(a, b);
    m = std::min(m, ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)) / len);
  }
  return m;
}

MlpTransformer constant_transformer(const LandmarkSet& normalized_output) {
  MlpTransformer t = MlpTransformer::create({kTransformerInputDim, 8, kTransformerOutputDim}, InitOptions{3, true});
  t.layers().back().bias = encode_output(normalized_output);
  return t;
}

}  // namespace

TEST_CASE("warping onto the source landmarks reproduces the source") {
  const ImageBuffer src = test::smooth_image(kSize, kSize, 3, 1);
  const LandmarkSet p = face_at({64, 64});
  const WarpResult r = warp_render(src, p, p);
  CHECK(r.degenerate_triangles == 0);
  CHECK(test::max_abs_diff(r.image, src) <= 1e-6);
}

TEST_CASE("a translated face is translated inside the landmark hull") {
  const ImageBuffer src = test::smooth_image(kSize, kSize, 1, 2);
  const LandmarkSet p = face_at({60, 64});
  const LandmarkSet q = shifted(p, {5, 0});
  const ImageBuffer out = warp_render(src, p, q).image;
  const auto h = hull(std::vector<Point2>(q.points().begin(), q.points().end()));
  int checked = 0;
  double worst = 0.0;
  for (int y = 0; y < kSize; ++y)
    for (int x = 5; x < kSize; ++x) {
      if (inside_margin(h, {x + 0.5, y + 0.5}) < 2.0) continue;
      worst = std::max(worst, std::abs(double(out.at(x, y)) - src.at(x - 5, y)));
      ++checked;
    }
  CHECK(checked > 500);
  CHECK(worst <= 1e-5);
}

TEST_CASE("constant images stay constant under any warp") {
  std::mt19937_64 rng(3);
  const ImageBuffer flat(kSize, kSize, 3, 0.375f);
  for (int trial = 0; trial < 5; ++trial) {
    const LandmarkSet p = test::random_landmarks(rng, 10, 10, kSize - 10, kSize - 10);
    const LandmarkSet q = test::random_landmarks(rng, 0, 0, kSize, kSize);
    const ImageBuffer out = warp_render(flat, p, q).image;
    for (float v : out.data()) CHECK(v == doctest::Approx(0.375f).epsilon(1e-6));
  }
}

TEST_CASE("warping commutes with horizontal mirroring") {
  const ImageBuffer src = test::smooth_image(kSize, kSize, 3, 4);
  const LandmarkSet p = face_at({62, 66}, 10.0);
  const LandmarkSet q = face_at({66, 60}, -15.0);
  const ImageBuffer a = flip_horizontal(warp_render(src, p, q).image);
  const ImageBuffer b = warp_render(flip_horizontal(src), mirrored(p, kSize), mirrored(q, kSize)).image;
  CHECK(test::max_abs_diff(a, b) <= 1e-4);
}

TEST_CASE("collapsed source triangles are counted and filled from a neighbor") {
  std::vector<Point2> collapsed(kNumLandmarks, Point2{64, 64});
  const LandmarkSet q = face_at({64, 64});
  const ImageBuffer src = test::smooth_image(kSize, kSize, 1, 5);
  const WarpResult r = warp_render(src, LandmarkSet(collapsed), q);
  CHECK(r.degenerate_triangles > 0);
  for (float v : r.image.data()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("warp inputs are validated") {
  const ImageBuffer src(kSize, kSize, 1, 0.5f);
  const LandmarkSet p = face_at({64, 64});
  CHECK_THROWS_AS(warp_render(src, shifted(p, {80, 0}), p), Error);
  CHECK_THROWS_AS(warp_render(src, p, shifted(p, {0, -80})), Error);
  CHECK_THROWS_AS(warp_render(ImageBuffer(), p, p), Error);
}

TEST_CASE("renderers are chosen by name") {
  CHECK(make_renderer("warp")->name() == "warp");
  CHECK(make_renderer("identity")->name() == "identity");
  CHECK_THROWS_AS(make_renderer("gan"), Error);
  const ImageBuffer src = test::smooth_image(16, 16, 1, 6);
  std::mt19937_64 rng(7);
  const LandmarkSet p = test::random_landmarks(rng, 0, 0, 16, 16);
  CHECK(make_renderer("identity")->render(src, p, RenderTarget{p}) == src);
}

TEST_CASE("iterative reenactment renders once per step toward the path") {
  const LandmarkSet ps = face_at({64, 64});
  const LandmarkSet pt = face_at({64, 64}, 20.0);
  const MlpTransformer t = constant_transformer(normalize_landmarks(pt, kSize, kSize));
  const ImageBuffer src = test::smooth_image(kSize, kSize, 3, 8);
  for (int n : {1, 3, 6}) {
    test::CountingRenderer counting;
    const ReenactResult r = reenact_iterative(counting, src, ps, {}, {20, 0, 0}, n, t);
    CHECK(counting.calls == n);
    CHECK(counting.heatmap_calls == n);
    REQUIRE(r.path.size() == static_cast<std::size_t>(n));
    CHECK(r.image == src);
    for (const auto& p : r.path)
      for (std::size_t i = 0; i < kNumLandmarks; ++i) CHECK(distance(p[i], pt[i]) < 1e-9);
  }
  CHECK_THROWS_AS(reenact_iterative(IdentityRenderer{}, src, ps, {}, {}, 0, t), Error);
}

TEST_CASE("one reenactment step equals a direct render and the target pins the last step") {
  const LandmarkSet ps = face_at({64, 64});
  const LandmarkSet pt = face_at({64, 64}, 20.0);
  const LandmarkSet pinned = face_at({66, 62}, -10.0);
  const MlpTransformer t = constant_transformer(normalize_landmarks(pt, kSize, kSize));
  const ImageBuffer src = test::smooth_image(kSize, kSize, 3, 9);
  const WarpRenderer warp;
  const ReenactResult one = reenact_iterative(warp, src, ps, {}, {20, 0, 0}, 1, t);
  CHECK(one.image == warp_render(src, ps, one.path[0]).image);

  const ReenactResult pin = reenact_iterative(warp, src, ps, {}, {20, 0, 0}, 4, t, &pinned);
  CHECK(pin.path.back() == pinned);
  for (std::size_t i = 0; i < kNumLandmarks; ++i) CHECK(distance(pin.path[2][i], pt[i]) < 1e-9);
}

TEST_CASE("reenactment clamps transformer output into the frame") {
  std::vector<Point2> far(kNumLandmarks, Point2{3.0, -2.0});
  const MlpTransformer t = constant_transformer(LandmarkSet(far));
  test::CountingRenderer counting;
  const ReenactResult r = reenact_iterative(counting, ImageBuffer(kSize, kSize, 1, 0.2f), face_at({64, 64}), {}, {}, 2, t);
  for (const auto& p : r.path)
    for (std::size_t i = 0; i < kNumLandmarks; ++i) CHECK(p[i] == Point2{kSize, 0});
}

namespace {

SegMask disc_mask(int size, double r) {
  SegMask m(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      if (std::hypot(x + 0.5 - size / 2.0, y + 0.5 - size / 2.0) < r) m.set(x, y, SegLabel::kFace);
      else if (y < size / 4) m.set(x, y, SegLabel::kHair);
  return m;
}

}  // namespace

TEST_CASE("ellipse occlusion only removes face pixels and is seeded") {
  const SegMask m = disc_mask(64, 20);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EllipseOcclusionSpec spec;
    spec.seed = seed;
    const SegMask o = occlude_ellipses(m, spec);
    CHECK(o == occlude_ellipses(m, spec));
    int removed = 0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        if (m.at(x, y) != SegLabel::kFace) CHECK(o.at(x, y) == m.at(x, y));
        else if (o.at(x, y) != SegLabel::kFace) {
          CHECK(o.at(x, y) == SegLabel::kBackground);
          ++removed;
        }
      }
    CHECK(removed > 0);
  }
  EllipseOcclusionSpec a, b;
  b.seed = 1;
  CHECK_FALSE(occlude_ellipses(m, a) == occlude_ellipses(m, b));
}

TEST_CASE("ellipse occlusion degenerate cases") {
  EllipseOcclusionSpec none;
  none.min_count = none.max_count = 0;
  const SegMask m = disc_mask(32, 10);
  CHECK(occlude_ellipses(m, none) == m);
  const SegMask empty(16, 16);
  CHECK(occlude_ellipses(empty, EllipseOcclusionSpec{}) == empty);
  EllipseOcclusionSpec bad;
  bad.max_count = 0;
  CHECK_THROWS_AS(occlude_ellipses(m, bad), Error);
  bad = {};
  bad.min_axis_fraction = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}
