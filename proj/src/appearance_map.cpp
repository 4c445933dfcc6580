#include "facepipe/appearance_map.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "facepipe/image_ops.hpp"
#include "facepipe/kdtree.hpp"
#include "facepipe/predicates.hpp"

namespace facepipe {

FrameSequence prune_views(const FrameSequence& sequence, double radius) {
  if (!(radius >= 0.0)) throw Error("pruning radius must be non-negative");
  std::vector<std::size_t> order(sequence.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(sequence[a].pose.roll) < std::abs(sequence[b].pose.roll);
  });

  KdTree2 kept;
  std::vector<bool> keep(sequence.size(), false);
  for (std::size_t i : order) {
    const Point2 q{sequence[i].pose.yaw, sequence[i].pose.pitch};
    if (kept.any_within(q, radius)) continue;
    kept.insert(q, static_cast<int>(i));
    keep[i] = true;
  }
  std::vector<FrameRecord> out;
  for (std::size_t i = 0; i < sequence.size(); ++i)
    if (keep[i]) out.push_back(sequence[i]);
  return FrameSequence(std::move(out));
}

FrameSequence drop_blurred(const FrameSequence& sequence, double threshold) {
  if (threshold <= 0.0) return sequence;
  std::vector<FrameRecord> out;
  for (const auto& f : sequence) {
    if (!f.image) throw Error("blur filtering needs frame images (frame " + std::to_string(f.index) + ")");
    if (laplacian_variance(*f.image) >= threshold) out.push_back(f);
  }
  return FrameSequence(std::move(out));
}

LandmarkSet mirror_landmarks(const LandmarkSet& p, int image_width) {
  const auto& perm = wflw_flip_permutation();
  LandmarkSet out;
  for (std::size_t i = 0; i < kNumLandmarks; ++i)
    out[perm[i]] = {static_cast<double>(image_width) - p[i].x, p[i].y};
  return out;
}

FrameRecord mirror_frame(const FrameRecord& frame, int image_width) {
  if (frame.image && frame.image->width() != image_width)
    throw Error("mirror width does not match frame image width");
  FrameRecord m = frame;
  m.landmarks = mirror_landmarks(frame.landmarks, image_width);
  m.bbox.cx = image_width - frame.bbox.cx;
  m.pose.yaw = -frame.pose.yaw;
  m.pose.roll = -frame.pose.roll;
  m.mirrored = !frame.mirrored;
  if (frame.image) m.image = std::make_shared<const ImageBuffer>(flip_horizontal(*frame.image));
  if (frame.mask) m.mask = std::make_shared<const SegMask>(flip_horizontal(*frame.mask));
  return m;
}

FrameSequence mirror_fill(const FrameSequence& sequence, int image_width) {
  const bool any_pos = std::any_of(sequence.begin(), sequence.end(), [](const auto& f) { return f.pose.yaw > 0; });
  const bool any_neg = std::any_of(sequence.begin(), sequence.end(), [](const auto& f) { return f.pose.yaw < 0; });
  if (any_pos == any_neg) return sequence;  // two-sided, or everything at yaw 0

  std::vector<FrameRecord> frames(sequence.begin(), sequence.end());
  int next = frames.back().index + 1;
  for (const auto& f : sequence) {
    if (f.pose.yaw == 0.0) continue;
    FrameRecord m = mirror_frame(f, image_width);
    m.index = next++;
    frames.push_back(std::move(m));
  }
  return FrameSequence(std::move(frames));
}

AppearanceMap build_map(const FrameSequence& views) {
  if (views.empty()) throw Error("appearance map needs at least one view");
  AppearanceMap map;
  std::vector<Point2> pts;
  for (const auto& c : geom::rectangle_corners(-kMapBound, -kMapBound, kMapBound, kMapBound)) {
    map.vertices.push_back({c.x, c.y, true, -1});
    pts.push_back(c);
  }
  std::set<std::pair<double, double>> seen;
  for (const auto& f : views) {
    const double yaw = f.pose.yaw;
    const double pitch = f.pose.pitch;
    if (!(std::abs(yaw) < kMapBound && std::abs(pitch) < kMapBound)) {
      std::ostringstream os;
      os << "frame " << f.index << " pose (yaw " << yaw << ", pitch " << pitch
         << ") lies outside the appearance-map square";
      throw Error(os.str());
    }
    if (!seen.emplace(yaw, pitch).second)
      throw Error("frame " + std::to_string(f.index) + " duplicates another view's pose; prune first");
    map.vertices.push_back({yaw, pitch, false, static_cast<int>(map.views.size())});
    map.views.push_back(f);
    pts.push_back({yaw, pitch});
  }
  map.triangles = geom::triangulate_in_rectangle(pts).triangles;
  return map;
}

ViewAnswer locate(const AppearanceMap& map, const PoseAngles& pose) {
  const Point2 q{pose.yaw, pose.pitch};
  if (!(std::abs(q.x) <= kMapBound && std::abs(q.y) <= kMapBound)) {
    std::ostringstream os;
    os << "query (yaw " << q.x << ", pitch " << q.y << ") outside [-75,75]^2";
    throw Error(os.str());
  }
  // Scan in canonical order with exact orientation tests.
  std::optional<int> hit;
  for (std::size_t i = 0; i < map.triangles.size() && !hit; ++i) {
    const auto& t = map.triangles[i];
    const Point2 a = map.position(t[0]), b = map.position(t[1]), c = map.position(t[2]);
    if (geom::orient2d(a, b, q) >= 0 && geom::orient2d(b, c, q) >= 0 && geom::orient2d(c, a, q) >= 0)
      hit = static_cast<int>(i);
  }
  if (!hit) throw Error("query not covered by the appearance map");

  ViewAnswer ans;
  ans.triangle = *hit;
  ans.vertices = map.triangles[*hit];
  ans.barycentric = geom::barycentric(q, map.position(ans.vertices[0]), map.position(ans.vertices[1]),
                                      map.position(ans.vertices[2]));

  double total = 0.0;
  for (int k = 0; k < 3; ++k) {
    const int v = ans.vertices[k];
    if (map.vertices[v].boundary) continue;
    const double w = std::max(0.0, ans.barycentric[k]);
    ans.weights.push_back({v, w});
    total += w;
  }
  if (ans.weights.empty()) throw Error("query falls in a triangle made only of boundary points");
  if (total > 0.0) {
    for (auto& w : ans.weights) w.weight /= total;
  } else {
    auto nearest = std::min_element(ans.weights.begin(), ans.weights.end(), [&](const auto& l, const auto& r) {
      return distance(map.position(l.vertex), q) < distance(map.position(r.vertex), q);
    });
    const ViewWeight only{nearest->vertex, 1.0};
    ans.weights = {only};
  }
  return ans;
}

ImageBuffer interpolate_views(const AppearanceMap& map, const ViewAnswer& answer, const Renderer& renderer,
                              const LandmarkSet& target, const Heatmap* heatmap) {
  if (answer.weights.empty()) throw Error("view answer carries no weights");
  std::vector<double> acc;
  int w = 0, h = 0, c = 0;
  for (const auto& vw : answer.weights) {
    const MapVertex& v = map.vertices.at(vw.vertex);
    if (v.boundary) throw Error("boundary vertices cannot be rendered");
    const FrameRecord& view = map.views.at(v.view);
    if (!view.image) throw Error("view image for frame " + std::to_string(view.index) + " is not loaded");
    const ImageBuffer img = renderer.render(*view.image, view.landmarks, RenderTarget{target, heatmap});
    if (acc.empty()) {
      w = img.width();
      h = img.height();
      c = img.channels();
      acc.assign(img.size(), 0.0);
    } else if (img.width() != w || img.height() != h || img.channels() != c) {
      throw Error("rendered views differ in extent");
    }
    const auto& d = img.data();
    for (std::size_t i = 0; i < d.size(); ++i) acc[i] += vw.weight * d[i];
  }
  std::vector<float> out(acc.size());
  std::transform(acc.begin(), acc.end(), out.begin(),
                 [](double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); });
  return ImageBuffer(w, h, c, std::move(out));
}

LandmarkSet blend_landmarks(const AppearanceMap& map, const ViewAnswer& answer) {
  LandmarkSet out;
  for (std::size_t i = 0; i < kNumLandmarks; ++i) {
    Point2 s{};
    for (const auto& vw : answer.weights) s = s + map.views[map.vertices[vw.vertex].view].landmarks[i] * vw.weight;
    out[i] = s;
  }
  return out;
}

double blend_roll(const AppearanceMap& map, const ViewAnswer& answer) {
  double r = 0.0;
  for (const auto& vw : answer.weights) r += vw.weight * map.views[map.vertices[vw.vertex].view].pose.roll;
  return r;
}

nlohmann::json map_to_json(const AppearanceMap& map) {
  using nlohmann::json;
  json verts = json::array();
  double ymin = kMapBound, ymax = -kMapBound, pmin = kMapBound, pmax = -kMapBound;
  for (std::size_t i = 0; i < map.vertices.size(); ++i) {
    const auto& v = map.vertices[i];
    json jv = {{"id", i}, {"yaw", v.yaw}, {"pitch", v.pitch}, {"boundary", v.boundary}};
    if (!v.boundary) {
      const auto& f = map.views[v.view];
      jv["frame"] = f.index;
      jv["roll"] = f.pose.roll;
      jv["image"] = f.image_path;
      jv["mirrored"] = f.mirrored;
      ymin = std::min(ymin, v.yaw);
      ymax = std::max(ymax, v.yaw);
      pmin = std::min(pmin, v.pitch);
      pmax = std::max(pmax, v.pitch);
    }
    verts.push_back(std::move(jv));
  }
  json tris = json::array();
  for (const auto& t : map.triangles) tris.push_back({t[0], t[1], t[2]});
  return {{"version", 1},
          {"bound", kMapBound},
          {"vertices", std::move(verts)},
          {"triangles", std::move(tris)},
          {"coverage",
           {{"views", map.views.size()},
            {"triangles", map.triangles.size()},
            {"yaw_range", {ymin, ymax}},
            {"pitch_range", {pmin, pmax}}}}};
}

}  // namespace facepipe
