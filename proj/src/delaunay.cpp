#include "facepipe/delaunay.hpp"

#include <algorithm>
#include <map>
#include <utility>

#include "facepipe/predicates.hpp"

namespace facepipe::geom {

std::array<Point2, 4> rectangle_corners(double x0, double y0, double x1, double y1) {
  return {Point2{x0, y0}, Point2{x1, y0}, Point2{x1, y1}, Point2{x0, y1}};
}

double signed_area(const Point2& a, const Point2& b, const Point2& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
}

std::array<double, 3> barycentric(const Point2& p, const Point2& a, const Point2& b, const Point2& c) {
  const double area = signed_area(a, b, c);
  const double la = signed_area(p, b, c) / area;
  const double lb = signed_area(a, p, c) / area;
  const double lc = signed_area(a, b, p) / area;
  // Each coordinate from its own sub-area, so equal sub-areas give equal weights.
  return {la, lb, lc};
}

namespace {

Triangle canonical(Triangle t) {
  const auto m = std::min_element(t.begin(), t.end()) - t.begin();
  std::rotate(t.begin(), t.begin() + m, t.end());
  return t;
}

}  // namespace

Triangulation triangulate_in_rectangle(std::span<const Point2> points) {
  if (points.size() < 4) throw Error("triangulation needs the four rectangle corners");
  const double x0 = points[0].x, y0 = points[0].y, x1 = points[2].x, y1 = points[2].y;
  if (!(x1 > x0 && y1 > y0) || !(points[1] == Point2{x1, y0}) || !(points[3] == Point2{x0, y1}))
    throw Error("points[0..3] must be rectangle corners in (x0,y0),(x1,y0),(x1,y1),(x0,y1) order");

  Triangulation out;
  out.points.assign(points.begin(), points.end());
  out.representative.resize(points.size());

  std::map<std::pair<double, double>, int> seen;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point2& p = points[i];
    if (!(std::isfinite(p.x) && std::isfinite(p.y)) || p.x < x0 || p.x > x1 || p.y < y0 || p.y > y1)
      throw Error("point " + std::to_string(i) + " lies outside the triangulation rectangle");
    auto [it, inserted] = seen.emplace(std::make_pair(p.x, p.y), static_cast<int>(i));
    out.representative[i] = it->second;
  }

  const auto& P = out.points;
  std::vector<Triangle> tris;
  if (incircle_perturbed(P[0], P[1], P[2], P[3]) > 0)
    tris = {{0, 1, 3}, {1, 2, 3}};
  else
    tris = {{0, 1, 2}, {0, 2, 3}};

  std::vector<Triangle> keep;
  std::map<std::pair<int, int>, int> edge_count;
  for (std::size_t i = 4; i < points.size(); ++i) {
    if (out.representative[i] != static_cast<int>(i)) continue;
    const Point2& p = P[i];
    const int pi = static_cast<int>(i);

    keep.clear();
    edge_count.clear();
    std::vector<std::pair<int, int>> cavity_edges;
    for (const Triangle& t : tris) {
      if (incircle_perturbed(P[t[0]], P[t[1]], P[t[2]], p) > 0) {
        for (int k = 0; k < 3; ++k) {
          const int a = t[k], b = t[(k + 1) % 3];
          cavity_edges.emplace_back(a, b);
          ++edge_count[{std::min(a, b), std::max(a, b)}];
        }
      } else {
        keep.push_back(t);
      }
    }
    if (cavity_edges.empty()) throw Error("internal error: empty Bowyer-Watson cavity");
    for (const auto& [a, b] : cavity_edges) {
      if (edge_count[{std::min(a, b), std::max(a, b)}] != 1) continue;
      // A point on the rectangle border is collinear with that border edge.
      if (orient2d(P[a], P[b], p) == 0) continue;
      keep.push_back({a, b, pi});
    }
    tris.swap(keep);
  }

  for (Triangle& t : tris) t = canonical(t);
  std::sort(tris.begin(), tris.end());
  out.triangles = std::move(tris);
  return out;
}

std::optional<int> locate_triangle(const Triangulation& tri, const Point2& p) {
  for (std::size_t i = 0; i < tri.triangles.size(); ++i) {
    const auto& t = tri.triangles[i];
    const Point2& a = tri.points[t[0]];
    const Point2& b = tri.points[t[1]];
    const Point2& c = tri.points[t[2]];
    if (orient2d(a, b, p) >= 0 && orient2d(b, c, p) >= 0 && orient2d(c, a, p) >= 0)
      return static_cast<int>(i);
  }
  return std::nullopt;
}

}  // namespace facepipe::geom
