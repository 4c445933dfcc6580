#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "facepipe/core.hpp"

namespace facepipe::geom {

using Triangle = std::array<int, 3>;

struct Triangulation {
  std::vector<Point2> points;
  /// Positively oriented index triples in canonical order: each triple is
  /// rotated to start at its smallest index, then the list is sorted.
  std::vector<Triangle> triangles;
  /// For each input point, the index it was merged into (exact duplicates
  /// share the first occurrence).
  std::vector<int> representative;
};

/// Incremental Bowyer-Watson Delaunay triangulation inside a rectangle.
///
/// points[0..3] must be the corners of an axis-aligned rectangle with positive
/// area; every other point must lie in the closed rectangle. The result covers
/// the rectangle exactly. Cocircular and collinear configurations are resolved
/// by symbolic perturbation, so the triangle set is independent of input order.
Triangulation triangulate_in_rectangle(std::span<const Point2> points);

/// Corners (x0,y0), (x1,y0), (x1,y1), (x0,y1).
std::array<Point2, 4> rectangle_corners(double x0, double y0, double x1, double y1);

/// Barycentric coordinates of p with respect to triangle (a, b, c).
std::array<double, 3> barycentric(const Point2& p, const Point2& a, const Point2& b, const Point2& c);

/// First triangle (in canonical order) containing p, boundary inclusive.
std::optional<int> locate_triangle(const Triangulation& tri, const Point2& p);

double signed_area(const Point2& a, const Point2& b, const Point2& c);

}  // namespace facepipe::geom
