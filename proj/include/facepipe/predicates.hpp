#pragma once

#include "facepipe/core.hpp"

namespace facepipe::geom {

// Exact-sign predicates: a floating-point filter with static error bounds,
// falling back to rational arithmetic when the filter cannot decide.

/// Sign of (b - a) x (c - a); +1 when a, b, c turn counter-clockwise (y up).
int orient2d(const Point2& a, const Point2& b, const Point2& c);

/// Sign of the in-circle determinant; +1 when d lies strictly inside the
/// circumcircle of the positively oriented triangle a, b, c.
int incircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d);

/// Lexicographic (x, then y) comparison.
bool lex_less(const Point2& a, const Point2& b);

/// In-circle test under symbolic perturbation of the lifted coordinates:
/// never returns 0 for a positively oriented a, b, c and d distinct from them.
/// Ties are broken by perturbing lexicographically smaller points most, so the
/// outcome depends only on the point coordinates, never on input order.
int incircle_perturbed(const Point2& a, const Point2& b, const Point2& c, const Point2& d);

}  // namespace facepipe::geom
