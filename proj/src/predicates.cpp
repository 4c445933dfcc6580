#include "facepipe/predicates.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace facepipe::geom {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon() / 2.0;  // 2^-53
constexpr double kOrientBound = (3.0 + 16.0 * kEps) * kEps;
constexpr double kIncircleBound = (10.0 + 96.0 * kEps) * kEps;

int sign(const mpq_class& v) { return sgn(v); }

int orient_exact(const Point2& a, const Point2& b, const Point2& c) {
  const mpq_class ax(a.x), ay(a.y), bx(b.x), by(b.y), cx(c.x), cy(c.y);
  return sign((bx - ax) * (cy - ay) - (by - ay) * (cx - ax));
}

int incircle_exact(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const mpq_class dx(d.x), dy(d.y);
  const mpq_class adx = mpq_class(a.x) - dx, ady = mpq_class(a.y) - dy;
  const mpq_class bdx = mpq_class(b.x) - dx, bdy = mpq_class(b.y) - dy;
  const mpq_class cdx = mpq_class(c.x) - dx, cdy = mpq_class(c.y) - dy;
  const mpq_class alift = adx * adx + ady * ady;
  const mpq_class blift = bdx * bdx + bdy * bdy;
  const mpq_class clift = cdx * cdx + cdy * cdy;
  const mpq_class det = alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) +
                        clift * (adx * bdy - bdx * ady);
  return sign(det);
}

int fsign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

int orient2d(const Point2& a, const Point2& b, const Point2& c) {
  const double left = (b.x - a.x) * (c.y - a.y);
  const double right = (b.y - a.y) * (c.x - a.x);
  const double det = left - right;
  const double bound = kOrientBound * (std::abs(left) + std::abs(right));
  if (std::abs(det) > bound) return fsign(det);
  return orient_exact(a, b, c);
}

int incircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;

  const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
  const double alift = adx * adx + ady * ady;
  const double cdxady = cdx * ady, adxcdy = adx * cdy;
  const double blift = bdx * bdx + bdy * bdy;
  const double adxbdy = adx * bdy, bdxady = bdx * ady;
  const double clift = cdx * cdx + cdy * cdy;

  const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
  const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                           (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                           (std::abs(adxbdy) + std::abs(bdxady)) * clift;
  if (std::abs(det) > kIncircleBound * permanent) return fsign(det);
  return incircle_exact(a, b, c, d);
}

bool lex_less(const Point2& a, const Point2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); }

int incircle_perturbed(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const int s = incircle(a, b, c, d);
  if (s != 0) return s;
  // Coefficients of each point's lifted coordinate in the 4x4 determinant.
  struct Term {
    const Point2* p;
    int coef;
  };
  std::array<Term, 4> terms{{{&a, orient2d(b, c, d)},
                             {&b, -orient2d(a, c, d)},
                             {&c, orient2d(a, b, d)},
                             {&d, -orient2d(a, b, c)}}};
  std::sort(terms.begin(), terms.end(), [](const Term& l, const Term& r) { return lex_less(*l.p, *r.p); });
  for (const Term& t : terms)
    if (t.coef != 0) return t.coef;
  return 0;  // a, b, c collinear
}

}  // namespace facepipe::geom
