#include "facepipe/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <sstream>

#include "facepipe/image_ops.hpp"

namespace facepipe {

void PoissonProblem::validate() const {
  if (!target.same_extent(guidance)) throw Error("Poisson target and guidance extents differ");
  if (mask.channels() != 1 || mask.width() != target.width() || mask.height() != target.height())
    throw Error("Poisson mask must be a single channel with the target's extent");
  for (float v : mask.data())
    if (v != 0.0f && v != 1.0f) throw Error("Poisson mask must be binary");
  if (!(tolerance > 0.0)) throw Error("Poisson tolerance must be positive");
  if (max_iterations < 1) throw Error("Poisson max_iterations must be >= 1");
}

namespace {

constexpr int kDx[4] = {-1, 1, 0, 0};
constexpr int kDy[4] = {0, 0, -1, 1};

// Unknown pixels and their neighborhoods, shared by all channels.
struct Stencil {
  int width = 0;
  int height = 0;
  std::vector<std::size_t> pixel;          // unknown -> pixel index
  std::vector<std::array<int, 4>> nbr;     // unknown neighbor ids, -1 if known or out of frame
  std::vector<std::array<long, 4>> known;  // in-frame known neighbor pixel, -1 otherwise
  std::vector<int> outside;                // neighbors beyond the frame
};

Stencil build_stencil(const ImageBuffer& mask) {
  Stencil s;
  s.width = mask.width();
  s.height = mask.height();
  std::vector<int> id(mask.data().size(), -1);
  for (std::size_t i = 0; i < mask.data().size(); ++i)
    if (mask.data()[i] == 1.0f) {
      id[i] = static_cast<int>(s.pixel.size());
      s.pixel.push_back(i);
    }
  const std::size_t n = s.pixel.size();
  s.nbr.resize(n);
  s.known.resize(n);
  s.outside.assign(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const int x = static_cast<int>(s.pixel[k] % s.width);
    const int y = static_cast<int>(s.pixel[k] / s.width);
    for (int d = 0; d < 4; ++d) {
      const int qx = x + kDx[d];
      const int qy = y + kDy[d];
      s.nbr[k][d] = -1;
      s.known[k][d] = -1;
      if (qx < 0 || qy < 0 || qx >= s.width || qy >= s.height) {
        ++s.outside[k];
        continue;
      }
      const std::size_t q = static_cast<std::size_t>(qy) * s.width + qx;
      if (id[q] >= 0)
        s.nbr[k][d] = id[q];
      else
        s.known[k][d] = static_cast<long>(q);
    }
  }
  return s;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct ChannelSolve {
  std::vector<double> x;
  PoissonChannelStats stats;
};

// Channel planes as doubles in pixel order.
std::vector<double> plane(const ImageBuffer& img, int c) {
  std::vector<double> out(static_cast<std::size_t>(img.width()) * img.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = img.data()[i * img.channels() + c];
  return out;
}

// r = L g - L f over the unknowns, where L u_p = sum_q (u_p - u_q) and f holds
// the target on known pixels and x on unknowns. Evaluated identically for f and
// g so that f == g gives an exactly zero residual.
void residual(const Stencil& s, const std::vector<double>& g, const std::vector<double>& t,
              const std::vector<double>& x, std::vector<double>& r) {
  const std::size_t n = s.pixel.size();
  r.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t p = s.pixel[k];
    double lg = 0.0, lf = 0.0;
    for (int d = 0; d < 4; ++d) {
      const int u = s.nbr[k][d];
      const long q = s.known[k][d];
      if (u >= 0) {
        lg += g[p] - g[s.pixel[u]];
        lf += x[k] - x[u];
      } else if (q >= 0) {
        lg += g[p] - g[q];
        lf += x[k] - t[q];
      } else {
        lf += x[k] - t[p];
      }
    }
    r[k] = lg - lf;
  }
}

void apply_laplacian(const Stencil& s, const std::vector<double>& v, std::vector<double>& out) {
  const std::size_t n = s.pixel.size();
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 4.0 * v[k];
    for (int d = 0; d < 4; ++d)
      if (s.nbr[k][d] >= 0) acc -= v[s.nbr[k][d]];
    out[k] = acc;
  }
}

ChannelSolve solve_channel(const Stencil& s, const std::vector<double>& g, const std::vector<double>& t,
                           double tol, int max_iterations) {
  const std::size_t n = s.pixel.size();
  ChannelSolve out;
  out.x.resize(n);
  std::vector<double> r, zero(n, 0.0);
  residual(s, g, t, zero, r);
  const double bnorm = std::sqrt(dot(r, r));
  for (std::size_t k = 0; k < n; ++k) out.x[k] = g[s.pixel[k]];
  if (bnorm == 0.0) {
    // The unique solution is zero; keep the guidance start only if it already is.
    residual(s, g, t, out.x, r);
    if (dot(r, r) != 0.0) out.x = zero;
    return out;
  }
  const double goal = tol * bnorm;

  std::vector<double> z(n), p(n), ap(n);
  int it = 0;
  double rnorm = 0.0;
  // Outer loop restarts from the true residual if recurrence drift hides it.
  for (;;) {
    residual(s, g, t, out.x, r);
    rnorm = std::sqrt(dot(r, r));
    if (rnorm <= goal || it >= max_iterations) break;
    for (std::size_t k = 0; k < n; ++k) z[k] = 0.25 * r[k];
    p = z;
    double rz = dot(r, z);
    while (it < max_iterations) {
      apply_laplacian(s, p, ap);
      const double alpha = rz / dot(p, ap);
      for (std::size_t k = 0; k < n; ++k) {
        out.x[k] += alpha * p[k];
        r[k] -= alpha * ap[k];
      }
      ++it;
      if (std::sqrt(dot(r, r)) <= 0.5 * goal) break;
      for (std::size_t k = 0; k < n; ++k) z[k] = 0.25 * r[k];
      const double rz_next = dot(r, z);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
    }
  }
  out.stats.iterations = it;
  out.stats.relative_residual = rnorm / bnorm;
  if (rnorm > goal) {
    std::ostringstream os;
    os << "Poisson solve did not converge: relative residual " << out.stats.relative_residual << " after " << it
       << " iterations";
    throw Error(os.str());
  }
  return out;
}

}  // namespace

PoissonResult poisson_solve(const PoissonProblem& problem) {
  problem.validate();
  const ImageBuffer& target = problem.target;
  PoissonResult result;
  result.image = target;
  result.raw.assign(target.data().begin(), target.data().end());
  const int C = target.channels();
  result.channels.assign(static_cast<std::size_t>(C), {});

  const Stencil stencil = build_stencil(problem.mask);
  if (stencil.pixel.empty()) return result;

  auto run = [&](int c) {
    return solve_channel(stencil, plane(problem.guidance, c), plane(target, c), problem.tolerance,
                         problem.max_iterations);
  };
  std::vector<ChannelSolve> solved(static_cast<std::size_t>(C));
  const int threads = std::min(C, thread_budget());
  if (threads > 1) {
    std::vector<std::future<ChannelSolve>> jobs;
    for (int c = 0; c < C; ++c) jobs.push_back(std::async(std::launch::async, run, c));
    for (int c = 0; c < C; ++c) solved[c] = jobs[c].get();
  } else {
    for (int c = 0; c < C; ++c) solved[c] = run(c);
  }

  for (int c = 0; c < C; ++c) {
    PoissonChannelStats& st = solved[c].stats;
    for (std::size_t k = 0; k < stencil.pixel.size(); ++k) {
      const std::size_t i = stencil.pixel[k] * C + c;
      const double v = solved[c].x[k];
      result.raw[i] = v;
      const double clamped = std::clamp(v, 0.0, 1.0);
      if (clamped != v) {
        ++st.clamped_pixels;
        st.max_clamp = std::max(st.max_clamp, std::abs(clamped - v));
      }
      result.image.data()[i] = static_cast<float>(clamped);
    }
    result.channels[c] = st;
  }
  return result;
}

namespace {

// Squared distance transform of a sampled function along one line
// (lower envelope of parabolas).
void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  v.assign(static_cast<std::size_t>(n), 0);
  z.assign(static_cast<std::size_t>(n) + 1, 0.0);
  auto cut = [&](int q, int p) { return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p)); };
  int k = 0;
  z[0] = -inf;
  z[1] = inf;
  for (int q = 1; q < n; ++q) {
    double s = cut(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = cut(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double diff = q - v[k];
    d[q] = diff * diff + f[v[k]];
  }
}

// Stand-in for infinity that keeps the envelope arithmetic finite.
constexpr double kFar = 1e30;

void check_binary(const ImageBuffer& mask) {
  if (mask.channels() != 1) throw Error("mask must have one channel");
  for (float v : mask.data())
    if (v != 0.0f && v != 1.0f) throw Error("mask must be binary");
}

}  // namespace

std::vector<double> distance_to_background(const ImageBuffer& mask) {
  check_binary(mask);
  const int W = mask.width();
  const int H = mask.height();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> f(static_cast<std::size_t>(W) * H);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = mask.data()[i] == 0.0f ? 0.0 : kFar;

  std::vector<int> v;
  std::vector<double> z;
  std::vector<double> col_in(static_cast<std::size_t>(H)), col_out(static_cast<std::size_t>(H));
  for (int x = 0; x < W; ++x) {
    for (int y = 0; y < H; ++y) col_in[y] = f[static_cast<std::size_t>(y) * W + x];
    edt_1d(col_in.data(), col_out.data(), H, v, z);
    for (int y = 0; y < H; ++y) f[static_cast<std::size_t>(y) * W + x] = col_out[y];
  }
  std::vector<double> row(static_cast<std::size_t>(W));
  for (int y = 0; y < H; ++y) {
    double* line = f.data() + static_cast<std::size_t>(y) * W;
    std::copy(line, line + W, row.begin());
    edt_1d(row.data(), line, W, v, z);
  }
  for (double& d : f) d = d >= 0.5 * kFar ? inf : std::sqrt(d);
  return f;
}

ImageBuffer soft_erode(const ImageBuffer& mask, double width) {
  if (!(width >= 0.0) || !std::isfinite(width)) throw Error("erosion width must be finite and non-negative");
  check_binary(mask);
  if (width == 0.0) return mask;
  const auto d = distance_to_background(mask);
  ImageBuffer out(mask.width(), mask.height(), 1);
  for (std::size_t i = 0; i < d.size(); ++i) out.data()[i] = static_cast<float>(std::clamp(d[i] / width, 0.0, 1.0));
  return out;
}

ImageBuffer composite(const ImageBuffer& blended, const ImageBuffer& target, const ImageBuffer& soft_mask) {
  if (!blended.same_extent(target)) throw Error("composite inputs differ in extent");
  if (soft_mask.channels() != 1 || soft_mask.width() != target.width() || soft_mask.height() != target.height())
    throw Error("composite mask must be a single channel with the image extent");
  ImageBuffer out(target.width(), target.height(), target.channels());
  const int C = target.channels();
  for (std::size_t p = 0; p < soft_mask.size(); ++p) {
    const double s = soft_mask.data()[p];
    if (!(s >= 0.0 && s <= 1.0)) throw Error("composite mask value outside [0,1]");
    for (int c = 0; c < C; ++c) {
      const std::size_t i = p * C + c;
      out.data()[i] = static_cast<float>(blended.data()[i] * s + target.data()[i] * (1.0 - s));
    }
  }
  return out;
}

ImageBuffer paste_back(const ImageBuffer& frame, const ImageBuffer& crop, const ImageBuffer& soft_mask,
                       const BoundingBox& box) {
  box.validate();
  if (box.left() < 0.0 || box.top() < 0.0 || box.right() > frame.width() || box.bottom() > frame.height())
    throw Error("paste box lies outside the frame");
  if (crop.channels() != frame.channels()) throw Error("paste crop and frame channel counts differ");
  if (soft_mask.channels() != 1 || soft_mask.width() != crop.width() || soft_mask.height() != crop.height())
    throw Error("paste mask must match the crop extent");
  ImageBuffer out = frame;
  const int x0 = static_cast<int>(std::floor(box.left()));
  const int x1 = std::min(frame.width() - 1, static_cast<int>(std::ceil(box.right())));
  const int y0 = static_cast<int>(std::floor(box.top()));
  const int y1 = std::min(frame.height() - 1, static_cast<int>(std::ceil(box.bottom())));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double px = x + 0.5;
      const double py = y + 0.5;
      if (px < box.left() || px > box.right() || py < box.top() || py > box.bottom()) continue;
      const Point2 q = to_crop({px, py}, box, crop.width(), crop.height());
      if (sample_bilinear(soft_mask, q.x, q.y, 0) <= 0.0f) continue;
      for (int c = 0; c < frame.channels(); ++c) out.at(x, y, c) = sample_bilinear(crop, q.x, q.y, c);
    }
  return out;
}

}  // namespace facepipe
