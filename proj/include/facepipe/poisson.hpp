#pragma once

#include <vector>

#include "facepipe/core.hpp"

namespace facepipe {

/// Gradient-domain blend: find f minimizing |grad f - grad guidance|^2 over
/// the masked pixels, with f = target wherever the mask is 0.
struct PoissonProblem {
  ImageBuffer target;
  ImageBuffer guidance;
  ImageBuffer mask;  // 1 channel, values exactly 0 or 1
  double tolerance = 1e-8;
  int max_iterations = 20000;

  /// Throws on mismatched extents, a non-binary mask or bad solver settings.
  void validate() const;
};

struct PoissonChannelStats {
  int iterations = 0;
  /// |b - A x| / |b| recomputed from scratch at the end.
  double relative_residual = 0.0;
  std::size_t clamped_pixels = 0;
  double max_clamp = 0.0;
};

struct PoissonResult {
  ImageBuffer image;  // clamped to [0,1]
  /// Solution before clamping, laid out like `image`.
  std::vector<double> raw;
  std::vector<PoissonChannelStats> channels;
};

/// Per channel, solves 4 f_p - sum_{q in N4(p)} f_q = 4 g_p - sum_q g_q on
/// the masked pixels by Jacobi-preconditioned conjugate gradients, starting
/// from the guidance. A neighbor outside the frame acts as a Dirichlet value
/// equal to the target at p (its guidance value is taken to equal g_p).
/// Channels are solved concurrently up to thread_budget(). An all-zero mask
/// returns the target unchanged. Throws when the tolerance is not reached.
PoissonResult poisson_solve(const PoissonProblem& problem);

/// Euclidean distance (between pixel centers) from every pixel to the nearest
/// pixel whose mask value is 0; +infinity when there is none.
std::vector<double> distance_to_background(const ImageBuffer& mask);

/// clamp(d / width, 0, 1) with d from distance_to_background; width 0 returns
/// the binary mask itself.
ImageBuffer soft_erode(const ImageBuffer& mask, double width);

/// blended * s + target * (1 - s), with a 1-channel soft mask s.
ImageBuffer composite(const ImageBuffer& blended, const ImageBuffer& target, const ImageBuffer& soft_mask);

/// Resamples `crop` and `soft_mask` (both crop-sized) bilinearly onto `box`
/// in the frame and writes the crop wherever the resampled mask is positive.
/// Every other frame pixel is left untouched. The box must lie inside the frame.
ImageBuffer paste_back(const ImageBuffer& frame, const ImageBuffer& crop, const ImageBuffer& soft_mask,
                       const BoundingBox& box);

}  // namespace facepipe
