#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "facepipe/core.hpp"
#include "facepipe/heatmap.hpp"

namespace facepipe {

class MlpTransformer;

/// What a renderer is asked to produce: the target landmarks, and the heatmap
/// encoding of them when the caller built one.
struct RenderTarget {
  const LandmarkSet& landmarks;
  const Heatmap* heatmap = nullptr;
};

/// Stand-in for the reenactment generator: re-renders a source view so that
/// its face follows the target landmarks. Implementations must return an image
/// with the source extent and values in [0,1], and be safe to call concurrently.
class Renderer {
 public:
  virtual ~Renderer() = default;
  virtual std::string name() const = 0;
  virtual bool supports_heatmap_conditioning() const = 0;
  virtual ImageBuffer render(const ImageBuffer& source, const LandmarkSet& source_landmarks,
                             const RenderTarget& target) const = 0;
};

/// Returns the source view untouched.
class IdentityRenderer final : public Renderer {
 public:
  std::string name() const override { return "identity"; }
  bool supports_heatmap_conditioning() const override { return false; }
  ImageBuffer render(const ImageBuffer& source, const LandmarkSet&, const RenderTarget&) const override {
    return source;
  }
};

struct WarpResult {
  ImageBuffer image;
  /// Triangles whose source counterpart had zero area; they were filled with
  /// the affine map of the nearest valid triangle.
  int degenerate_triangles = 0;
};

/// Piecewise-affine warp. The target landmarks plus 8 border anchors (corners
/// and edge midpoints) are Delaunay-triangulated; each target pixel center is
/// mapped through its triangle's affine map to the source and sampled
/// bilinearly. Both landmark sets must lie within the image.
WarpResult warp_render(const ImageBuffer& source, const LandmarkSet& source_landmarks,
                       const LandmarkSet& target_landmarks);

/// The 8 border anchors of a width x height frame.
std::array<Point2, 8> border_anchors(int width, int height);

class WarpRenderer final : public Renderer {
 public:
  std::string name() const override { return "warp"; }
  bool supports_heatmap_conditioning() const override { return false; }
  ImageBuffer render(const ImageBuffer& source, const LandmarkSet& source_landmarks,
                     const RenderTarget& target) const override;
};

/// "warp" or "identity".
std::unique_ptr<Renderer> make_renderer(const std::string& name);

/// Clamps every landmark into [0,W] x [0,H].
LandmarkSet clamp_to_frame(const LandmarkSet& p, int width, int height);

struct ReenactResult {
  ImageBuffer image;
  /// p_1 .. p_n in pixels, the landmarks each iteration rendered toward.
  std::vector<LandmarkSet> path;
};

/// Iterative reenactment I_{r_i} = render(I_{r_{i-1}}; H(p_i)), I_{r_0} = I_s,
/// where p_1..p_n come from intermediate_landmarks. The transformer works in
/// normalized coordinates over the source image extent. When `target` is
/// given it pins p_n.
ReenactResult reenact_iterative(const Renderer& renderer, const ImageBuffer& source,
                                const LandmarkSet& source_landmarks, const PoseAngles& source_pose,
                                const PoseAngles& target_pose, int iterations,
                                const MlpTransformer& transformer,
                                const LandmarkSet* target = nullptr);

struct EllipseOcclusionSpec {
  int min_count = 1;
  int max_count = 3;
  // Semi-axes as fractions of the face bounding-box extent.
  double min_axis_fraction = 0.05;
  double max_axis_fraction = 0.25;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Erases randomly sampled ellipses, centered on the face-region border, from
/// the face label. Deterministic given the seed; never adds face pixels.
SegMask occlude_ellipses(const SegMask& mask, const EllipseOcclusionSpec& spec);

}  // namespace facepipe
