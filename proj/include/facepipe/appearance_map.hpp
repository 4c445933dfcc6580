#pragma once

#include <array>
#include <vector>

#include "facepipe/core.hpp"
#include "facepipe/delaunay.hpp"
#include "facepipe/heatmap.hpp"
#include "facepipe/renderer.hpp"
#include "json.hpp"

namespace facepipe {

/// Half-extent of the yaw/pitch square spanned by the boundary points.
inline constexpr double kMapBound = 75.0;
inline constexpr double kDefaultPruneRadius = 5.0;

struct MapVertex {
  double yaw = 0.0;
  double pitch = 0.0;
  bool boundary = false;
  int view = -1;  // index into AppearanceMap::views, -1 for boundary points
};

/// Source views embedded in the (yaw, pitch) plane and Delaunay-triangulated
/// together with the four corners of [-75,75]^2. Vertices 0..3 are the corners.
struct AppearanceMap {
  std::vector<MapVertex> vertices;
  std::vector<FrameRecord> views;
  std::vector<geom::Triangle> triangles;  // canonical order, positively oriented

  std::size_t interior_count() const { return views.size(); }
  Point2 position(int vertex) const { return {vertices[vertex].yaw, vertices[vertex].pitch}; }
};

struct ViewWeight {
  int vertex = 0;
  double weight = 0.0;
};

struct ViewAnswer {
  int triangle = -1;
  std::array<int, 3> vertices{};
  /// Raw barycentric coordinates before boundary exclusion.
  std::array<double, 3> barycentric{};
  /// Interior vertices with renormalized weights summing to 1.
  std::vector<ViewWeight> weights;
};

/// Greedy pruning in order of ascending |roll|: a frame is kept iff no kept
/// frame lies within `radius` degrees in (yaw, pitch). Output keeps input order.
FrameSequence prune_views(const FrameSequence& sequence, double radius = kDefaultPruneRadius);

/// Drops frames whose image sharpness (variance of Laplacian) is below
/// `threshold`. Frames must carry images. threshold <= 0 disables the filter.
FrameSequence drop_blurred(const FrameSequence& sequence, double threshold);

/// Appends horizontally mirrored copies when every view with non-zero yaw
/// lies on the same side. Mirrors negate yaw and roll, reflect x -> W - x and
/// permute landmark indices left/right. Views at yaw 0 are not duplicated.
FrameSequence mirror_fill(const FrameSequence& sequence, int image_width);

/// Mirrored copy of one frame (new index left to the caller).
FrameRecord mirror_frame(const FrameRecord& frame, int image_width);
LandmarkSet mirror_landmarks(const LandmarkSet& p, int image_width);

/// Requires at least one view, all strictly inside (-75,75)^2, no two views at
/// the same (yaw, pitch).
AppearanceMap build_map(const FrameSequence& views);

/// Finds the containing triangle and its view weights. Boundary vertices are
/// dropped and the remaining weights renormalized; when they carry no weight
/// at all (query on a boundary edge) the nearest interior vertex gets weight 1.
ViewAnswer locate(const AppearanceMap& map, const PoseAngles& pose);

/// Sum over weighted vertices of weight * render(view; target). Every view
/// must carry its image.
ImageBuffer interpolate_views(const AppearanceMap& map, const ViewAnswer& answer,
                              const Renderer& renderer, const LandmarkSet& target,
                              const Heatmap* heatmap = nullptr);

/// Weighted average of the views' landmarks and roll, used as the pose-only
/// reenactment target.
LandmarkSet blend_landmarks(const AppearanceMap& map, const ViewAnswer& answer);
double blend_roll(const AppearanceMap& map, const ViewAnswer& answer);

nlohmann::json map_to_json(const AppearanceMap& map);

}  // namespace facepipe
