#pragma once

#include "facepipe/core.hpp"

namespace facepipe {

// Pixel (x, y) covers [x, x+1) x [y, y+1); its center is (x+0.5, y+0.5).

/// Bilinear sample at a continuous position in pixel-center coordinates,
/// clamped to the border.
float sample_bilinear(const ImageBuffer& image, double x, double y, int channel);

ImageBuffer flip_horizontal(const ImageBuffer& image);
SegMask flip_horizontal(const SegMask& mask);

/// Resamples the box region of `image` onto a width x height grid.
ImageBuffer crop_resize(const ImageBuffer& image, const BoundingBox& box, int width, int height);
/// Nearest-neighbor counterpart for label masks.
SegMask crop_resize(const SegMask& mask, const BoundingBox& box, int width, int height);

/// Maps a frame point into crop coordinates for `box` resampled to width x height.
Point2 to_crop(const Point2& p, const BoundingBox& box, int width, int height);
LandmarkSet to_crop(const LandmarkSet& p, const BoundingBox& box, int width, int height);
Point2 from_crop(const Point2& p, const BoundingBox& box, int width, int height);

/// Rotates about the image center by `degrees` (x' = c + R(x - c) in y-down coordinates).
ImageBuffer rotate_about_center(const ImageBuffer& image, double degrees);
Point2 rotate_about(const Point2& p, const Point2& center, double degrees);

/// Converts to `channels` (1 or 3) by replication or luminance averaging.
ImageBuffer convert_channels(const ImageBuffer& image, int channels);

/// Variance of the 4-neighbor Laplacian of the luminance; low values indicate blur.
double laplacian_variance(const ImageBuffer& image);

}  // namespace facepipe
