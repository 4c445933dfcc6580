#include "facepipe/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace facepipe {

float sample_bilinear(const ImageBuffer& image, double x, double y, int channel) {
  const double fx = std::clamp(x - 0.5, 0.0, static_cast<double>(image.width() - 1));
  const double fy = std::clamp(y - 0.5, 0.0, static_cast<double>(image.height() - 1));
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const int x1 = std::min(x0 + 1, image.width() - 1);
  const int y1 = std::min(y0 + 1, image.height() - 1);
  const double ax = fx - x0;
  const double ay = fy - y0;
  const double top = (1.0 - ax) * image.at(x0, y0, channel) + ax * image.at(x1, y0, channel);
  const double bottom = (1.0 - ax) * image.at(x0, y1, channel) + ax * image.at(x1, y1, channel);
  return static_cast<float>((1.0 - ay) * top + ay * bottom);
}

ImageBuffer flip_horizontal(const ImageBuffer& image) {
  ImageBuffer out(image.width(), image.height(), image.channels());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < image.channels(); ++c)
        out.at(x, y, c) = image.at(image.width() - 1 - x, y, c);
  return out;
}

SegMask flip_horizontal(const SegMask& mask) {
  SegMask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) out.set(x, y, mask.at(mask.width() - 1 - x, y));
  return out;
}

Point2 to_crop(const Point2& p, const BoundingBox& box, int width, int height) {
  return {(p.x - box.left()) * width / box.w, (p.y - box.top()) * height / box.h};
}

LandmarkSet to_crop(const LandmarkSet& p, const BoundingBox& box, int width, int height) {
  LandmarkSet out = p;
  for (std::size_t i = 0; i < kNumLandmarks; ++i) out[i] = to_crop(p[i], box, width, height);
  return out;
}

Point2 from_crop(const Point2& p, const BoundingBox& box, int width, int height) {
  return {box.left() + p.x * box.w / width, box.top() + p.y * box.h / height};
}

ImageBuffer crop_resize(const ImageBuffer& image, const BoundingBox& box, int width, int height) {
  box.validate();
  ImageBuffer out(width, height, image.channels());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const Point2 src = from_crop({x + 0.5, y + 0.5}, box, width, height);
      for (int c = 0; c < image.channels(); ++c)
        out.at(x, y, c) = sample_bilinear(image, src.x, src.y, c);
    }
  return out;
}

SegMask crop_resize(const SegMask& mask, const BoundingBox& box, int width, int height) {
  box.validate();
  SegMask out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const Point2 src = from_crop({x + 0.5, y + 0.5}, box, width, height);
      const int sx = static_cast<int>(std::floor(src.x));
      const int sy = static_cast<int>(std::floor(src.y));
      if (sx < 0 || sy < 0 || sx >= mask.width() || sy >= mask.height()) continue;
      out.set(x, y, mask.at(sx, sy));
    }
  return out;
}

Point2 rotate_about(const Point2& p, const Point2& center, double degrees) {
  const double r = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(r);
  const double s = std::sin(r);
  const Point2 d = p - center;
  return {center.x + c * d.x - s * d.y, center.y + s * d.x + c * d.y};
}

ImageBuffer rotate_about_center(const ImageBuffer& image, double degrees) {
  if (degrees == 0.0) return image;
  const Point2 center{image.width() / 2.0, image.height() / 2.0};
  ImageBuffer out(image.width(), image.height(), image.channels());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const Point2 src = rotate_about({x + 0.5, y + 0.5}, center, -degrees);
      for (int c = 0; c < image.channels(); ++c)
        out.at(x, y, c) = sample_bilinear(image, src.x, src.y, c);
    }
  return out;
}

ImageBuffer convert_channels(const ImageBuffer& image, int channels) {
  if (image.channels() == channels) return image;
  ImageBuffer out(image.width(), image.height(), channels);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      if (channels == 3) {
        for (int c = 0; c < 3; ++c) out.at(x, y, c) = image.at(x, y, 0);
      } else {
        out.at(x, y, 0) = (image.at(x, y, 0) + image.at(x, y, 1) + image.at(x, y, 2)) / 3.0f;
      }
    }
  return out;
}

double laplacian_variance(const ImageBuffer& image) {
  const int w = image.width();
  const int h = image.height();
  if (w < 3 || h < 3) return 0.0;
  auto lum = [&](int x, int y) {
    double s = 0.0;
    for (int c = 0; c < image.channels(); ++c) s += image.at(x, y, c);
    return s / image.channels();
  };
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t n = 0;
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      const double l = lum(x - 1, y) + lum(x + 1, y) + lum(x, y - 1) + lum(x, y + 1) - 4.0 * lum(x, y);
      sum += l;
      sum_sq += l * l;
      ++n;
    }
  const double mean = sum / n;
  return sum_sq / n - mean * mean;
}

}  // namespace facepipe
