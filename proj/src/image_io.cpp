#include "facepipe/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

namespace facepipe {
namespace {

struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> bytes;
};

// libpng reports failure through longjmp; the image object is freed by the
// guard in each caller.
void read_png(png_image& img, RawPng& raw, const std::string& what) {
  if (PNG_IMAGE_FAILED(img)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw Error(what + ": " + msg);
  }
  const png_uint_32 format = img.format;
  const bool has_alpha = format & PNG_FORMAT_FLAG_ALPHA;
  const bool has_color = format & PNG_FORMAT_FLAG_COLOR;
  const bool linear = format & PNG_FORMAT_FLAG_LINEAR;
  const bool colormap = format & PNG_FORMAT_FLAG_COLORMAP;
  if (has_alpha || linear || colormap) {
    png_image_free(&img);
    throw Error(what + ": unsupported PNG layout (need 8-bit gray or RGB)");
  }
  img.format = has_color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  raw.width = static_cast<int>(img.width);
  raw.height = static_cast<int>(img.height);
  raw.channels = has_color ? 3 : 1;
  raw.bytes.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, raw.bytes.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw Error(what + ": " + msg);
  }
}

void check_bit_depth(const std::filesystem::path& path) {
  // The simplified libpng API silently converts 16-bit input; reject it up front.
  std::unique_ptr<FILE, int (*)(FILE*)> f(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!f) throw Error("cannot open image: " + path.string());
  unsigned char header[26];
  if (std::fread(header, 1, sizeof header, f.get()) != sizeof header || png_sig_cmp(header, 0, 8))
    throw Error("not a PNG file: " + path.string());
  const int bit_depth = header[24];
  if (bit_depth != 8 && !(header[25] == 0 && bit_depth < 8))
    throw Error("unsupported PNG bit depth " + std::to_string(bit_depth) + ": " + path.string());
}

RawPng read_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("image file not found: " + path.string());
  check_bit_depth(path);
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  png_image_begin_read_from_file(&img, path.c_str());
  RawPng raw;
  read_png(img, raw, path.string());
  return raw;
}

ImageBuffer to_image(const RawPng& raw) {
  std::vector<float> data(raw.bytes.size());
  std::transform(raw.bytes.begin(), raw.bytes.end(), data.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v) / 255.0f; });
  return ImageBuffer(raw.width, raw.height, raw.channels, std::move(data));
}

std::vector<std::uint8_t> quantize(const ImageBuffer& image) {
  image.check_range();
  std::vector<std::uint8_t> bytes(image.size());
  const auto& d = image.data();
  for (std::size_t i = 0; i < d.size(); ++i) bytes[i] = static_cast<std::uint8_t>(std::lround(d[i] * 255.0f));
  return bytes;
}

png_image writer_for(int width, int height, int channels) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  return img;
}

void write_file(const std::filesystem::path& path, int width, int height, int channels,
                const std::vector<std::uint8_t>& bytes) {
  const auto parent = path.parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent))
    throw Error("output directory does not exist: " + parent.string());
  png_image img = writer_for(width, height, channels);
  if (!png_image_write_to_file(&img, path.c_str(), 0, bytes.data(), 0, nullptr))
    throw Error("failed to write " + path.string() + ": " + img.message);
}

}  // namespace

ImageBuffer load_image(const std::filesystem::path& path) { return to_image(read_file(path)); }

void save_image(const ImageBuffer& image, const std::filesystem::path& path) {
  write_file(path, image.width(), image.height(), image.channels(), quantize(image));
}

std::vector<std::uint8_t> encode_png(const ImageBuffer& image) {
  const auto bytes = quantize(image);
  png_image img = writer_for(image.width(), image.height(), image.channels());
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, bytes.data(), 0, nullptr))
    throw Error(std::string("PNG encode failed: ") + img.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, bytes.data(), 0, nullptr))
    throw Error(std::string("PNG encode failed: ") + img.message);
  out.resize(size);
  return out;
}

ImageBuffer decode_png(const std::vector<std::uint8_t>& bytes) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  png_image_begin_read_from_memory(&img, bytes.data(), bytes.size());
  RawPng raw;
  read_png(img, raw, "in-memory PNG");
  return to_image(raw);
}

SegMask load_mask(const std::filesystem::path& path) {
  const RawPng raw = read_file(path);
  if (raw.channels != 1) throw Error("mask PNG must be grayscale: " + path.string());
  return SegMask(raw.width, raw.height, raw.bytes);
}

void save_mask(const SegMask& mask, const std::filesystem::path& path) {
  write_file(path, mask.width(), mask.height(), 1, mask.labels());
}

}  // namespace facepipe
