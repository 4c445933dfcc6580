#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "facepipe/core.hpp"

namespace facepipe {

/// Reads an 8-bit grayscale or RGB PNG. Values v map to v/255.
ImageBuffer load_image(const std::filesystem::path& path);
/// Writes an 8-bit PNG, quantizing each value to round(255*v).
void save_image(const ImageBuffer& image, const std::filesystem::path& path);
/// Same encoding as save_image, into memory.
std::vector<std::uint8_t> encode_png(const ImageBuffer& image);
ImageBuffer decode_png(const std::vector<std::uint8_t>& bytes);

// Segmentation masks persist as 8-bit grayscale PNG holding raw labels 0/1/2.
SegMask load_mask(const std::filesystem::path& path);
void save_mask(const SegMask& mask, const std::filesystem::path& path);

}  // namespace facepipe
