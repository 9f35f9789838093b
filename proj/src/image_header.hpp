#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

namespace tracklens {

enum class ImageFormat { kGif, kPng, kJpeg, kWebp, kBmp, kUnknown };
std::string_view to_string(ImageFormat f);  // "GIF", "PNG", ..., "Unknown"

struct ImageInfo {
  ImageFormat format = ImageFormat::kUnknown;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
};

// Reads dimensions from the container header only. Unrecognized magic, a
// header cut short, or zero dimensions all give kUnknown.
ImageInfo decode_dimensions(std::span<const std::uint8_t> bytes);

}  // namespace tracklens
