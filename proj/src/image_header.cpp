#include "image_header.hpp"

#include <cstring>
#include <cstdlib>

namespace tracklens {

namespace {

using Bytes = std::span<const std::uint8_t>;

std::uint32_t le16(Bytes b, std::size_t i) { return b[i] | (b[i + 1] << 8); }
std::uint32_t be16(Bytes b, std::size_t i) { return (b[i] << 8) | b[i + 1]; }
std::uint32_t le24(Bytes b, std::size_t i) { return b[i] | (b[i + 1] << 8) | (b[i + 2] << 16); }
std::uint32_t le32(Bytes b, std::size_t i) {
  return static_cast<std::uint32_t>(b[i]) | (static_cast<std::uint32_t>(b[i + 1]) << 8) |
         (static_cast<std::uint32_t>(b[i + 2]) << 16) | (static_cast<std::uint32_t>(b[i + 3]) << 24);
}
std::uint32_t be32(Bytes b, std::size_t i) {
  return (static_cast<std::uint32_t>(b[i]) << 24) | (static_cast<std::uint32_t>(b[i + 1]) << 16) |
         (static_cast<std::uint32_t>(b[i + 2]) << 8) | static_cast<std::uint32_t>(b[i + 3]);
}

bool has_prefix(Bytes b, std::size_t at, const char* magic) {
  const std::size_t n = std::strlen(magic);
  return b.size() >= at + n && std::memcmp(b.data() + at, magic, n) == 0;
}

ImageInfo known(ImageFormat f, std::uint32_t w, std::uint32_t h) {
  if (w == 0 || h == 0) return {};
  return {f, w, h};
}

ImageInfo gif(Bytes b) {
  if (b.size() < 10) return {};
  return known(ImageFormat::kGif, le16(b, 6), le16(b, 8));
}

ImageInfo png(Bytes b) {
  if (b.size() < 24 || !has_prefix(b, 12, "IHDR")) return {};
  return known(ImageFormat::kPng, be32(b, 16), be32(b, 20));
}

ImageInfo jpeg(Bytes b) {
  std::size_t i = 2;
  while (i + 4 <= b.size()) {
    if (b[i] != 0xFF) return {};
    const std::uint8_t marker = b[i + 1];
    if (marker == 0xFF) {  // fill byte
      ++i;
      continue;
    }
    if (marker == 0xD8 || marker == 0x01 || (marker >= 0xD0 && marker <= 0xD7)) {
      i += 2;
      continue;
    }
    if (marker == 0xD9 || marker == 0xDA) return {};  // no frame header before scan data
    const std::uint32_t len = be16(b, i + 2);
    if (len < 2) return {};
    const bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 && marker != 0xCC;
    if (sof) {
      if (len < 7 || i + 9 > b.size()) return {};
      return known(ImageFormat::kJpeg, be16(b, i + 7), be16(b, i + 5));
    }
    i += 2 + len;
  }
  return {};
}

ImageInfo webp(Bytes b) {
  if (b.size() < 16 || !has_prefix(b, 8, "WEBP")) return {};
  if (has_prefix(b, 12, "VP8 ")) {
    // Key frame: 3-byte frame tag, start code, then 14-bit sizes.
    if (b.size() < 30 || b[23] != 0x9D || b[24] != 0x01 || b[25] != 0x2A) return {};
    return known(ImageFormat::kWebp, le16(b, 26) & 0x3FFF, le16(b, 28) & 0x3FFF);
  }
  if (has_prefix(b, 12, "VP8L")) {
    if (b.size() < 25 || b[20] != 0x2F) return {};
    const std::uint32_t bits = le32(b, 21);
    return known(ImageFormat::kWebp, (bits & 0x3FFF) + 1, ((bits >> 14) & 0x3FFF) + 1);
  }
  if (has_prefix(b, 12, "VP8X")) {
    if (b.size() < 30) return {};
    return known(ImageFormat::kWebp, le24(b, 24) + 1, le24(b, 27) + 1);
  }
  return {};
}

ImageInfo bmp(Bytes b) {
  if (b.size() < 18) return {};
  const std::uint32_t header = le32(b, 14);
  if (header == 12) {
    if (b.size() < 22) return {};
    return known(ImageFormat::kBmp, le16(b, 18), le16(b, 20));
  }
  if (header < 40 || b.size() < 26) return {};
  const auto w = static_cast<std::int32_t>(le32(b, 18));
  const auto h = static_cast<std::int32_t>(le32(b, 22));  // negative: top-down rows
  if (w <= 0 || h == 0 || h == INT32_MIN) return {};
  return known(ImageFormat::kBmp, static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(std::abs(h)));
}

}  // namespace

std::string_view to_string(ImageFormat f) {
  switch (f) {
    case ImageFormat::kGif: return "GIF";
    case ImageFormat::kPng: return "PNG";
    case ImageFormat::kJpeg: return "JPEG";
    case ImageFormat::kWebp: return "WEBP";
    case ImageFormat::kBmp: return "BMP";
    case ImageFormat::kUnknown: return "Unknown";
  }
  return "Unknown";
}

ImageInfo decode_dimensions(std::span<const std::uint8_t> bytes) {
  if (has_prefix(bytes, 0, "GIF87a") || has_prefix(bytes, 0, "GIF89a")) return gif(bytes);
  if (has_prefix(bytes, 0, "\x89PNG\r\n\x1a\n")) return png(bytes);
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return jpeg(bytes);
  if (has_prefix(bytes, 0, "RIFF")) return webp(bytes);
  if (has_prefix(bytes, 0, "BM")) return bmp(bytes);
  return {};
}

}  // namespace tracklens
