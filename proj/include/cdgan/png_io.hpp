#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace cdgan {

// 8-bit raster, row-major, interleaved channels (1 = grayscale, 3 = RGB).
struct Image {
  int h = 0;
  int w = 0;
  int channels = 1;
  std::vector<std::uint8_t> px;

  static Image filled(int h, int w, int channels, std::uint8_t value) {
    return Image{h, w, channels,
                 std::vector<std::uint8_t>(static_cast<size_t>(h) * w * channels, value)};
  }

  std::uint8_t at(int y, int x, int c = 0) const {
    return px[(static_cast<size_t>(y) * w + x) * channels + c];
  }
  void set(int y, int x, int c, std::uint8_t v) {
    px[(static_cast<size_t>(y) * w + x) * channels + c] = v;
  }

  bool operator==(const Image& o) const {
    return h == o.h && w == o.w && channels == o.channels && px == o.px;
  }
};

// Decodes any 8/16-bit gray/palette/RGB(A) PNG to grayscale or RGB.
// Throws DataError on missing or undecodable files.
Image read_png(const std::filesystem::path& path);

// Writes grayscale or RGB depending on img.channels. Throws DataError.
void write_png(const std::filesystem::path& path, const Image& img);

}  // namespace cdgan
