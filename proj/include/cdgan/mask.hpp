#pragma once

#include <cstdint>
#include <vector>

namespace cdgan {

// Boolean H x W raster, row-major, one byte per pixel (0 or 1).
struct Mask {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> v;

  static Mask zeros(int h, int w) { return Mask{h, w, std::vector<std::uint8_t>(static_cast<size_t>(h) * w, 0)}; }

  bool at(int y, int x) const { return v[static_cast<size_t>(y) * w + x] != 0; }
  void set(int y, int x, bool b) { v[static_cast<size_t>(y) * w + x] = b ? 1 : 0; }

  std::int64_t count() const {
    std::int64_t n = 0;
    for (std::uint8_t p : v) n += p != 0;
    return n;
  }

  bool operator==(const Mask& o) const { return h == o.h && w == o.w && v == o.v; }
};

}  // namespace cdgan
