#include "cdgan/infer.hpp"

#include <algorithm>
#include <cmath>

#include "cdgan/data.hpp"
#include "cdgan/errors.hpp"

namespace cdgan {

void TileConfig::validate() const {
  if (tile_size < 8 || tile_size % 4 != 0)
    throw ConfigError("tile_size must be a multiple of 4 and at least 8");
  if (overlap < 0 || overlap >= tile_size) throw ConfigError("overlap must be in [0, tile_size)");
}

namespace {

Image to_rgb(const Image& img) {
  if (img.channels == 3) return img;
  Image out = Image::filled(img.h, img.w, 3, 0);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c) out.set(y, x, c, img.at(y, x, 0));
  return out;
}

inline int reflect_index(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

// C x H x W -> C x H4 x W4 with reflected borders.
Tensor pad_chw(const Tensor& t, int h4, int w4) {
  const int C = t.dim(0), H = t.dim(1), W = t.dim(2);
  if (h4 == H && w4 == W) return t;
  Tensor out = Tensor::zeros({C, h4, w4});
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < h4; ++y) {
      const int sy = reflect_index(y, H);
      for (int x = 0; x < w4; ++x)
        out.at((static_cast<long>(c) * h4 + y) * w4 + x) =
            t.at((static_cast<long>(c) * H + sy) * W + reflect_index(x, W));
    }
  return out;
}

std::vector<int> tile_origins(int extent, int tile, int step) {
  std::vector<int> origins;
  for (int o = 0;; o += step) {
    o = std::min(o, extent - tile);
    origins.push_back(o);
    if (o >= extent - tile) break;
  }
  return origins;
}

}  // namespace

Tensor infer_change_map(const GeneratorParams& gen, const Image& a, const Image& b,
                        const TileConfig& tiles, bool force_whole) {
  tiles.validate();
  if (a.h != b.h || a.w != b.w)
    throw ShapeError("image pair size mismatch: " + std::to_string(a.w) + "x" + std::to_string(a.h) +
                     " vs " + std::to_string(b.w) + "x" + std::to_string(b.h));
  const int H = a.h, W = a.w;
  const int h4 = (H + 3) / 4 * 4, w4 = (W + 3) / 4 * 4;

  Tensor an = pad_chw(normalize(to_rgb(a)), h4, w4);
  Tensor bn = pad_chw(normalize(to_rgb(b)), h4, w4);

  const bool whole = force_whole || (h4 <= tiles.tile_size && w4 <= tiles.tile_size);
  const int th = whole ? h4 : std::min(tiles.tile_size, h4);
  const int tw = whole ? w4 : std::min(tiles.tile_size, w4);
  const int step_y = std::max(1, th - tiles.overlap);
  const int step_x = std::max(1, tw - tiles.overlap);

  std::vector<float> acc(static_cast<size_t>(h4) * w4, 0.0f);
  std::vector<std::int32_t> hits(static_cast<size_t>(h4) * w4, 0);

  Tensor ta = Tensor::zeros({1, 3, th, tw});
  Tensor tb = Tensor::zeros({1, 3, th, tw});
  for (int y0 : tile_origins(h4, th, step_y))
    for (int x0 : tile_origins(w4, tw, step_x)) {
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < th; ++y)
          for (int x = 0; x < tw; ++x) {
            const long src = (static_cast<long>(c) * h4 + y0 + y) * w4 + x0 + x;
            const long dst = (static_cast<long>(c) * th + y) * tw + x;
            ta.at(dst) = an.at(src);
            tb.at(dst) = bn.at(src);
          }
      Tensor map = generator_forward(gen, ta, tb, false, nullptr);
      for (int y = 0; y < th; ++y)
        for (int x = 0; x < tw; ++x) {
          const size_t i = static_cast<size_t>(y0 + y) * w4 + (x0 + x);
          acc[i] += map.at(static_cast<long>(y) * tw + x);
          ++hits[i];
        }
    }

  Tensor out = Tensor::zeros({1, 1, H, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const size_t i = static_cast<size_t>(y) * w4 + x;
      out.at(static_cast<long>(y) * W + x) = acc[i] / static_cast<float>(hits[i]);
    }
  return out;
}

Mask infer_mask(const GeneratorParams& gen, const Image& a, const Image& b, const TileConfig& tiles,
                bool force_whole, float threshold) {
  return binarize(infer_change_map(gen, a, b, tiles, force_whole), threshold);
}

}  // namespace cdgan
