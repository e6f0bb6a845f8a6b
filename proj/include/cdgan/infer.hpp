#pragma once

#include "cdgan/nets.hpp"
#include "cdgan/png_io.hpp"

namespace cdgan {

struct TileConfig {
  int tile_size = 256;
  int overlap = 32;

  void validate() const;  // throws ConfigError
};

// Raw change map in [-1, 1], shape 1 x 1 x H x W, for a registered pair of
// equal-size images. Frames beyond one tile are processed as overlapping
// tiles; raw (pre-binarization) values are averaged where tiles overlap and
// the result is binarized once by the caller. force_whole runs a single
// full-frame pass instead. Frames whose sides are not divisible by 4 are
// reflect-padded for inference and cropped back.
Tensor infer_change_map(const GeneratorParams& gen, const Image& a, const Image& b,
                        const TileConfig& tiles = {}, bool force_whole = false);

Mask infer_mask(const GeneratorParams& gen, const Image& a, const Image& b,
                const TileConfig& tiles = {}, bool force_whole = false, float threshold = 0.0f);

}  // namespace cdgan
