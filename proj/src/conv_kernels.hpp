#pragma once

#include <cstring>

namespace cdgan::detail {

// Geometry of one two-dimensional convolution over an already padded input
// slice (C x Hp x Wp). Output positions are indexed p = oy*Wo + ox.
struct ConvGeom {
  int C = 0;   // input channels
  int Hp = 0;  // padded input height
  int Wp = 0;  // padded input width
  int K = 0;   // square kernel size
  int stride = 1;
  int Ho = 0;  // output height
  int Wo = 0;  // output width

  int rows() const { return C * K * K; }
  int positions() const { return Ho * Wo; }
};

// Gathers output positions [p0, p1) into a column-major (C*K*K) x (p1-p0)
// block: column (p - p0), row (c*K + ki)*K + kj.
inline void im2col(const float* xpad, const ConvGeom& g, int p0, int p1, float* col) {
  const int rows = g.rows();
  for (int p = p0; p < p1; ++p) {
    const int oy = p / g.Wo;
    const int ox = p % g.Wo;
    float* dst = col + static_cast<long>(p - p0) * rows;
    const float* src_base = xpad + static_cast<long>(oy) * g.stride * g.Wp + ox * g.stride;
    for (int c = 0; c < g.C; ++c) {
      const float* src_c = src_base + static_cast<long>(c) * g.Hp * g.Wp;
      for (int ki = 0; ki < g.K; ++ki) {
        std::memcpy(dst, src_c + static_cast<long>(ki) * g.Wp, sizeof(float) * static_cast<size_t>(g.K));
        dst += g.K;
      }
    }
  }
}

// Adjoint of im2col: scatter-accumulates the block back into xpad_acc.
// Serial over positions, so the accumulation order is fixed.
inline void col2im_acc(const float* col, const ConvGeom& g, int p0, int p1, float* xpad_acc) {
  const int rows = g.rows();
  for (int p = p0; p < p1; ++p) {
    const int oy = p / g.Wo;
    const int ox = p % g.Wo;
    const float* src = col + static_cast<long>(p - p0) * rows;
    float* dst_base = xpad_acc + static_cast<long>(oy) * g.stride * g.Wp + ox * g.stride;
    for (int c = 0; c < g.C; ++c) {
      float* dst_c = dst_base + static_cast<long>(c) * g.Hp * g.Wp;
      for (int ki = 0; ki < g.K; ++ki) {
        float* dst = dst_c + static_cast<long>(ki) * g.Wp;
        for (int kj = 0; kj < g.K; ++kj) dst[kj] += src[kj];
        src += g.K;
      }
    }
  }
}

}  // namespace cdgan::detail
