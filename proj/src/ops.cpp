#include "cdgan/ops.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstring>

#include "cdgan/errors.hpp"
#include "conv_kernels.hpp"

namespace cdgan {

namespace {

using RowMajorMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMajorMat>;
using CMapRM = Eigen::Map<const RowMajorMat>;
using StridedMapRM = Eigen::Map<RowMajorMat, Eigen::Unaligned, Eigen::OuterStride<>>;
using CStridedMapRM = Eigen::Map<const RowMajorMat, Eigen::Unaligned, Eigen::OuterStride<>>;

// Column slab cap for im2col buffers, in floats (~32 MB).
constexpr long kMaxColFloats = 8L * 1024 * 1024;

int slab_columns(int rows, int positions) {
  long s = kMaxColFloats / std::max(rows, 1);
  s = std::max(s, 64L);
  return static_cast<int>(std::min<long>(s, positions));
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

void require_rank4(const Tensor& t, const char* name) {
  require(t.rank() == 4, std::string(name) + " must be rank 4, got " + shape_str(t.shape()));
}

// Reflection without edge repeat: valid for pad <= n-1.
inline int reflect_index(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

// Copies one C x H x W slice into a C x (H+2p) x (W+2p) buffer.
void pad_slice(const float* x, int C, int H, int W, int pad, PadMode mode, float* out) {
  const int Hp = H + 2 * pad, Wp = W + 2 * pad;
  if (mode == PadMode::kZero) {
    std::memset(out, 0, sizeof(float) * static_cast<size_t>(C) * Hp * Wp);
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < H; ++i)
        std::memcpy(out + (static_cast<long>(c) * Hp + i + pad) * Wp + pad,
                    x + (static_cast<long>(c) * H + i) * W, sizeof(float) * static_cast<size_t>(W));
  } else {
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < Hp; ++i) {
        const float* src = x + (static_cast<long>(c) * H + reflect_index(i - pad, H)) * W;
        float* dst = out + (static_cast<long>(c) * Hp + i) * Wp;
        for (int j = 0; j < Wp; ++j) dst[j] = src[reflect_index(j - pad, W)];
      }
  }
}

// Adjoint of pad_slice: folds a padded-slice gradient back onto dx.
void unpad_acc_slice(const float* dpad, int C, int H, int W, int pad, PadMode mode, float* dx) {
  const int Hp = H + 2 * pad, Wp = W + 2 * pad;
  if (mode == PadMode::kZero) {
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < H; ++i) {
        const float* src = dpad + (static_cast<long>(c) * Hp + i + pad) * Wp + pad;
        float* dst = dx + (static_cast<long>(c) * H + i) * W;
        for (int j = 0; j < W; ++j) dst[j] += src[j];
      }
  } else {
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < Hp; ++i) {
        const float* src = dpad + (static_cast<long>(c) * Hp + i) * Wp;
        float* dst = dx + static_cast<long>(c) * H * W + static_cast<long>(reflect_index(i - pad, H)) * W;
        for (int j = 0; j < Wp; ++j) dst[reflect_index(j - pad, W)] += src[j];
      }
  }
}

struct ConvDims {
  int N, Cin, H, W, Cout, K, Ho, Wo;
};

ConvDims conv2d_dims(const Tensor& x, const Tensor& w, const Tensor& b, const Conv2dOpts& o) {
  require_rank4(x, "conv2d input");
  require_rank4(w, "conv2d weight");
  require(b.rank() == 1, "conv2d bias must be rank 1, got " + shape_str(b.shape()));
  require(o.stride >= 1, "conv2d stride must be >= 1");
  require(o.pad >= 0, "conv2d pad must be >= 0");
  require(w.dim(2) == w.dim(3), "conv2d kernel must be square, got " + shape_str(w.shape()));
  ConvDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), 0, 0};
  require(w.dim(1) == d.Cin, "conv2d channel mismatch: input has " + std::to_string(d.Cin) +
                                 " channels, weight expects " + std::to_string(w.dim(1)));
  require(b.dim(0) == d.Cout, "conv2d bias size " + std::to_string(b.dim(0)) +
                                  " != output channels " + std::to_string(d.Cout));
  require(d.K <= d.H + 2 * o.pad && d.K <= d.W + 2 * o.pad,
          "conv2d kernel " + std::to_string(d.K) + " exceeds padded input " +
              std::to_string(d.H + 2 * o.pad) + "x" + std::to_string(d.W + 2 * o.pad));
  if (o.pad_mode == PadMode::kReflect)
    require(o.pad <= d.H - 1 && o.pad <= d.W - 1, "reflect pad must be < spatial size");
  d.Ho = (d.H + 2 * o.pad - d.K) / o.stride + 1;
  d.Wo = (d.W + 2 * o.pad - d.K) / o.stride + 1;
  return d;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& b, const Tensor& y,
                     const Conv2dOpts& o, const ConvDims& d) {
  if (!y.has_grad()) return;
  const detail::ConvGeom g{d.Cin, d.H + 2 * o.pad, d.W + 2 * o.pad, d.K, o.stride, d.Ho, d.Wo};
  const int P = g.positions(), rows = g.rows();
  const int slab = slab_columns(rows, P);
  Eigen::MatrixXf col(rows, slab), dcol;
  std::vector<float> xpad, dxpad;
  const bool need_dx = x.requires_grad();
  const bool need_dw = w.requires_grad();
  const bool need_db = b.requires_grad();
  if (o.pad > 0) xpad.resize(static_cast<size_t>(d.Cin) * g.Hp * g.Wp);
  if (need_dx && o.pad > 0) dxpad.resize(xpad.size());
  if (need_dx) dcol.resize(rows, slab);

  Tensor xm = x, wm = w, bm = b;
  CMapRM Wr(w.data(), d.Cout, rows);
  for (int n = 0; n < d.N; ++n) {
    const float* xs = x.data() + static_cast<long>(n) * d.Cin * d.H * d.W;
    const float* xp = xs;
    if (o.pad > 0) {
      if (need_dw) pad_slice(xs, d.Cin, d.H, d.W, o.pad, o.pad_mode, xpad.data());
      xp = xpad.data();
    }
    if (need_dx && o.pad > 0) std::fill(dxpad.begin(), dxpad.end(), 0.0f);
    float* dxp = nullptr;
    if (need_dx)
      dxp = (o.pad > 0) ? dxpad.data() : xm.grad() + static_cast<long>(n) * d.Cin * d.H * d.W;

    const float* dys = y.grad() + static_cast<long>(n) * d.Cout * P;
    for (int p0 = 0; p0 < P; p0 += slab) {
      const int pn = std::min(P - p0, slab);
      CStridedMapRM dYblk(dys + p0, d.Cout, pn, Eigen::OuterStride<>(P));
      if (need_dw) {
        detail::im2col(xp, g, p0, p0 + pn, col.data());
        MapRM dWr(wm.grad(), d.Cout, rows);
        dWr.noalias() += dYblk * col.leftCols(pn).transpose();
      }
      if (need_dx) {
        dcol.leftCols(pn).noalias() = Wr.transpose() * dYblk;
        detail::col2im_acc(dcol.data(), g, p0, p0 + pn, dxp);
      }
    }
    if (need_dx && o.pad > 0)
      unpad_acc_slice(dxpad.data(), d.Cin, d.H, d.W, o.pad, o.pad_mode,
                      xm.grad() + static_cast<long>(n) * d.Cin * d.H * d.W);
    if (need_db) {
      float* db = bm.grad();
      for (int c = 0; c < d.Cout; ++c) {
        double s = 0.0;
        const float* row = dys + static_cast<long>(c) * P;
        for (int p = 0; p < P; ++p) s += row[p];
        db[c] += static_cast<float>(s);
      }
    }
  }
}

struct ConvTDims {
  int N, Cin, H, W, Cout, K, Ho, Wo;
};

ConvTDims convt_dims(const Tensor& x, const Tensor& w, const Tensor& b,
                     const ConvTranspose2dOpts& o) {
  require_rank4(x, "conv2d_transpose input");
  require_rank4(w, "conv2d_transpose weight");
  require(b.rank() == 1, "conv2d_transpose bias must be rank 1");
  require(o.stride >= 1, "conv2d_transpose stride must be >= 1");
  require(o.pad >= 0, "conv2d_transpose pad must be >= 0");
  require(o.output_padding >= 0 && o.output_padding < o.stride,
          "conv2d_transpose output_padding must be in [0, stride)");
  require(w.dim(2) == w.dim(3), "conv2d_transpose kernel must be square");
  ConvTDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(1), w.dim(2), 0, 0};
  require(w.dim(0) == d.Cin, "conv2d_transpose channel mismatch: input has " +
                                 std::to_string(d.Cin) + " channels, weight expects " +
                                 std::to_string(w.dim(0)));
  require(b.dim(0) == d.Cout, "conv2d_transpose bias size mismatch");
  d.Ho = (d.H - 1) * o.stride - 2 * o.pad + d.K + o.output_padding;
  d.Wo = (d.W - 1) * o.stride - 2 * o.pad + d.K + o.output_padding;
  require(d.Ho > 0 && d.Wo > 0, "conv2d_transpose output size must be positive");
  return d;
}

void convt_backward(const Tensor& x, const Tensor& w, const Tensor& b, const Tensor& y,
                    const ConvTranspose2dOpts& o, const ConvTDims& d) {
  if (!y.has_grad()) return;
  // Conv geometry with x's positions as "output": input side is the padded y.
  const detail::ConvGeom g{d.Cout, d.Ho + 2 * o.pad, d.Wo + 2 * o.pad, d.K, o.stride, d.H, d.W};
  const int P = g.positions(), rows = g.rows();
  const int slab = slab_columns(rows, P);
  Eigen::MatrixXf col(rows, slab);
  std::vector<float> dypad(static_cast<size_t>(d.Cout) * g.Hp * g.Wp);
  const bool need_dx = x.requires_grad();
  const bool need_dw = w.requires_grad();
  const bool need_db = b.requires_grad();

  Tensor xm = x, wm = w, bm = b;
  CMapRM Wr(w.data(), d.Cin, rows);
  for (int n = 0; n < d.N; ++n) {
    const float* dys = y.grad() + static_cast<long>(n) * d.Cout * d.Ho * d.Wo;
    pad_slice(dys, d.Cout, d.Ho, d.Wo, o.pad, PadMode::kZero, dypad.data());
    for (int p0 = 0; p0 < P; p0 += slab) {
      const int pn = std::min(P - p0, slab);
      detail::im2col(dypad.data(), g, p0, p0 + pn, col.data());
      if (need_dx) {
        StridedMapRM dXblk(xm.grad() + static_cast<long>(n) * d.Cin * P + p0, d.Cin, pn,
                           Eigen::OuterStride<>(P));
        dXblk.noalias() += Wr * col.leftCols(pn);
      }
      if (need_dw) {
        CStridedMapRM Xblk(x.data() + static_cast<long>(n) * d.Cin * P + p0, d.Cin, pn,
                           Eigen::OuterStride<>(P));
        MapRM dWr(wm.grad(), d.Cin, rows);
        dWr.noalias() += Xblk * col.leftCols(pn).transpose();
      }
    }
    if (need_db) {
      float* db = bm.grad();
      const long Py = static_cast<long>(d.Ho) * d.Wo;
      for (int c = 0; c < d.Cout; ++c) {
        double s = 0.0;
        const float* row = dys + c * Py;
        for (long p = 0; p < Py; ++p) s += row[p];
        db[c] += static_cast<float>(s);
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, const Conv2dOpts& o) {
  const ConvDims d = conv2d_dims(x, w, b, o);
  Tensor y = Tensor::zeros({d.N, d.Cout, d.Ho, d.Wo});

  const detail::ConvGeom g{d.Cin, d.H + 2 * o.pad, d.W + 2 * o.pad, d.K, o.stride, d.Ho, d.Wo};
  const int P = g.positions(), rows = g.rows();
  const int slab = slab_columns(rows, P);
  Eigen::MatrixXf col(rows, slab);
  std::vector<float> xpad;
  if (o.pad > 0) xpad.resize(static_cast<size_t>(d.Cin) * g.Hp * g.Wp);

  CMapRM Wr(w.data(), d.Cout, rows);
  for (int n = 0; n < d.N; ++n) {
    const float* xs = x.data() + static_cast<long>(n) * d.Cin * d.H * d.W;
    const float* xp = xs;
    if (o.pad > 0) {
      pad_slice(xs, d.Cin, d.H, d.W, o.pad, o.pad_mode, xpad.data());
      xp = xpad.data();
    }
    float* ys = y.data() + static_cast<long>(n) * d.Cout * P;
    for (int p0 = 0; p0 < P; p0 += slab) {
      const int pn = std::min(P - p0, slab);
      detail::im2col(xp, g, p0, p0 + pn, col.data());
      StridedMapRM Yblk(ys + p0, d.Cout, pn, Eigen::OuterStride<>(P));
      Yblk.noalias() = Wr * col.leftCols(pn);
    }
    for (int c = 0; c < d.Cout; ++c) {
      const float bc = b.data()[c];
      float* row = ys + static_cast<long>(c) * P;
      for (int p = 0; p < P; ++p) row[p] += bc;
    }
  }

  y.set_requires_grad(x.requires_grad() || w.requires_grad() || b.requires_grad());
  record_op(y, [x, w, b, y, o, d]() { conv2d_backward(x, w, b, y, o, d); });
  return y;
}

Tensor conv2d_transpose(const Tensor& x, const Tensor& w, const Tensor& b,
                        const ConvTranspose2dOpts& o) {
  const ConvTDims d = convt_dims(x, w, b, o);
  Tensor y = Tensor::zeros({d.N, d.Cout, d.Ho, d.Wo});

  const detail::ConvGeom g{d.Cout, d.Ho + 2 * o.pad, d.Wo + 2 * o.pad, d.K, o.stride, d.H, d.W};
  const int P = g.positions(), rows = g.rows();
  const int slab = slab_columns(rows, P);
  Eigen::MatrixXf col(rows, slab);
  std::vector<float> ypad(static_cast<size_t>(d.Cout) * g.Hp * g.Wp);

  CMapRM Wr(w.data(), d.Cin, rows);
  for (int n = 0; n < d.N; ++n) {
    std::fill(ypad.begin(), ypad.end(), 0.0f);
    for (int p0 = 0; p0 < P; p0 += slab) {
      const int pn = std::min(P - p0, slab);
      CStridedMapRM Xblk(x.data() + static_cast<long>(n) * d.Cin * P + p0, d.Cin, pn,
                         Eigen::OuterStride<>(P));
      col.leftCols(pn).noalias() = Wr.transpose() * Xblk;
      detail::col2im_acc(col.data(), g, p0, p0 + pn, ypad.data());
    }
    float* ys = y.data() + static_cast<long>(n) * d.Cout * d.Ho * d.Wo;
    for (int c = 0; c < d.Cout; ++c) {
      const float bc = b.data()[c];
      for (int i = 0; i < d.Ho; ++i) {
        const float* src = ypad.data() + (static_cast<long>(c) * g.Hp + i + o.pad) * g.Wp + o.pad;
        float* dst = ys + (static_cast<long>(c) * d.Ho + i) * d.Wo;
        for (int j = 0; j < d.Wo; ++j) dst[j] = src[j] + bc;
      }
    }
  }

  y.set_requires_grad(x.requires_grad() || w.requires_grad() || b.requires_grad());
  record_op(y, [x, w, b, y, o, d]() { convt_backward(x, w, b, y, o, d); });
  return y;
}

Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  require_rank4(x, "instance_norm input");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  require(H * W >= 2, "instance_norm needs at least 2 spatial elements");
  require(gamma.rank() == 1 && gamma.dim(0) == C, "instance_norm gamma must have C elements");
  require(beta.rank() == 1 && beta.dim(0) == C, "instance_norm beta must have C elements");

  Tensor y = Tensor::zeros({N, C, H, W});
  const long hw = static_cast<long>(H) * W;
  auto stats = std::make_shared<std::vector<float>>(static_cast<size_t>(N) * C * 2);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const float* xs = x.data() + (static_cast<long>(n) * C + c) * hw;
      double s = 0.0, s2 = 0.0;
      for (long i = 0; i < hw; ++i) s += xs[i];
      const float mu = static_cast<float>(s / static_cast<double>(hw));
      for (long i = 0; i < hw; ++i) {
        const double dv = xs[i] - mu;
        s2 += dv * dv;
      }
      const float var = static_cast<float>(s2 / static_cast<double>(hw));
      const float invstd = 1.0f / std::sqrt(var + eps);
      (*stats)[(static_cast<size_t>(n) * C + c) * 2] = mu;
      (*stats)[(static_cast<size_t>(n) * C + c) * 2 + 1] = invstd;
      const float gc = gamma.data()[c], bc = beta.data()[c];
      float* ys = y.data() + (static_cast<long>(n) * C + c) * hw;
      for (long i = 0; i < hw; ++i) ys[i] = gc * (xs[i] - mu) * invstd + bc;
    }

  y.set_requires_grad(x.requires_grad() || gamma.requires_grad() || beta.requires_grad());
  record_op(y, [x, gamma, beta, y, stats, N, C, hw]() {
    if (!y.has_grad()) return;
    Tensor xm = x, gm = gamma, bm = beta;
    const bool need_dx = x.requires_grad();
    const bool need_dg = gamma.requires_grad();
    const bool need_db = beta.requires_grad();
    for (int c = 0; c < C; ++c) {
      const float gc = gamma.data()[c];
      double dgc = 0.0, dbc = 0.0;
      for (int n = 0; n < N; ++n) {
        const size_t sc = (static_cast<size_t>(n) * C + c) * 2;
        const float mu = (*stats)[sc], invstd = (*stats)[sc + 1];
        const float* xs = x.data() + (static_cast<long>(n) * C + c) * hw;
        const float* dy = y.grad() + (static_cast<long>(n) * C + c) * hw;
        double s1 = 0.0, s2 = 0.0;
        for (long i = 0; i < hw; ++i) {
          const float xh = (xs[i] - mu) * invstd;
          s1 += dy[i];
          s2 += static_cast<double>(dy[i]) * xh;
        }
        dgc += s2;
        dbc += s1;
        if (need_dx) {
          float* dx = xm.grad() + (static_cast<long>(n) * C + c) * hw;
          const float m1 = static_cast<float>(s1 / static_cast<double>(hw));
          const float m2 = static_cast<float>(s2 / static_cast<double>(hw));
          const float k = gc * invstd;
          for (long i = 0; i < hw; ++i) {
            const float xh = (xs[i] - mu) * invstd;
            dx[i] += k * (dy[i] - m1 - xh * m2);
          }
        }
      }
      if (need_dg) gm.grad()[c] += static_cast<float>(dgc);
      if (need_db) bm.grad()[c] += static_cast<float>(dbc);
    }
  });
  return y;
}

Tensor activation(const Tensor& x, Activation kind, float negative_slope) {
  Tensor y = Tensor::zeros(x.shape());
  const std::int64_t n = x.numel();
  const float* xs = x.data();
  float* ys = y.data();
  switch (kind) {
    case Activation::kRelu:
      for (std::int64_t i = 0; i < n; ++i) ys[i] = xs[i] > 0.0f ? xs[i] : 0.0f;
      break;
    case Activation::kLeakyRelu:
      for (std::int64_t i = 0; i < n; ++i) ys[i] = xs[i] > 0.0f ? xs[i] : negative_slope * xs[i];
      break;
    case Activation::kTanh:
      for (std::int64_t i = 0; i < n; ++i) ys[i] = std::tanh(xs[i]);
      break;
    case Activation::kSigmoid:
      for (std::int64_t i = 0; i < n; ++i) ys[i] = 1.0f / (1.0f + std::exp(-xs[i]));
      break;
  }
  y.set_requires_grad(x.requires_grad());
  record_op(y, [x, y, kind, negative_slope, n]() {
    if (!y.has_grad() || !x.requires_grad()) return;
    Tensor xm = x;
    float* dx = xm.grad();
    const float* dy = y.grad();
    const float* xs = x.data();
    const float* ys = y.data();
    switch (kind) {
      case Activation::kRelu:
        for (std::int64_t i = 0; i < n; ++i) dx[i] += xs[i] > 0.0f ? dy[i] : 0.0f;
        break;
      case Activation::kLeakyRelu:
        for (std::int64_t i = 0; i < n; ++i) dx[i] += xs[i] > 0.0f ? dy[i] : negative_slope * dy[i];
        break;
      case Activation::kTanh:
        for (std::int64_t i = 0; i < n; ++i) dx[i] += dy[i] * (1.0f - ys[i] * ys[i]);
        break;
      case Activation::kSigmoid:
        for (std::int64_t i = 0; i < n; ++i) dx[i] += dy[i] * ys[i] * (1.0f - ys[i]);
        break;
    }
  });
  return y;
}

Tensor dropout(const Tensor& x, float p, bool training, Rng& rng) {
  require(p >= 0.0f && p < 1.0f, "dropout probability must be in [0, 1)");
  if (!training || p == 0.0f) return x;
  const std::int64_t n = x.numel();
  auto mask = std::make_shared<std::vector<float>>(static_cast<size_t>(n));
  const float keep_scale = 1.0f / (1.0f - p);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& m : *mask) m = (u(rng) < p) ? 0.0f : keep_scale;

  Tensor y = Tensor::zeros(x.shape());
  const float* xs = x.data();
  float* ys = y.data();
  for (std::int64_t i = 0; i < n; ++i) ys[i] = xs[i] * (*mask)[static_cast<size_t>(i)];

  y.set_requires_grad(x.requires_grad());
  record_op(y, [x, y, mask, n]() {
    if (!y.has_grad() || !x.requires_grad()) return;
    Tensor xm = x;
    float* dx = xm.grad();
    const float* dy = y.grad();
    for (std::int64_t i = 0; i < n; ++i) dx[i] += dy[i] * (*mask)[static_cast<size_t>(i)];
  });
  return y;
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
  require(!xs.empty(), "concat_channels needs at least one input");
  for (const Tensor& t : xs) require_rank4(t, "concat_channels input");
  const int N = xs[0].dim(0), H = xs[0].dim(2), W = xs[0].dim(3);
  int Ctot = 0;
  bool needs_grad = false;
  for (const Tensor& t : xs) {
    require(t.dim(0) == N && t.dim(2) == H && t.dim(3) == W,
            "concat_channels spatial/batch mismatch: " + shape_str(t.shape()) + " vs " +
                shape_str(xs[0].shape()));
    Ctot += t.dim(1);
    needs_grad = needs_grad || t.requires_grad();
  }
  Tensor y = Tensor::zeros({N, Ctot, H, W});
  const long hw = static_cast<long>(H) * W;
  for (int n = 0; n < N; ++n) {
    long coff = 0;
    for (const Tensor& t : xs) {
      const long block = static_cast<long>(t.dim(1)) * hw;
      std::memcpy(y.data() + (static_cast<long>(n) * Ctot) * hw + coff,
                  t.data() + static_cast<long>(n) * block, sizeof(float) * static_cast<size_t>(block));
      coff += block;
    }
  }
  y.set_requires_grad(needs_grad);
  record_op(y, [xs, y, N, Ctot, hw]() {
    if (!y.has_grad()) return;
    for (int n = 0; n < N; ++n) {
      long coff = 0;
      for (const Tensor& t : xs) {
        const long block = static_cast<long>(t.dim(1)) * hw;
        if (t.requires_grad()) {
          Tensor tm = t;
          float* dst = tm.grad() + static_cast<long>(n) * block;
          const float* src = y.grad() + (static_cast<long>(n) * Ctot) * hw + coff;
          for (long i = 0; i < block; ++i) dst[i] += src[i];
        }
        coff += block;
      }
    }
  });
  return y;
}

Tensor slice_channels(const Tensor& x, int c0, int c1) {
  require_rank4(x, "slice_channels input");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  require(0 <= c0 && c0 < c1 && c1 <= C, "slice_channels range out of bounds");
  Tensor y = Tensor::zeros({N, c1 - c0, H, W});
  const long hw = static_cast<long>(H) * W;
  const long block = static_cast<long>(c1 - c0) * hw;
  for (int n = 0; n < N; ++n)
    std::memcpy(y.data() + static_cast<long>(n) * block,
                x.data() + (static_cast<long>(n) * C + c0) * hw,
                sizeof(float) * static_cast<size_t>(block));
  y.set_requires_grad(x.requires_grad());
  record_op(y, [x, y, N, C, c0, hw, block]() {
    if (!y.has_grad() || !x.requires_grad()) return;
    Tensor xm = x;
    for (int n = 0; n < N; ++n) {
      float* dst = xm.grad() + (static_cast<long>(n) * C + c0) * hw;
      const float* src = y.grad() + static_cast<long>(n) * block;
      for (long i = 0; i < block; ++i) dst[i] += src[i];
    }
  });
  return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(),
          "add shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor y = Tensor::zeros(a.shape());
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) y.data()[i] = a.data()[i] + b.data()[i];
  y.set_requires_grad(a.requires_grad() || b.requires_grad());
  record_op(y, [a, b, y, n]() {
    if (!y.has_grad()) return;
    const float* dy = y.grad();
    if (a.requires_grad()) {
      Tensor am = a;
      float* da = am.grad();
      for (std::int64_t i = 0; i < n; ++i) da[i] += dy[i];
    }
    if (b.requires_grad()) {
      Tensor bm = b;
      float* db = bm.grad();
      for (std::int64_t i = 0; i < n; ++i) db[i] += dy[i];
    }
  });
  return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(),
          "mul shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor y = Tensor::zeros(a.shape());
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) y.data()[i] = a.data()[i] * b.data()[i];
  y.set_requires_grad(a.requires_grad() || b.requires_grad());
  record_op(y, [a, b, y, n]() {
    if (!y.has_grad()) return;
    const float* dy = y.grad();
    if (a.requires_grad()) {
      Tensor am = a;
      float* da = am.grad();
      for (std::int64_t i = 0; i < n; ++i) da[i] += dy[i] * b.data()[i];
    }
    if (b.requires_grad()) {
      Tensor bm = b;
      float* db = bm.grad();
      for (std::int64_t i = 0; i < n; ++i) db[i] += dy[i] * a.data()[i];
    }
  });
  return y;
}

Tensor scale(const Tensor& x, float factor) {
  Tensor y = Tensor::zeros(x.shape());
  const std::int64_t n = x.numel();
  for (std::int64_t i = 0; i < n; ++i) y.data()[i] = x.data()[i] * factor;
  y.set_requires_grad(x.requires_grad());
  record_op(y, [x, y, factor, n]() {
    if (!y.has_grad() || !x.requires_grad()) return;
    Tensor xm = x;
    float* dx = xm.grad();
    const float* dy = y.grad();
    for (std::int64_t i = 0; i < n; ++i) dx[i] += dy[i] * factor;
  });
  return y;
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  const std::int64_t n = x.numel();
  for (std::int64_t i = 0; i < n; ++i) s += x.data()[i];
  Tensor y = Tensor::scalar(static_cast<float>(s));
  y.set_requires_grad(x.requires_grad());
  record_op(y, [x, y, n]() {
    if (!y.has_grad() || !x.requires_grad()) return;
    Tensor xm = x;
    float* dx = xm.grad();
    const float dy = y.grad()[0];
    for (std::int64_t i = 0; i < n; ++i) dx[i] += dy;
  });
  return y;
}

Tensor mean(const Tensor& x) {
  const std::int64_t n = x.numel();
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i) s += x.data()[i];
  Tensor y = Tensor::scalar(static_cast<float>(s / static_cast<double>(n)));
  y.set_requires_grad(x.requires_grad());
  record_op(y, [x, y, n]() {
    if (!y.has_grad() || !x.requires_grad()) return;
    Tensor xm = x;
    float* dx = xm.grad();
    const float dy = y.grad()[0] / static_cast<float>(n);
    for (std::int64_t i = 0; i < n; ++i) dx[i] += dy;
  });
  return y;
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& target) {
  require(logits.shape() == target.shape(), "bce_with_logits shape mismatch: " +
                                                shape_str(logits.shape()) + " vs " +
                                                shape_str(target.shape()));
  const std::int64_t n = logits.numel();
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const float l = logits.data()[i], t = target.data()[i];
    s += std::max(l, 0.0f) - l * t + std::log1p(std::exp(-std::abs(l)));
  }
  Tensor y = Tensor::scalar(static_cast<float>(s / static_cast<double>(n)));
  y.set_requires_grad(logits.requires_grad());
  record_op(y, [logits, target, y, n]() {
    if (!y.has_grad() || !logits.requires_grad()) return;
    Tensor lm = logits;
    float* dl = lm.grad();
    const float dy = y.grad()[0] / static_cast<float>(n);
    for (std::int64_t i = 0; i < n; ++i) {
      const float sig = 1.0f / (1.0f + std::exp(-logits.data()[i]));
      dl[i] += dy * (sig - target.data()[i]);
    }
  });
  return y;
}

Tensor l1_loss(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(),
          "l1_loss shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::int64_t n = a.numel();
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i) s += std::abs(a.data()[i] - b.data()[i]);
  Tensor y = Tensor::scalar(static_cast<float>(s / static_cast<double>(n)));
  y.set_requires_grad(a.requires_grad() || b.requires_grad());
  record_op(y, [a, b, y, n]() {
    if (!y.has_grad()) return;
    const float dy = y.grad()[0] / static_cast<float>(n);
    Tensor am = a, bm = b;
    float* da = a.requires_grad() ? am.grad() : nullptr;
    float* db = b.requires_grad() ? bm.grad() : nullptr;
    for (std::int64_t i = 0; i < n; ++i) {
      const float d = a.data()[i] - b.data()[i];
      const float sgn = d > 0.0f ? 1.0f : (d < 0.0f ? -1.0f : 0.0f);
      if (da != nullptr) da[i] += dy * sgn;
      if (db != nullptr) db[i] -= dy * sgn;
    }
  });
  return y;
}

}  // namespace cdgan
