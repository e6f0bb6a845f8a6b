#pragma once

#include <vector>

#include "cdgan/autodiff.hpp"
#include "cdgan/tensor.hpp"

namespace cdgan {

// Forward operations for the two networks. Every function is differentiable
// through the active Tape (see autodiff.hpp); with no tape in scope they are
// plain forward evaluations. No operation mutates its inputs.

enum class PadMode { kZero, kReflect };

struct Conv2dOpts {
  int stride = 1;
  int pad = 0;
  PadMode pad_mode = PadMode::kZero;
};

struct ConvTranspose2dOpts {
  int stride = 1;
  int pad = 0;
  int output_padding = 0;
};

// x: N x Cin x H x W, w: Cout x Cin x K x K, b: Cout.
// Output spatial size: floor((in + 2*pad - K)/stride) + 1.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, const Conv2dOpts& opts = {});

// x: N x Cin x H x W, w: Cin x Cout x K x K (adjoint of conv2d with the
// channel roles swapped), b: Cout. Output: (in-1)*stride - 2*pad + K + output_padding.
Tensor conv2d_transpose(const Tensor& x, const Tensor& w, const Tensor& b,
                        const ConvTranspose2dOpts& opts = {});

// Per-(n, c) spatial normalization with affine terms. gamma, beta: C.
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);

enum class Activation { kRelu, kLeakyRelu, kTanh, kSigmoid };

Tensor activation(const Tensor& x, Activation kind, float negative_slope = 0.2f);
inline Tensor relu(const Tensor& x) { return activation(x, Activation::kRelu); }
inline Tensor leaky_relu(const Tensor& x, float slope = 0.2f) {
  return activation(x, Activation::kLeakyRelu, slope);
}
inline Tensor tanh(const Tensor& x) { return activation(x, Activation::kTanh); }
inline Tensor sigmoid(const Tensor& x) { return activation(x, Activation::kSigmoid); }

// Training mode: zeroes each element with probability p and scales survivors
// by 1/(1-p). Eval mode or p == 0: identity (same storage, no copy).
Tensor dropout(const Tensor& x, float p, bool training, Rng& rng);

// Stacks inputs along the channel axis; all must share N, H, W.
Tensor concat_channels(const std::vector<Tensor>& xs);

// Channels [c0, c1) of x.
Tensor slice_channels(const Tensor& x, int c0, int c1);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, float factor);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Mean over elements of max(l,0) - l*t + log(1+exp(-|l|)), the overflow-free
// form of -[t*log(sigmoid(l)) + (1-t)*log(1-sigmoid(l))]. Gradients flow to
// logits only; target is treated as constant.
Tensor bce_with_logits(const Tensor& logits, const Tensor& target);

// Mean absolute difference; subgradient at 0 is 0.
Tensor l1_loss(const Tensor& a, const Tensor& b);

}  // namespace cdgan
