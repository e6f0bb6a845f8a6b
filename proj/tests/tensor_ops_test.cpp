#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cdgan/autodiff.hpp"
#include "cdgan/errors.hpp"
#include "cdgan/gradcheck.hpp"
#include "cdgan/ops.hpp"
#include "cdgan/tensor.hpp"

using namespace cdgan;

namespace {

// Direct quadruple-loop convolution. Deliberately written against the math
// definition, not the library kernels, so it can serve as an oracle.
Tensor conv2d_oracle(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Cout = w.dim(0), K = w.dim(2);
  const int Ho = (H + 2 * pad - K) / stride + 1;
  const int Wo = (W + 2 * pad - K) / stride + 1;
  Tensor y = Tensor::zeros({N, Cout, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Cout; ++co)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          double acc = b.at(co);
          for (int ci = 0; ci < Cin; ++ci)
            for (int ki = 0; ki < K; ++ki)
              for (int kj = 0; kj < K; ++kj) {
                const int iy = oy * stride + ki - pad;
                const int ix = ox * stride + kj - pad;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += x.at(((static_cast<long>(n) * Cin + ci) * H + iy) * W + ix) *
                       w.at(((static_cast<long>(co) * Cin + ci) * K + ki) * K + kj);
              }
          y.at(((static_cast<long>(n) * Cout + co) * Ho + oy) * Wo + ox) = static_cast<float>(acc);
        }
  return y;
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  float m = 0.0f;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.at(i) - b.at(i)));
  return m;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) s += static_cast<double>(a.at(i)) * b.at(i);
  return s;
}

// d/dx <conv2d(x, w, b), cotangent>, computed through the tape.
Tensor conv_input_grad(const Tensor& x0, const Tensor& w, const Tensor& b,
                       const Conv2dOpts& opts, const Tensor& cotangent) {
  Tensor x = x0.clone();
  x.set_requires_grad(true);
  Tape tape;
  Tensor y = conv2d(x, w, b, opts);
  Tensor loss = sum(mul(y, cotangent));
  tape.backward(loss);
  Tensor g = Tensor::zeros(x.shape());
  for (std::int64_t i = 0; i < g.numel(); ++i) g.at(i) = x.grad()[i];
  return g;
}

}  // namespace

TEST_CASE("conv2d scaling kernel") {
  Tensor x = Tensor::full({1, 1, 3, 3}, 1.0f);
  Tensor w = Tensor::from_data({1, 1, 1, 1}, {2.0f});
  Tensor b = Tensor::zeros({1});
  Tensor y = conv2d(x, w, b);
  CHECK(y.shape() == Shape{1, 1, 3, 3});
  for (std::int64_t i = 0; i < y.numel(); ++i) CHECK(y.at(i) == doctest::Approx(2.0f));
}

TEST_CASE("conv2d direct sum") {
  Tensor x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor w = Tensor::full({1, 1, 2, 2}, 1.0f);
  Tensor b = Tensor::zeros({1});
  Tensor y = conv2d(x, w, b);
  CHECK(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y.item() == doctest::Approx(10.0f));
}

TEST_CASE("conv2d matches the naive-loop oracle") {
  Rng rng = make_rng(7);
  for (int caseno = 0; caseno < 25; ++caseno) {
    std::uniform_int_distribution<int> pick_k(1, 4);
    const int K = pick_k(rng);
    std::uniform_int_distribution<int> pick_hw(K, 16);
    std::uniform_int_distribution<int> pick_c(1, 6);
    std::uniform_int_distribution<int> pick_sp(1, 2);
    const int H = pick_hw(rng), W = pick_hw(rng);
    const int Cin = pick_c(rng), Cout = pick_c(rng);
    const int stride = pick_sp(rng), pad = pick_sp(rng) - 1;
    Tensor x = Tensor::randn({2, Cin, H, W}, rng);
    Tensor w = Tensor::randn({Cout, Cin, K, K}, rng, 0.3f);
    Tensor b = Tensor::randn({Cout}, rng, 0.1f);
    Tensor got = conv2d(x, w, b, {stride, pad, PadMode::kZero});
    Tensor want = conv2d_oracle(x, w, b, stride, pad);
    CHECK(max_abs_diff(got, want) < 1e-5f);
  }
}

TEST_CASE("conv2d shape law over random valid tuples") {
  Rng rng = make_rng(11);
  for (int caseno = 0; caseno < 50; ++caseno) {
    std::uniform_int_distribution<int> pick_k(1, 7);
    const int K = pick_k(rng);
    std::uniform_int_distribution<int> pick_pad(0, 3);
    const int pad = pick_pad(rng);
    std::uniform_int_distribution<int> pick_hw(std::max(1, K - 2 * pad), 20);
    const int H = pick_hw(rng), W = pick_hw(rng);
    std::uniform_int_distribution<int> pick_s(1, 3);
    const int stride = pick_s(rng);
    Tensor x = Tensor::randn({1, 2, H, W}, rng);
    Tensor w = Tensor::randn({3, 2, K, K}, rng);
    Tensor b = Tensor::zeros({3});
    Tensor y = conv2d(x, w, b, {stride, pad, PadMode::kZero});
    CHECK(y.dim(2) == (H + 2 * pad - K) / stride + 1);
    CHECK(y.dim(3) == (W + 2 * pad - K) / stride + 1);
  }
}

TEST_CASE("conv2d rejects channel mismatch") {
  Tensor x = Tensor::zeros({1, 3, 8, 8});
  Tensor w = Tensor::zeros({4, 2, 3, 3});
  Tensor b = Tensor::zeros({4});
  CHECK_THROWS_AS(conv2d(x, w, b), ShapeError);
}

TEST_CASE("conv2d reflect padding matches manual mirror") {
  // 1x1x3x3 input, 3x3 sum kernel, reflect pad 1: top-left output sums the
  // mirrored window around (0,0).
  Tensor x = Tensor::from_data({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor w = Tensor::full({1, 1, 3, 3}, 1.0f);
  Tensor b = Tensor::zeros({1});
  Tensor y = conv2d(x, w, b, {1, 1, PadMode::kReflect});
  // mirrored window at (0,0): rows [1,0,1] x cols [1,0,1] of x:
  // 5 4 5 / 2 1 2 / 5 4 5 -> 33
  CHECK(y.at(0) == doctest::Approx(33.0f));
  // center window is the plain sum 45
  CHECK(y.at(4) == doctest::Approx(45.0f));
}

TEST_CASE("conv2d_transpose kernel stamping") {
  Tensor x = Tensor::from_data({1, 1, 1, 1}, {1.0f});
  Tensor w = Tensor::full({1, 1, 2, 2}, 1.0f);
  Tensor b = Tensor::zeros({1});
  Tensor y = conv2d_transpose(x, w, b, {2, 0, 0});
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  for (std::int64_t i = 0; i < 4; ++i) CHECK(y.at(i) == doctest::Approx(1.0f));
}

TEST_CASE("conv2d_transpose doubles spatial size with K=3 stride=2 pad=1 outpad=1") {
  Rng rng = make_rng(3);
  Tensor x = Tensor::randn({1, 4, 5, 9}, rng);
  Tensor w = Tensor::randn({4, 2, 3, 3}, rng);
  Tensor b = Tensor::zeros({2});
  Tensor y = conv2d_transpose(x, w, b, {2, 1, 1});
  CHECK(y.dim(2) == 10);
  CHECK(y.dim(3) == 18);
}

TEST_CASE("conv2d_transpose equals the conv2d input gradient with flipped roles") {
  Rng rng = make_rng(41);
  for (int caseno = 0; caseno < 8; ++caseno) {
    std::uniform_int_distribution<int> pick_k(2, 4);
    const int K = pick_k(rng);
    std::uniform_int_distribution<int> pick_s(1, 2);
    const int stride = pick_s(rng);
    const int pad = (caseno % 2 == 0) ? 0 : 1;
    const int Cx = 3, Cy = 2, Hy = 5, Wy = 6;  // conv input side
    Tensor xin = Tensor::randn({2, Cx, Hy, Wy}, rng);
    Tensor w = Tensor::randn({Cy, Cx, K, K}, rng);  // conv weight [Cout, Cin, K, K]
    Tensor zero_b_conv = Tensor::zeros({Cy});
    Conv2dOpts copts{stride, pad, PadMode::kZero};
    if (K > Hy + 2 * pad || K > Wy + 2 * pad) continue;
    Tensor y = conv2d(xin, w, zero_b_conv, copts);
    Tensor cot = Tensor::randn(y.shape(), rng);

    // transpose conv forward on the cotangent, weight seen as [Cin_t=Cy, Cout_t=Cx, K, K]
    const int outpad_h = xin.dim(2) - ((y.dim(2) - 1) * stride - 2 * pad + K);
    if (outpad_h < 0 || outpad_h >= stride) continue;
    Tensor zero_b_t = Tensor::zeros({Cx});
    Tensor via_transpose = conv2d_transpose(cot, w, zero_b_t, {stride, pad, outpad_h});
    if (via_transpose.shape() != xin.shape()) continue;  // ambiguous case, outpad differs per axis
    Tensor via_grad = conv_input_grad(xin, w, zero_b_conv, copts, cot);
    CHECK(max_abs_diff(via_transpose, via_grad) < 1e-5f);
  }
}

TEST_CASE("adjointness: <conv(x), y> equals <x, conv_input_grad(y)>") {
  Rng rng = make_rng(5);
  for (int caseno = 0; caseno < 10; ++caseno) {
    Tensor x = Tensor::randn({1, 3, 9, 9}, rng);
    Tensor w = Tensor::randn({4, 3, 3, 3}, rng);
    Tensor b = Tensor::zeros({4});
    Conv2dOpts opts{caseno % 2 + 1, caseno % 3 == 0 ? 0 : 1, PadMode::kZero};
    Tensor y = conv2d(x, w, b, opts);
    Tensor cot = Tensor::randn(y.shape(), rng);
    const double lhs = dot(y, cot);
    Tensor xg = conv_input_grad(x, w, b, opts, cot);
    const double rhs = dot(x, xg);
    CHECK(std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)}) < 1e-4);
  }
}

TEST_CASE("instance_norm constant slice is zero") {
  Tensor x = Tensor::full({1, 2, 4, 4}, 3.25f);
  Tensor gamma = Tensor::full({2}, 1.0f);
  Tensor beta = Tensor::zeros({2});
  Tensor y = instance_norm(x, gamma, beta);
  for (std::int64_t i = 0; i < y.numel(); ++i) CHECK(std::abs(y.at(i)) < 1e-4f);
}

TEST_CASE("instance_norm normalizes mean and variance per slice") {
  Rng rng = make_rng(9);
  Tensor x = Tensor::randn({2, 3, 8, 8}, rng, 2.0f);
  Tensor gamma = Tensor::full({3}, 1.0f);
  Tensor beta = Tensor::zeros({3});
  Tensor y = instance_norm(x, gamma, beta);
  const int hw = 64;
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c) {
      double s = 0, s2 = 0;
      for (int i = 0; i < hw; ++i) {
        const float v = y.at((static_cast<long>(n) * 3 + c) * hw + i);
        s += v;
        s2 += static_cast<double>(v) * v;
      }
      const double mu = s / hw;
      const double var = s2 / hw - mu * mu;
      CHECK(std::abs(mu) < 1e-5);
      CHECK(std::abs(var - 1.0) < 1e-3);
    }
}

TEST_CASE("instance_norm gradient matches finite differences") {
  Rng rng = make_rng(13);
  Tensor x = Tensor::randn({1, 2, 4, 4}, rng);
  Tensor gamma = Tensor::randn({2}, rng, 0.2f);
  Tensor beta = Tensor::randn({2}, rng, 0.2f);
  gamma.at(0) += 1.0f;
  gamma.at(1) += 1.0f;
  auto closure = [](const std::vector<Tensor>& in) {
    return mean(instance_norm(in[0], in[1], in[2]));
  };
  auto report = grad_check(closure, {x, gamma, beta}, 1e-2f);
  CHECK_MESSAGE(report.passed, report.worst);
}

TEST_CASE("activation basics") {
  Tensor x = Tensor::from_data({3}, {-1.0f, 0.0f, 2.0f});
  Tensor r = relu(x);
  CHECK(r.at(0) == 0.0f);
  CHECK(r.at(1) == 0.0f);
  CHECK(r.at(2) == 2.0f);
  CHECK(sigmoid(Tensor::scalar(0.0f)).item() == doctest::Approx(0.5f));
  Tensor l = leaky_relu(Tensor::from_data({2}, {-2.0f, 3.0f}));
  CHECK(l.at(0) == doctest::Approx(-0.4f));
  CHECK(l.at(1) == doctest::Approx(3.0f));
}

TEST_CASE("tanh gradient matches finite differences") {
  Rng rng = make_rng(17);
  Tensor x = Tensor::randn({16}, rng);
  auto closure = [](const std::vector<Tensor>& in) { return mean(tanh(in[0])); };
  auto report = grad_check(closure, {x}, 1e-2f);
  CHECK_MESSAGE(report.passed, report.worst);
}

TEST_CASE("dropout eval and p=0 are the identity") {
  Rng rng = make_rng(19);
  Tensor x = Tensor::randn({100}, rng);
  Tensor e = dropout(x, 0.5f, false, rng);
  CHECK(e.data() == x.data());
  Tensor z = dropout(x, 0.0f, true, rng);
  CHECK(z.data() == x.data());
}

TEST_CASE("dropout statistics at p=0.5") {
  Rng rng = make_rng(23);
  Tensor x = Tensor::full({10000}, 1.0f);
  Tensor y = dropout(x, 0.5f, true, rng);
  double s = 0;
  int zeros = 0;
  for (std::int64_t i = 0; i < y.numel(); ++i) {
    s += y.at(i);
    if (y.at(i) == 0.0f) ++zeros;
  }
  CHECK(std::abs(s / 10000.0 - 1.0) < 0.05);
  CHECK(std::abs(zeros / 10000.0 - 0.5) < 0.03);
}

TEST_CASE("concat_channels stacks and splits") {
  Rng rng = make_rng(29);
  Tensor a = Tensor::randn({1, 3, 8, 8}, rng);
  Tensor b = Tensor::randn({1, 3, 8, 8}, rng);
  Tensor y = concat_channels({a, b});
  CHECK(y.shape() == Shape{1, 6, 8, 8});
  Tensor back = slice_channels(y, 0, 3);
  CHECK(max_abs_diff(back, a) == 0.0f);

  Tensor m = Tensor::randn({1, 1, 8, 8}, rng);
  Tensor triple = concat_channels({a, b, m});
  CHECK(triple.dim(1) == 7);

  Tensor bad = Tensor::randn({1, 3, 4, 4}, rng);
  CHECK_THROWS_AS(concat_channels({a, bad}), ShapeError);
}

TEST_CASE("bce_with_logits analytic anchors") {
  Tensor zeros9 = Tensor::zeros({9});
  Tensor ones = Tensor::full({9}, 1.0f);
  Tensor zeros_t = Tensor::zeros({9});
  const float ln2 = std::log(2.0f);
  const float l_ones = bce_with_logits(zeros9, ones).item();
  const float l_zeros = bce_with_logits(zeros9, zeros_t).item();
  CHECK(l_ones == doctest::Approx(ln2).epsilon(1e-5));
  CHECK(l_zeros == doctest::Approx(ln2).epsilon(1e-5));
  CHECK(l_ones + l_zeros == doctest::Approx(2 * ln2).epsilon(1e-5));
  // extreme logits stay finite
  Tensor big = Tensor::from_data({2}, {80.0f, -80.0f});
  Tensor t = Tensor::from_data({2}, {1.0f, 0.0f});
  CHECK(bce_with_logits(big, t).item() == doctest::Approx(0.0f).epsilon(1e-6));
}

TEST_CASE("bce_with_logits gradient matches finite differences") {
  Rng rng = make_rng(31);
  Tensor l = Tensor::randn({24}, rng, 2.0f);
  Tensor t = Tensor::zeros({24});
  for (std::int64_t i = 0; i < t.numel(); ++i) t.at(i) = (i % 2 == 0) ? 1.0f : 0.0f;
  auto closure = [t](const std::vector<Tensor>& in) { return bce_with_logits(in[0], t); };
  auto report = grad_check(closure, {l}, 1e-2f);
  CHECK_MESSAGE(report.passed, report.worst);
}

TEST_CASE("l1_loss values and subgradient") {
  Rng rng = make_rng(37);
  Tensor x = Tensor::randn({8}, rng);
  CHECK(l1_loss(x, x).item() == 0.0f);
  Tensor a = Tensor::from_data({2}, {1.0f, 2.0f});
  Tensor b = Tensor::from_data({2}, {0.0f, 4.0f});
  CHECK(l1_loss(a, b).item() == doctest::Approx(1.5f));

  Tensor av = a.clone();
  av.set_requires_grad(true);
  Tape tape;
  Tensor loss = l1_loss(av, b);
  tape.backward(loss);
  CHECK(av.grad()[0] == doctest::Approx(0.5f));   // sign(+1)/2
  CHECK(av.grad()[1] == doctest::Approx(-0.5f));  // sign(-2)/2
}

TEST_CASE("backward on sum gives ones") {
  Tensor x = Tensor::from_data({4}, {1, 2, 3, 4});
  x.set_requires_grad(true);
  Tape tape;
  Tensor loss = sum(x);
  tape.backward(loss);
  for (int i = 0; i < 4; ++i) CHECK(x.grad()[i] == doctest::Approx(1.0f));
}

TEST_CASE("backward on mean(x^2)/2 gives x/n") {
  Tensor x = Tensor::from_data({2}, {2.0f, -4.0f});
  x.set_requires_grad(true);
  Tape tape;
  Tensor loss = scale(mean(mul(x, x)), 0.5f);
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(1.0f));
  CHECK(x.grad()[1] == doctest::Approx(-2.0f));
}

TEST_CASE("backward requires a scalar") {
  Tensor x = Tensor::zeros({3}, true);
  Tape tape;
  Tensor y = relu(x);
  CHECK_THROWS_AS(tape.backward(y), ShapeError);
}

TEST_CASE("repeated backward accumulates grads across tapes") {
  Tensor x = Tensor::from_data({2}, {1.0f, 1.0f});
  x.set_requires_grad(true);
  for (int pass = 0; pass < 2; ++pass) {
    Tape tape;
    Tensor loss = sum(x);
    tape.backward(loss);
  }
  CHECK(x.grad()[0] == doctest::Approx(2.0f));
}

TEST_CASE("grad_check exact on a linear closure") {
  Rng rng = make_rng(43);
  Tensor w = Tensor::randn({16}, rng);
  Tensor x = Tensor::randn({16}, rng);
  auto closure = [](const std::vector<Tensor>& in) { return sum(mul(in[0], in[1])); };
  auto report = grad_check(closure, {w, x}, 1e-4f);
  CHECK_MESSAGE(report.passed, report.worst);
}

TEST_CASE("grad_check on a conv->norm->leaky_relu->mean chain") {
  Rng rng = make_rng(47);
  Tensor x = Tensor::randn({1, 2, 6, 6}, rng);
  Tensor w = Tensor::randn({3, 2, 3, 3}, rng, 0.3f);
  Tensor b = Tensor::randn({3}, rng, 0.1f);
  Tensor gamma = Tensor::full({3}, 1.0f);
  Tensor beta = Tensor::zeros({3});
  auto closure = [gamma, beta](const std::vector<Tensor>& in) {
    Tensor y = conv2d(in[0], in[1], in[2], {1, 1, PadMode::kZero});
    return mean(leaky_relu(instance_norm(y, gamma, beta)));
  };
  auto report = grad_check(closure, {x, w, b}, 1e-2f);
  CHECK_MESSAGE(report.passed, report.worst);
}

TEST_CASE("grad_check flags a corrupted gradient") {
  // a scale op whose recorded backward is off by 2x
  auto bad_scale = [](const Tensor& x, float c) {
    Tensor y = Tensor::zeros(x.shape());
    for (std::int64_t i = 0; i < x.numel(); ++i) y.at(i) = c * x.at(i);
    y.set_requires_grad(x.requires_grad());
    record_op(y, [x, y, c]() {
      Tensor xm = x;
      for (std::int64_t i = 0; i < x.numel(); ++i) xm.grad()[i] += 2.0f * c * y.grad()[i];
    });
    return y;
  };
  Rng rng = make_rng(53);
  Tensor x = Tensor::randn({8}, rng);
  auto closure = [bad_scale](const std::vector<Tensor>& in) { return sum(bad_scale(in[0], 3.0f)); };
  auto report = grad_check(closure, {x}, 1e-2f);
  CHECK_FALSE(report.passed);
  CHECK(report.max_rel_error > 1e-2f);
}

TEST_CASE("forward+backward is bitwise reproducible") {
  auto run = []() {
    Rng rng = make_rng(59);
    Tensor x = Tensor::randn({2, 3, 12, 12}, rng);
    Tensor w = Tensor::randn({4, 3, 3, 3}, rng);
    Tensor b = Tensor::randn({4}, rng);
    x.set_requires_grad(true);
    w.set_requires_grad(true);
    b.set_requires_grad(true);
    Tape tape;
    Tensor y = conv2d(x, w, b, {2, 1, PadMode::kZero});
    Tensor loss = mean(mul(y, y));
    tape.backward(loss);
    Tensor gx = Tensor::zeros(x.shape());
    for (std::int64_t i = 0; i < gx.numel(); ++i) gx.at(i) = x.grad()[i];
    return std::make_pair(checksum(y), checksum(gx));
  };
  auto a = run();
  auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}
