#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cdgan/autodiff.hpp"
#include "cdgan/errors.hpp"
#include "cdgan/nets.hpp"

using namespace cdgan;

namespace {

// Independent layer-by-layer parameter tallies, written from the declared
// architectures before looking at the builders.
struct ConvEntry {
  int cout, cin, k;
  bool norm;
};

std::int64_t tally(const std::vector<ConvEntry>& entries) {
  std::int64_t n = 0;
  for (const auto& e : entries) {
    n += static_cast<std::int64_t>(e.cout) * e.cin * e.k * e.k;  // weight
    n += e.cout;                                                 // bias
    if (e.norm) n += 2LL * e.cout;                               // gamma, beta
  }
  return n;
}

std::int64_t generator_tally() {
  std::vector<ConvEntry> e = {
      {64, 6, 7, true},    // stem
      {128, 64, 3, true},  // down1
      {256, 128, 3, true}, // down2
  };
  for (int i = 0; i < 9; ++i) {
    e.push_back({256, 256, 3, true});  // res conv1 + norm1
    e.push_back({256, 256, 3, true});  // res conv2 + norm2
  }
  e.push_back({128, 256, 3, true});  // up1 (transpose: cin*cout*k*k symmetric)
  e.push_back({64, 128, 3, true});   // up2
  e.push_back({1, 64, 7, false});    // head
  return tally(e);
}

std::int64_t discriminator_tally() {
  return tally({
      {64, 7, 4, false},
      {128, 64, 4, true},
      {256, 128, 4, true},
      {512, 256, 4, true},
      {1, 512, 4, false},
  });
}

Tensor random_image(int n, int c, int h, int w, Rng& rng) {
  Tensor t = Tensor::randn({n, c, h, w}, rng, 0.5f);
  for (std::int64_t i = 0; i < t.numel(); ++i) t.at(i) = std::tanh(t.at(i));
  return t;
}

}  // namespace

TEST_CASE("builders are reproducible from the seed") {
  GeneratorParams g1 = build_generator(123);
  GeneratorParams g2 = build_generator(123);
  GeneratorParams g3 = build_generator(124);
  CHECK(checksum(g1.params) == checksum(g2.params));
  CHECK(checksum(g1.params) != checksum(g3.params));

  DiscriminatorParams d1 = build_discriminator(9);
  DiscriminatorParams d2 = build_discriminator(9);
  DiscriminatorParams d3 = build_discriminator(10);
  CHECK(checksum(d1.params) == checksum(d2.params));
  CHECK(checksum(d1.params) != checksum(d3.params));
}

TEST_CASE("parameter counts match the layer-arithmetic tally") {
  GeneratorParams g = build_generator(1);
  DiscriminatorParams d = build_discriminator(1);
  CHECK(g.params.parameter_count() == generator_tally());
  CHECK(d.params.parameter_count() == discriminator_tally());
  // frozen constants, to catch accidental drift in either side
  CHECK(generator_tally() == 11391809);
  CHECK(discriminator_tally() == 2770625);
}

TEST_CASE("input-channel contracts") {
  GeneratorParams g = build_generator(2);
  CHECK(g.params.at("stem.w").shape() == Shape{64, 6, 7, 7});
  DiscriminatorParams d = build_discriminator(2);
  CHECK(d.params.at("d1.w").shape() == Shape{64, 7, 4, 4});
}

TEST_CASE("discriminator receptive field is 70") {
  CHECK(discriminator_receptive_field() == 70);
}

TEST_CASE("generator output shape equals input shape for sizes divisible by 4") {
  GeneratorParams g = build_generator(3);
  Rng rng = make_rng(30);
  for (int size : {64, 76, 96}) {
    Tensor a = random_image(1, 3, size, size, rng);
    Tensor b = random_image(1, 3, size, size, rng);
    Tensor y = generator_forward(g, a, b, false, nullptr);
    CHECK(y.shape() == Shape{1, 1, size, size});
    for (std::int64_t i = 0; i < y.numel(); ++i) {
      CHECK(y.at(i) <= 1.0f);
      CHECK(y.at(i) >= -1.0f);
    }
  }
  // non-square
  Tensor a = random_image(1, 3, 64, 96, rng);
  Tensor b = random_image(1, 3, 64, 96, rng);
  CHECK(generator_forward(g, a, b, false, nullptr).shape() == Shape{1, 1, 64, 96});
}

TEST_CASE("generator rejects sizes not divisible by 4") {
  GeneratorParams g = build_generator(4);
  Rng rng = make_rng(31);
  Tensor a = random_image(1, 3, 66, 66, rng);
  Tensor b = random_image(1, 3, 66, 66, rng);
  CHECK_THROWS_AS(generator_forward(g, a, b, false, nullptr), ShapeError);
}

TEST_CASE("eval-mode generator is deterministic") {
  GeneratorParams g = build_generator(5);
  Rng rng = make_rng(32);
  Tensor a = random_image(1, 3, 64, 64, rng);
  Tensor b = random_image(1, 3, 64, 64, rng);
  Tensor y1 = generator_forward(g, a, b, false, nullptr);
  Tensor y2 = generator_forward(g, a, b, false, nullptr);
  CHECK(checksum(y1) == checksum(y2));
}

TEST_CASE("residual block with zeroed convolutions is the identity") {
  GeneratorParams g = build_generator(6);
  for (const char* name : {"res3.conv1.w", "res3.conv1.b", "res3.conv2.w", "res3.conv2.b"}) {
    Tensor& t = g.params.at(name);
    for (std::int64_t i = 0; i < t.numel(); ++i) t.at(i) = 0.0f;
  }
  Rng rng = make_rng(33);
  Tensor x = Tensor::randn({1, 256, 6, 6}, rng);
  Tensor y = residual_block_forward(g.params, "res3", x, false, nullptr);
  for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y.at(i) == x.at(i));
}

TEST_CASE("discriminator logits are 30x30 for 256x256 input") {
  DiscriminatorParams d = build_discriminator(7);
  Rng rng = make_rng(34);
  Tensor a = random_image(1, 3, 256, 256, rng);
  Tensor b = random_image(1, 3, 256, 256, rng);
  Tensor map = random_image(1, 1, 256, 256, rng);
  Tensor logits = discriminator_forward(d, a, b, map);
  CHECK(logits.shape() == Shape{1, 1, 30, 30});
  Tensor prob = sigmoid(logits);
  for (std::int64_t i = 0; i < prob.numel(); ++i) {
    CHECK(prob.at(i) > 0.0f);
    CHECK(prob.at(i) < 1.0f);
  }
}

TEST_CASE("discriminator rejects a mismatched map") {
  DiscriminatorParams d = build_discriminator(8);
  Rng rng = make_rng(35);
  Tensor a = random_image(1, 3, 64, 64, rng);
  Tensor b = random_image(1, 3, 64, 64, rng);
  Tensor map = random_image(1, 1, 32, 32, rng);
  CHECK_THROWS_AS(discriminator_forward(d, a, b, map), ShapeError);
}

TEST_CASE("batch order permutes logits without mixing") {
  DiscriminatorParams d = build_discriminator(11);
  Rng rng = make_rng(36);
  Tensor a0 = random_image(1, 3, 64, 64, rng), a1 = random_image(1, 3, 64, 64, rng);
  Tensor b0 = random_image(1, 3, 64, 64, rng), b1 = random_image(1, 3, 64, 64, rng);
  Tensor m0 = random_image(1, 1, 64, 64, rng), m1 = random_image(1, 1, 64, 64, rng);

  auto stack = [](const Tensor& x, const Tensor& y) {
    Tensor out = Tensor::zeros({2, x.dim(1), x.dim(2), x.dim(3)});
    std::copy(x.data(), x.data() + x.numel(), out.data());
    std::copy(y.data(), y.data() + y.numel(), out.data() + x.numel());
    return out;
  };
  Tensor fwd = discriminator_forward(d, stack(a0, a1), stack(b0, b1), stack(m0, m1));
  Tensor rev = discriminator_forward(d, stack(a1, a0), stack(b1, b0), stack(m1, m0));
  const std::int64_t half = fwd.numel() / 2;
  for (std::int64_t i = 0; i < half; ++i) {
    CHECK(fwd.at(i) == rev.at(half + i));
    CHECK(fwd.at(half + i) == rev.at(i));
  }
}

TEST_CASE("a loss through both networks reaches every generator parameter") {
  GeneratorParams g = build_generator(12);
  DiscriminatorParams d = build_discriminator(12);
  g.params.set_requires_grad(true);
  Rng rng = make_rng(37);
  Tensor a = random_image(1, 3, 32, 32, rng);
  Tensor b = random_image(1, 3, 32, 32, rng);

  Rng drop = make_rng(38);
  Tape tape;
  Tensor map = generator_forward(g, a, b, true, &drop);
  Tensor logits = discriminator_forward(d, a, b, map);
  Tensor loss = add(bce_with_logits(logits, Tensor::full(logits.shape(), 1.0f)),
                    l1_loss(map, Tensor::zeros(map.shape())));
  tape.backward(loss);

  for (auto& [name, t] : g.params) {
    REQUIRE_MESSAGE(t.has_grad(), name);
    double norm = 0.0;
    for (std::int64_t i = 0; i < t.numel(); ++i) {
      REQUIRE(std::isfinite(t.grad()[i]));
      norm += std::abs(t.grad()[i]);
    }
    CHECK_MESSAGE(norm > 0.0, name);
  }
}

TEST_CASE("binarize thresholds") {
  Tensor low = Tensor::full({1, 1, 4, 4}, -1.0f);
  CHECK(binarize(low).count() == 0);
  Tensor high = Tensor::full({1, 1, 4, 4}, 1.0f);
  CHECK(binarize(high).count() == 16);
  CHECK(binarize(low, -1.1f).count() == 16);
  Tensor mixed = Tensor::from_data({1, 1, 1, 4}, {-0.5f, 0.0f, 0.25f, 0.5f});
  Mask m = binarize(mixed);
  CHECK(m.count() == 2);  // strictly greater than 0
}
