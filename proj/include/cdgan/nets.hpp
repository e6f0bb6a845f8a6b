#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cdgan/mask.hpp"
#include "cdgan/ops.hpp"
#include "cdgan/tensor.hpp"

namespace cdgan {

// Insertion-ordered named tensor collection. Iteration order is the build
// order, which fixes checkpoint layout and optimizer-state pairing.
class ParamMap {
 public:
  Tensor& add(const std::string& name, Tensor t);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  size_t size() const { return items_.size(); }
  std::int64_t parameter_count() const;

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  void set_requires_grad(bool v);
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::unordered_map<std::string, size_t> index_;
};

std::uint64_t checksum(const ParamMap& params);

// Image-translation generator: 7x7 stem (reflect pad), two stride-2
// downsamplers, nine 256-channel residual blocks, two stride-2 upsamplers,
// 7x7 head (reflect pad) with tanh output. First convolution takes the
// 6-channel concatenated image pair; output is a single change-map channel.
struct GeneratorParams {
  ParamMap params;
};

// 70x70 patch discriminator: 4x4 convolutions 64/128/256 at stride 2 and
// 512/1 at stride 1, instance norm on the middle three, leaky relu 0.2.
// First convolution takes 7 channels (pair + change map).
struct DiscriminatorParams {
  ParamMap params;
};

inline constexpr int kGeneratorInChannels = 6;
inline constexpr int kDiscriminatorInChannels = 7;
inline constexpr int kResidualBlocks = 9;

// All convolution weights ~ Normal(0, 0.02); norm gains 1, biases/offsets 0.
GeneratorParams build_generator(std::uint64_t seed);
DiscriminatorParams build_discriminator(std::uint64_t seed);

// One residual block (conv-norm-relu-dropout-conv-norm plus skip) under the
// given name prefix, e.g. "res4". Exposed for the block-level identity tests.
Tensor residual_block_forward(const ParamMap& params, const std::string& prefix, const Tensor& x,
                              bool training, Rng* rng);

// a, b: N x 3 x H x W in [-1, 1] with H, W divisible by 4.
// Returns the change map, N x 1 x H x W in [-1, 1]. Training mode applies
// dropout inside the residual blocks and requires an rng; eval mode is
// deterministic.
Tensor generator_forward(const GeneratorParams& g, const Tensor& a, const Tensor& b, bool training,
                         Rng* rng);

// map spatial size must equal the pair's. Returns patch logits N x 1 x h x w;
// sigmoid of a logit is the real-vs-fake probability for one 70x70 patch.
Tensor discriminator_forward(const DiscriminatorParams& d, const Tensor& a, const Tensor& b,
                             const Tensor& map);

// Receptive field of one output logit, by the recurrence r = (r-1)*stride + k
// over the declared layer stack.
int discriminator_receptive_field();

// pixel true iff map value > threshold; map must be 1 x 1 x H x W.
Mask binarize(const Tensor& map, float threshold = 0.0f);

}  // namespace cdgan
