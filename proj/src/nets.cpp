#include "cdgan/nets.hpp"

#include "cdgan/errors.hpp"

namespace cdgan {

Tensor& ParamMap::add(const std::string& name, Tensor t) {
  if (contains(name)) throw ShapeError("duplicate parameter name: " + name);
  index_[name] = items_.size();
  items_.emplace_back(name, std::move(t));
  return items_.back().second;
}

Tensor& ParamMap::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ShapeError("unknown parameter: " + name);
  return items_[it->second].second;
}

const Tensor& ParamMap::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ShapeError("unknown parameter: " + name);
  return items_[it->second].second;
}

std::int64_t ParamMap::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : items_) n += t.numel();
  return n;
}

void ParamMap::set_requires_grad(bool v) {
  for (auto& [name, t] : items_) t.set_requires_grad(v);
}

void ParamMap::zero_grad() {
  for (auto& [name, t] : items_) t.zero_grad();
}

std::uint64_t checksum(const ParamMap& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, t] : params) {
    h ^= checksum(t);
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

constexpr float kInitStddev = 0.02f;

void add_conv(ParamMap& p, const std::string& name, int cout, int cin, int k, Rng& rng) {
  p.add(name + ".w", Tensor::randn({cout, cin, k, k}, rng, kInitStddev));
  p.add(name + ".b", Tensor::zeros({cout}));
}

// transpose-conv weight layout is [Cin, Cout, K, K]
void add_convt(ParamMap& p, const std::string& name, int cin, int cout, int k, Rng& rng) {
  p.add(name + ".w", Tensor::randn({cin, cout, k, k}, rng, kInitStddev));
  p.add(name + ".b", Tensor::zeros({cout}));
}

void add_norm(ParamMap& p, const std::string& name, int c) {
  p.add(name + ".gamma", Tensor::full({c}, 1.0f));
  p.add(name + ".beta", Tensor::zeros({c}));
}

Tensor conv_norm(const ParamMap& p, const std::string& name, const Tensor& x,
                 const Conv2dOpts& opts) {
  Tensor y = conv2d(x, p.at(name + ".w"), p.at(name + ".b"), opts);
  return instance_norm(y, p.at(name + ".gamma"), p.at(name + ".beta"));
}

struct DiscLayer {
  int out_ch;
  int kernel;
  int stride;
  bool norm;
};

constexpr DiscLayer kDiscLayers[] = {
    {64, 4, 2, false}, {128, 4, 2, true}, {256, 4, 2, true}, {512, 4, 1, true}, {1, 4, 1, false},
};
constexpr int kDiscLayerCount = static_cast<int>(std::size(kDiscLayers));

}  // namespace

GeneratorParams build_generator(std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x67656e);
  GeneratorParams g;
  ParamMap& p = g.params;
  add_conv(p, "stem", 64, kGeneratorInChannels, 7, rng);
  add_norm(p, "stem", 64);
  add_conv(p, "down1", 128, 64, 3, rng);
  add_norm(p, "down1", 128);
  add_conv(p, "down2", 256, 128, 3, rng);
  add_norm(p, "down2", 256);
  for (int i = 1; i <= kResidualBlocks; ++i) {
    const std::string base = "res" + std::to_string(i);
    add_conv(p, base + ".conv1", 256, 256, 3, rng);
    add_norm(p, base + ".norm1", 256);
    add_conv(p, base + ".conv2", 256, 256, 3, rng);
    add_norm(p, base + ".norm2", 256);
  }
  add_convt(p, "up1", 256, 128, 3, rng);
  add_norm(p, "up1", 128);
  add_convt(p, "up2", 128, 64, 3, rng);
  add_norm(p, "up2", 64);
  add_conv(p, "head", 1, 64, 7, rng);
  return g;
}

DiscriminatorParams build_discriminator(std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x646973);
  DiscriminatorParams d;
  ParamMap& p = d.params;
  int cin = kDiscriminatorInChannels;
  for (int i = 0; i < kDiscLayerCount; ++i) {
    const std::string base = "d" + std::to_string(i + 1);
    add_conv(p, base, kDiscLayers[i].out_ch, cin, kDiscLayers[i].kernel, rng);
    if (kDiscLayers[i].norm) add_norm(p, base, kDiscLayers[i].out_ch);
    cin = kDiscLayers[i].out_ch;
  }
  return d;
}

Tensor residual_block_forward(const ParamMap& params, const std::string& prefix, const Tensor& x,
                              bool training, Rng* rng) {
  const Conv2dOpts same{1, 1, PadMode::kZero};
  Tensor h = conv2d(x, params.at(prefix + ".conv1.w"), params.at(prefix + ".conv1.b"), same);
  h = instance_norm(h, params.at(prefix + ".norm1.gamma"), params.at(prefix + ".norm1.beta"));
  h = relu(h);
  if (training) h = dropout(h, 0.5f, true, *rng);
  h = conv2d(h, params.at(prefix + ".conv2.w"), params.at(prefix + ".conv2.b"), same);
  h = instance_norm(h, params.at(prefix + ".norm2.gamma"), params.at(prefix + ".norm2.beta"));
  return add(x, h);
}

Tensor generator_forward(const GeneratorParams& g, const Tensor& a, const Tensor& b, bool training,
                         Rng* rng) {
  if (a.rank() != 4 || b.rank() != 4 || a.shape() != b.shape())
    throw ShapeError("generator_forward: image pair must share shape N x 3 x H x W, got " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  if (a.dim(1) != 3)
    throw ShapeError("generator_forward: images must have 3 channels, got " + shape_str(a.shape()));
  const int H = a.dim(2), W = a.dim(3);
  if (H % 4 != 0 || W % 4 != 0)
    throw ShapeError("generator_forward: spatial size " + std::to_string(H) + "x" +
                     std::to_string(W) +
                     " must be divisible by 4 (two stride-2 stages); pad or tile the input");
  if (training && rng == nullptr)
    throw ShapeError("generator_forward: training mode needs an rng for dropout");

  const ParamMap& p = g.params;
  Tensor h = concat_channels({a, b});
  h = relu(conv_norm(p, "stem", h, {1, 3, PadMode::kReflect}));
  h = relu(conv_norm(p, "down1", h, {2, 1, PadMode::kZero}));
  h = relu(conv_norm(p, "down2", h, {2, 1, PadMode::kZero}));
  for (int i = 1; i <= kResidualBlocks; ++i)
    h = residual_block_forward(p, "res" + std::to_string(i), h, training, rng);
  const ConvTranspose2dOpts up{2, 1, 1};
  h = conv2d_transpose(h, p.at("up1.w"), p.at("up1.b"), up);
  h = relu(instance_norm(h, p.at("up1.gamma"), p.at("up1.beta")));
  h = conv2d_transpose(h, p.at("up2.w"), p.at("up2.b"), up);
  h = relu(instance_norm(h, p.at("up2.gamma"), p.at("up2.beta")));
  h = conv2d(h, p.at("head.w"), p.at("head.b"), {1, 3, PadMode::kReflect});
  return tanh(h);
}

Tensor discriminator_forward(const DiscriminatorParams& d, const Tensor& a, const Tensor& b,
                             const Tensor& map) {
  if (map.rank() != 4 || map.dim(1) != 1)
    throw ShapeError("discriminator_forward: change map must be N x 1 x H x W, got " +
                     shape_str(map.shape()));
  if (map.dim(2) != a.dim(2) || map.dim(3) != a.dim(3))
    throw ShapeError("discriminator_forward: map " + shape_str(map.shape()) +
                     " does not match pair " + shape_str(a.shape()));
  const ParamMap& p = d.params;
  Tensor h = concat_channels({a, b, map});
  for (int i = 0; i < kDiscLayerCount; ++i) {
    const std::string base = "d" + std::to_string(i + 1);
    const Conv2dOpts opts{kDiscLayers[i].stride, 1, PadMode::kZero};
    h = conv2d(h, p.at(base + ".w"), p.at(base + ".b"), opts);
    if (kDiscLayers[i].norm) h = instance_norm(h, p.at(base + ".gamma"), p.at(base + ".beta"));
    if (i + 1 < kDiscLayerCount) h = leaky_relu(h, 0.2f);
  }
  return h;
}

int discriminator_receptive_field() {
  int r = 1;
  for (int i = kDiscLayerCount - 1; i >= 0; --i)
    r = (r - 1) * kDiscLayers[i].stride + kDiscLayers[i].kernel;
  return r;
}

Mask binarize(const Tensor& map, float threshold) {
  if (map.rank() != 4 || map.dim(0) != 1 || map.dim(1) != 1)
    throw ShapeError("binarize expects a 1 x 1 x H x W map, got " + shape_str(map.shape()));
  const int H = map.dim(2), W = map.dim(3);
  Mask m = Mask::zeros(H, W);
  for (std::int64_t i = 0; i < map.numel(); ++i) m.v[static_cast<size_t>(i)] = map.at(i) > threshold ? 1 : 0;
  return m;
}

}  // namespace cdgan
