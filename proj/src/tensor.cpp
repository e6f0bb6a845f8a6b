#include "cdgan/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "cdgan/errors.hpp"

namespace cdgan {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

static void check_shape(const Shape& shape) {
  for (int d : shape) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
  }
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  check_shape(shape);
  Tensor t;
  t.s_ = std::make_shared<Storage>();
  t.s_->value = std::make_shared<std::vector<float>>(static_cast<size_t>(shape_numel(shape)), 0.0f);
  t.s_->shape = std::move(shape);
  t.s_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::full(Shape shape, float value) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.s_->value->begin(), t.s_->value->end(), value);
  return t;
}

Tensor Tensor::scalar(float value) { return full({1}, value); }

Tensor Tensor::from_data(Shape shape, std::vector<float> values) {
  check_shape(shape);
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
    throw ShapeError("from_data: " + shape_str(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  Tensor t;
  t.s_ = std::make_shared<Storage>();
  t.s_->shape = std::move(shape);
  t.s_->value = std::make_shared<std::vector<float>>(std::move(values));
  return t;
}

Tensor Tensor::randn(Shape shape, Rng& rng, float stddev) {
  Tensor t = zeros(std::move(shape));
  std::normal_distribution<float> dist(0.0f, stddev);
  for (float& v : *t.s_->value) v = dist(rng);
  return t;
}

float* Tensor::grad() {
  if (s_->grad.empty()) s_->grad.assign(s_->value->size(), 0.0f);
  return s_->grad.data();
}

void Tensor::zero_grad() {
  if (!s_->grad.empty()) std::fill(s_->grad.begin(), s_->grad.end(), 0.0f);
}

Tensor Tensor::detach() const {
  Tensor t;
  t.s_ = std::make_shared<Storage>();
  t.s_->shape = s_->shape;
  t.s_->value = s_->value;  // shared, not copied
  t.s_->requires_grad = false;
  return t;
}

Tensor Tensor::clone() const {
  Tensor t;
  t.s_ = std::make_shared<Storage>();
  t.s_->shape = s_->shape;
  t.s_->value = std::make_shared<std::vector<float>>(*s_->value);
  t.s_->requires_grad = s_->requires_grad;
  return t;
}

float Tensor::item() const {
  if (!is_scalar()) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
  return (*s_->value)[0];
}

bool Tensor::all_finite() const {
  for (float v : *s_->value)
    if (!std::isfinite(v)) return false;
  return true;
}

std::uint64_t checksum(const Tensor& t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
  const size_t n = static_cast<size_t>(t.numel()) * sizeof(float);
  for (size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace cdgan
