#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "cdgan/rng.hpp"

namespace cdgan {

class Tape;

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense 32-bit float tensor, row-major, N×C×H×W layout for image data.
// Copying a Tensor is cheap: copies share the underlying buffers, so a
// Tensor behaves like a reference-counted handle. detach() yields a handle
// that shares values but never receives gradients.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value);
  static Tensor scalar(float value);
  static Tensor from_data(Shape shape, std::vector<float> values);
  // i.i.d. Normal(0, stddev) values.
  static Tensor randn(Shape shape, Rng& rng, float stddev = 1.0f);

  bool defined() const { return s_ != nullptr; }
  const Shape& shape() const { return s_->shape; }
  int dim(int i) const { return s_->shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(s_->shape.size()); }
  std::int64_t numel() const { return static_cast<std::int64_t>(s_->value->size()); }
  bool is_scalar() const { return numel() == 1; }

  float* data() { return s_->value->data(); }
  const float* data() const { return s_->value->data(); }

  bool requires_grad() const { return s_->requires_grad; }
  void set_requires_grad(bool v) { s_->requires_grad = v; }

  bool has_grad() const { return !s_->grad.empty(); }
  // Allocates a zero-filled gradient buffer on first use.
  float* grad();
  const float* grad() const { return s_->grad.data(); }
  void zero_grad();

  // Shares values, drops the gradient path.
  Tensor detach() const;
  // Deep copy of the values (fresh buffers, same requires_grad flag).
  Tensor clone() const;

  float item() const;
  float& at(std::int64_t i) { return (*s_->value)[static_cast<size_t>(i)]; }
  float at(std::int64_t i) const { return (*s_->value)[static_cast<size_t>(i)]; }

  bool all_finite() const;

  // Tape bookkeeping (set when an operation records this tensor as output).
  const Tape* producer() const { return s_->producer; }
  void set_producer(const Tape* t) { s_->producer = t; }

 private:
  struct Storage {
    Shape shape;
    std::shared_ptr<std::vector<float>> value;
    std::vector<float> grad;
    bool requires_grad = false;
    const Tape* producer = nullptr;
  };

  std::shared_ptr<Storage> s_;
};

// FNV-1a over the raw value bytes; used for determinism checks.
std::uint64_t checksum(const Tensor& t);

}  // namespace cdgan
