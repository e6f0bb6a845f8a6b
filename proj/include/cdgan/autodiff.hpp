#pragma once

#include <functional>
#include <vector>

#include "cdgan/tensor.hpp"

namespace cdgan {

// Recorded computation for reverse-mode differentiation.
//
// A Tape is define-by-run: constructing one makes it the active tape for the
// current thread, and every differentiable operation executed while it is
// active appends one node. backward(loss) replays the nodes in reverse and
// then consumes them, so a tape records exactly one forward pass. Gradients
// accumulate into Tensor::grad buffers and are never zeroed implicitly;
// call zero_grad between steps.
//
// Tapes nest: an inner Tape shadows the outer one until it is destroyed
// (destruction must happen in LIFO order). A Tape is single-owner and must
// not be shared across threads.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // loss must be a scalar produced on this tape.
  void backward(const Tensor& loss);

  size_t size() const { return nodes_.size(); }

  static Tape* active();

  // Called by operation implementations: registers out as produced here and
  // appends its backward closure.
  void record(Tensor& out, std::function<void()> backward_fn);

 private:
  std::vector<std::function<void()>> nodes_;
};

// Appends to the active tape when one exists and out requires grad.
// No-op (pure forward) otherwise.
void record_op(Tensor& out, std::function<void()> backward_fn);

}  // namespace cdgan
