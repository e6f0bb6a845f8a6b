#include "cdgan/autodiff.hpp"

#include <cassert>

#include "cdgan/errors.hpp"

namespace cdgan {

namespace {
thread_local std::vector<Tape*> g_tape_stack;
}

Tape::Tape() { g_tape_stack.push_back(this); }

Tape::~Tape() {
  assert(!g_tape_stack.empty() && g_tape_stack.back() == this && "tapes must be destroyed in LIFO order");
  g_tape_stack.pop_back();
}

Tape* Tape::active() { return g_tape_stack.empty() ? nullptr : g_tape_stack.back(); }

void Tape::record(Tensor& out, std::function<void()> backward_fn) {
  out.set_producer(this);
  nodes_.push_back(std::move(backward_fn));
}

void record_op(Tensor& out, std::function<void()> backward_fn) {
  Tape* t = Tape::active();
  if (t != nullptr && out.requires_grad()) t->record(out, std::move(backward_fn));
}

void Tape::backward(const Tensor& loss) {
  if (!loss.is_scalar())
    throw ShapeError("backward: loss must be a scalar, got " + shape_str(loss.shape()));
  if (loss.producer() != nullptr && loss.producer() != this)
    throw ShapeError("backward: loss was not produced on this tape");
  Tensor l = loss;
  l.grad()[0] += 1.0f;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  nodes_.clear();
}

}  // namespace cdgan
