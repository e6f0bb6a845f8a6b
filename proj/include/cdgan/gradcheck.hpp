#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cdgan/tensor.hpp"

namespace cdgan {

struct GradCheckReport {
  float max_rel_error = 0.0f;
  std::int64_t checked_elements = 0;
  bool passed = false;
  std::string worst;  // "input 1 element 42: analytic ... numeric ..."
};

// Compares the analytic gradient of a scalar-valued closure against a central
// finite difference with the given step on every element of every input (or a
// seeded random subsample when an input exceeds max_elements_per_input).
// Relative error is |a - n| / max(|a|, |n|, floor) with
// floor = max(1e-3, |f0|*1e-5/step), the 32-bit noise scale of the
// difference quotient at the unperturbed loss value f0.
GradCheckReport grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& op_closure,
                           std::vector<Tensor> inputs, float tolerance, float step = 1e-3f,
                           std::int64_t max_elements_per_input = 512,
                           std::uint64_t subsample_seed = 0);

}  // namespace cdgan
