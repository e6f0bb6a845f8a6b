#include "cdgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cdgan/autodiff.hpp"

namespace cdgan {

GradCheckReport grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& op_closure,
                           std::vector<Tensor> inputs, float tolerance, float step,
                           std::int64_t max_elements_per_input, std::uint64_t subsample_seed) {
  for (Tensor& t : inputs) t.set_requires_grad(true);

  float f0 = 0.0f;
  {
    Tape tape;
    Tensor loss = op_closure(inputs);
    f0 = loss.item();
    tape.backward(loss);
  }
  // Central differences of a 32-bit loss carry absolute noise on the order of
  // eps*|f0|/step; differences below that scale are indistinguishable from a
  // correct gradient, so they fall under the denominator floor.
  const float noise_floor = std::max(1e-3f, std::abs(f0) * 1e-5f / step);

  GradCheckReport report;
  Rng rng = make_rng(subsample_seed, 0xfd);
  for (size_t k = 0; k < inputs.size(); ++k) {
    Tensor& t = inputs[k];
    const std::int64_t n = t.numel();
    std::vector<std::int64_t> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    if (n > max_elements_per_input) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(static_cast<size_t>(max_elements_per_input));
    }
    for (std::int64_t i : idx) {
      const float analytic = t.has_grad() ? t.grad()[i] : 0.0f;
      const float saved = t.at(i);
      t.at(i) = saved + step;
      const float up = op_closure(inputs).item();
      t.at(i) = saved - step;
      const float down = op_closure(inputs).item();
      t.at(i) = saved;
      const float numeric = (up - down) / (2.0f * step);
      const float denom = std::max({std::abs(analytic), std::abs(numeric), noise_floor});
      const float rel = std::abs(analytic - numeric) / denom;
      ++report.checked_elements;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        std::ostringstream os;
        os << "input " << k << " element " << i << ": analytic " << analytic << " numeric "
           << numeric;
        report.worst = os.str();
      }
    }
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace cdgan
