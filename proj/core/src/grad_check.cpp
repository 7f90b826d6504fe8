#include "discont/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "discont/error.hpp"

namespace discont {

GradCheckResult grad_check_detailed(const ScalarFunction& f, std::vector<Tensor> inputs, double eps) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.clear_grad();
  }
  Tensor loss = f(inputs);
  if (loss.numel() != 1) throw ContractError("grad_check: function must return a scalar");
  loss.backward();

  std::vector<std::vector<float>> analytic;
  analytic.reserve(inputs.size());
  for (const auto& t : inputs) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(t.numel(), 0.0f);
    }
  }

  GradCheckResult result;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const float original = values[i];
      values[i] = static_cast<float>(original + eps);
      const double plus = f(inputs).item();
      values[i] = static_cast<float>(original - eps);
      const double minus = f(inputs).item();
      values[i] = original;
      // Divide by the step actually taken after float rounding.
      const double step = static_cast<double>(static_cast<float>(original + eps)) -
                          static_cast<double>(static_cast<float>(original - eps));
      const double numeric = (plus - minus) / step;
      const double a = analytic[k][i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric));
      if (err > result.max_relative_error) {
        result = {err, k, i};
      }
    }
  }
  return result;
}

}  // namespace discont
