#pragma once

#include <functional>
#include <vector>

#include "discont/tensor.hpp"

namespace discont {

using ScalarFunction = std::function<Tensor(const std::vector<Tensor>&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
};

// Compares the tape gradient of a scalar-valued `f` against central
// differences with step `eps`, coordinate by coordinate. The error of one
// coordinate is |analytic - numeric| / max(1, |analytic| + |numeric|).
//
// Precondition: no input coordinate sits within `eps` of a kink of f (ReLU
// at zero, for example). The caller perturbs such inputs away first.
GradCheckResult grad_check_detailed(const ScalarFunction& f, std::vector<Tensor> inputs, double eps = 1e-3);

inline double grad_check(const ScalarFunction& f, std::vector<Tensor> inputs, double eps = 1e-3) {
  return grad_check_detailed(f, std::move(inputs), eps).max_relative_error;
}

}  // namespace discont
