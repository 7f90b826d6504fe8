#pragma once

// Building blocks for writing differentiable operations outside ops.cpp.

#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "discont/tensor.hpp"

namespace discont {

// Receives the forward output values and the upstream gradient for them.
using BackwardFn = std::function<void(std::span<const float> out_values, std::span<const float> out_grad)>;

// Wraps freshly computed values as an op result. When recording is on and
// any input requires a gradient, `backward` is attached and will be invoked
// once the result's gradient is complete.
Tensor make_result(Shape shape, std::vector<float> values, const std::vector<Tensor>& inputs, BackwardFn backward);

// Gradient slot of `t` for accumulation, or an empty span if `t` does not
// take gradients.
std::span<float> grad_sink(const Tensor& t);

}  // namespace discont
