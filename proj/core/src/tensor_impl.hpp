#pragma once

#include <memory>
#include <vector>

#include "discont/autograd.hpp"
#include "discont/tensor.hpp"

namespace discont::detail {

struct GradNode {
  std::vector<Tensor> inputs;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<float> values;
  std::vector<float> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::shared_ptr<GradNode> node;
};

}  // namespace discont::detail
