#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "discont/grad_check.hpp"
#include "discont/objective.hpp"
#include "discont/ops.hpp"
#include "discont/rng.hpp"

namespace discont::testing {

struct GradProblem {
  ScalarFunction f;
  std::vector<Tensor> inputs;
};

struct GradCase {
  std::string name;
  std::function<GradProblem(std::uint64_t seed)> make;
};

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

// Uniform magnitudes in [lo, hi] with random sign, keeping clear of kinks at zero.
inline Tensor away_from_zero(Shape shape, Rng& rng, double lo = 0.05, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<float>((rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(lo, hi));
  return t;
}

// Fixed projection weights so that f = sum(r * op(x)) stays O(1).
inline Tensor projection_weights(const Shape& shape, Rng& rng) {
  Tensor r(shape);
  rng.fill_normal(r.values(), 0.0, 1.0 / std::sqrt(static_cast<double>(shape_numel(shape))));
  return r;
}

inline Tensor project(const Tensor& out, const Tensor& r) { return sum(mul(out, r)); }

// f(inputs) = sum(r * op(inputs)) with r drawn once for the output shape.
inline GradProblem projected(std::function<Tensor(const std::vector<Tensor>&)> op, std::vector<Tensor> inputs,
                             Rng& rng) {
  Tensor r;
  {
    NoGradGuard guard;
    r = projection_weights(op(inputs).shape(), rng);
  }
  return {[op, r](const std::vector<Tensor>& in) { return project(op(in), r); }, std::move(inputs)};
}

inline std::vector<GradCase> diffcore_grad_cases() {
  std::vector<GradCase> cases;
  auto add_case = [&](std::string name, std::function<GradProblem(Rng&)> make) {
    cases.push_back({std::move(name), [make](std::uint64_t seed) {
                       Rng rng(seed);
                       return make(rng);
                     }});
  };
  add_case("add", [](Rng& rng) {
    return projected([](const auto& in) { return add(in[0], in[1]); },
                     {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}, rng);
  });
  add_case("sub", [](Rng& rng) {
    return projected([](const auto& in) { return sub(in[0], in[1]); },
                     {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}, rng);
  });
  add_case("mul", [](Rng& rng) {
    return projected([](const auto& in) { return mul(in[0], in[1]); },
                     {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}, rng);
  });
  add_case("scale", [](Rng& rng) {
    return projected([](const auto& in) { return scale(in[0], 0.7f); }, {random_tensor({2, 5}, rng)}, rng);
  });
  add_case("exp", [](Rng& rng) {
    return projected([](const auto& in) { return exp(in[0]); }, {random_tensor({2, 5}, rng)}, rng);
  });
  add_case("square", [](Rng& rng) {
    return projected([](const auto& in) { return square(in[0]); }, {random_tensor({2, 5}, rng)}, rng);
  });
  add_case("sum", [](Rng& rng) {
    Tensor x = random_tensor({2, 3, 2}, rng);
    return GradProblem{[](const auto& in) { return scale(sum(in[0]), 0.25f); }, {x}};
  });
  add_case("reshape", [](Rng& rng) {
    return projected([](const auto& in) { return square(reshape(in[0], {3, 4})); }, {random_tensor({2, 6}, rng)}, rng);
  });
  add_case("mean_rows", [](Rng& rng) {
    return projected([](const auto& in) { return mean_rows(in[0]); }, {random_tensor({4, 3}, rng)}, rng);
  });
  add_case("narrow_cols", [](Rng& rng) {
    return projected([](const auto& in) { return narrow_cols(in[0], 1, 3); }, {random_tensor({3, 5}, rng)}, rng);
  });
  add_case("concat_cols", [](Rng& rng) {
    return projected([](const auto& in) { return concat_cols({in[0], in[1], in[0]}); },
                     {random_tensor({2, 3}, rng), random_tensor({2, 2}, rng)}, rng);
  });
  add_case("elu", [](Rng& rng) {
    return projected([](const auto& in) { return elu(in[0]); }, {away_from_zero({3, 5}, rng, 0.05, 2.0)}, rng);
  });
  add_case("relu", [](Rng& rng) {
    return projected([](const auto& in) { return relu(in[0]); }, {away_from_zero({3, 5}, rng)}, rng);
  });
  add_case("sigmoid", [](Rng& rng) {
    return projected([](const auto& in) { return sigmoid(in[0]); }, {random_tensor({3, 5}, rng, -3, 3)}, rng);
  });
  add_case("dense", [](Rng& rng) {
    return projected([](const auto& in) { return dense(in[0], in[1], in[2]); },
                     {random_tensor({3, 4}, rng), random_tensor({4, 5}, rng), random_tensor({5}, rng)}, rng);
  });
  add_case("conv2d_stride1", [](Rng& rng) {
    return projected([](const auto& in) { return conv2d(in[0], in[1], in[2], 1); },
                     {random_tensor({2, 2, 5, 5}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)},
                     rng);
  });
  add_case("conv2d_stride2", [](Rng& rng) {
    return projected([](const auto& in) { return conv2d(in[0], in[1], in[2], 2); },
                     {random_tensor({2, 2, 7, 7}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)},
                     rng);
  });
  add_case("conv_transpose2d_stride2", [](Rng& rng) {
    return projected([](const auto& in) { return conv_transpose2d(in[0], in[1], in[2], 2); },
                     {random_tensor({2, 3, 3, 3}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({2}, rng)},
                     rng);
  });
  add_case("conv_transpose2d_4x4", [](Rng& rng) {
    return projected([](const auto& in) { return conv_transpose2d(in[0], in[1], in[2], 2); },
                     {random_tensor({1, 2, 2, 2}, rng), random_tensor({2, 2, 4, 4}, rng), random_tensor({2}, rng)},
                     rng);
  });
  auto bn_case = [&](std::string name, Shape shape, Mode mode) {
    add_case(std::move(name), [shape, mode](Rng& rng) {
      const std::size_t channels = shape[1];
      auto state = std::make_shared<BatchNormState>(BatchNormState::fresh(channels));
      if (mode == Mode::Eval) {
        for (auto& v : state->running_mean.values()) v = static_cast<float>(rng.uniform(-0.5, 0.5));
        for (auto& v : state->running_var.values()) v = static_cast<float>(rng.uniform(0.5, 2.0));
      }
      return projected(
          [state, mode](const auto& in) { return batch_norm(in[0], in[1], in[2], *state, mode); },
          {random_tensor(shape, rng, -2, 2), random_tensor({channels}, rng, 0.5, 1.5), random_tensor({channels}, rng)},
          rng);
    });
  };
  bn_case("batch_norm_train_2d", {6, 3}, Mode::Train);
  bn_case("batch_norm_train_4d", {3, 2, 3, 3}, Mode::Train);
  bn_case("batch_norm_eval_4d", {3, 2, 3, 3}, Mode::Eval);
  return cases;
}

inline std::vector<GradCase> objective_grad_cases() {
  std::vector<GradCase> cases;
  auto add_case = [&](std::string name, std::function<GradProblem(Rng&)> make) {
    cases.push_back({std::move(name), [make](std::uint64_t seed) {
                       Rng rng(seed);
                       return make(rng);
                     }});
  };
  add_case("recon_loss", [](Rng& rng) {
    return GradProblem{[](const auto& in) { return recon_loss(in[0], in[1]); },
                       {random_tensor({2, 3, 2, 2}, rng, 0, 1), random_tensor({2, 3, 2, 2}, rng, 0, 1)}};
  });
  add_case("kl_loss", [](Rng& rng) {
    return GradProblem{[](const auto& in) { return kl_loss(in[0], in[1]); },
                       {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}};
  });
  add_case("center_loss", [](Rng& rng) {
    return GradProblem{[](const auto& in) { return center_loss(in[0], in[1]); },
                       {random_tensor({3, 2, 4}, rng, -0.5, 0.5), random_tensor({2, 4}, rng, -0.5, 0.5)}};
  });
  add_case("aug_consistency_loss", [](Rng& rng) {
    std::vector<std::uint8_t> mask{static_cast<std::uint8_t>(rng.bernoulli(0.5)),
                                   static_cast<std::uint8_t>(rng.bernoulli(0.5))};
    return GradProblem{[mask](const auto& in) { return aug_consistency_loss(in[0], in[1], in[2], in[3], mask); },
                       {random_tensor({3, 2, 4}, rng, -0.5, 0.5), random_tensor({3, 2, 4}, rng, -0.5, 0.5),
                        random_tensor({3, 4}, rng, -0.5, 0.5), random_tensor({3, 4}, rng, -0.5, 0.5)}};
  });
  add_case("total_loss", [](Rng& rng) {
    // Small magnitudes keep the weighted sum O(1), where float rounding of f
    // stays well below the finite-difference resolution.
    LossWeights w{rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0)};
    std::vector<std::uint8_t> mask{1, 0};
    auto small = [&](Shape shape) { return random_tensor(std::move(shape), rng, -0.4, 0.4); };
    return GradProblem{[w, mask](const auto& in) {
                         LossTerms terms{recon_loss(in[0], in[1]), kl_loss(in[2], in[3]), center_loss(in[4], in[5]),
                                         aug_consistency_loss(in[4], in[6], in[2], in[3], mask)};
                         return total_loss(terms, w).total;
                       },
                       {random_tensor({2, 3, 2, 2}, rng, 0.3, 0.7), random_tensor({2, 3, 2, 2}, rng, 0.3, 0.7),
                        small({2, 3}), small({2, 3}), small({2, 2, 3}), small({2, 3}), small({2, 2, 3})}};
  });
  return cases;
}

}  // namespace discont::testing
