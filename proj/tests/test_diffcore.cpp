#include <gtest/gtest.h>

#include <cmath>

#include "discont/autograd.hpp"
#include "discont/error.hpp"
#include "discont/grad_check.hpp"
#include "discont/ops.hpp"
#include "discont/param_store.hpp"
#include "discont/rng.hpp"
#include "discont/tensor.hpp"
#include "support/grad_cases.hpp"

namespace discont {
namespace {

using testing::random_tensor;

double at4(const Tensor& t, std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
  const auto& s = t.shape();
  return t.values()[((a * s[1] + b) * s[2] + c) * s[3] + d];
}

// Direct convolution loop, zero padding, valid positions only.
Tensor naive_conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride) {
  const std::size_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const std::size_t oh = (h - kh) / stride + 1, ow = (wd - kw) / stride + 1;
  Tensor y({batch, cout, oh, ow});
  auto out = y.values();
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = b.values()[o];
          for (std::size_t c = 0; c < cin; ++c)
            for (std::size_t p = 0; p < kh; ++p)
              for (std::size_t q = 0; q < kw; ++q)
                acc += at4(x, n, c, i * stride + p, j * stride + q) * at4(w, o, c, p, q);
          out[((n * cout + o) * oh + i) * ow + j] = static_cast<float>(acc);
        }
  return y;
}

double dot(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += static_cast<double>(a.values()[i]) * b.values()[i];
  return acc;
}

TEST(Tensor, RejectsZeroSizedDimensions) {
  EXPECT_THROW(Tensor({2, 0, 3}), DimensionError);
  EXPECT_THROW(Tensor({2}, std::vector<float>{1, 2, 3}), DimensionError);
}

TEST(Tensor, ScalarHoldsItsValue) {
  const Tensor t = Tensor::scalar(2.5f);
  EXPECT_EQ(t.shape(), (Shape{1}));
  EXPECT_EQ(t.item(), 2.5f);
  EXPECT_FALSE(t.requires_grad());
}

TEST(Tensor, CopiesShareStorageAndCloneDoesNot) {
  Tensor a = Tensor::full({2, 2}, 1.0f);
  Tensor b = a;
  Tensor c = a.clone();
  b.values()[0] = 5.0f;
  EXPECT_EQ(a.values()[0], 5.0f);
  EXPECT_EQ(c.values()[0], 1.0f);
  EXPECT_TRUE(a.same_storage(b));
  EXPECT_FALSE(a.same_storage(c));
}

TEST(Tensor, BackwardRequiresScalar) {
  Tensor a = Tensor::full({2, 2}, 1.0f, true);
  EXPECT_THROW(square(a).backward(), ContractError);
}

TEST(Tensor, GradientsAccumulateAcrossBackwardCalls) {
  Tensor a = Tensor::full({3}, 2.0f, true);
  sum(square(a)).backward();
  sum(square(a)).backward();
  for (float g : a.grad()) EXPECT_FLOAT_EQ(g, 8.0f);
  a.zero_grad();
  for (float g : a.grad()) EXPECT_EQ(g, 0.0f);
}

TEST(Tensor, SharedSubexpressionGetsBothContributions) {
  Tensor a = Tensor::full({2}, 3.0f, true);
  Tensor s = square(a);
  sum(add(s, s)).backward();
  for (float g : a.grad()) EXPECT_FLOAT_EQ(g, 12.0f);
}

TEST(Tensor, NoGradGuardStopsRecording) {
  Tensor a = Tensor::full({2}, 1.0f, true);
  Tensor y;
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    y = square(a);
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(y.is_leaf());
}

TEST(Ops, ElementwiseShapeMismatchNamesShapes) {
  try {
    add(Tensor({2, 3}), Tensor({3, 2}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos) << e.what();
  }
}

TEST(Ops, ActivationsMatchClosedForms) {
  Tensor x({5}, {-2.0f, -0.5f, 0.0f, 0.5f, 2.0f});
  const auto e = elu(x), r = relu(x), s = sigmoid(x);
  for (std::size_t i = 0; i < 5; ++i) {
    const double v = x.values()[i];
    EXPECT_NEAR(e.values()[i], v > 0 ? v : std::expm1(v), 1e-6);
    EXPECT_NEAR(r.values()[i], std::max(v, 0.0), 0.0);
    EXPECT_NEAR(s.values()[i], 1.0 / (1.0 + std::exp(-v)), 1e-6);
  }
}

TEST(Ops, DenseMatchesLoop) {
  Rng rng(1);
  const Tensor x = random_tensor({3, 4}, rng), w = random_tensor({4, 5}, rng), b = random_tensor({5}, rng);
  const Tensor y = dense(x, w, b);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double acc = b.values()[j];
      for (std::size_t k = 0; k < 4; ++k) acc += x.values()[i * 4 + k] * w.values()[k * 5 + j];
      EXPECT_NEAR(y.values()[i * 5 + j], acc, 1e-5);
    }
  EXPECT_THROW(dense(x, random_tensor({3, 5}, rng), b), DimensionError);
}

TEST(Ops, MeanRowsNarrowAndConcat) {
  Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto m = mean_rows(x);
  EXPECT_EQ(m.shape(), (Shape{1, 3}));
  EXPECT_FLOAT_EQ(m.values()[0], 2.5f);
  const auto n = narrow_cols(x, 1, 2);
  EXPECT_EQ(n.values()[0], 2.0f);
  EXPECT_EQ(n.values()[3], 6.0f);
  const auto c = concat_cols({n, x});
  EXPECT_EQ(c.shape(), (Shape{2, 5}));
  EXPECT_EQ(c.values()[2], 1.0f);
  EXPECT_THROW(narrow_cols(x, 2, 2), DimensionError);
}

class ConvShapes : public ::testing::TestWithParam<std::tuple<std::size_t, std::size_t, std::size_t>> {};

TEST_P(ConvShapes, Conv2dMatchesDirectLoop) {
  const auto [size, kernel, stride] = GetParam();
  Rng rng(size * 31 + kernel * 7 + stride);
  const Tensor x = random_tensor({2, 3, size, size}, rng), w = random_tensor({4, 3, kernel, kernel}, rng);
  const Tensor b = random_tensor({4}, rng);
  const Tensor fast = conv2d(x, w, b, stride), slow = naive_conv2d(x, w, b, stride);
  ASSERT_EQ(fast.shape(), slow.shape());
  for (std::size_t i = 0; i < fast.numel(); ++i) EXPECT_NEAR(fast.values()[i], slow.values()[i], 1e-4);
}

TEST_P(ConvShapes, ConvTransposeIsAdjointOfConv) {
  const auto [size, kernel, stride] = GetParam();
  Rng rng(size * 17 + kernel + stride);
  const Tensor x = random_tensor({2, 3, size, size}, rng), w = random_tensor({4, 3, kernel, kernel}, rng);
  const Tensor zero_out = Tensor::zeros({4}), zero_in = Tensor::zeros({3});
  const Tensor y = conv2d(x, w, zero_out, stride);
  const Tensor g = random_tensor(y.shape(), rng);
  // The conv weight O x C x kh x kw is read by conv_transpose2d as in x out.
  const Tensor back = conv_transpose2d(g, w, zero_in, stride);
  if ((size - kernel) % stride == 0) {
    ASSERT_EQ(back.shape(), x.shape());
    EXPECT_NEAR(dot(y, g), dot(x, back), 1e-3 * (1.0 + std::abs(dot(y, g))));
  } else {
    EXPECT_EQ(back.dim(2), (y.dim(2) - 1) * stride + kernel);
  }
}

INSTANTIATE_TEST_SUITE_P(Sizes, ConvShapes,
                         ::testing::Values(std::make_tuple(5, 3, 1), std::make_tuple(7, 3, 2), std::make_tuple(8, 4, 2),
                                           std::make_tuple(9, 3, 2), std::make_tuple(6, 3, 2)));

TEST(Conv, OutputArithmeticForTheEncoderChain) {
  Rng rng(2);
  Tensor x = random_tensor({1, 3, 64, 64}, rng);
  x = conv2d(x, random_tensor({2, 3, 4, 4}, rng), random_tensor({2}, rng), 2);
  EXPECT_EQ(x.dim(2), 31u);
  x = conv2d(x, random_tensor({2, 2, 3, 3}, rng), random_tensor({2}, rng), 2);
  EXPECT_EQ(x.dim(2), 15u);
  Tensor y =
      conv_transpose2d(random_tensor({1, 2, 3, 3}, rng), random_tensor({2, 2, 3, 3}, rng), random_tensor({2}, rng), 2);
  EXPECT_EQ(y.dim(2), 7u);
}

TEST(Conv, ShapeErrorsNameBothShapes) {
  Rng rng(3);
  try {
    conv2d(random_tensor({1, 3, 8, 8}, rng), random_tensor({2, 4, 3, 3}, rng), random_tensor({2}, rng), 1);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[1x3x8x8]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2x4x3x3]"), std::string::npos) << msg;
  }
  EXPECT_THROW(conv2d(random_tensor({1, 3, 2, 2}, rng), random_tensor({2, 3, 3, 3}, rng), random_tensor({2}, rng), 1),
               DimensionError);
}

TEST(BatchNorm, TrainModeNormalizesAndUpdatesRunningStatistics) {
  Rng rng(4);
  const Tensor x = random_tensor({6, 2}, rng, -3, 5);
  auto state = BatchNormState::fresh(2);
  const Tensor y = batch_norm(x, Tensor::full({2}, 1.0f), Tensor::zeros({2}), state, Mode::Train);
  for (std::size_t c = 0; c < 2; ++c) {
    double mean = 0, sq = 0, ym = 0, yv = 0;
    for (std::size_t b = 0; b < 6; ++b) mean += x.values()[b * 2 + c] / 6.0;
    for (std::size_t b = 0; b < 6; ++b) sq += std::pow(x.values()[b * 2 + c] - mean, 2);
    for (std::size_t b = 0; b < 6; ++b) ym += y.values()[b * 2 + c] / 6.0;
    for (std::size_t b = 0; b < 6; ++b) yv += std::pow(y.values()[b * 2 + c] - ym, 2) / 6.0;
    EXPECT_NEAR(ym, 0.0, 1e-5);
    EXPECT_NEAR(yv, (sq / 6.0) / (sq / 6.0 + 1e-5), 1e-4);
    EXPECT_NEAR(state.running_mean.values()[c], 0.1 * mean, 1e-5);
    EXPECT_NEAR(state.running_var.values()[c], 0.9 + 0.1 * sq / 5.0, 1e-4);
  }
}

TEST(BatchNorm, EvalModeUsesRunningStatisticsOnly) {
  auto state = BatchNormState::fresh(1);
  state.running_mean.values()[0] = 2.0f;
  state.running_var.values()[0] = 4.0f;
  const Tensor x({2, 1}, {4.0f, 0.0f});
  const Tensor y = batch_norm(x, Tensor::full({1}, 3.0f), Tensor::full({1}, 1.0f), state, Mode::Eval);
  EXPECT_NEAR(y.values()[0], 3.0 * 2.0 / std::sqrt(4.0 + 1e-5) + 1.0, 1e-5);
  EXPECT_NEAR(y.values()[1], -3.0 * 2.0 / std::sqrt(4.0 + 1e-5) + 1.0, 1e-5);
  EXPECT_EQ(state.running_mean.values()[0], 2.0f);
}

class GradSuite : public ::testing::TestWithParam<testing::GradCase> {};

TEST_P(GradSuite, MatchesCentralDifferencesOverTwentySeeds) {
  const auto& c = GetParam();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto problem = c.make(seed);
    const auto result = grad_check_detailed(problem.f, problem.inputs);
    EXPECT_LT(result.max_relative_error, 1e-3)
        << c.name << " seed " << seed << " input " << result.worst_input << " index " << result.worst_index;
  }
}

INSTANTIATE_TEST_SUITE_P(Diffcore, GradSuite, ::testing::ValuesIn(testing::diffcore_grad_cases()),
                         [](const auto& info) { return info.param.name; });

TEST(GradCheck, DetectsAWrongGradient) {
  // exp recorded with the gradient of square: the checker must notice.
  ScalarFunction wrong = [](const std::vector<Tensor>& in) {
    const Tensor& x = in[0];
    std::vector<float> v(x.values().begin(), x.values().end());
    for (auto& e : v) e = std::exp(e);
    return sum(make_result(x.shape(), std::move(v), {x}, [x](std::span<const float>, std::span<const float> g) {
      auto s = grad_sink(x);
      for (std::size_t i = 0; i < s.size(); ++i) s[i] += 2.0f * x.values()[i] * g[i];
    }));
  };
  Rng rng(5);
  EXPECT_GT(grad_check(wrong, {random_tensor({4}, rng, 0.5, 1.0)}), 0.1);
}

TEST(ParamStore, RejectsDuplicatesAndMarksTrainable) {
  ParamStore store;
  auto& w = store.add("layer/weight", Tensor::zeros({2, 2}));
  EXPECT_TRUE(w.requires_grad());
  EXPECT_THROW(store.add("layer/weight", Tensor::zeros({1})), ContractError);
  EXPECT_EQ(store.element_count(), 4u);
  EXPECT_TRUE(store.contains("layer/weight"));
  EXPECT_FALSE(store.contains("layer/bias"));
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(Rng(42).next_u64(), c.next_u64());
}

TEST(Rng, SnapshotRestoresExactState) {
  Rng a(7);
  a.normal();
  const auto snap = a.snapshot();
  const double next = a.uniform();
  Rng b = Rng::restore(snap);
  EXPECT_EQ(b.uniform(), next);
  EXPECT_THROW(Rng::restore("not a state"), FormatError);
}

TEST(Rng, SplitStreamsDifferFromParent) {
  Rng a(9);
  Rng child = a.split();
  Rng a2(9);
  a2.next_u64();
  a2.next_u64();
  EXPECT_EQ(a, a2);
  EXPECT_NE(child.next_u64(), a.next_u64());
}

}  // namespace
}  // namespace discont
