#include <gtest/gtest.h>

#include <cmath>

#include "discont/error.hpp"
#include "discont/objective.hpp"
#include "support/grad_cases.hpp"

namespace discont {
namespace {

using testing::random_tensor;

double value(const Tensor& t, std::size_t i) { return t.values()[i]; }

TEST(Objective, ReconstructionMatchesLoop) {
  Rng rng(1);
  const Tensor a = random_tensor({3, 3, 4, 4}, rng, 0, 1), b = random_tensor({3, 3, 4, 4}, rng, 0, 1);
  double expect = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) expect += std::pow(value(a, i) - value(b, i), 2);
  EXPECT_NEAR(recon_loss(a, b).item(), expect, 1e-4);
  EXPECT_EQ(recon_loss(a, a).item(), 0.0f);
  EXPECT_THROW(recon_loss(a, random_tensor({3, 3, 4, 5}, rng)), DimensionError);
}

TEST(Objective, KlMatchesClosedFormLoop) {
  Rng rng(2);
  const Tensor mu = random_tensor({4, 5}, rng, -2, 2), lv = random_tensor({4, 5}, rng, -1, 1);
  double expect = 0;
  for (std::size_t i = 0; i < mu.numel(); ++i)
    expect += 0.5 * (value(mu, i) * value(mu, i) + std::exp(value(lv, i)) - value(lv, i) - 1.0);
  EXPECT_NEAR(kl_loss(mu, lv).item(), expect / 4.0, 1e-5);
}

TEST(Objective, KlAgreesWithMonteCarlo) {
  // E_q[log q(z) - log p(z)] estimated by sampling q = N(mu, exp(lv)).
  const Tensor mu({1, 2}, {0.7f, -0.3f}), lv({1, 2}, {-0.5f, 0.4f});
  Rng rng(3);
  double acc = 0;
  constexpr int n = 200000;
  for (int s = 0; s < n; ++s) {
    for (std::size_t j = 0; j < 2; ++j) {
      const double sd = std::exp(0.5 * value(lv, j));
      const double z = value(mu, j) + sd * rng.normal();
      const double log_q = -0.5 * std::pow((z - value(mu, j)) / sd, 2) - std::log(sd);
      const double log_p = -0.5 * z * z;
      acc += log_q - log_p;
    }
  }
  EXPECT_NEAR(kl_loss(mu, lv).item(), acc / n, 0.01);
}

TEST(Objective, KlIdentities) {
  EXPECT_EQ(kl_loss(Tensor::zeros({3, 32}), Tensor::zeros({3, 32})).item(), 0.0f);
  EXPECT_NEAR(kl_loss(Tensor::full({2, 32}, 1.0f), Tensor::zeros({2, 32})).item(), 16.0, 1e-6);
}

TEST(Objective, CenterLossMatchesLoop) {
  Rng rng(4);
  const Tensor p = random_tensor({3, 2, 4}, rng), c = random_tensor({2, 4}, rng);
  double expect = 0;
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t i = 0; i < 8; ++i) expect += std::pow(value(p, b * 8 + i) - value(c, i), 2);
  EXPECT_NEAR(center_loss(p, c).item(), 0.5 * expect, 1e-5);
  EXPECT_THROW(center_loss(p, random_tensor({3, 4}, rng)), DimensionError);
}

TEST(Objective, AugmentationLossHonoursTheMask) {
  Rng rng(5);
  const Tensor zf = random_tensor({2, 3, 4}, rng), af = random_tensor({2, 3, 4}, rng);
  const Tensor zu = random_tensor({2, 4}, rng), au = random_tensor({2, 4}, rng);
  const std::vector<std::uint8_t> mask{0, 1, 0};
  double expect = 0;
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t i = 0; i < 3; ++i)
      if (!mask[i])
        for (std::size_t j = 0; j < 4; ++j)
          expect += std::pow(value(zf, (b * 3 + i) * 4 + j) - value(af, (b * 3 + i) * 4 + j), 2);
    for (std::size_t j = 0; j < 4; ++j) expect += std::pow(value(zu, b * 4 + j) - value(au, b * 4 + j), 2);
  }
  EXPECT_NEAR(aug_consistency_loss(zf, af, zu, au, mask).item(), expect, 1e-5);
  const std::vector<std::uint8_t> short_mask{1};
  EXPECT_THROW(aug_consistency_loss(zf, af, zu, au, short_mask), DimensionError);
}

TEST(Objective, TotalIsTheWeightedSum) {
  const LossTerms terms{Tensor::scalar(2.0f), Tensor::scalar(3.0f), Tensor::scalar(5.0f), Tensor::scalar(7.0f)};
  const auto t = total_loss(terms, {0.5, 2.0, 0.2});
  EXPECT_NEAR(t.report.total, 2.0 + 1.5 + 10.0 + 1.4, 1e-5);
  EXPECT_NEAR(t.total.item(), t.report.total, 1e-5);
  EXPECT_NEAR(t.report.weighted_cen, 10.0, 1e-6);
  EXPECT_EQ(t.report.l_a, 7.0);
}

TEST(Objective, NegativeWeightsAreRejected) {
  EXPECT_THROW((LossWeights{-1.0, 1.0, 0.2}.validate()), ConfigError);
  EXPECT_THROW((LossWeights{1.0, 1.0, -0.2}.validate()), ConfigError);
  EXPECT_NO_THROW(LossWeights{}.validate());
}

class ObjectiveGrad : public ::testing::TestWithParam<testing::GradCase> {};

TEST_P(ObjectiveGrad, MatchesCentralDifferencesOverTwentySeeds) {
  const auto& c = GetParam();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto problem = c.make(seed);
    EXPECT_LT(grad_check(problem.f, problem.inputs), 1e-3) << c.name << " seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(Losses, ObjectiveGrad, ::testing::ValuesIn(testing::objective_grad_cases()),
                         [](const auto& info) { return info.param.name; });

}  // namespace
}  // namespace discont
