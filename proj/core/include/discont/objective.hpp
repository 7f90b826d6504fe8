#pragma once

#include <cstdint>
#include <span>

#include "discont/tensor.hpp"

namespace discont {

// Sum over the batch of squared L2 reconstruction error (no averaging).
Tensor recon_loss(const Tensor& x_hat, const Tensor& x);

// KL(N(mu, exp(logvar)) || N(0, I)) in closed form, summed over latent
// dimensions and averaged over the batch. mu, logvar: B x d.
Tensor kl_loss(const Tensor& mu, const Tensor& logvar);

// 1/2 * sum_i sum_j ||P_j^i - C^i||^2 with P: B x k x c, C: k x c.
Tensor center_loss(const Tensor& projections, const Tensor& centers);

// sum_b [ sum_i (1 - m[i]) ||z_f[b,i] - a_f[b,i]||^2 + ||z_u[b] - a_u[b]||^2 ]
// z_f, a_f: B x k x d; z_u, a_u: B x d; mask: k flags in {0,1}.
Tensor aug_consistency_loss(const Tensor& z_f, const Tensor& a_f, const Tensor& z_u, const Tensor& a_u,
                            std::span<const std::uint8_t> mask);

struct LossWeights {
  double kl = 1.0;
  double cen = 1.0;
  double aug = 0.2;

  void validate() const;  // ConfigError on negative weights
};

struct LossTerms {
  Tensor l_r, l_kl, l_cen, l_a;
};

struct LossReport {
  double l_r = 0, l_kl = 0, l_cen = 0, l_a = 0;
  double weighted_kl = 0, weighted_cen = 0, weighted_a = 0;
  double total = 0;
};

struct TotalLoss {
  Tensor total;  // differentiable scalar
  LossReport report;
};

// total = l_r + w.kl * l_kl + w.cen * l_cen + w.aug * l_a
TotalLoss total_loss(const LossTerms& terms, const LossWeights& weights);

}  // namespace discont
