#include "discont/objective.hpp"

#include <cmath>

#include "discont/autograd.hpp"
#include "discont/error.hpp"
#include "discont/ops.hpp"

namespace discont {

namespace {

void require_same(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

}  // namespace

Tensor recon_loss(const Tensor& x_hat, const Tensor& x) {
  require_same(x_hat, x, "recon_loss");
  auto a = x_hat.values(), b = x.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return make_result(Shape{1}, {static_cast<float>(acc)}, {x_hat, x},
                     [x_hat, x](std::span<const float>, std::span<const float> g) {
                       auto a = x_hat.values(), b = x.values();
                       auto sa = grad_sink(x_hat);
                       auto sb = grad_sink(x);
                       for (std::size_t i = 0; i < a.size(); ++i) {
                         const float d = 2.0f * (a[i] - b[i]) * g[0];
                         if (!sa.empty()) sa[i] += d;
                         if (!sb.empty()) sb[i] -= d;
                       }
                     });
}

Tensor kl_loss(const Tensor& mu, const Tensor& logvar) {
  require_same(mu, logvar, "kl_loss");
  if (mu.ndim() != 2) throw DimensionError("kl_loss: expected B x d, got " + shape_to_string(mu.shape()));
  const double batch = static_cast<double>(mu.dim(0));
  auto m = mu.values(), lv = logvar.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    acc += static_cast<double>(m[i]) * m[i] + std::exp(static_cast<double>(lv[i])) - 1.0 - lv[i];
  }
  return make_result(Shape{1}, {static_cast<float>(0.5 * acc / batch)}, {mu, logvar},
                     [mu, logvar, batch](std::span<const float>, std::span<const float> g) {
                       auto m = mu.values(), lv = logvar.values();
                       const double k = g[0] / batch;
                       auto sm = grad_sink(mu);
                       for (std::size_t i = 0; i < sm.size(); ++i) sm[i] += static_cast<float>(k * m[i]);
                       auto sl = grad_sink(logvar);
                       for (std::size_t i = 0; i < sl.size(); ++i)
                         sl[i] += static_cast<float>(0.5 * k * (std::exp(static_cast<double>(lv[i])) - 1.0));
                     });
}

Tensor center_loss(const Tensor& projections, const Tensor& centers) {
  if (projections.ndim() != 3 || centers.ndim() != 2 || projections.dim(1) != centers.dim(0) ||
      projections.dim(2) != centers.dim(1)) {
    throw DimensionError("center_loss: projections " + shape_to_string(projections.shape()) +
                         " incompatible with centers " + shape_to_string(centers.shape()));
  }
  const std::size_t batch = projections.dim(0), per_row = centers.numel();
  auto p = projections.values(), c = centers.values();
  double acc = 0.0;
  for (std::size_t j = 0; j < batch; ++j)
    for (std::size_t q = 0; q < per_row; ++q) {
      const double d = static_cast<double>(p[j * per_row + q]) - c[q];
      acc += d * d;
    }
  return make_result(Shape{1}, {static_cast<float>(0.5 * acc)}, {projections, centers},
                     [projections, centers, batch, per_row](std::span<const float>, std::span<const float> g) {
                       auto p = projections.values(), c = centers.values();
                       auto sp = grad_sink(projections);
                       auto sc = grad_sink(centers);
                       for (std::size_t j = 0; j < batch; ++j)
                         for (std::size_t q = 0; q < per_row; ++q) {
                           const float d = (p[j * per_row + q] - c[q]) * g[0];
                           if (!sp.empty()) sp[j * per_row + q] += d;
                           if (!sc.empty()) sc[q] -= d;
                         }
                     });
}

Tensor aug_consistency_loss(const Tensor& z_f, const Tensor& a_f, const Tensor& z_u, const Tensor& a_u,
                            std::span<const std::uint8_t> mask) {
  require_same(z_f, a_f, "aug_consistency_loss");
  require_same(z_u, a_u, "aug_consistency_loss");
  if (z_f.ndim() != 3 || z_u.ndim() != 2 || z_u.dim(0) != z_f.dim(0)) {
    throw DimensionError("aug_consistency_loss: z_f " + shape_to_string(z_f.shape()) + " incompatible with z_u " +
                         shape_to_string(z_u.shape()));
  }
  const std::size_t batch = z_f.dim(0), k = z_f.dim(1), d = z_f.dim(2), du = z_u.dim(1);
  if (mask.size() != k) {
    throw DimensionError("aug_consistency_loss: mask has " + std::to_string(mask.size()) + " entries for " +
                         std::to_string(k) + " attributes");
  }
  std::vector<float> keep(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (mask[i] > 1) throw ContractError("aug_consistency_loss: mask entries must be 0 or 1");
    keep[i] = mask[i] ? 0.0f : 1.0f;
  }
  auto zf = z_f.values(), af = a_f.values(), zu = z_u.values(), au = a_u.values();
  double acc = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < k; ++i) {
      if (keep[i] == 0.0f) continue;
      for (std::size_t q = 0; q < d; ++q) {
        const std::size_t idx = (b * k + i) * d + q;
        const double diff = static_cast<double>(zf[idx]) - af[idx];
        acc += diff * diff;
      }
    }
    for (std::size_t q = 0; q < du; ++q) {
      const double diff = static_cast<double>(zu[b * du + q]) - au[b * du + q];
      acc += diff * diff;
    }
  }
  return make_result(Shape{1}, {static_cast<float>(acc)}, {z_f, a_f, z_u, a_u},
                     [z_f, a_f, z_u, a_u, keep, batch, k, d, du](std::span<const float>, std::span<const float> g) {
                       auto zf = z_f.values(), af = a_f.values(), zu = z_u.values(), au = a_u.values();
                       auto szf = grad_sink(z_f), saf = grad_sink(a_f), szu = grad_sink(z_u), sau = grad_sink(a_u);
                       for (std::size_t b = 0; b < batch; ++b)
                         for (std::size_t i = 0; i < k; ++i)
                           for (std::size_t q = 0; q < d; ++q) {
                             const std::size_t idx = (b * k + i) * d + q;
                             const float v = 2.0f * keep[i] * (zf[idx] - af[idx]) * g[0];
                             if (!szf.empty()) szf[idx] += v;
                             if (!saf.empty()) saf[idx] -= v;
                           }
                       for (std::size_t i = 0; i < batch * du; ++i) {
                         const float v = 2.0f * (zu[i] - au[i]) * g[0];
                         if (!szu.empty()) szu[i] += v;
                         if (!sau.empty()) sau[i] -= v;
                       }
                     });
}

void LossWeights::validate() const {
  if (!(kl >= 0.0)) throw ConfigError("lambda_kl must be non-negative");
  if (!(cen >= 0.0)) throw ConfigError("lambda_cen must be non-negative");
  if (!(aug >= 0.0)) throw ConfigError("lambda_a must be non-negative");
}

TotalLoss total_loss(const LossTerms& terms, const LossWeights& weights) {
  weights.validate();
  TotalLoss out;
  auto& r = out.report;
  r.l_r = terms.l_r.item();
  r.l_kl = terms.l_kl.item();
  r.l_cen = terms.l_cen.item();
  r.l_a = terms.l_a.item();
  r.weighted_kl = weights.kl * r.l_kl;
  r.weighted_cen = weights.cen * r.l_cen;
  r.weighted_a = weights.aug * r.l_a;
  out.total = add(add(add(terms.l_r, scale(terms.l_kl, static_cast<float>(weights.kl))),
                      scale(terms.l_cen, static_cast<float>(weights.cen))),
                  scale(terms.l_a, static_cast<float>(weights.aug)));
  r.total = out.total.item();
  return out;
}

}  // namespace discont
