#include "discont/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "discont/autograd.hpp"
#include "discont/error.hpp"

namespace discont {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

void require_ndim(const Tensor& t, std::size_t n, std::string_view op, std::string_view what) {
  if (t.ndim() != n) {
    throw DimensionError(std::string(op) + ": " + std::string(what) + " must be " + std::to_string(n) + "-D, got " +
                         shape_to_string(t.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<float> out(a.numel());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const float>, std::span<const float> g) {
    for (const auto& t : {a, b}) {
      auto s = grad_sink(t);
      for (std::size_t i = 0; i < s.size(); ++i) s[i] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<float> out(a.numel());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const float>, std::span<const float> g) {
    auto sa = grad_sink(a);
    for (std::size_t i = 0; i < sa.size(); ++i) sa[i] += g[i];
    auto sb = grad_sink(b);
    for (std::size_t i = 0; i < sb.size(); ++i) sb[i] -= g[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<float> out(a.numel());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const float>, std::span<const float> g) {
    auto av = a.values(), bv = b.values();
    auto sa = grad_sink(a);
    for (std::size_t i = 0; i < sa.size(); ++i) sa[i] += g[i] * bv[i];
    auto sb = grad_sink(b);
    for (std::size_t i = 0; i < sb.size(); ++i) sb[i] += g[i] * av[i];
  });
}

Tensor scale(const Tensor& a, float factor) {
  std::vector<float> out(a.numel());
  auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  return make_result(a.shape(), std::move(out), {a}, [a, factor](std::span<const float>, std::span<const float> g) {
    auto s = grad_sink(a);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += g[i] * factor;
  });
}

Tensor exp(const Tensor& a) {
  std::vector<float> out(a.numel());
  auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(av[i]);
  return make_result(a.shape(), std::move(out), {a}, [a](std::span<const float> y, std::span<const float> g) {
    auto s = grad_sink(a);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += g[i] * y[i];
  });
}

Tensor square(const Tensor& a) {
  std::vector<float> out(a.numel());
  auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * av[i];
  return make_result(a.shape(), std::move(out), {a}, [a](std::span<const float>, std::span<const float> g) {
    auto av = a.values();
    auto s = grad_sink(a);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += 2.0f * av[i] * g[i];
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (float v : a.values()) acc += v;
  return make_result(Shape{1}, {static_cast<float>(acc)}, {a}, [a](std::span<const float>, std::span<const float> g) {
    auto s = grad_sink(a);
    for (auto& v : s) v += g[0];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(a.shape()) + " as " + shape_to_string(shape));
  }
  std::vector<float> out(a.values().begin(), a.values().end());
  return make_result(std::move(shape), std::move(out), {a}, [a](std::span<const float>, std::span<const float> g) {
    auto s = grad_sink(a);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += g[i];
  });
}

Tensor mean_rows(const Tensor& a) {
  require_ndim(a, 2, "mean_rows", "input");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  std::vector<double> acc(cols, 0.0);
  auto av = a.values();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) acc[c] += av[r * cols + c];
  std::vector<float> out(cols);
  for (std::size_t c = 0; c < cols; ++c) out[c] = static_cast<float>(acc[c] / static_cast<double>(rows));
  return make_result(Shape{1, cols}, std::move(out), {a},
                     [a, rows, cols](std::span<const float>, std::span<const float> g) {
                       auto s = grad_sink(a);
                       const float inv = 1.0f / static_cast<float>(rows);
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < cols; ++c) s[r * cols + c] += g[c] * inv;
                     });
}

Tensor narrow_cols(const Tensor& a, std::size_t start, std::size_t length) {
  require_ndim(a, 2, "narrow_cols", "input");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  if (length == 0 || start + length > cols) {
    throw DimensionError("narrow_cols: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") exceeds " + std::to_string(cols) + " columns");
  }
  std::vector<float> out(rows * length);
  auto av = a.values();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(av.begin() + static_cast<std::ptrdiff_t>(r * cols + start), length,
                out.begin() + static_cast<std::ptrdiff_t>(r * length));
  return make_result(Shape{rows, length}, std::move(out), {a},
                     [a, rows, cols, start, length](std::span<const float>, std::span<const float> g) {
                       auto s = grad_sink(a);
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < length; ++c) s[r * cols + start + c] += g[r * length + c];
                     });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t rows = parts.front().dim(0);
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_ndim(p, 2, "concat_cols", "every part");
    if (p.dim(0) != rows) {
      throw DimensionError("concat_cols: row mismatch " + shape_to_string(parts.front().shape()) + " vs " +
                           shape_to_string(p.shape()));
    }
    total += p.dim(1);
  }
  std::vector<float> out(rows * total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.dim(1);
    auto pv = p.values();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(r * w), w,
                  out.begin() + static_cast<std::ptrdiff_t>(r * total + offset));
    offset += w;
  }
  return make_result(Shape{rows, total}, std::move(out), parts,
                     [parts, rows, total](std::span<const float>, std::span<const float> g) {
                       std::size_t offset = 0;
                       for (const auto& p : parts) {
                         const std::size_t w = p.dim(1);
                         auto s = grad_sink(p);
                         if (!s.empty()) {
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t c = 0; c < w; ++c) s[r * w + c] += g[r * total + offset + c];
                         }
                         offset += w;
                       }
                     });
}

std::string_view activation_name(Activation kind) {
  switch (kind) {
    case Activation::ELU:
      return "elu";
    case Activation::ReLU:
      return "relu";
    case Activation::Sigmoid:
      return "sigmoid";
  }
  return "?";
}

Tensor activation(const Tensor& input, Activation kind) {
  auto x = input.values();
  std::vector<float> out(x.size());
  switch (kind) {
    case Activation::ELU:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] >= 0.0f ? x[i] : std::expm1(x[i]);
      break;
    case Activation::ReLU:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
      break;
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = 1.0f / (1.0f + std::exp(-x[i]));
      break;
  }
  return make_result(input.shape(), std::move(out), {input},
                     [input, kind](std::span<const float> y, std::span<const float> g) {
                       auto x = input.values();
                       auto s = grad_sink(input);
                       switch (kind) {
                         case Activation::ELU:
                           for (std::size_t i = 0; i < s.size(); ++i)
                             s[i] += x[i] >= 0.0f ? g[i] : g[i] * (y[i] + 1.0f);
                           break;
                         case Activation::ReLU:
                           for (std::size_t i = 0; i < s.size(); ++i)
                             if (x[i] > 0.0f) s[i] += g[i];
                           break;
                         case Activation::Sigmoid:
                           for (std::size_t i = 0; i < s.size(); ++i) s[i] += g[i] * y[i] * (1.0f - y[i]);
                           break;
                       }
                     });
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_ndim(input, 2, "dense", "input");
  require_ndim(weight, 2, "dense", "weight");
  const std::size_t rows = input.dim(0), n = input.dim(1), m = weight.dim(1);
  if (weight.dim(0) != n) {
    throw DimensionError("dense: input " + shape_to_string(input.shape()) + " does not match weight " +
                         shape_to_string(weight.shape()));
  }
  if (bias.numel() != m) {
    throw DimensionError("dense: bias " + shape_to_string(bias.shape()) + " does not match weight " +
                         shape_to_string(weight.shape()));
  }
  std::vector<float> out(rows * m);
  {
    ConstMatMap x(input.values().data(), rows, n);
    ConstMatMap w(weight.values().data(), n, m);
    MatMap y(out.data(), rows, m);
    y.noalias() = x * w;
    Eigen::Map<const Eigen::RowVectorXf> b(bias.values().data(), m);
    y.rowwise() += b;
  }
  return make_result(Shape{rows, m}, std::move(out), {input, weight, bias},
                     [input, weight, bias, rows, n, m](std::span<const float>, std::span<const float> g) {
                       ConstMatMap gy(g.data(), rows, m);
                       if (auto s = grad_sink(input); !s.empty()) {
                         ConstMatMap w(weight.values().data(), n, m);
                         MatMap(s.data(), rows, n).noalias() += gy * w.transpose();
                       }
                       if (auto s = grad_sink(weight); !s.empty()) {
                         ConstMatMap x(input.values().data(), rows, n);
                         MatMap(s.data(), n, m).noalias() += x.transpose() * gy;
                       }
                       if (auto s = grad_sink(bias); !s.empty()) {
                         for (std::size_t j = 0; j < m; ++j) {
                           double acc = 0.0;
                           for (std::size_t r = 0; r < rows; ++r) acc += g[r * m + j];
                           s[j] += static_cast<float>(acc);
                         }
                       }
                     });
}

BatchNormState BatchNormState::fresh(std::size_t channels) {
  return {Tensor::zeros({channels}), Tensor::full({channels}, 1.0f)};
}

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, BatchNormState& state, Mode mode,
                  BatchNormOptions options) {
  if (input.ndim() != 2 && input.ndim() != 4) {
    throw DimensionError("batch_norm: input must be 2-D or 4-D, got " + shape_to_string(input.shape()));
  }
  if (!(options.eps > 0.0f)) throw ContractError("batch_norm: eps must be positive");
  const std::size_t batch = input.dim(0), channels = input.dim(1);
  const std::size_t spatial = input.ndim() == 4 ? input.dim(2) * input.dim(3) : 1;
  for (const Tensor* t : std::initializer_list<const Tensor*>{&gamma, &beta, &state.running_mean, &state.running_var}) {
    if (t->numel() != channels) {
      throw DimensionError("batch_norm: per-channel tensor " + shape_to_string(t->shape()) + " does not match " +
                           std::to_string(channels) + " channels of " + shape_to_string(input.shape()));
    }
  }
  const double count = static_cast<double>(batch * spatial);
  auto x = input.values();
  auto at = [&](std::size_t b, std::size_t c, std::size_t p) { return (b * channels + c) * spatial + p; };

  std::vector<float> mean(channels), inv_std(channels);
  if (mode == Mode::Train) {
    auto rm = state.running_mean.values();
    auto rv = state.running_var.values();
    for (std::size_t c = 0; c < channels; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t p = 0; p < spatial; ++p) s += x[at(b, c, p)];
      const double mu = s / count;
      double ss = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t p = 0; p < spatial; ++p) {
          const double d = x[at(b, c, p)] - mu;
          ss += d * d;
        }
      const double var = ss / count;
      mean[c] = static_cast<float>(mu);
      inv_std[c] = static_cast<float>(1.0 / std::sqrt(var + options.eps));
      const double unbiased = count > 1.0 ? ss / (count - 1.0) : var;
      rm[c] = static_cast<float>((1.0 - options.momentum) * rm[c] + options.momentum * mu);
      rv[c] = static_cast<float>((1.0 - options.momentum) * rv[c] + options.momentum * unbiased);
    }
  } else {
    auto rm = state.running_mean.values();
    auto rv = state.running_var.values();
    for (std::size_t c = 0; c < channels; ++c) {
      mean[c] = rm[c];
      inv_std[c] = static_cast<float>(1.0 / std::sqrt(static_cast<double>(rv[c]) + options.eps));
    }
  }

  auto gm = gamma.values(), bt = beta.values();
  std::vector<float> xhat(x.size()), out(x.size());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t p = 0; p < spatial; ++p) {
        const auto i = at(b, c, p);
        xhat[i] = (x[i] - mean[c]) * inv_std[c];
        out[i] = gm[c] * xhat[i] + bt[c];
      }

  return make_result(input.shape(), std::move(out), {input, gamma, beta},
                     [input, gamma, beta, mode, batch, channels, spatial, count, xhat = std::move(xhat),
                      inv_std = std::move(inv_std)](std::span<const float>, std::span<const float> g) {
                       auto at = [&](std::size_t b, std::size_t c, std::size_t p) {
                         return (b * channels + c) * spatial + p;
                       };
                       auto gm = gamma.values();
                       auto sx = grad_sink(input);
                       auto sg = grad_sink(gamma);
                       auto sb = grad_sink(beta);
                       for (std::size_t c = 0; c < channels; ++c) {
                         double sum_g = 0.0, sum_gx = 0.0;
                         for (std::size_t b = 0; b < batch; ++b)
                           for (std::size_t p = 0; p < spatial; ++p) {
                             const auto i = at(b, c, p);
                             sum_g += g[i];
                             sum_gx += static_cast<double>(g[i]) * xhat[i];
                           }
                         if (!sg.empty()) sg[c] += static_cast<float>(sum_gx);
                         if (!sb.empty()) sb[c] += static_cast<float>(sum_g);
                         if (sx.empty()) continue;
                         if (mode == Mode::Train) {
                           // dx = gamma*inv_std/n * (n*g - sum(g) - xhat*sum(g*xhat))
                           const double k = static_cast<double>(gm[c]) * inv_std[c] / count;
                           for (std::size_t b = 0; b < batch; ++b)
                             for (std::size_t p = 0; p < spatial; ++p) {
                               const auto i = at(b, c, p);
                               sx[i] += static_cast<float>(k * (count * g[i] - sum_g - xhat[i] * sum_gx));
                             }
                         } else {
                           const float k = gm[c] * inv_std[c];
                           for (std::size_t b = 0; b < batch; ++b)
                             for (std::size_t p = 0; p < spatial; ++p) {
                               const auto i = at(b, c, p);
                               sx[i] += k * g[i];
                             }
                         }
                       }
                     });
}

}  // namespace discont
