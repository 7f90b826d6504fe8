#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "discont/tensor.hpp"

namespace discont {

// ---- elementwise / structural ----------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float factor);
Tensor exp(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sum(const Tensor& a);  // -> shape [1]

// Same values under a new shape with the same element count.
Tensor reshape(const Tensor& a, Shape shape);

// Rows of a B x n matrix averaged into a 1 x n row.
Tensor mean_rows(const Tensor& a);

// Columns [start, start+length) of a B x n matrix.
Tensor narrow_cols(const Tensor& a, std::size_t start, std::size_t length);

// Horizontal concatenation of B x n_i matrices.
Tensor concat_cols(const std::vector<Tensor>& parts);

// ---- layers ----------------------------------------------------------------

enum class Activation { ELU, ReLU, Sigmoid };

std::string_view activation_name(Activation kind);

// ELU uses alpha = 1.
Tensor activation(const Tensor& input, Activation kind);
inline Tensor elu(const Tensor& x) { return activation(x, Activation::ELU); }
inline Tensor relu(const Tensor& x) { return activation(x, Activation::ReLU); }
inline Tensor sigmoid(const Tensor& x) { return activation(x, Activation::Sigmoid); }

// input B x n, weight n x m, bias m -> B x m
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

// Zero padding throughout. input B x C x H x W, weight O x C x kh x kw,
// bias O -> B x O x ((H-kh)/stride+1) x ((W-kw)/stride+1).
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride);

// Adjoint of conv2d. input B x C x H x W, weight C x O x kh x kw, bias O
// -> B x O x ((H-1)*stride+kh) x ((W-1)*stride+kw).
Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride);

enum class Mode { Train, Eval };

struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;

  static BatchNormState fresh(std::size_t channels);
};

struct BatchNormOptions {
  float eps = 1e-5f;
  float momentum = 0.1f;
};

// Per-channel normalization over the batch (and spatial dims for 4-D input).
// Train mode normalizes with batch statistics and updates `state`; eval mode
// reads `state` only.
Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, BatchNormState& state, Mode mode,
                  BatchNormOptions options = {});

}  // namespace discont
