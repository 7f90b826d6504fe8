#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "discont/ops.hpp"
#include "discont/param_store.hpp"
#include "discont/rng.hpp"
#include "discont/tensor.hpp"

namespace discont {

struct ModelDims {
  std::size_t image_size = 64;    // square RGB input
  std::size_t latent_dim = 32;    // d, width of every latent chunk
  std::size_t attributes = 2;     // k, number of feature chunks
  std::size_t context_dim = 100;  // c

  static constexpr std::size_t kChannels = 3;
  static constexpr std::size_t kTopChannels = 512;

  // Spatial sizes after each encoder conv, e.g. 64 -> {31, 15, 7, 3}.
  std::vector<std::size_t> encoder_spatial() const;
  // Width of the flattened conv feature map (4608 at 64x64).
  std::size_t flatten_width() const;
  // Throws DimensionError for sizes where the decoder cannot mirror the encoder.
  void validate() const;

  bool operator==(const ModelDims&) const = default;
};

// Encoder f, decoder g and context network Psi. Parameter paths are
// prefixed "encoder/", "decoder/" and "context/".
struct ModelParams {
  ModelDims dims;
  ParamStore params;
  BufferStore buffers;  // batch-norm running statistics

  // Fan-in scaled uniform init, bound 1/sqrt(fan_in); batch-norm gamma 1, beta 0.
  static ModelParams initialize(const ModelDims& dims, std::uint64_t seed);
  // Same names and shapes with zero weights.
  static ModelParams layout(const ModelDims& dims);

  std::size_t group_element_count(std::string_view group) const;
};

struct LatentCode {
  Tensor z_f;       // B x k x d
  Tensor mu_u;      // B x d
  Tensor logvar_u;  // B x d
  Tensor z_u;       // B x d, mu_u + exp(logvar_u / 2) * eps
  Tensor eps;       // B x d

  std::size_t batch() const { return z_f.dim(0); }
};

// `rng == nullptr` fixes eps at zero so that z_u == mu_u.
LatentCode encode(const Tensor& x, ModelParams& model, Mode mode, Rng* rng);

// z_f B x k x d and z_u B x d -> B x 3 x H x W in [0,1].
Tensor decode(const Tensor& z_f, const Tensor& z_u, ModelParams& model, Mode mode);

// Psi applied to the batch mean of the feature chunks: B x k x d -> k x c.
Tensor context_of_batch(const Tensor& z_f, const ModelParams& model);

// Psi of a single sample's chunks: k x d -> k x c.
Tensor context_of_sample(const Tensor& z_f_j, const ModelParams& model);

// Per-sample projections P for a whole batch: B x k x d -> B x k x c.
Tensor context_projections(const Tensor& z_f, const ModelParams& model);

// Copy of `a` whose feature chunk `attribute` (0-based) comes from `b`.
LatentCode swap_attribute(const LatentCode& a, const LatentCode& b, std::size_t attribute);

}  // namespace discont
