#include "discont/model.hpp"

#include <array>
#include <cmath>

#include "discont/error.hpp"

namespace discont {

namespace {

struct ConvLayer {
  std::string_view name;
  std::size_t in, out, kernel;
};

constexpr std::array<ConvLayer, 4> kEncoderConvs{{
    {"conv1", 3, 64, 4},
    {"conv2", 64, 128, 3},
    {"conv3", 128, 256, 3},
    {"conv4", 256, 512, 3},
}};

constexpr std::array<ConvLayer, 4> kDecoderDeconvs{{
    {"deconv1", 512, 256, 3},
    {"deconv2", 256, 128, 3},
    {"deconv3", 128, 64, 3},
    {"deconv4", 64, 3, 4},
}};

constexpr std::size_t kStride = 2;
constexpr std::size_t kHidden = 1024;
constexpr std::size_t kContextHidden = 4096;

std::string path(std::string_view group, std::string_view layer, std::string_view leaf) {
  std::string p;
  p.reserve(group.size() + layer.size() + leaf.size() + 2);
  p.append(group).append("/").append(layer).append("/").append(leaf);
  return p;
}

// Zeros when `rng` is null.
Tensor uniform_tensor(Shape shape, std::size_t fan_in, Rng* rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  if (rng)
    for (auto& v : t.values()) v = static_cast<float>(rng->uniform(-bound, bound));
  return t;
}

void add_affine(ModelParams& m, std::string_view group, std::string_view layer, Shape weight_shape,
                std::size_t bias_len, std::size_t fan_in, Rng* rng) {
  m.params.add(path(group, layer, "weight"), uniform_tensor(std::move(weight_shape), fan_in, rng));
  m.params.add(path(group, layer, "bias"), uniform_tensor({bias_len}, fan_in, rng));
}

void add_batch_norm(ModelParams& m, std::string_view group, std::string_view layer, std::size_t channels) {
  m.params.add(path(group, layer, "gamma"), Tensor::full({channels}, 1.0f));
  m.params.add(path(group, layer, "beta"), Tensor::zeros({channels}));
  auto state = BatchNormState::fresh(channels);
  m.buffers.emplace(path(group, layer, "running_mean"), state.running_mean);
  m.buffers.emplace(path(group, layer, "running_var"), state.running_var);
}

Tensor norm(const Tensor& x, ModelParams& m, std::string_view group, std::string_view layer, Mode mode) {
  BatchNormState state{m.buffers.at(path(group, layer, "running_mean")),
                       m.buffers.at(path(group, layer, "running_var"))};
  return batch_norm(x, m.params.at(path(group, layer, "gamma")), m.params.at(path(group, layer, "beta")), state, mode);
}

const Tensor& weight(const ModelParams& m, std::string_view group, std::string_view layer) {
  return m.params.at(path(group, layer, "weight"));
}

const Tensor& bias(const ModelParams& m, std::string_view group, std::string_view layer) {
  return m.params.at(path(group, layer, "bias"));
}

Tensor psi(const Tensor& rows, const ModelParams& m) {
  auto h = relu(dense(rows, weight(m, "context", "fc1"), bias(m, "context", "fc1")));
  return relu(dense(h, weight(m, "context", "fc2"), bias(m, "context", "fc2")));
}

}  // namespace

std::vector<std::size_t> ModelDims::encoder_spatial() const {
  std::vector<std::size_t> sizes;
  std::size_t s = image_size;
  for (const auto& layer : kEncoderConvs) {
    if (s < layer.kernel) {
      throw DimensionError("image size " + std::to_string(image_size) + " too small for encoder " +
                           std::string(layer.name));
    }
    s = (s - layer.kernel) / kStride + 1;
    sizes.push_back(s);
  }
  return sizes;
}

std::size_t ModelDims::flatten_width() const {
  const auto s = encoder_spatial().back();
  return kTopChannels * s * s;
}

void ModelDims::validate() const {
  if (latent_dim == 0 || attributes == 0 || context_dim == 0) {
    throw ConfigError("latent_dim, attributes and context_dim must be positive");
  }
  std::size_t s = encoder_spatial().back();
  for (const auto& layer : kDecoderDeconvs) s = (s - 1) * kStride + layer.kernel;
  if (s != image_size) {
    throw DimensionError("image size " + std::to_string(image_size) +
                         " is not reproduced by the decoder (it would emit " + std::to_string(s) +
                         "); use sizes such as 32 or 64");
  }
}

namespace {

ModelParams build_model(const ModelDims& dims, Rng* rng) {
  dims.validate();
  ModelParams m;
  m.dims = dims;
  const std::size_t k = dims.attributes, d = dims.latent_dim, c = dims.context_dim;

  std::size_t bn = 1;
  for (const auto& l : kEncoderConvs) {
    add_affine(m, "encoder", l.name, {l.out, l.in, l.kernel, l.kernel}, l.out, l.in * l.kernel * l.kernel, rng);
    add_batch_norm(m, "encoder", "bn" + std::to_string(bn++), l.out);
  }
  add_affine(m, "encoder", "fc1", {dims.flatten_width(), kHidden}, kHidden, dims.flatten_width(), rng);
  add_batch_norm(m, "encoder", "bn" + std::to_string(bn++), kHidden);
  add_affine(m, "encoder", "head", {kHidden, (k + 2) * d}, (k + 2) * d, kHidden, rng);

  add_affine(m, "decoder", "fc1", {(k + 1) * d, kHidden}, kHidden, (k + 1) * d, rng);
  add_batch_norm(m, "decoder", "bn1", kHidden);
  add_affine(m, "decoder", "fc2", {kHidden, dims.flatten_width()}, dims.flatten_width(), kHidden, rng);
  add_batch_norm(m, "decoder", "bn2", dims.flatten_width());
  bn = 3;
  for (const auto& l : kDecoderDeconvs) {
    add_affine(m, "decoder", l.name, {l.in, l.out, l.kernel, l.kernel}, l.out, l.in * l.kernel * l.kernel, rng);
    if (l.name != kDecoderDeconvs.back().name) add_batch_norm(m, "decoder", "bn" + std::to_string(bn++), l.out);
  }

  add_affine(m, "context", "fc1", {k * d, kContextHidden}, kContextHidden, k * d, rng);
  add_affine(m, "context", "fc2", {kContextHidden, k * c}, k * c, kContextHidden, rng);
  return m;
}

}  // namespace

ModelParams ModelParams::initialize(const ModelDims& dims, std::uint64_t seed) {
  Rng rng(seed);
  return build_model(dims, &rng);
}

ModelParams ModelParams::layout(const ModelDims& dims) { return build_model(dims, nullptr); }

std::size_t ModelParams::group_element_count(std::string_view group) const {
  std::size_t n = 0;
  for (const auto& [name, t] : params) {
    if (name.size() > group.size() && name.compare(0, group.size(), group) == 0 && name[group.size()] == '/')
      n += t.numel();
  }
  return n;
}

LatentCode encode(const Tensor& x, ModelParams& model, Mode mode, Rng* rng) {
  const auto& dims = model.dims;
  if (x.ndim() != 4 || x.dim(1) != ModelDims::kChannels || x.dim(2) != dims.image_size || x.dim(3) != dims.image_size) {
    throw DimensionError("encode: expected B x 3 x " + std::to_string(dims.image_size) + " x " +
                         std::to_string(dims.image_size) + " input, got " + shape_to_string(x.shape()));
  }
  const std::size_t batch = x.dim(0), k = dims.attributes, d = dims.latent_dim;

  Tensor h = x;
  std::size_t bn = 1;
  for (const auto& l : kEncoderConvs) {
    h = elu(conv2d(h, weight(model, "encoder", l.name), bias(model, "encoder", l.name), kStride));
    h = norm(h, model, "encoder", "bn" + std::to_string(bn++), mode);
  }
  h = reshape(h, {batch, dims.flatten_width()});
  h = elu(dense(h, weight(model, "encoder", "fc1"), bias(model, "encoder", "fc1")));
  h = norm(h, model, "encoder", "bn" + std::to_string(bn), mode);
  Tensor head = dense(h, weight(model, "encoder", "head"), bias(model, "encoder", "head"));

  LatentCode code;
  code.z_f = reshape(narrow_cols(head, 0, k * d), {batch, k, d});
  code.mu_u = narrow_cols(head, k * d, d);
  code.logvar_u = narrow_cols(head, (k + 1) * d, d);
  code.eps = Tensor::zeros({batch, d});
  if (rng != nullptr) rng->fill_normal(code.eps.values());
  code.z_u = add(code.mu_u, mul(exp(scale(code.logvar_u, 0.5f)), code.eps));
  return code;
}

Tensor decode(const Tensor& z_f, const Tensor& z_u, ModelParams& model, Mode mode) {
  const auto& dims = model.dims;
  const std::size_t k = dims.attributes, d = dims.latent_dim;
  if (z_f.ndim() != 3 || z_f.dim(1) != k || z_f.dim(2) != d) {
    throw DimensionError("decode: z_f must be B x " + std::to_string(k) + " x " + std::to_string(d) + ", got " +
                         shape_to_string(z_f.shape()));
  }
  const std::size_t batch = z_f.dim(0);
  if (z_u.ndim() != 2 || z_u.dim(0) != batch || z_u.dim(1) != d) {
    throw DimensionError("decode: z_u must be " + std::to_string(batch) + " x " + std::to_string(d) + ", got " +
                         shape_to_string(z_u.shape()));
  }
  Tensor h = concat_cols({reshape(z_f, {batch, k * d}), z_u});
  h = norm(relu(dense(h, weight(model, "decoder", "fc1"), bias(model, "decoder", "fc1"))), model, "decoder", "bn1",
           mode);
  h = norm(relu(dense(h, weight(model, "decoder", "fc2"), bias(model, "decoder", "fc2"))), model, "decoder", "bn2",
           mode);
  const std::size_t s = dims.encoder_spatial().back();
  h = reshape(h, {batch, ModelDims::kTopChannels, s, s});
  std::size_t bn = 3;
  for (const auto& l : kDecoderDeconvs) {
    h = conv_transpose2d(h, weight(model, "decoder", l.name), bias(model, "decoder", l.name), kStride);
    if (l.name == kDecoderDeconvs.back().name) return sigmoid(h);
    h = norm(relu(h), model, "decoder", "bn" + std::to_string(bn++), mode);
  }
  return h;
}

Tensor context_of_batch(const Tensor& z_f, const ModelParams& model) {
  const std::size_t k = model.dims.attributes, d = model.dims.latent_dim;
  if (z_f.ndim() != 3 || z_f.dim(1) != k || z_f.dim(2) != d) {
    throw DimensionError("context_of_batch: expected B x " + std::to_string(k) + " x " + std::to_string(d) + ", got " +
                         shape_to_string(z_f.shape()));
  }
  auto pooled = mean_rows(reshape(z_f, {z_f.dim(0), k * d}));
  return reshape(psi(pooled, model), {k, model.dims.context_dim});
}

Tensor context_of_sample(const Tensor& z_f_j, const ModelParams& model) {
  const std::size_t k = model.dims.attributes, d = model.dims.latent_dim;
  if (z_f_j.numel() != k * d) {
    throw DimensionError("context_of_sample: expected " + std::to_string(k) + " x " + std::to_string(d) + ", got " +
                         shape_to_string(z_f_j.shape()));
  }
  return reshape(psi(reshape(z_f_j, {1, k * d}), model), {k, model.dims.context_dim});
}

Tensor context_projections(const Tensor& z_f, const ModelParams& model) {
  const std::size_t k = model.dims.attributes, d = model.dims.latent_dim;
  if (z_f.ndim() != 3 || z_f.dim(1) != k || z_f.dim(2) != d) {
    throw DimensionError("context_projections: expected B x " + std::to_string(k) + " x " + std::to_string(d) +
                         ", got " + shape_to_string(z_f.shape()));
  }
  const std::size_t batch = z_f.dim(0);
  return reshape(psi(reshape(z_f, {batch, k * d}), model), {batch, k, model.dims.context_dim});
}

LatentCode swap_attribute(const LatentCode& a, const LatentCode& b, std::size_t attribute) {
  if (a.z_f.shape() != b.z_f.shape() || a.z_u.shape() != b.z_u.shape()) {
    throw DimensionError("swap_attribute: codes differ in shape " + shape_to_string(a.z_f.shape()) + " vs " +
                         shape_to_string(b.z_f.shape()));
  }
  const std::size_t k = a.z_f.dim(1), d = a.z_f.dim(2);
  if (attribute >= k) {
    throw ContractError("swap_attribute: attribute index " + std::to_string(attribute) +
                        " out of range for k = " + std::to_string(k));
  }
  LatentCode out{a.z_f.clone(), a.mu_u.clone(), a.logvar_u.clone(), a.z_u.clone(), a.eps.clone()};
  auto dst = out.z_f.values();
  auto src = b.z_f.values();
  for (std::size_t row = 0; row < a.batch(); ++row) {
    const std::size_t off = (row * k + attribute) * d;
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(off), d, dst.begin() + static_cast<std::ptrdiff_t>(off));
  }
  return out;
}

}  // namespace discont
