#include "discont/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "discont/error.hpp"

namespace discont {

namespace {

constexpr std::array<std::pair<TransformId, std::string_view>, 7> kNames{{
    {TransformId::GaussianNoise, "gaussian_noise"},
    {TransformId::GaussianSmooth, "gaussian_smooth"},
    {TransformId::Grayscale, "grayscale"},
    {TransformId::Flip, "flip"},
    {TransformId::Rotate, "rotate"},
    {TransformId::CropResize, "crop_resize"},
    {TransformId::Cutout, "cutout"},
}};

struct Dims {
  std::size_t batch, channels, height, width;
  std::size_t plane() const { return height * width; }
  std::size_t image() const { return channels * plane(); }
};

Dims dims_of(const Shape& shape) {
  if (shape.size() != 4) {
    throw DimensionError("augmentation expects a B x C x H x W batch, got " + shape_to_string(shape));
  }
  return {shape[0], shape[1], shape[2], shape[3]};
}

template <typename T>
bool subset_of(const std::vector<T>& values, std::initializer_list<T> allowed) {
  return !values.empty() && std::all_of(values.begin(), values.end(), [&](const T& v) {
    return std::find(allowed.begin(), allowed.end(), v) != allowed.end();
  });
}

template <typename T>
const T& pick(const std::vector<T>& menu, Rng& rng) {
  if (menu.empty()) throw ConfigError("empty augmentation parameter menu");
  return menu[rng.index(menu.size())];
}

void add_noise(const Dims& d, std::span<float> px, const NoiseParams& p, std::size_t first_index) {
  const double stddev = p.sigma / 255.0;
  std::vector<float> noise(d.image());
  for (std::size_t b = 0; b < d.batch; ++b) {
    Rng stream(mix_seed(p.seed, first_index + b));
    stream.fill_normal(noise, 0.0, stddev);
    float* img = px.data() + b * d.image();
    for (std::size_t i = 0; i < noise.size(); ++i) img[i] = std::clamp(img[i] + noise[i], 0.0f, 1.0f);
  }
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(2.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    const double w = std::exp(-(t * t) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(t + radius)] = w;
    total += w;
  }
  for (auto& w : k) w /= total;
  return k;
}

void smooth(const Dims& d, std::span<float> px, const SmoothParams& p) {
  if (!(p.sigma > 0.0)) return;
  const auto kernel = gaussian_kernel(p.sigma);
  const long radius = static_cast<long>(kernel.size() / 2);
  const long h = static_cast<long>(d.height), w = static_cast<long>(d.width);
  std::vector<double> tmp(d.plane());
  for (std::size_t plane = 0; plane < d.batch * d.channels; ++plane) {
    float* img = px.data() + plane * d.plane();
    for (long y = 0; y < h; ++y)
      for (long x = 0; x < w; ++x) {
        double acc = 0.0;
        for (long t = -radius; t <= radius; ++t) {
          const long xx = std::clamp(x + t, 0L, w - 1);
          acc += kernel[static_cast<std::size_t>(t + radius)] * img[y * w + xx];
        }
        tmp[static_cast<std::size_t>(y * w + x)] = acc;
      }
    for (long y = 0; y < h; ++y)
      for (long x = 0; x < w; ++x) {
        double acc = 0.0;
        for (long t = -radius; t <= radius; ++t) {
          const long yy = std::clamp(y + t, 0L, h - 1);
          acc += kernel[static_cast<std::size_t>(t + radius)] * tmp[static_cast<std::size_t>(yy * w + x)];
        }
        img[y * w + x] = std::clamp(static_cast<float>(acc), 0.0f, 1.0f);
      }
  }
}

void grayscale(const Dims& d, std::span<float> px) {
  if (d.channels != 3) {
    throw UnsupportedShapeError("grayscale needs 3 channels, got " + std::to_string(d.channels));
  }
  for (std::size_t b = 0; b < d.batch; ++b) {
    float* r = px.data() + b * d.image();
    float* g = r + d.plane();
    float* bl = g + d.plane();
    for (std::size_t i = 0; i < d.plane(); ++i) {
      // Accumulate in double so an already-gray pixel maps to itself exactly.
      const double lum = 0.299 * r[i] + 0.587 * g[i] + 0.114 * bl[i];
      const float v = std::clamp(static_cast<float>(lum), 0.0f, 1.0f);
      r[i] = g[i] = bl[i] = v;
    }
  }
}

void flip(const Dims& d, std::span<float> px, FlipAxis axis) {
  for (std::size_t plane = 0; plane < d.batch * d.channels; ++plane) {
    float* img = px.data() + plane * d.plane();
    if (axis == FlipAxis::Horizontal) {
      for (std::size_t y = 0; y < d.height; ++y) std::reverse(img + y * d.width, img + (y + 1) * d.width);
    } else {
      for (std::size_t y = 0; y < d.height / 2; ++y)
        std::swap_ranges(img + y * d.width, img + (y + 1) * d.width, img + (d.height - 1 - y) * d.width);
    }
  }
}

void rotate(const Dims& d, std::span<float> px, int quarter_turns) {
  if (d.height != d.width) {
    throw UnsupportedShapeError("rotate requires square images, got " + std::to_string(d.height) + "x" +
                                std::to_string(d.width));
  }
  const int turns = ((quarter_turns % 4) + 4) % 4;
  if (turns == 0) return;
  const std::size_t n = d.width;
  std::vector<float> src(d.plane());
  for (std::size_t plane = 0; plane < d.batch * d.channels; ++plane) {
    float* img = px.data() + plane * d.plane();
    for (int t = 0; t < turns; ++t) {
      std::copy_n(img, d.plane(), src.begin());
      // 90 degrees counter-clockwise: out(y, x) = in(x, n-1-y)
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) img[y * n + x] = src[x * n + (n - 1 - y)];
    }
  }
}

void crop_resize(const Dims& d, std::span<float> px, const CropResizeParams& p) {
  if (p.side == 0 || p.top + p.side > d.height || p.left + p.side > d.width) {
    throw ContractError("crop_resize window exceeds the image");
  }
  const double scale_y = static_cast<double>(p.side) / static_cast<double>(d.height);
  const double scale_x = static_cast<double>(p.side) / static_cast<double>(d.width);
  const double last = static_cast<double>(p.side - 1);
  std::vector<float> src(d.plane());
  for (std::size_t plane = 0; plane < d.batch * d.channels; ++plane) {
    float* img = px.data() + plane * d.plane();
    std::copy_n(img, d.plane(), src.begin());
    for (std::size_t y = 0; y < d.height; ++y) {
      const double sy = std::clamp((static_cast<double>(y) + 0.5) * scale_y - 0.5, 0.0, last);
      const auto y0 = static_cast<std::size_t>(sy);
      const auto y1 = std::min(y0 + 1, p.side - 1);
      const double wy = sy - static_cast<double>(y0);
      for (std::size_t x = 0; x < d.width; ++x) {
        const double sx = std::clamp((static_cast<double>(x) + 0.5) * scale_x - 0.5, 0.0, last);
        const auto x0 = static_cast<std::size_t>(sx);
        const auto x1 = std::min(x0 + 1, p.side - 1);
        const double wx = sx - static_cast<double>(x0);
        auto at = [&](std::size_t yy, std::size_t xx) {
          return static_cast<double>(src[(p.top + yy) * d.width + p.left + xx]);
        };
        const double v =
            (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x1)) + wy * ((1 - wx) * at(y1, x0) + wx * at(y1, x1));
        img[y * d.width + x] = std::clamp(static_cast<float>(v), 0.0f, 1.0f);
      }
    }
  }
}

void cutout(const Dims& d, std::span<float> px, const CutoutParams& p) {
  if (p.top + p.side > d.height || p.left + p.side > d.width) {
    throw ContractError("cutout square exceeds the image");
  }
  for (std::size_t plane = 0; plane < d.batch * d.channels; ++plane) {
    float* img = px.data() + plane * d.plane();
    for (std::size_t y = p.top; y < p.top + p.side; ++y) std::fill_n(img + y * d.width + p.left, p.side, 0.0f);
  }
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::string_view transform_name(TransformId id) {
  for (const auto& [k, name] : kNames)
    if (k == id) return name;
  return "?";
}

std::optional<TransformId> parse_transform(std::string_view name) {
  for (const auto& [k, n] : kNames)
    if (n == name) return k;
  return std::nullopt;
}

bool is_positive(TransformId id) { return id == TransformId::GaussianNoise || id == TransformId::GaussianSmooth; }

TransformId transform_id(const TransformParams& params) {
  return std::visit(Overloaded{
                        [](const NoiseParams&) { return TransformId::GaussianNoise; },
                        [](const SmoothParams&) { return TransformId::GaussianSmooth; },
                        [](const GrayscaleParams&) { return TransformId::Grayscale; },
                        [](const FlipParams&) { return TransformId::Flip; },
                        [](const RotateParams&) { return TransformId::Rotate; },
                        [](const CropResizeParams&) { return TransformId::CropResize; },
                        [](const CutoutParams&) { return TransformId::Cutout; },
                    },
                    params);
}

std::string describe(const TransformParams& params) {
  std::ostringstream os;
  os << transform_name(transform_id(params));
  std::visit(
      Overloaded{
          [&](const NoiseParams& p) { os << "(sigma=" << p.sigma << ",seed=" << p.seed << ')'; },
          [&](const SmoothParams& p) { os << "(sigma=" << p.sigma << ')'; },
          [&](const GrayscaleParams&) {},
          [&](const FlipParams& p) { os << (p.axis == FlipAxis::Horizontal ? "(horizontal)" : "(vertical)"); },
          [&](const RotateParams& p) { os << '(' << 90 * p.quarter_turns << "deg)"; },
          [&](const CropResizeParams& p) { os << "(top=" << p.top << ",left=" << p.left << ",side=" << p.side << ')'; },
          [&](const CutoutParams& p) { os << "(top=" << p.top << ",left=" << p.left << ",side=" << p.side << ')'; },
      },
      params);
  return os.str();
}

void AugmentationSpec::validate() const {
  if (negatives.empty()) throw ConfigError("augmentation spec needs at least one negative transform");
  for (auto id : negatives) {
    if (is_positive(id)) {
      throw ConfigError(std::string(transform_name(id)) + " is a positive transform, not a negative one");
    }
  }
  for (auto id : positives) {
    if (!is_positive(id)) {
      throw ConfigError(std::string(transform_name(id)) + " is a negative transform, not a positive one");
    }
  }
  if (!(bernoulli_p >= 0.0 && bernoulli_p <= 1.0)) throw ConfigError("bernoulli_p must lie in [0,1]");
  if (!subset_of(ranges.noise_sigmas, {0.5, 1.0, 2.0, 5.0}))
    throw ConfigError("noise sigmas must be a non-empty subset of {0.5, 1, 2, 5}");
  if (!subset_of(ranges.smooth_sigmas, {0.1, 0.2, 0.5, 1.0}))
    throw ConfigError("smoothing sigmas must be a non-empty subset of {0.1, 0.2, 0.5, 1}");
  if (!subset_of(ranges.flip_axes, {FlipAxis::Horizontal, FlipAxis::Vertical}))
    throw ConfigError("flip axes must be a non-empty subset of {horizontal, vertical}");
  if (!subset_of(ranges.quarter_turns, {1, 2, 3}))
    throw ConfigError("rotations must be a non-empty subset of {90, 180, 270} degrees");
  if (!subset_of(ranges.cutout_sides, {std::size_t{5}, std::size_t{10}, std::size_t{15}, std::size_t{20}}))
    throw ConfigError("cutout sides must be a non-empty subset of {5, 10, 15, 20}");
  if (!(ranges.crop_min_fraction > 0.0 && ranges.crop_min_fraction <= ranges.crop_max_fraction &&
        ranges.crop_max_fraction <= 1.0))
    throw ConfigError("crop fractions must satisfy 0 < min <= max <= 1");
}

TransformParams sample_transform(TransformId id, const Shape& batch_shape, const TransformRanges& ranges, Rng& rng) {
  const Dims d = dims_of(batch_shape);
  switch (id) {
    case TransformId::GaussianNoise: {
      const double sigma = pick(ranges.noise_sigmas, rng);
      return NoiseParams{sigma, rng.next_u64()};
    }
    case TransformId::GaussianSmooth:
      return SmoothParams{pick(ranges.smooth_sigmas, rng)};
    case TransformId::Grayscale:
      return GrayscaleParams{};
    case TransformId::Flip:
      return FlipParams{pick(ranges.flip_axes, rng)};
    case TransformId::Rotate:
      return RotateParams{pick(ranges.quarter_turns, rng)};
    case TransformId::CropResize: {
      const double frac = rng.uniform(ranges.crop_min_fraction, ranges.crop_max_fraction);
      const std::size_t limit = std::min(d.height, d.width);
      const auto side =
          std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(frac * static_cast<double>(limit))), 1, limit);
      const std::size_t top = rng.index(d.height - side + 1);
      const std::size_t left = rng.index(d.width - side + 1);
      return CropResizeParams{top, left, side};
    }
    case TransformId::Cutout: {
      const std::size_t side = std::min({pick(ranges.cutout_sides, rng), d.height, d.width});
      const std::size_t top = rng.index(d.height - side + 1);
      const std::size_t left = rng.index(d.width - side + 1);
      return CutoutParams{top, left, side};
    }
  }
  throw ContractError("unknown transform id");
}

Tensor apply_transform(const Tensor& batch, const TransformParams& params, std::size_t first_element) {
  const Dims d = dims_of(batch.shape());
  Tensor out = batch.clone();
  auto px = out.values();
  std::visit(Overloaded{
                 [&](const NoiseParams& p) { add_noise(d, px, p, first_element); },
                 [&](const SmoothParams& p) { smooth(d, px, p); },
                 [&](const GrayscaleParams&) { grayscale(d, px); },
                 [&](const FlipParams& p) { flip(d, px, p.axis); },
                 [&](const RotateParams& p) { rotate(d, px, p.quarter_turns); },
                 [&](const CropResizeParams& p) { crop_resize(d, px, p); },
                 [&](const CutoutParams& p) { cutout(d, px, p); },
             },
             params);
  return out;
}

Tensor apply_positive(const Tensor& batch, TransformId which, Rng& rng, const TransformRanges& ranges) {
  if (!is_positive(which)) {
    throw ContractError(std::string(transform_name(which)) + " is not a positive transform");
  }
  return apply_transform(batch, sample_transform(which, batch.shape(), ranges, rng));
}

Tensor apply_negative(const Tensor& batch, TransformId which, Rng& rng, const TransformRanges& ranges) {
  if (is_positive(which)) {
    throw ContractError(std::string(transform_name(which)) + " is not a negative transform");
  }
  return apply_transform(batch, sample_transform(which, batch.shape(), ranges, rng));
}

AugmentationOutcome compose_augmentations(const Tensor& batch, const AugmentationSpec& spec, Rng& rng) {
  AugmentationOutcome outcome{batch.clone(), std::vector<std::uint8_t>(spec.attributes(), 0), {}};
  for (std::size_t i = 0; i < spec.negatives.size(); ++i) {
    if (!rng.bernoulli(spec.bernoulli_p)) continue;
    outcome.mask[i] = 1;
    auto params = sample_transform(spec.negatives[i], batch.shape(), spec.ranges, rng);
    outcome.x_aug = apply_transform(outcome.x_aug, params);
    outcome.log.push_back(std::move(params));
  }
  for (auto id : spec.positives) {
    if (!rng.bernoulli(spec.bernoulli_p)) continue;
    auto params = sample_transform(id, batch.shape(), spec.ranges, rng);
    outcome.x_aug = apply_transform(outcome.x_aug, params);
    outcome.log.push_back(std::move(params));
  }
  return outcome;
}

}  // namespace discont
