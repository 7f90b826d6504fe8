#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "discont/rng.hpp"
#include "discont/tensor.hpp"

namespace discont {

enum class TransformId { GaussianNoise, GaussianSmooth, Grayscale, Flip, Rotate, CropResize, Cutout };

std::string_view transform_name(TransformId id);
std::optional<TransformId> parse_transform(std::string_view name);
bool is_positive(TransformId id);

enum class FlipAxis { Horizontal, Vertical };

// Sampled parameters of one transform instance. Applying a record is fully
// deterministic, so a log of records replays an augmentation exactly.
struct NoiseParams {
  double sigma;        // on the 0-255 intensity scale
  std::uint64_t seed;  // per-element noise streams derive from this
};
struct SmoothParams {
  double sigma;  // pixels
};
struct GrayscaleParams {};
struct FlipParams {
  FlipAxis axis;
};
struct RotateParams {
  int quarter_turns;  // counter-clockwise, 1..3
};
struct CropResizeParams {
  std::size_t top, left, side;
};
struct CutoutParams {
  std::size_t top, left, side;
};

using TransformParams =
    std::variant<NoiseParams, SmoothParams, GrayscaleParams, FlipParams, RotateParams, CropResizeParams, CutoutParams>;

TransformId transform_id(const TransformParams& params);
std::string describe(const TransformParams& params);

// Parameter menus; defaults are the full published ranges.
struct TransformRanges {
  std::vector<double> noise_sigmas{0.5, 1.0, 2.0, 5.0};
  std::vector<double> smooth_sigmas{0.1, 0.2, 0.5, 1.0};
  std::vector<FlipAxis> flip_axes{FlipAxis::Horizontal, FlipAxis::Vertical};
  std::vector<int> quarter_turns{1, 2, 3};
  double crop_min_fraction = 0.6;
  double crop_max_fraction = 0.9;
  std::vector<std::size_t> cutout_sides{5, 10, 15, 20};
};

struct AugmentationSpec {
  // negatives[i] perturbs attribute i; size() is the attribute count k.
  std::vector<TransformId> negatives{TransformId::Grayscale, TransformId::CropResize};
  std::vector<TransformId> positives{TransformId::GaussianNoise, TransformId::GaussianSmooth};
  double bernoulli_p = 0.5;
  TransformRanges ranges;

  std::size_t attributes() const { return negatives.size(); }
  // Throws ConfigError when a slot holds the wrong kind of transform or a
  // range leaves the published menu.
  void validate() const;
};

struct AugmentationOutcome {
  Tensor x_aug;
  std::vector<std::uint8_t> mask;    // mask[i] == 1 iff negatives[i] was applied
  std::vector<TransformParams> log;  // in application order
};

// Draws one parameter set for a whole batch of shape B x C x H x W.
TransformParams sample_transform(TransformId id, const Shape& batch_shape, const TransformRanges& ranges, Rng& rng);

// Deterministic application of a sampled record to a batch in [0,1].
// Element b is treated as element `first_element + b` of the batch the record
// was drawn for; only the per-element noise streams depend on it.
Tensor apply_transform(const Tensor& batch, const TransformParams& params, std::size_t first_element = 0);

Tensor apply_positive(const Tensor& batch, TransformId which, Rng& rng, const TransformRanges& ranges = {});
Tensor apply_negative(const Tensor& batch, TransformId which, Rng& rng, const TransformRanges& ranges = {});

// Mask and augmented batch generation: one Bernoulli draw per negative slot
// (applying n_i and setting mask[i] on success), then one per positive
// transform, in that order.
AugmentationOutcome compose_augmentations(const Tensor& batch, const AugmentationSpec& spec, Rng& rng);

}  // namespace discont
