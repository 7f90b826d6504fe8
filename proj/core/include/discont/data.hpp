#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "discont/augment.hpp"
#include "discont/tensor.hpp"

namespace discont {

struct FactorInfo {
  std::string name;
  std::size_t cardinality;
};

// Images aligned index-by-index with integer ground-truth factors.
struct FactorDataset {
  Tensor images;                        // N x 3 x H x W in [0,1]
  std::vector<std::int32_t> factors;    // N x F, row-major
  std::vector<FactorInfo> factor_info;  // F entries

  std::size_t size() const { return images.dim(0); }
  std::size_t factor_count() const { return factor_info.size(); }
  std::size_t image_size() const { return images.dim(2); }
  std::int32_t factor(std::size_t sample, std::size_t f) const { return factors[sample * factor_count() + f]; }

  void validate() const;
};

// ---- synthetic color / position generator ----------------------------------

inline constexpr std::size_t kPaletteSize = 12;
inline constexpr std::size_t kSquareSide = 8;
inline constexpr std::array<float, 3> kBackground{0.5f, 0.5f, 0.5f};

struct ColorPositionSpec {
  std::size_t n_colors = 8;
  std::size_t n_x = 4;
  std::size_t n_y = 4;
  std::size_t image_size = 32;
  std::uint64_t seed = 0;
};

// Fully saturated color with hue index / n_colors.
std::array<float, 3> palette_color(std::size_t index, std::size_t n_colors);

// Top-left pixel of the square drawn for grid cell (cell_x, cell_y).
std::array<std::size_t, 2> square_origin(std::size_t cell_x, std::size_t cell_y, const ColorPositionSpec& spec);

// One image per (color, x, y) combination on a gray canvas, in a
// seed-determined order. Factors are named "color", "pos_x", "pos_y".
FactorDataset generate_color_position(const ColorPositionSpec& spec);

// `copies` jittered replicas of every sample; each replica passes through
// positive augmentations only, so its factors are unchanged.
FactorDataset oversample_with_jitter(const FactorDataset& ds, std::size_t copies, std::uint64_t seed);

// ---- DSCT tensor file --------------------------------------------------------

inline constexpr std::uint32_t kTensorFileVersion = 1;

std::vector<std::uint8_t> encode_tensor_file(const Tensor& t);
Tensor decode_tensor_file(std::span<const std::uint8_t> bytes);
void write_tensor_file(const Tensor& t, const std::filesystem::path& path);
Tensor read_tensor_file(const std::filesystem::path& path);

// Directory with images.dsct, factors.dsct and meta.txt ("name:cardinality" per line).
void save_dataset(const FactorDataset& ds, const std::filesystem::path& dir);
FactorDataset load_dataset(const std::filesystem::path& dir);

// ---- batching ----------------------------------------------------------------

struct Batch {
  Tensor images;
  std::vector<std::int32_t> factors;
  std::vector<std::size_t> indices;
};

Batch gather(const FactorDataset& ds, std::span<const std::size_t> indices);

// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng);

// One epoch of full batches over a shuffled order; the incomplete tail is dropped.
class BatchSequence {
 public:
  BatchSequence(const FactorDataset& ds, std::size_t batch_size, std::vector<std::size_t> order);

  std::size_t size() const { return order_.size() / batch_size_; }
  Batch operator[](std::size_t i) const;
  const std::vector<std::size_t>& order() const { return order_; }

 private:
  const FactorDataset* ds_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
};

BatchSequence iterate_batches(const FactorDataset& ds, std::size_t batch_size, std::uint64_t shuffle_seed);

}  // namespace discont
