#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "discont/data.hpp"
#include "discont/model.hpp"

namespace discont {

// Row-major N x dim sample matrix.
struct Samples {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  Samples() = default;
  Samples(std::size_t rows, std::size_t cols) : n(rows), dim(cols), values(rows * cols) {}
  double& operator()(std::size_t i, std::size_t j) { return values[i * dim + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * dim + j]; }
};

// ---- mutual information ------------------------------------------------------

inline constexpr std::string_view kKsgEstimator = "ksg1";
inline constexpr double kTieJitter = 1e-10;

struct MIEstimate {
  double value = 0.0;  // nats, clamped at zero
  double raw = 0.0;    // unclamped estimate
  std::string estimator{kKsgEstimator};
  std::size_t k_neighbors = 0;
  std::size_t samples = 0;
  bool jittered = false;  // exact ties were broken with seeded noise
};

// Kraskov-Stogbauer-Grassberger estimator (first variant, max-norm) on
// columns rescaled to unit variance.
// Needs at least 100 rows and k_neighbors in [1, n). Rows with exact
// duplicates in either variable get kTieJitter-scale noise drawn from
// `jitter_seed`.
MIEstimate estimate_mi_ksg(const Samples& x, const Samples& z, std::size_t k_neighbors, std::uint64_t jitter_seed = 0);

// ---- PCA ----------------------------------------------------------------------

struct Pca {
  std::vector<double> mean;  // dim
  Samples components;        // m x dim, unit rows
  std::vector<double> explained_variance;
  std::vector<double> explained_variance_ratio;

  Samples transform(const Samples& data) const;
};

// Top `components` principal axes of `data`. Each axis is oriented so that
// its largest-magnitude loading is positive.
Pca fit_pca(const Samples& data, std::size_t components);

// ---- informativeness ------------------------------------------------------------

struct ChunkInformativeness {
  std::string chunk;  // "z_f1" .. "z_fk", "z_u"
  MIEstimate mi;
};

struct InformativenessOptions {
  std::size_t samples = 512;
  std::size_t pca_dims = 32;
  std::size_t k_neighbors = 3;
  std::uint64_t seed = 0;
};

// I(x, chunk) for every feature chunk and z_u over the first `samples`
// images, with x reduced to `pca_dims` principal components. Codes are the
// eval-mode posterior means.
std::vector<ChunkInformativeness> informativeness_report(ModelParams& model, const FactorDataset& ds,
                                                         const InformativenessOptions& options = {});

struct LatentMatrix {
  Samples x;                    // flattened images
  std::vector<Samples> chunks;  // k feature chunks then mu_u, each n x d
};

// Eval-mode codes for the first `samples` images.
LatentMatrix encode_dataset(ModelParams& model, const FactorDataset& ds, std::size_t samples);

std::string chunk_label(std::size_t chunk, std::size_t attributes);

// ---- 2-D projection -----------------------------------------------------------

struct ProjectionReport {
  std::vector<std::array<double, 2>> points;
  std::vector<std::size_t> labels;  // index into chunk_names
  std::vector<std::string> chunk_names;
  std::array<double, 2> explained_variance_ratio{};
};

// PCA to two dimensions of labeled points that share one dimension.
ProjectionReport project_2d(const std::vector<Samples>& groups, std::vector<std::string> names);

// Every chunk vector of the first `samples` images, chunk-major.
ProjectionReport project_latents_2d(ModelParams& model, const FactorDataset& ds, std::size_t samples);

// ---- attribute swap grid ------------------------------------------------------

struct SwapGrid {
  Tensor recon_a;  // n x 3 x H x W
  Tensor recon_b;
  Tensor swapped;  // decode of a's code with chunk `attribute` taken from b
};

// 0-based attribute index. Codes are eval-mode posterior means.
SwapGrid swap_images(ModelParams& model, const Tensor& batch_a, const Tensor& batch_b, std::size_t attribute);

// Writes the rows of `grid` as a (3H) x (nW) binary PPM and returns the grid.
SwapGrid swap_grid(ModelParams& model, const Tensor& batch_a, const Tensor& batch_b, std::size_t attribute,
                   const std::filesystem::path& out_path);

// Each tensor is one row of n images; all rows must share a shape.
void write_ppm_grid(std::span<const Tensor> rows, const std::filesystem::path& path);

// ---- factor probe -------------------------------------------------------------

inline constexpr double kForegroundThreshold = 0.1;

struct FactorProbe {
  bool found = false;  // false when no pixel clears the threshold
  double hue = 0.0;    // [0, 1) of the mean foreground color
  double row = 0.0;    // foreground centroid, pixel centers at i + 0.5
  double col = 0.0;
  std::size_t pixels = 0;
};

std::vector<FactorProbe> factor_probe(const Tensor& images);

double rgb_hue(double r, double g, double b);
double circular_hue_distance(double a, double b);

// Generator factor indices (color, pos_x, pos_y) implied by a probe.
std::optional<std::array<std::int32_t, 3>> probe_factors(const FactorProbe& probe, const ColorPositionSpec& spec);

// ---- report files ---------------------------------------------------------------

void write_informativeness_csv(const std::vector<ChunkInformativeness>& report, const std::filesystem::path& path);
void write_projection_csv(const ProjectionReport& report, const std::filesystem::path& path);

}  // namespace discont
