#include "discont/evaluation.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "discont/error.hpp"

namespace discont {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::size_t kEncodeChunk = 64;

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::ofstream open_output(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void check_images(const Tensor& images, std::string_view what) {
  if (images.ndim() != 4 || images.dim(1) != 3) {
    throw DimensionError(std::string(what) + ": expected B x 3 x H x W images, got " + shape_to_string(images.shape()));
  }
}

}  // namespace

// ---- PCA ----------------------------------------------------------------------

Samples Pca::transform(const Samples& data) const {
  if (data.dim != mean.size()) {
    throw DimensionError("Pca::transform: data has " + std::to_string(data.dim) + " columns, PCA was fit on " +
                         std::to_string(mean.size()));
  }
  Samples out(data.n, components.n);
  for (std::size_t i = 0; i < data.n; ++i) {
    for (std::size_t c = 0; c < components.n; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < data.dim; ++j) acc += (data(i, j) - mean[j]) * components(c, j);
      out(i, c) = acc;
    }
  }
  return out;
}

Pca fit_pca(const Samples& data, std::size_t components) {
  if (data.n < 2 || data.dim == 0) throw ConfigError("PCA needs at least 2 samples");
  if (components == 0 || components > data.dim || components > data.n) {
    throw ConfigError("cannot extract " + std::to_string(components) + " principal components from " +
                      std::to_string(data.n) + " samples of dimension " + std::to_string(data.dim));
  }
  Eigen::Map<const RowMatrix> x(data.values.data(), static_cast<Eigen::Index>(data.n),
                                static_cast<Eigen::Index>(data.dim));
  Pca pca;
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const RowMatrix centered = x.rowwise() - mu;
  pca.mean.assign(mu.data(), mu.data() + mu.size());

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const auto& v = svd.matrixV();
  const double denom = static_cast<double>(data.n - 1);
  const double total = centered.squaredNorm() / denom;

  pca.components = Samples(components, data.dim);
  for (std::size_t c = 0; c < components; ++c) {
    const auto col = v.col(static_cast<Eigen::Index>(c));
    Eigen::Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    const double sign = col(arg) < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < data.dim; ++j) pca.components(c, j) = sign * col(static_cast<Eigen::Index>(j));
    const double var = s(static_cast<Eigen::Index>(c)) * s(static_cast<Eigen::Index>(c)) / denom;
    pca.explained_variance.push_back(var);
    pca.explained_variance_ratio.push_back(total > 0.0 ? var / total : 0.0);
  }
  return pca;
}

// ---- latent codes ---------------------------------------------------------------

std::string chunk_label(std::size_t chunk, std::size_t attributes) {
  return chunk < attributes ? "z_f" + std::to_string(chunk + 1) : std::string("z_u");
}

LatentMatrix encode_dataset(ModelParams& model, const FactorDataset& ds, std::size_t samples) {
  if (samples == 0 || samples > ds.size()) {
    throw ConfigError("requested " + std::to_string(samples) + " samples from a dataset of " +
                      std::to_string(ds.size()));
  }
  const std::size_t k = model.dims.attributes, d = model.dims.latent_dim;
  const std::size_t per_image = ds.images.numel() / ds.size();
  LatentMatrix out;
  out.x = Samples(samples, per_image);
  for (std::size_t c = 0; c <= k; ++c) out.chunks.emplace_back(samples, d);
  const auto pixels = ds.images.values();
  std::copy(pixels.begin(), pixels.begin() + static_cast<std::ptrdiff_t>(samples * per_image), out.x.values.begin());

  NoGradGuard guard;
  for (std::size_t start = 0; start < samples; start += kEncodeChunk) {
    const std::size_t count = std::min(kEncodeChunk, samples - start);
    Shape shape = ds.images.shape();
    shape[0] = count;
    Tensor batch(shape, std::vector<float>(pixels.begin() + static_cast<std::ptrdiff_t>(start * per_image),
                                           pixels.begin() + static_cast<std::ptrdiff_t>((start + count) * per_image)));
    const auto code = encode(batch, model, Mode::Eval, nullptr);
    const auto zf = code.z_f.values();
    const auto mu = code.mu_u.values();
    for (std::size_t b = 0; b < count; ++b) {
      for (std::size_t c = 0; c < k; ++c)
        for (std::size_t j = 0; j < d; ++j) out.chunks[c](start + b, j) = zf[(b * k + c) * d + j];
      for (std::size_t j = 0; j < d; ++j) out.chunks[k](start + b, j) = mu[b * d + j];
    }
  }
  return out;
}

std::vector<ChunkInformativeness> informativeness_report(ModelParams& model, const FactorDataset& ds,
                                                         const InformativenessOptions& options) {
  const std::size_t flat = ds.images.numel() / std::max<std::size_t>(ds.size(), 1);
  if (options.pca_dims == 0 || options.pca_dims > flat) {
    throw ConfigError("pca_dims = " + std::to_string(options.pca_dims) + " must lie in [1, " + std::to_string(flat) +
                      "], the flattened image size");
  }
  const auto latents = encode_dataset(model, ds, options.samples);
  const auto reduced = fit_pca(latents.x, options.pca_dims).transform(latents.x);
  std::vector<ChunkInformativeness> report;
  for (std::size_t c = 0; c < latents.chunks.size(); ++c) {
    report.push_back({chunk_label(c, model.dims.attributes),
                      estimate_mi_ksg(reduced, latents.chunks[c], options.k_neighbors, mix_seed(options.seed, c))});
  }
  return report;
}

// ---- projection -----------------------------------------------------------------

ProjectionReport project_2d(const std::vector<Samples>& groups, std::vector<std::string> names) {
  if (groups.size() != names.size()) throw ContractError("project_2d: one name per group is required");
  std::size_t total = 0;
  const std::size_t dim = groups.empty() ? 0 : groups.front().dim;
  for (const auto& g : groups) {
    if (g.dim != dim) throw DimensionError("project_2d: groups have different dimensions");
    total += g.n;
  }
  if (total < 3) throw ConfigError("a projection needs at least 3 points, got " + std::to_string(total));
  if (dim < 2) throw DimensionError("project_2d: points must have at least 2 dimensions");

  Samples stacked(total, dim);
  ProjectionReport report;
  std::size_t row = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::copy(groups[g].values.begin(), groups[g].values.end(),
              stacked.values.begin() + static_cast<std::ptrdiff_t>(row * dim));
    report.labels.insert(report.labels.end(), groups[g].n, g);
    row += groups[g].n;
  }
  const auto pca = fit_pca(stacked, 2);
  const auto projected = pca.transform(stacked);
  for (std::size_t i = 0; i < total; ++i) report.points.push_back({projected(i, 0), projected(i, 1)});
  report.chunk_names = std::move(names);
  report.explained_variance_ratio = {pca.explained_variance_ratio[0], pca.explained_variance_ratio[1]};
  return report;
}

ProjectionReport project_latents_2d(ModelParams& model, const FactorDataset& ds, std::size_t samples) {
  auto latents = encode_dataset(model, ds, samples);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < latents.chunks.size(); ++c) names.push_back(chunk_label(c, model.dims.attributes));
  return project_2d(latents.chunks, std::move(names));
}

// ---- swap grid --------------------------------------------------------------------

SwapGrid swap_images(ModelParams& model, const Tensor& batch_a, const Tensor& batch_b, std::size_t attribute) {
  check_images(batch_a, "swap_images");
  if (batch_a.shape() != batch_b.shape()) {
    throw DimensionError("swap_images: batches " + shape_to_string(batch_a.shape()) + " and " +
                         shape_to_string(batch_b.shape()) + " differ");
  }
  NoGradGuard guard;
  const auto a = encode(batch_a, model, Mode::Eval, nullptr);
  const auto b = encode(batch_b, model, Mode::Eval, nullptr);
  const auto s = swap_attribute(a, b, attribute);
  return {decode(a.z_f, a.z_u, model, Mode::Eval), decode(b.z_f, b.z_u, model, Mode::Eval),
          decode(s.z_f, s.z_u, model, Mode::Eval)};
}

SwapGrid swap_grid(ModelParams& model, const Tensor& batch_a, const Tensor& batch_b, std::size_t attribute,
                   const std::filesystem::path& out_path) {
  auto grid = swap_images(model, batch_a, batch_b, attribute);
  const Tensor rows[] = {grid.recon_a, grid.recon_b, grid.swapped};
  write_ppm_grid(rows, out_path);
  return grid;
}

void write_ppm_grid(std::span<const Tensor> rows, const std::filesystem::path& path) {
  if (rows.empty()) throw ContractError("write_ppm_grid: no rows");
  for (const auto& r : rows) {
    check_images(r, "write_ppm_grid");
    if (r.shape() != rows.front().shape()) throw DimensionError("write_ppm_grid: rows have different shapes");
  }
  const std::size_t n = rows.front().dim(0), h = rows.front().dim(2), w = rows.front().dim(3);
  const std::size_t width = n * w, height = rows.size() * h;
  std::string pixels(width * height * 3, '\0');
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto v = rows[r].values();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) {
            const double val = std::clamp(static_cast<double>(v[((i * 3 + c) * h + y) * w + x]), 0.0, 1.0);
            const std::size_t py = r * h + y, px = i * w + x;
            pixels[(py * width + px) * 3 + c] = static_cast<char>(static_cast<unsigned char>(std::lround(val * 255.0)));
          }
  }
  auto out = open_output(path, std::ios::out | std::ios::binary);
  out << "P6\n" << width << ' ' << height << "\n255\n";
  out.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

// ---- factor probe ---------------------------------------------------------------

double rgb_hue(double r, double g, double b) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double delta = mx - mn;
  if (delta <= 0.0) return 0.0;
  double h;
  if (mx == r) {
    h = (g - b) / delta;
  } else if (mx == g) {
    h = 2.0 + (b - r) / delta;
  } else {
    h = 4.0 + (r - g) / delta;
  }
  h /= 6.0;
  h -= std::floor(h);
  return h >= 1.0 ? 0.0 : h;
}

double circular_hue_distance(double a, double b) {
  double d = std::abs(a - b);
  d -= std::floor(d);
  return std::min(d, 1.0 - d);
}

std::vector<FactorProbe> factor_probe(const Tensor& images) {
  check_images(images, "factor_probe");
  const std::size_t n = images.dim(0), h = images.dim(2), w = images.dim(3), plane = h * w;
  const auto v = images.values();
  std::vector<FactorProbe> out(n);
  std::vector<float> border;
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 3> background{};
    for (std::size_t c = 0; c < 3; ++c) {
      const float* img = v.data() + (i * 3 + c) * plane;
      border.clear();
      for (std::size_t x = 0; x < w; ++x) {
        border.push_back(img[x]);
        if (h > 1) border.push_back(img[(h - 1) * w + x]);
      }
      for (std::size_t y = 1; y + 1 < h; ++y) {
        border.push_back(img[y * w]);
        if (w > 1) border.push_back(img[y * w + w - 1]);
      }
      auto mid = border.begin() + static_cast<std::ptrdiff_t>(border.size() / 2);
      std::nth_element(border.begin(), mid, border.end());
      background[c] = *mid;
    }
    std::array<double, 3> color_sum{};
    double row_sum = 0.0, col_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        std::array<double, 3> px{};
        double dist = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
          px[c] = v[(i * 3 + c) * plane + y * w + x];
          dist = std::max(dist, std::abs(px[c] - background[c]));
        }
        if (dist <= kForegroundThreshold) continue;
        for (std::size_t c = 0; c < 3; ++c) color_sum[c] += px[c];
        row_sum += static_cast<double>(y) + 0.5;
        col_sum += static_cast<double>(x) + 0.5;
        ++count;
      }
    if (count == 0) continue;
    const double inv = 1.0 / static_cast<double>(count);
    out[i] = {true, rgb_hue(color_sum[0] * inv, color_sum[1] * inv, color_sum[2] * inv), row_sum * inv, col_sum * inv,
              count};
  }
  return out;
}

std::optional<std::array<std::int32_t, 3>> probe_factors(const FactorProbe& probe, const ColorPositionSpec& spec) {
  if (!probe.found) return std::nullopt;
  const double cell_w = static_cast<double>(spec.image_size / spec.n_x);
  const double cell_h = static_cast<double>(spec.image_size / spec.n_y);
  const auto color = static_cast<std::int64_t>(std::lround(probe.hue * static_cast<double>(spec.n_colors))) %
                     static_cast<std::int64_t>(spec.n_colors);
  const auto cx = static_cast<std::int64_t>(std::floor(probe.col / cell_w));
  const auto cy = static_cast<std::int64_t>(std::floor(probe.row / cell_h));
  if (cx < 0 || cy < 0 || cx >= static_cast<std::int64_t>(spec.n_x) || cy >= static_cast<std::int64_t>(spec.n_y))
    return std::nullopt;
  return std::array<std::int32_t, 3>{static_cast<std::int32_t>(color), static_cast<std::int32_t>(cx),
                                     static_cast<std::int32_t>(cy)};
}

// ---- report files ---------------------------------------------------------------

void write_informativeness_csv(const std::vector<ChunkInformativeness>& report, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "chunk,mi_nats,estimator,k,n\n";
  for (const auto& r : report) {
    out << r.chunk << ',' << fmt(r.mi.value) << ',' << r.mi.estimator << ',' << r.mi.k_neighbors << ',' << r.mi.samples
        << '\n';
  }
  if (!out) throw IoError("cannot write " + path.string());
}

void write_projection_csv(const ProjectionReport& report, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "x,y,chunk_label\n";
  for (std::size_t i = 0; i < report.points.size(); ++i) {
    out << fmt(report.points[i][0]) << ',' << fmt(report.points[i][1]) << ',' << report.chunk_names[report.labels[i]]
        << '\n';
  }
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace discont
