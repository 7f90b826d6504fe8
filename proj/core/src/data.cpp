#include "discont/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "discont/error.hpp"

namespace discont {

namespace detail {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace detail

void FactorDataset::validate() const {
  if (!images.defined() || images.ndim() != 4 || images.dim(1) != 3 || images.dim(2) != images.dim(3)) {
    throw DimensionError("dataset images must be N x 3 x S x S");
  }
  if (factors.size() != size() * factor_count()) {
    throw DimensionError("dataset has " + std::to_string(factors.size()) + " factor entries for " +
                         std::to_string(size()) + " images and " + std::to_string(factor_count()) + " factors");
  }
}

std::array<float, 3> palette_color(std::size_t index, std::size_t n_colors) {
  const double hue = static_cast<double>(index % n_colors) / static_cast<double>(n_colors);
  const double h6 = hue * 6.0;
  const int sector = static_cast<int>(std::floor(h6)) % 6;
  const auto f = static_cast<float>(h6 - std::floor(h6));
  switch (sector) {
    case 0:
      return {1.0f, f, 0.0f};
    case 1:
      return {1.0f - f, 1.0f, 0.0f};
    case 2:
      return {0.0f, 1.0f, f};
    case 3:
      return {0.0f, 1.0f - f, 1.0f};
    case 4:
      return {f, 0.0f, 1.0f};
    default:
      return {1.0f, 0.0f, 1.0f - f};
  }
}

std::array<std::size_t, 2> square_origin(std::size_t cell_x, std::size_t cell_y, const ColorPositionSpec& spec) {
  const std::size_t cell_w = spec.image_size / spec.n_x, cell_h = spec.image_size / spec.n_y;
  return {cell_y * cell_h + (cell_h - kSquareSide) / 2, cell_x * cell_w + (cell_w - kSquareSide) / 2};
}

FactorDataset generate_color_position(const ColorPositionSpec& spec) {
  if (spec.n_colors == 0 || spec.n_colors > kPaletteSize) {
    throw ConfigError("n_colors must be in [1, " + std::to_string(kPaletteSize) + "]");
  }
  if (spec.n_x == 0 || spec.n_y == 0 || spec.n_x * kSquareSide > spec.image_size ||
      spec.n_y * kSquareSide > spec.image_size) {
    throw ConfigError("a " + std::to_string(spec.n_x) + "x" + std::to_string(spec.n_y) + " grid of " +
                      std::to_string(kSquareSide) + " px squares does not fit a " + std::to_string(spec.image_size) +
                      " px image");
  }
  const std::size_t n = spec.n_colors * spec.n_x * spec.n_y, s = spec.image_size, plane = s * s;
  Rng rng(spec.seed);
  const auto order = shuffled_indices(n, rng);

  FactorDataset ds;
  ds.images = Tensor({n, 3, s, s});
  ds.factors.resize(n * 3);
  ds.factor_info = {{"color", spec.n_colors}, {"pos_x", spec.n_x}, {"pos_y", spec.n_y}};
  auto px = ds.images.values();
  for (std::size_t slot = 0; slot < n; ++slot) {
    const std::size_t combo = order[slot];
    const std::size_t color = combo / (spec.n_x * spec.n_y);
    const std::size_t cx = (combo / spec.n_y) % spec.n_x;
    const std::size_t cy = combo % spec.n_y;
    ds.factors[slot * 3 + 0] = static_cast<std::int32_t>(color);
    ds.factors[slot * 3 + 1] = static_cast<std::int32_t>(cx);
    ds.factors[slot * 3 + 2] = static_cast<std::int32_t>(cy);
    const auto rgb = palette_color(color, spec.n_colors);
    const auto [top, left] = square_origin(cx, cy, spec);
    for (std::size_t c = 0; c < 3; ++c) {
      float* img = px.data() + (slot * 3 + c) * plane;
      std::fill_n(img, plane, kBackground[c]);
      for (std::size_t y = top; y < top + kSquareSide; ++y) std::fill_n(img + y * s + left, kSquareSide, rgb[c]);
    }
  }
  return ds;
}

FactorDataset oversample_with_jitter(const FactorDataset& ds, std::size_t copies, std::uint64_t seed) {
  ds.validate();
  if (copies == 0) throw ConfigError("oversampling factor must be positive");
  const std::size_t n = ds.size(), f = ds.factor_count();
  const std::size_t per_image = ds.images.numel() / n;
  Shape shape = ds.images.shape();
  shape[0] = n * copies;
  FactorDataset out;
  out.images = Tensor(shape);
  out.factor_info = ds.factor_info;
  out.factors.reserve(n * copies * f);
  Rng rng(seed);
  AugmentationSpec positives;
  auto dst = out.images.values();
  for (std::size_t copy = 0; copy < copies; ++copy) {
    Tensor block = ds.images.clone();
    if (copy > 0) {
      // The first replica stays clean; later ones get each positive with p = 1/2.
      for (auto id : positives.positives) {
        if (rng.bernoulli(0.5)) block = apply_positive(block, id, rng, positives.ranges);
      }
    }
    std::copy(block.values().begin(), block.values().end(),
              dst.begin() + static_cast<std::ptrdiff_t>(copy * n * per_image));
    out.factors.insert(out.factors.end(), ds.factors.begin(), ds.factors.end());
  }
  return out;
}

std::vector<std::uint8_t> encode_tensor_file(const Tensor& t) {
  detail::ByteWriter w;
  w.raw("DSCT");
  w.u32(kTensorFileVersion);
  w.u32(static_cast<std::uint32_t>(t.ndim()));
  for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  w.u8(0);
  w.f32s(t.values());
  return w.take();
}

Tensor decode_tensor_file(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "tensor file");
  if (r.raw(4, "magic") != "DSCT") throw FormatError("tensor file: bad magic (expected DSCT)");
  const auto version = r.u32("version");
  if (version != kTensorFileVersion) {
    throw VersionError("tensor file: unsupported version " + std::to_string(version) + " (reader is v" +
                       std::to_string(kTensorFileVersion) + ")");
  }
  const auto ndim = r.u32("ndim");
  if (ndim == 0 || ndim > 8) throw CorruptionError("tensor file: implausible ndim " + std::to_string(ndim));
  Shape shape;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const auto d = r.u32("dims");
    if (d == 0) throw CorruptionError("tensor file: zero dimension");
    count *= d;
    if (count > (std::uint64_t{1} << 40)) throw CorruptionError("tensor file: dimension product overflows");
    shape.push_back(d);
  }
  const auto dtype = r.u8("dtype");
  if (dtype != 0) throw UnsupportedDtypeError("tensor file: unknown dtype code " + std::to_string(dtype));
  if (r.remaining() != 4 * count) {
    throw CorruptionError("tensor file: payload holds " + std::to_string(r.remaining()) + " bytes, header declares " +
                          std::to_string(4 * count));
  }
  std::vector<float> values(count);
  r.f32s(values, "payload");
  return Tensor(std::move(shape), std::move(values));
}

void write_tensor_file(const Tensor& t, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_tensor_file(t));
}

Tensor read_tensor_file(const std::filesystem::path& path) { return decode_tensor_file(detail::read_file_bytes(path)); }

void save_dataset(const FactorDataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_tensor_file(ds.images, dir / "images.dsct");
  std::vector<float> f(ds.factors.begin(), ds.factors.end());
  write_tensor_file(Tensor({ds.size(), ds.factor_count()}, std::move(f)), dir / "factors.dsct");
  std::ofstream meta(dir / "meta.txt");
  if (!meta) throw IoError("cannot write " + (dir / "meta.txt").string());
  for (const auto& info : ds.factor_info) meta << info.name << ':' << info.cardinality << '\n';
}

FactorDataset load_dataset(const std::filesystem::path& dir) {
  FactorDataset ds;
  ds.images = read_tensor_file(dir / "images.dsct");
  const Tensor f = read_tensor_file(dir / "factors.dsct");
  std::ifstream meta(dir / "meta.txt");
  if (!meta) throw IoError("cannot open " + (dir / "meta.txt").string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(meta, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto colon = line.rfind(':');
    if (colon == std::string::npos || colon == 0) {
      throw FormatError("meta.txt line " + std::to_string(lineno) + ": expected name:cardinality");
    }
    std::size_t card = 0;
    try {
      card = std::stoul(line.substr(colon + 1));
    } catch (const std::exception&) {
      throw FormatError("meta.txt line " + std::to_string(lineno) + ": bad cardinality");
    }
    ds.factor_info.push_back({line.substr(0, colon), card});
  }
  if (f.ndim() != 2 || f.dim(0) != ds.images.dim(0) || f.dim(1) != ds.factor_info.size()) {
    throw FormatError("factors.dsct shape " + shape_to_string(f.shape()) + " disagrees with images/meta");
  }
  for (float v : f.values()) ds.factors.push_back(static_cast<std::int32_t>(v));
  ds.validate();
  return ds;
}

Batch gather(const FactorDataset& ds, std::span<const std::size_t> indices) {
  Shape shape = ds.images.shape();
  shape[0] = indices.size();
  Batch b{Tensor(shape), {}, {indices.begin(), indices.end()}};
  const std::size_t per = ds.images.numel() / ds.size(), f = ds.factor_count();
  auto src = ds.images.values();
  auto dst = b.images.values();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= ds.size()) throw ContractError("gather: index out of range");
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(indices[i] * per), per,
                dst.begin() + static_cast<std::ptrdiff_t>(i * per));
    for (std::size_t k = 0; k < f; ++k) b.factors.push_back(ds.factor(indices[i], k));
  }
  return b;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  return order;
}

BatchSequence::BatchSequence(const FactorDataset& ds, std::size_t batch_size, std::vector<std::size_t> order)
    : ds_(&ds), batch_size_(batch_size), order_(std::move(order)) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (batch_size > ds.size()) {
    throw ConfigError("batch size " + std::to_string(batch_size) + " exceeds dataset size " +
                      std::to_string(ds.size()));
  }
}

Batch BatchSequence::operator[](std::size_t i) const {
  if (i >= size()) throw ContractError("batch index out of range");
  return gather(*ds_, std::span(order_).subspan(i * batch_size_, batch_size_));
}

BatchSequence iterate_batches(const FactorDataset& ds, std::size_t batch_size, std::uint64_t shuffle_seed) {
  Rng rng(shuffle_seed);
  return BatchSequence(ds, batch_size, shuffled_indices(ds.size(), rng));
}

}  // namespace discont
