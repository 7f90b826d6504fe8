#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "discont/data.hpp"
#include "discont/error.hpp"
#include "support/grad_cases.hpp"

namespace discont {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "discont_test_data" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::span<const float> image(const FactorDataset& ds, std::size_t i) {
  const std::size_t per = ds.images.numel() / ds.size();
  return std::span<const float>(ds.images.values()).subspan(i * per, per);
}

TEST(Generator, OneImagePerFactorCombination) {
  const auto ds = generate_color_position({});
  ASSERT_EQ(ds.size(), 128u);
  EXPECT_EQ(ds.images.shape(), (Shape{128, 3, 32, 32}));
  ASSERT_EQ(ds.factor_count(), 3u);
  EXPECT_EQ(ds.factor_info[0].name, "color");
  EXPECT_EQ(ds.factor_info[1].cardinality, 4u);
  std::set<std::array<std::int32_t, 3>> seen;
  for (std::size_t i = 0; i < ds.size(); ++i) seen.insert({ds.factor(i, 0), ds.factor(i, 1), ds.factor(i, 2)});
  EXPECT_EQ(seen.size(), 128u);
}

TEST(Generator, PixelsFollowTheFactors) {
  const ColorPositionSpec spec;
  const auto ds = generate_color_position(spec);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto rgb = palette_color(static_cast<std::size_t>(ds.factor(i, 0)), spec.n_colors);
    const auto [top, left] = square_origin(ds.factor(i, 1), ds.factor(i, 2), spec);
    const auto px = image(ds, i);
    std::size_t colored = 0;
    for (std::size_t y = 0; y < 32; ++y)
      for (std::size_t x = 0; x < 32; ++x) {
        const bool inside = y >= top && y < top + kSquareSide && x >= left && x < left + kSquareSide;
        for (std::size_t c = 0; c < 3; ++c) {
          const float expect = inside ? rgb[c] : kBackground[c];
          ASSERT_EQ(px[(c * 32 + y) * 32 + x], expect) << i;
        }
        colored += inside;
      }
    EXPECT_EQ(colored, kSquareSide * kSquareSide);
  }
}

TEST(Generator, PaletteIsSaturatedAndDistinct) {
  EXPECT_EQ(palette_color(0, 8), (std::array<float, 3>{1.0f, 0.0f, 0.0f}));
  for (std::size_t i = 0; i < 8; ++i) {
    const auto c = palette_color(i, 8);
    EXPECT_EQ(*std::max_element(c.begin(), c.end()), 1.0f);
    EXPECT_EQ(*std::min_element(c.begin(), c.end()), 0.0f);
  }
}

TEST(Generator, DistinctImagesDifferByAtLeastPointTwo) {
  const auto ds = generate_color_position({});
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = i + 1; j < ds.size(); ++j) {
      const auto a = image(ds, i), b = image(ds, j);
      float linf = 0;
      for (std::size_t p = 0; p < a.size(); ++p) linf = std::max(linf, std::abs(a[p] - b[p]));
      ASSERT_GE(linf, 0.2f) << i << " vs " << j;
    }
}

TEST(Generator, OrderIsSeedDetermined) {
  const auto a = generate_color_position({.seed = 4});
  const auto b = generate_color_position({.seed = 4});
  const auto c = generate_color_position({.seed = 5});
  EXPECT_EQ(a.factors, b.factors);
  EXPECT_NE(a.factors, c.factors);
}

TEST(Generator, RejectsGridsThatDoNotFit) {
  EXPECT_THROW(generate_color_position({.n_x = 5}), ConfigError);
  EXPECT_THROW(generate_color_position({.n_colors = 0}), ConfigError);
  EXPECT_THROW(generate_color_position({.n_colors = 13}), ConfigError);
  EXPECT_NO_THROW(generate_color_position({.n_x = 8, .n_y = 8, .image_size = 64}));
}

TEST(Oversample, KeepsFactorsAndACleanFirstCopy) {
  const auto base = generate_color_position({});
  const auto big = oversample_with_jitter(base, 8, 0);
  ASSERT_EQ(big.size(), 1024u);
  for (std::size_t i = 0; i < big.size(); ++i)
    for (std::size_t f = 0; f < 3; ++f) ASSERT_EQ(big.factor(i, f), base.factor(i % 128, f));
  for (std::size_t i = 0; i < 128; ++i) {
    const auto a = image(base, i), b = image(big, i);
    ASSERT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
  bool jittered = false;
  for (std::size_t i = 128; i < big.size() && !jittered; ++i) {
    const auto a = image(base, i % 128), b = image(big, i);
    jittered = !std::equal(a.begin(), a.end(), b.begin());
  }
  EXPECT_TRUE(jittered);
  EXPECT_THROW(oversample_with_jitter(base, 0, 0), ConfigError);
}

TEST(TensorFile, RoundTripIsBitExact) {
  Rng rng(1);
  Tensor t = testing::random_tensor({2, 3, 5}, rng);
  t.values()[0] = -0.0f;
  t.values()[1] = 1e-40f;
  const auto bytes = encode_tensor_file(t);
  EXPECT_EQ(bytes.size(), 4u + 4 + 4 + 12 + 1 + 4 * 30);
  const Tensor back = decode_tensor_file(bytes);
  EXPECT_EQ(back.shape(), t.shape());
  EXPECT_EQ(encode_tensor_file(back), bytes);
}

TEST(TensorFile, HeaderErrorsAreTyped) {
  const auto bytes = encode_tensor_file(Tensor({2, 2}, {1, 2, 3, 4}));
  auto mutate = [&](std::size_t at, std::uint8_t v) {
    auto b = bytes;
    b[at] = v;
    return b;
  };
  EXPECT_THROW(decode_tensor_file(mutate(0, 'X')), FormatError);
  EXPECT_THROW(decode_tensor_file(mutate(4, 2)), VersionError);
  EXPECT_THROW(decode_tensor_file(mutate(8, 0)), CorruptionError);
  EXPECT_THROW(decode_tensor_file(mutate(12, 0)), CorruptionError);
  EXPECT_THROW(decode_tensor_file(mutate(12, 3)), CorruptionError);
  EXPECT_THROW(decode_tensor_file(mutate(20, 1)), UnsupportedDtypeError);
  const std::span<const std::uint8_t> view(bytes);
  for (std::size_t len = 0; len < bytes.size(); ++len) EXPECT_THROW(decode_tensor_file(view.first(len)), FormatError);
}

TEST(TensorFile, FuzzedHeadersNeverEscapeAsUntypedErrors) {
  const auto clean = encode_tensor_file(Tensor({3, 4}, std::vector<float>(12, 0.5f)));
  constexpr std::size_t kHeader = 4 + 4 + 4 + 8 + 1;
  Rng rng(3);
  for (int f = 0; f < 1000; ++f) {
    auto bytes = clean;
    const std::size_t pos = rng.index(kHeader);
    bytes[pos] = static_cast<std::uint8_t>(bytes[pos] ^ (1 + rng.index(255)));
    try {
      decode_tensor_file(bytes);
      ADD_FAILURE() << "mutation at byte " << pos << " decoded";
    } catch (const FormatError&) {
    }
  }
}

TEST(Dataset, SaveLoadRoundTrip) {
  const auto dir = scratch_dir("roundtrip");
  const auto ds = generate_color_position({.n_colors = 3, .n_x = 2, .n_y = 2});
  save_dataset(ds, dir);
  const auto back = load_dataset(dir);
  EXPECT_EQ(back.factors, ds.factors);
  EXPECT_EQ(back.factor_info.size(), 3u);
  EXPECT_EQ(back.factor_info[0].name, "color");
  EXPECT_EQ(back.factor_info[0].cardinality, 3u);
  EXPECT_TRUE(std::equal(back.images.values().begin(), back.images.values().end(), ds.images.values().begin()));
}

TEST(Dataset, LoadErrors) {
  EXPECT_THROW(load_dataset(scratch_dir("empty")), IoError);
  const auto dir = scratch_dir("badmeta");
  save_dataset(generate_color_position({.n_colors = 2, .n_x = 2, .n_y = 2}), dir);
  std::ofstream(dir / "meta.txt") << "color:2\npos_x\n";
  EXPECT_THROW(load_dataset(dir), FormatError);
  std::ofstream(dir / "meta.txt") << "color:2\npos_x:2\n";
  EXPECT_THROW(load_dataset(dir), FormatError);
}

TEST(Batching, FullBatchesOverAPermutation) {
  const auto ds = generate_color_position({.n_colors = 2, .n_x = 2, .n_y = 3});
  const auto seq = iterate_batches(ds, 5, 7);
  ASSERT_EQ(seq.size(), 2u);
  auto order = seq.order();
  std::sort(order.begin(), order.end());
  for (std::size_t i = 0; i < order.size(); ++i) EXPECT_EQ(order[i], i);
  const Batch b = seq[1];
  EXPECT_EQ(b.images.shape(), (Shape{5, 3, 32, 32}));
  for (std::size_t r = 0; r < 5; ++r) {
    EXPECT_EQ(b.indices[r], seq.order()[5 + r]);
    const auto src = image(ds, b.indices[r]);
    EXPECT_TRUE(std::equal(src.begin(), src.end(), b.images.values().begin() + r * src.size()));
    for (std::size_t f = 0; f < 3; ++f) EXPECT_EQ(b.factors[r * 3 + f], ds.factor(b.indices[r], f));
  }
  EXPECT_EQ(iterate_batches(ds, 5, 7).order(), seq.order());
  EXPECT_NE(iterate_batches(ds, 5, 8).order(), seq.order());
  EXPECT_THROW(seq[2], ContractError);
  EXPECT_THROW(iterate_batches(ds, 13, 0), ConfigError);
  EXPECT_THROW(iterate_batches(ds, 0, 0), ConfigError);
}

TEST(Batching, GatherRejectsOutOfRangeIndices) {
  const auto ds = generate_color_position({.n_colors = 1, .n_x = 2, .n_y = 2});
  const std::vector<std::size_t> idx{0, 4};
  EXPECT_THROW(gather(ds, idx), ContractError);
}

}  // namespace
}  // namespace discont
