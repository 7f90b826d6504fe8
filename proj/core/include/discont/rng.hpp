#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

namespace discont {

// Seedable generator. Identical seeds give identical draw sequences, and the
// full engine state can be snapshotted to text and restored.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  std::size_t index(std::size_t n);      // [0, n)
  bool bernoulli(double p);
  double normal();
  void fill_normal(std::span<float> out, double mean = 0.0, double stddev = 1.0);

  // Independent child stream; advances this generator by two draws.
  Rng split();

  std::string snapshot() const;
  static Rng restore(std::string_view snapshot);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Stateless 64-bit mix used to derive per-element streams from a seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace discont
