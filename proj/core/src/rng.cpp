#include "discont/rng.hpp"

#include <sstream>

#include "discont/error.hpp"

namespace discont {

double Rng::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double Rng::uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw ContractError("Rng::index: empty range");
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

bool Rng::bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }

double Rng::normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

void Rng::fill_normal(std::span<float> out, double mean, double stddev) {
  std::normal_distribution<double> dist(mean, stddev);
  for (auto& v : out) v = static_cast<float>(dist(engine_));
}

Rng Rng::split() {
  const auto a = engine_();
  const auto b = engine_();
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  Rng child;
  child.engine_.seed(seq);
  return child;
}

std::string Rng::snapshot() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

Rng Rng::restore(std::string_view snapshot) {
  Rng r;
  std::istringstream is{std::string(snapshot)};
  is >> r.engine_;
  if (is.fail()) throw FormatError("malformed rng snapshot");
  return r;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace discont
