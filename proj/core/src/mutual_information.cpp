#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <limits>
#include <numeric>

#include "discont/error.hpp"
#include "discont/evaluation.hpp"
#include "discont/rng.hpp"

namespace discont {

namespace {

constexpr std::size_t kMinSamples = 100;

bool has_duplicate_rows(const Samples& s) {
  std::vector<std::size_t> order(s.n);
  std::iota(order.begin(), order.end(), 0);
  auto row = [&](std::size_t i) { return s.values.begin() + static_cast<std::ptrdiff_t>(i * s.dim); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(row(a), row(a) + static_cast<std::ptrdiff_t>(s.dim), row(b),
                                        row(b) + static_cast<std::ptrdiff_t>(s.dim));
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (std::equal(row(order[i - 1]), row(order[i - 1]) + static_cast<std::ptrdiff_t>(s.dim), row(order[i])))
      return true;
  }
  return false;
}

// Unit variance per column so that neither variable dominates the max-norm.
void standardize(Samples& s) {
  for (std::size_t c = 0; c < s.dim; ++c) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < s.n; ++i) mean += s(i, c);
    mean /= static_cast<double>(s.n);
    for (std::size_t i = 0; i < s.n; ++i) sq += (s(i, c) - mean) * (s(i, c) - mean);
    const double sd = std::sqrt(sq / static_cast<double>(s.n - 1));
    if (!(sd > 0.0)) continue;
    for (std::size_t i = 0; i < s.n; ++i) s(i, c) = (s(i, c) - mean) / sd;
  }
}

void add_jitter(Samples& s, Rng& rng) {
  for (auto& v : s.values) v += kTieJitter * rng.normal();
}

double max_norm(const Samples& s, std::size_t i, std::size_t j) {
  const double* a = s.values.data() + i * s.dim;
  const double* b = s.values.data() + j * s.dim;
  double m = 0.0;
  for (std::size_t c = 0; c < s.dim; ++c) m = std::max(m, std::abs(a[c] - b[c]));
  return m;
}

}  // namespace

MIEstimate estimate_mi_ksg(const Samples& x_in, const Samples& z_in, std::size_t k_neighbors,
                           std::uint64_t jitter_seed) {
  if (x_in.n != z_in.n) {
    throw DimensionError("estimate_mi_ksg: x has " + std::to_string(x_in.n) + " rows but z has " +
                         std::to_string(z_in.n));
  }
  if (x_in.values.size() != x_in.n * x_in.dim || z_in.values.size() != z_in.n * z_in.dim || x_in.dim == 0 ||
      z_in.dim == 0) {
    throw DimensionError("estimate_mi_ksg: sample matrix storage does not match its shape");
  }
  const std::size_t n = x_in.n;
  if (n < kMinSamples) {
    throw ConfigError("estimate_mi_ksg needs at least " + std::to_string(kMinSamples) + " samples, got " +
                      std::to_string(n));
  }
  if (k_neighbors == 0 || k_neighbors >= n) {
    throw ConfigError("k_neighbors must lie in [1, " + std::to_string(n) + ")");
  }
  for (const auto* s : {&x_in, &z_in})
    for (double v : s->values)
      if (!std::isfinite(v)) throw NumericError("estimate_mi_ksg: non-finite sample");

  MIEstimate out;
  out.k_neighbors = k_neighbors;
  out.samples = n;
  Samples x = x_in, z = z_in;
  standardize(x);
  standardize(z);
  if (has_duplicate_rows(x) || has_duplicate_rows(z)) {
    Rng rng(jitter_seed);
    add_jitter(x, rng);
    add_jitter(z, rng);
    out.jittered = true;
  }

  std::vector<double> dx(n), dz(n), joint(n);
  double digamma_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      dx[j] = max_norm(x, i, j);
      dz[j] = max_norm(z, i, j);
      joint[j] = std::max(dx[j], dz[j]);
    }
    joint[i] = std::numeric_limits<double>::infinity();
    std::nth_element(joint.begin(), joint.begin() + static_cast<std::ptrdiff_t>(k_neighbors - 1), joint.end());
    const double eps = joint[k_neighbors - 1];
    std::size_t nx = 0, nz = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      nx += dx[j] < eps;
      nz += dz[j] < eps;
    }
    digamma_sum +=
        boost::math::digamma(static_cast<double>(nx + 1)) + boost::math::digamma(static_cast<double>(nz + 1));
  }
  out.raw = boost::math::digamma(static_cast<double>(k_neighbors)) + boost::math::digamma(static_cast<double>(n)) -
            digamma_sum / static_cast<double>(n);
  out.value = std::max(0.0, out.raw);
  return out;
}

}  // namespace discont
