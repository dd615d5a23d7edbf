#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "deann/dataset.hpp"
#include "deann/kernels.hpp"

namespace testutil {

inline deann::Dataset random_dataset(std::size_t n, std::size_t d, std::uint64_t seed,
                                     double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<float> dist(0.0f, static_cast<float>(scale));
  std::vector<float> v(n * d);
  for (auto& x : v) x = dist(gen);
  return deann::Dataset(n, d, std::move(v));
}

// Independent scalar oracle: per-pair long double loop, no shared code paths.
inline long double scalar_kernel(const deann::KernelSpec& k, std::span<const float> x,
                                 std::span<const float> y) {
  long double sq = 0, l1 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double diff = static_cast<long double>(x[i]) - static_cast<long double>(y[i]);
    sq += diff * diff;
    l1 += std::fabs(diff);
  }
  const long double h = k.bandwidth();
  switch (k.family()) {
    case deann::KernelFamily::Gaussian:
      return std::exp(-sq / (2 * h * h));
    case deann::KernelFamily::Exponential:
      return std::exp(-std::sqrt(sq) / h);
    case deann::KernelFamily::Laplacian:
      return std::exp(-l1 / h);
  }
  return 0;
}

inline double scalar_kde(const deann::Dataset& data, const deann::KernelSpec& k,
                         std::span<const float> q) {
  long double sum = 0;
  for (std::size_t i = 0; i < data.size(); ++i) sum += scalar_kernel(k, data.row(i), q);
  return static_cast<double>(sum / data.size());
}

inline double rel_diff(double a, double b) {
  if (a == b) return 0.0;
  return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
}

// Two clouds of `per_cloud` points, centered at the origin and at (100, 0, ...).
inline deann::Dataset two_clouds(std::size_t per_cloud, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  std::vector<float> v;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < per_cloud; ++i)
      for (std::size_t j = 0; j < d; ++j) v.push_back(dist(gen) + (j == 0 && c == 1 ? 100.0f : 0.0f));
  return deann::Dataset(2 * per_cloud, d, std::move(v));
}

}  // namespace testutil
