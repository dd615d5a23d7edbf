#include "deann/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "deann/rng.hpp"

namespace deann {

namespace {

Dataset shuffled(std::size_t n, std::size_t d, const std::vector<float>& rows, std::uint64_t seed) {
  const std::vector<std::size_t> perm = random_permutation(n, seed);
  std::vector<float> out(rows.size());
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(rows.begin() + static_cast<std::ptrdiff_t>(perm[i] * d), d,
                out.begin() + static_cast<std::ptrdiff_t>(i * d));
  return Dataset(n, d, std::move(out));
}

}  // namespace

Dataset gaussian_mixture(std::size_t n, std::size_t d, const GaussianMixtureParams& params,
                         std::uint64_t seed) {
  if (n == 0 || d == 0) throw std::invalid_argument("n and d must be positive");
  if (params.components == 0) throw std::invalid_argument("need at least one component");
  if (!(params.separation >= 0.0) || !(params.spread >= 0.0) ||
      !std::isfinite(params.separation) || !std::isfinite(params.spread))
    throw std::invalid_argument("separation and spread must be finite and nonnegative");
  Rng rng(seed);
  std::vector<double> centers(params.components * d);
  for (double& c : centers) c = params.separation * rng.normal();
  std::vector<float> rows(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* center = centers.data() + (i % params.components) * d;
    for (std::size_t t = 0; t < d; ++t)
      rows[i * d + t] = static_cast<float>(center[t] + params.spread * rng.normal());
  }
  return shuffled(n, d, rows, derive_seed(seed, 1));
}

Dataset power_law_planted(std::size_t n, std::size_t d, const PowerLawParams& params,
                          std::uint64_t seed) {
  if (n == 0 || d == 0) throw std::invalid_argument("n and d must be positive");
  if (!(params.alpha > 0.0) || !(params.beta > 0.0) || !std::isfinite(params.alpha) ||
      !std::isfinite(params.beta))
    throw std::invalid_argument("alpha and beta must be positive and finite");
  std::vector<float> rows(n * d, 0.0f);
  for (std::size_t i = 0; i < n; ++i) {
    const double sq = params.alpha * std::pow(static_cast<double>(i + 1) / static_cast<double>(n),
                                              params.beta);
    rows[i * d] = static_cast<float>(std::sqrt(sq));
  }
  return shuffled(n, d, rows, seed);
}

std::vector<float> power_law_query(std::size_t d) { return std::vector<float>(d, 0.0f); }

}  // namespace deann
