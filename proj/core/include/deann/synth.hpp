#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "deann/dataset.hpp"

namespace deann {

struct GaussianMixtureParams {
  std::size_t components = 3;
  /// Standard deviation of each coordinate of the component centers.
  double separation = 10.0;
  /// Standard deviation of each coordinate around a center.
  double spread = 1.0;
};

/// n points from an equal-weight isotropic Gaussian mixture. Point i belongs
/// to component i mod components before the final row shuffle.
Dataset gaussian_mixture(std::size_t n, std::size_t d, const GaussianMixtureParams& params,
                         std::uint64_t seed);

struct PowerLawParams {
  double alpha = 2.0;
  double beta = 0.5;
};

/// Points on a ray from the origin so that the sorted squared distances from
/// the origin are alpha ((i+1)/n)^beta, i = 0..n-1. The designated query is
/// the origin (power_law_query). Rows are shuffled with `seed`.
Dataset power_law_planted(std::size_t n, std::size_t d, const PowerLawParams& params,
                          std::uint64_t seed);

/// The designated query of power_law_planted: the origin in d dimensions.
std::vector<float> power_law_query(std::size_t d);

}  // namespace deann
