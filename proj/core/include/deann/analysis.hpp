#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "deann/dataset.hpp"
#include "deann/kernels.hpp"

namespace deann {

// Sample-size bounds. The *_bound functions return the real-valued bound, the
// *_size functions its ceiling.

/// 3 ln(1/fail_prob) / (eps^2 tau): uniform samples that give a
/// (1 + eps)-approximation when KDE >= tau, except with probability fail_prob.
double rs_sample_bound(double eps, double tau, double fail_prob);
std::size_t rs_sample_size(double eps, double tau, double fail_prob);

/// The same bound scaled by delta: samples needed on the remainder when the
/// nearest neighbors carry a 1 - delta share of the kernel mass.
double dominated_sample_bound(double eps, double tau, double delta, double fail_prob);
std::size_t dominated_sample_size(double eps, double tau, double delta, double fail_prob);

struct Domination {
  double delta = 1.0;
  /// Every kernel value was zero; delta is reported as 1.
  bool degenerate = false;
};

/// 1 - (kernel mass of the k exact nearest neighbors) / (total kernel mass).
Domination domination_delta(const Dataset& dataset, const KernelSpec& kernel,
                            std::span<const float> query, std::size_t k);

/// Average squared distance to the rank-r neighbor modeled as alpha (r/n)^beta.
struct PowerLawFit {
  double alpha = 0.0;
  double beta = 0.0;
  double rms_log_residual = 0.0;
};

/// Least-squares fit of log(dist^2) against log(r/n) for ranks r = 1..K,
/// where rank_sq_distances[r-1] is the mean squared distance to the rank-r
/// neighbor. Requires K >= 2 and positive distances.
PowerLawFit fit_power_law(std::span<const double> rank_sq_distances, std::size_t n);

/// Per-rank mean squared distances over the given queries (ranks 1..max_rank).
/// A query that coincides with a data row still counts that row as rank 1.
std::vector<double> knn_rank_profile(const Dataset& dataset, const Dataset& queries,
                                     std::size_t max_rank);

/// Gaussian-kernel bandwidth markers for power-law distance profiles.
struct PowerLawBandwidths {
  /// h^2 = (alpha/2) n^-beta: a polylogarithmic number of neighbors dominates.
  double h_dominated;
  /// Bandwidths at or below this give KDE <= tau.
  double h_low_ceiling;
  /// Bandwidths at or above this give KDE >= 1 - delta.
  double h_high_floor;
};

PowerLawBandwidths power_law_bandwidths(double alpha, double beta, std::size_t n, double tau,
                                        double delta);

struct BandwidthRule {
  double h = 0.0;
  /// All sampled nearest-neighbor distances were zero.
  bool degenerate = false;
};

/// Median (lower median) over a seeded sample of points of the L2 distance to
/// each point's nearest other row. Requires n >= 2.
BandwidthRule median_rule_bandwidth(const Dataset& dataset, std::size_t sample_size,
                                    std::uint64_t seed);

/// Lower median: element (size - 1) / 2 of the sorted values.
double lower_median(std::vector<double> values);

struct BandwidthFit {
  double h = 0.0;
  double achieved_median = 0.0;
  std::size_t iterations = 0;
};

/// Bandwidth whose median exact KDE over `validation` is within rel_tol of
/// target_mu. Brackets by doubling from the median pairwise distance of a
/// 100-point training sample, then bisects in log-space (at most 200 steps).
/// Throws InfeasibleError when the target lies outside the achievable range.
BandwidthFit fit_bandwidth(const Dataset& train, const Dataset& validation, KernelFamily family,
                           double target_mu, double rel_tol = 0.01, std::uint64_t seed = 0);

struct ErrorReport {
  std::vector<double> per_query_rel_err;  // one entry per included query
  std::vector<std::size_t> included;      // their positions in the input
  double mean_rel_err = 0.0;
  std::size_t excluded_count = 0;
};

/// |Z - mu| / mu for every query with mu >= floor, and their mean.
ErrorReport relative_error(std::span<const double> estimates, std::span<const double> exact,
                           double floor = 1e-16);

}  // namespace deann
