#include "deann/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

#include "deann/distance.hpp"
#include "deann/errors.hpp"
#include "deann/estimators.hpp"

namespace deann {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

bool in_open_unit(double x) { return std::isfinite(x) && x > 0.0 && x < 1.0; }

// Ceiling that ignores last-ulp noise: a bound that is mathematically an
// integer (e.g. 3 ln(e)) must not round up to the next one.
std::size_t ceil_count(double x) {
  return static_cast<std::size_t>(std::ceil(x * (1.0 - 1e-12)));
}

double scale_distance(KernelFamily family, std::span<const float> x, std::span<const float> y) {
  return family == KernelFamily::Laplacian ? l1dist(x, y) : std::sqrt(sqdist(x, y));
}

}  // namespace

double rs_sample_bound(double eps, double tau, double fail_prob) {
  require(std::isfinite(eps) && eps > 0.0, "eps must be positive");
  require(std::isfinite(tau) && tau > 0.0 && tau <= 1.0, "tau must be in (0, 1]");
  require(in_open_unit(fail_prob), "fail_prob must be in (0, 1)");
  return 3.0 * std::log(1.0 / fail_prob) / (eps * eps * tau);
}

std::size_t rs_sample_size(double eps, double tau, double fail_prob) {
  return ceil_count(rs_sample_bound(eps, tau, fail_prob));
}

double dominated_sample_bound(double eps, double tau, double delta, double fail_prob) {
  require(std::isfinite(delta) && delta > 0.0 && delta <= 1.0, "delta must be in (0, 1]");
  return rs_sample_bound(eps, tau, fail_prob) * delta;
}

std::size_t dominated_sample_size(double eps, double tau, double delta, double fail_prob) {
  return ceil_count(dominated_sample_bound(eps, tau, delta, fail_prob));
}

Domination domination_delta(const Dataset& dataset, const KernelSpec& kernel,
                            std::span<const float> query, std::size_t k) {
  require(query.size() == dataset.dim(), "query dimension mismatch");
  require(k <= dataset.size(), "k exceeds n");
  std::vector<double> values(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i)
    values[i] = kernel.from_distance_unchecked(kernel_distance(kernel, dataset.row(i), query));
  std::sort(values.begin(), values.end(), std::greater<>());
  double head = 0.0;
  double tail = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) (i < k ? head : tail) += values[i];
  const double total = head + tail;
  if (total <= 0.0) return {1.0, true};
  return {std::clamp(tail / total, 0.0, 1.0), false};
}

PowerLawFit fit_power_law(std::span<const double> rank_sq_distances, std::size_t n) {
  const std::size_t K = rank_sq_distances.size();
  require(K >= 2, "power-law fit needs at least two ranks");
  require(n >= K, "n must be at least the number of ranks");
  std::vector<double> xs(K);
  std::vector<double> ys(K);
  for (std::size_t r = 0; r < K; ++r) {
    const double dist = rank_sq_distances[r];
    if (!(dist > 0.0) || !std::isfinite(dist))
      throw std::invalid_argument("power-law fit needs positive finite distances");
    xs[r] = std::log(static_cast<double>(r + 1) / static_cast<double>(n));
    ys[r] = std::log(dist);
  }
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t r = 0; r < K; ++r) {
    mx += xs[r];
    my += ys[r];
  }
  mx /= static_cast<double>(K);
  my /= static_cast<double>(K);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t r = 0; r < K; ++r) {
    sxy += (xs[r] - mx) * (ys[r] - my);
    sxx += (xs[r] - mx) * (xs[r] - mx);
  }
  PowerLawFit fit;
  fit.beta = sxy / sxx;
  const double log_alpha = my - fit.beta * mx;
  fit.alpha = std::exp(log_alpha);
  double ss = 0.0;
  for (std::size_t r = 0; r < K; ++r) {
    const double resid = ys[r] - (log_alpha + fit.beta * xs[r]);
    ss += resid * resid;
  }
  fit.rms_log_residual = std::sqrt(ss / static_cast<double>(K));
  if (!(fit.alpha > 0.0) || !(fit.beta > 0.0))
    throw std::invalid_argument("distances do not grow with rank; no power law fits");
  return fit;
}

std::vector<double> knn_rank_profile(const Dataset& dataset, const Dataset& queries,
                                     std::size_t max_rank) {
  require(queries.dim() == dataset.dim(), "query dimension mismatch");
  require(max_rank >= 1 && max_rank <= dataset.size(), "max_rank must be in [1, n]");
  std::vector<double> profile(max_rank, 0.0);
  std::vector<double> dist(dataset.size());
  for (std::size_t j = 0; j < queries.size(); ++j) {
    for (std::size_t i = 0; i < dataset.size(); ++i) dist[i] = sqdist(dataset.row(i), queries.row(j));
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(max_rank), dist.end());
    for (std::size_t r = 0; r < max_rank; ++r) profile[r] += dist[r];
  }
  for (double& v : profile) v /= static_cast<double>(queries.size());
  return profile;
}

PowerLawBandwidths power_law_bandwidths(double alpha, double beta, std::size_t n, double tau,
                                        double delta) {
  require(std::isfinite(alpha) && alpha > 0.0, "alpha must be positive");
  require(std::isfinite(beta) && beta > 0.0, "beta must be positive");
  require(n >= 1, "n must be positive");
  require(in_open_unit(tau), "tau must be in (0, 1)");
  require(in_open_unit(delta), "delta must be in (0, 1)");
  const double dominated_sq = (alpha / 2.0) * std::pow(static_cast<double>(n), -beta);
  PowerLawBandwidths out;
  out.h_dominated = std::sqrt(dominated_sq);
  out.h_low_ceiling = std::sqrt(dominated_sq / std::log(1.0 / tau));
  // From exp(-alpha / (2 h^2 beta)) >= 1 - delta.
  out.h_high_floor = std::sqrt(alpha / (2.0 * beta * std::log(1.0 / (1.0 - delta))));
  return out;
}

double lower_median(std::vector<double> values) {
  require(!values.empty(), "median of an empty set");
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

BandwidthRule median_rule_bandwidth(const Dataset& dataset, std::size_t sample_size,
                                    std::uint64_t seed) {
  const std::size_t n = dataset.size();
  require(n >= 2, "median rule needs at least two rows");
  const std::size_t s = sample_size == 0 ? n : std::min(sample_size, n);
  std::vector<std::size_t> idx = random_permutation(n, seed);
  idx.resize(s);
  std::vector<double> nn(s);
  for (std::size_t a = 0; a < s; ++a) {
    const std::size_t i = idx[a];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) best = std::min(best, sqdist(dataset.row(i), dataset.row(j)));
    nn[a] = std::sqrt(best);
  }
  BandwidthRule rule;
  rule.h = lower_median(std::move(nn));
  rule.degenerate = rule.h == 0.0;
  return rule;
}

BandwidthFit fit_bandwidth(const Dataset& train, const Dataset& validation, KernelFamily family,
                           double target_mu, double rel_tol, std::uint64_t seed) {
  require(in_open_unit(target_mu), "target median KDE must be in (0, 1)");
  require(std::isfinite(rel_tol) && rel_tol > 0.0, "rel_tol must be positive");
  require(validation.dim() == train.dim(), "validation dimension mismatch");

  BandwidthFit fit;
  auto median_at = [&](double h) {
    ++fit.iterations;
    return lower_median(naive_kde(train, KernelSpec(family, h), validation).values);
  };
  auto close = [&](double value) { return std::abs(value - target_mu) <= rel_tol * target_mu; };

  // Distance scale: median pairwise distance of a small training sample,
  // falling back to sample-to-query distances when the sample is degenerate.
  const std::size_t s = std::min<std::size_t>(100, train.size());
  std::vector<std::size_t> idx = random_permutation(train.size(), seed);
  idx.resize(s);
  std::vector<double> pair;
  for (std::size_t a = 0; a < s; ++a)
    for (std::size_t b = a + 1; b < s; ++b)
      pair.push_back(scale_distance(family, train.row(idx[a]), train.row(idx[b])));
  double scale = pair.empty() ? 0.0 : lower_median(pair);
  if (!(scale > 0.0)) {
    pair.clear();
    for (std::size_t a = 0; a < s; ++a)
      for (std::size_t j = 0; j < std::min<std::size_t>(100, validation.size()); ++j)
        pair.push_back(scale_distance(family, train.row(idx[a]), validation.row(j)));
    scale = lower_median(pair);
  }
  if (!(scale > 0.0)) scale = 1.0;

  double lo = 1e-9 * scale;
  double f_lo = median_at(lo);
  const double floor_value = f_lo;
  if (close(f_lo)) return {lo, f_lo, fit.iterations};
  if (f_lo > target_mu)
    throw InfeasibleError("target median KDE " + std::to_string(target_mu) +
                              " is below the smallest achievable median " +
                              std::to_string(f_lo),
                          f_lo, 1.0);

  double hi = scale;
  double f_hi = median_at(hi);
  for (int doublings = 0; f_hi < target_mu && doublings < 64; ++doublings) {
    if (close(f_hi)) return {hi, f_hi, fit.iterations};
    lo = hi;
    f_lo = f_hi;
    hi *= 2.0;
    f_hi = median_at(hi);
  }
  if (close(f_hi)) return {hi, f_hi, fit.iterations};
  if (f_hi < target_mu)
    throw InfeasibleError("target median KDE " + std::to_string(target_mu) +
                              " exceeds the largest achievable median " + std::to_string(f_hi),
                          floor_value, f_hi);

  for (int step = 0; step < 200; ++step) {
    const double mid = std::sqrt(lo * hi);
    const double f_mid = median_at(mid);
    if (close(f_mid)) return {mid, f_mid, fit.iterations};
    (f_mid < target_mu ? lo : hi) = mid;
  }
  throw InfeasibleError("bisection did not reach the target median KDE", floor_value, f_hi);
}

ErrorReport relative_error(std::span<const double> estimates, std::span<const double> exact,
                           double floor) {
  if (estimates.size() != exact.size())
    throw std::invalid_argument("estimate and exact vectors differ in length");
  ErrorReport report;
  double sum = 0.0;
  for (std::size_t j = 0; j < exact.size(); ++j) {
    if (!(exact[j] >= floor)) {
      ++report.excluded_count;
      continue;
    }
    const double err = std::abs(estimates[j] - exact[j]) / exact[j];
    report.per_query_rel_err.push_back(err);
    report.included.push_back(j);
    sum += err;
  }
  if (!report.per_query_rel_err.empty())
    report.mean_rel_err = sum / static_cast<double>(report.per_query_rel_err.size());
  return report;
}

}  // namespace deann
