#include <Eigen/Core>
#include <algorithm>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "deann/ann.hpp"
#include "deann/distance.hpp"
#include "deann/rng.hpp"

namespace deann {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
constexpr std::size_t kRowBlock = 512;

double sqdist_to_centroid(std::span<const float> x, const double* c) {
  double acc = 0.0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double diff = static_cast<double>(x[t]) - c[t];
    acc += diff * diff;
  }
  return acc;
}

// Nearest centroid of every row (ties to the lower centroid index); returns
// the sum of squared distances.
double assign_nearest(const Dataset& data, const RowMatrix& centroids,
                      std::vector<std::size_t>& assignment) {
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  const std::size_t k = static_cast<std::size_t>(centroids.rows());
  const Eigen::VectorXd c_norms = centroids.rowwise().squaredNorm();
  assignment.assign(n, 0);
  RowMatrix x_wide(static_cast<Eigen::Index>(std::min(kRowBlock, n)), static_cast<Eigen::Index>(d));
  RowMatrix products;
  double inertia = 0.0;
  for (std::size_t x0 = 0; x0 < n; x0 += kRowBlock) {
    const std::size_t xc = std::min(kRowBlock, n - x0);
    const float* src = data.row_ptr(x0);
    for (std::size_t t = 0; t < xc * d; ++t) x_wide.data()[t] = src[t];
    products.noalias() = x_wide.topRows(static_cast<Eigen::Index>(xc)) * centroids.transpose();
    for (std::size_t i = 0; i < xc; ++i) {
      const double xn = data.sq_norm(x0 + i);
      const double* prod = products.data() + i * k;
      std::size_t best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dist = std::max(0.0, xn + c_norms[static_cast<Eigen::Index>(c)] - 2.0 * prod[c]);
        if (dist < best_dist) {
          best_dist = dist;
          best = c;
        }
      }
      assignment[x0 + i] = best;
      inertia += best_dist;
    }
  }
  return inertia;
}

RowMatrix kmeans_plus_plus(const Dataset& train, std::size_t k, Rng& rng) {
  const std::size_t s = train.size();
  const std::size_t d = train.dim();
  RowMatrix centroids(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  std::vector<bool> chosen(s, false);
  auto place = [&](std::size_t c, std::size_t i) {
    chosen[i] = true;
    const auto r = train.row(i);
    for (std::size_t t = 0; t < d; ++t) centroids(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = r[t];
  };
  place(0, rng.below(s));
  std::vector<double> weight(s);
  for (std::size_t i = 0; i < s; ++i) weight[i] = sqdist_to_centroid(train.row(i), centroids.row(0).data());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (const double w : weight) total += w;
    std::optional<std::size_t> pick;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cumulative = 0.0;
      for (std::size_t i = 0; i < s; ++i) {
        if (weight[i] <= 0.0) continue;
        cumulative += weight[i];
        pick = i;
        if (cumulative > target) break;
      }
    } else {
      // All remaining mass is zero (duplicates): take the lowest unused row.
      for (std::size_t i = 0; i < s && !pick; ++i)
        if (!chosen[i]) pick = i;
    }
    place(c, pick.value_or(0));
    const double* cen = centroids.row(static_cast<Eigen::Index>(c)).data();
    for (std::size_t i = 0; i < s; ++i)
      weight[i] = std::min(weight[i], sqdist_to_centroid(train.row(i), cen));
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(const Dataset& dataset, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options) {
  const std::size_t n = dataset.size();
  const std::size_t d = dataset.dim();
  if (k == 0 || k > n)
    throw std::invalid_argument("k-means cluster count must be in [1, n], got " + std::to_string(k));

  std::optional<Dataset> sample;
  if (options.max_points_per_centroid > 0 && n > k * options.max_points_per_centroid) {
    std::vector<std::size_t> idx = random_permutation(n, derive_seed(seed, 1));
    idx.resize(k * options.max_points_per_centroid);
    std::sort(idx.begin(), idx.end());
    sample.emplace(dataset.select(idx));
  }
  const Dataset& train = sample ? *sample : dataset;

  Rng rng(seed);
  RowMatrix centroids = kmeans_plus_plus(train, k, rng);

  KMeansResult result;
  std::vector<std::size_t> assignment;
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= std::max<std::size_t>(1, options.max_iterations); ++it) {
    const double inertia = assign_nearest(train, centroids, assignment);
    result.iterations = it;
    if (previous < std::numeric_limits<double>::infinity() &&
        previous - inertia <= options.tolerance * previous)
      break;
    previous = inertia;
    if (inertia == 0.0) break;

    RowMatrix sums = RowMatrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto r = train.row(i);
      double* s = sums.row(static_cast<Eigen::Index>(assignment[i])).data();
      for (std::size_t t = 0; t < d; ++t) s[t] += r[t];
      ++counts[assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      centroids.row(static_cast<Eigen::Index>(c)) =
          sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
    }
  }

  result.inertia = assign_nearest(dataset, centroids, result.assignment);
  result.centroids.assign(centroids.data(), centroids.data() + centroids.size());
  return result;
}

}  // namespace deann
