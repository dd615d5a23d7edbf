#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "deann/dataset.hpp"

namespace deann {

/// Neighbor indices into the indexed dataset with their exact squared L2
/// distances, ordered by (distance, index). May hold fewer entries than
/// requested. DEANN evaluates Euclidean kernels on the neighbors from these
/// distances, so an index that only has approximate distances should leave
/// sq_distances empty.
struct NeighborList {
  std::vector<std::size_t> indices;
  std::vector<double> sq_distances;

  std::size_t size() const noexcept { return indices.size(); }
  bool empty() const noexcept { return indices.empty(); }
};

/// Black-box k-nearest-neighbor query interface.
class AnnIndex {
 public:
  virtual ~AnnIndex() = default;

  /// Up to k distinct dataset row indices near `query`.
  virtual NeighborList query(std::span<const float> query, std::size_t k) const = 0;

  /// Number of indexed rows.
  virtual std::size_t size() const noexcept = 0;
};

/// Exact k nearest neighbors, ties broken by lower index. Requires 1 <= k <= n.
NeighborList brute_force_knn(const Dataset& dataset, std::span<const float> query,
                             std::size_t k);

/// Exact search over a dataset held by reference; the dataset must outlive it.
class BruteForceIndex final : public AnnIndex {
 public:
  explicit BruteForceIndex(const Dataset& dataset) : dataset_(&dataset) {}

  NeighborList query(std::span<const float> query, std::size_t k) const override;
  std::size_t size() const noexcept override { return dataset_->size(); }

 private:
  const Dataset* dataset_;
};

struct KMeansOptions {
  std::size_t max_iterations = 25;
  /// Stop once the within-cluster sum of squares drops by less than this
  /// fraction between iterations.
  double tolerance = 1e-4;
  /// Training uses a seeded sample of at most this many points per centroid.
  std::size_t max_points_per_centroid = 256;
};

struct KMeansResult {
  std::vector<double> centroids;  // k x d, row-major
  std::vector<std::size_t> assignment;
  double inertia = 0.0;
  std::size_t iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding. Empty clusters keep their
/// previous centroid. Assignment ties go to the lower centroid index.
KMeansResult kmeans(const Dataset& dataset, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

/// Inverted-file index: k-means centroids plus per-cluster member lists. The
/// member vectors are copied into cluster order so that probing a list is a
/// contiguous scan.
class IvfIndex {
 public:
  /// Requires 1 <= n_lists <= n.
  static IvfIndex build(const Dataset& dataset, std::size_t n_lists, std::uint64_t seed,
                        const KMeansOptions& options = {});

  /// Exact k-NN over the members of the n_probe clusters whose centroids are
  /// nearest to `query` (centroid ties to the lower index). Returns fewer
  /// than k entries when the probed lists hold fewer members.
  /// Requires 1 <= n_probe <= n_lists() and k >= 1.
  NeighborList query(std::span<const float> query, std::size_t k, std::size_t n_probe) const;

  std::size_t n_lists() const noexcept { return n_lists_; }
  std::size_t dim() const noexcept { return d_; }
  std::size_t size() const noexcept { return ids_.size(); }
  std::uint64_t seed() const noexcept { return seed_; }

  std::span<const double> centroid(std::size_t c) const noexcept {
    return {centroids_.data() + c * d_, d_};
  }
  /// Original row indices assigned to cluster c.
  std::span<const std::size_t> list(std::size_t c) const noexcept {
    return {ids_.data() + offsets_[c], offsets_[c + 1] - offsets_[c]};
  }

 private:
  IvfIndex() = default;

  std::size_t n_lists_ = 0;
  std::size_t d_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> centroids_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> ids_;
  std::vector<float> vectors_;
};

/// AnnIndex adapter probing a fixed number of IVF lists.
class IvfAnn final : public AnnIndex {
 public:
  IvfAnn(const IvfIndex& index, std::size_t n_probe);

  NeighborList query(std::span<const float> query, std::size_t k) const override {
    return index_->query(query, k, n_probe_);
  }
  std::size_t size() const noexcept override { return index_->size(); }

 private:
  const IvfIndex* index_;
  std::size_t n_probe_;
};

/// |approx ∩ exact| / |exact|. Throws std::invalid_argument if exact is empty.
double recall(const NeighborList& approx, const NeighborList& exact);

}  // namespace deann
