#include "deann/ann.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>

#include "deann/distance.hpp"

namespace deann {

namespace {

using Candidate = std::pair<double, std::size_t>;

NeighborList take_smallest(std::vector<Candidate>& candidates, std::size_t k) {
  const std::size_t keep = std::min(k, candidates.size());
  const auto mid = candidates.begin() + static_cast<std::ptrdiff_t>(keep);
  if (keep < candidates.size()) std::nth_element(candidates.begin(), mid, candidates.end());
  std::sort(candidates.begin(), mid);
  NeighborList out;
  out.indices.reserve(keep);
  out.sq_distances.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    out.sq_distances.push_back(candidates[i].first);
    out.indices.push_back(candidates[i].second);
  }
  return out;
}

double sqdist_to_centroid(std::span<const float> q, const double* c) {
  double acc = 0.0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t t = 0; t < q.size(); ++t) {
    const double diff = static_cast<double>(q[t]) - c[t];
    acc += diff * diff;
  }
  return acc;
}

}  // namespace

NeighborList brute_force_knn(const Dataset& dataset, std::span<const float> query, std::size_t k) {
  if (k == 0 || k > dataset.size())
    throw std::invalid_argument("k must be in [1, n], got " + std::to_string(k));
  if (query.size() != dataset.dim()) throw std::invalid_argument("query dimension mismatch");
  std::vector<Candidate> all(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) all[i] = {sqdist(dataset.row(i), query), i};
  return take_smallest(all, k);
}

NeighborList BruteForceIndex::query(std::span<const float> query, std::size_t k) const {
  return brute_force_knn(*dataset_, query, std::min(k, dataset_->size()));
}

IvfIndex IvfIndex::build(const Dataset& dataset, std::size_t n_lists, std::uint64_t seed,
                         const KMeansOptions& options) {
  if (n_lists == 0 || n_lists > dataset.size())
    throw std::invalid_argument("IVF list count must be in [1, n], got " + std::to_string(n_lists));
  KMeansResult km = kmeans(dataset, n_lists, seed, options);

  IvfIndex index;
  index.n_lists_ = n_lists;
  index.d_ = dataset.dim();
  index.seed_ = seed;
  index.centroids_ = std::move(km.centroids);

  index.offsets_.assign(n_lists + 1, 0);
  for (const std::size_t c : km.assignment) ++index.offsets_[c + 1];
  for (std::size_t c = 0; c < n_lists; ++c) index.offsets_[c + 1] += index.offsets_[c];
  index.ids_.resize(dataset.size());
  index.vectors_.resize(dataset.size() * dataset.dim());
  std::vector<std::size_t> fill(index.offsets_.begin(), index.offsets_.end() - 1);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::size_t slot = fill[km.assignment[i]]++;
    index.ids_[slot] = i;
    const auto r = dataset.row(i);
    std::copy(r.begin(), r.end(), index.vectors_.begin() + static_cast<std::ptrdiff_t>(slot * index.d_));
  }
  return index;
}

NeighborList IvfIndex::query(std::span<const float> query, std::size_t k,
                             std::size_t n_probe) const {
  if (query.size() != d_) throw std::invalid_argument("query dimension mismatch");
  if (k == 0) throw std::invalid_argument("k must be positive");
  if (n_probe == 0 || n_probe > n_lists_)
    throw std::invalid_argument("n_probe must be in [1, n_lists], got " + std::to_string(n_probe));

  std::vector<Candidate> lists(n_lists_);
  for (std::size_t c = 0; c < n_lists_; ++c)
    lists[c] = {sqdist_to_centroid(query, centroids_.data() + c * d_), c};
  std::partial_sort(lists.begin(), lists.begin() + static_cast<std::ptrdiff_t>(n_probe),
                    lists.end());

  std::size_t total = 0;
  for (std::size_t p = 0; p < n_probe; ++p) total += list(lists[p].second).size();
  std::vector<Candidate> candidates;
  candidates.reserve(total);
  for (std::size_t p = 0; p < n_probe; ++p) {
    const std::size_t c = lists[p].second;
    for (std::size_t slot = offsets_[c]; slot < offsets_[c + 1]; ++slot) {
      const std::span<const float> v(vectors_.data() + slot * d_, d_);
      candidates.emplace_back(sqdist(v, query), ids_[slot]);
    }
  }
  return take_smallest(candidates, k);
}

IvfAnn::IvfAnn(const IvfIndex& index, std::size_t n_probe) : index_(&index), n_probe_(n_probe) {
  if (n_probe == 0 || n_probe > index.n_lists())
    throw std::invalid_argument("n_probe must be in [1, n_lists], got " + std::to_string(n_probe));
}

double recall(const NeighborList& approx, const NeighborList& exact) {
  if (exact.empty()) throw std::invalid_argument("recall: exact neighbor list is empty");
  const std::unordered_set<std::size_t> truth(exact.indices.begin(), exact.indices.end());
  std::size_t hits = 0;
  for (const std::size_t i : approx.indices) hits += truth.count(i);
  return static_cast<double>(hits) / static_cast<double>(exact.size());
}

}  // namespace deann
