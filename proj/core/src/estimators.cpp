#include "deann/estimators.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "deann/distance.hpp"

namespace deann {

namespace {

constexpr std::size_t kRowBlock = 4096;

void check_query(const Dataset& dataset, std::span<const float> query) {
  if (query.size() != dataset.dim())
    throw std::invalid_argument("query dimension " + std::to_string(query.size()) +
                                " does not match dataset dimension " +
                                std::to_string(dataset.dim()));
}

struct WideQuery {
  std::vector<double> values;
  double sq_norm;
};

WideQuery widen(std::span<const float> query) {
  return {std::vector<double>(query.begin(), query.end()), deann::sq_norm(query)};
}

double kernel_at(const KernelSpec& kernel, std::span<const float> x, std::span<const float> y) {
  return kernel.from_distance_unchecked(kernel_distance(kernel, x, y));
}

// Kernel sum over permuted positions start, ..., start + length - 1 (mod n),
// leaving out the window offsets listed in `skip` (ascending).
double window_kernel_sum(const PermutedDataset& permuted, const KernelSpec& kernel,
                         std::span<const float> query, const WideQuery& wide, std::size_t start,
                         std::size_t length, std::span<const std::size_t> skip,
                         std::vector<double>& scratch) {
  const std::size_t n = permuted.size();
  double sum = 0.0;
  std::size_t next_skip = 0;
  auto skipped = [&](std::size_t r) {
    if (next_skip < skip.size() && skip[next_skip] == r) {
      ++next_skip;
      return true;
    }
    return false;
  };
  if (kernel.euclidean()) {
    window_sqdist_into(permuted, start, length, wide.values, wide.sq_norm, scratch);
    for (std::size_t r = 0; r < length; ++r)
      if (!skipped(r)) sum += kernel.from_sqdist(scratch[r]);
  } else {
    for (std::size_t r = 0; r < length; ++r)
      if (!skipped(r)) sum += kernel_at(kernel, permuted.base().row((start + r) % n), query);
  }
  return sum;
}

// Kernel sum over the neighbor rows. Euclidean kernels reuse the squared
// distances the ANN reported when there is one per neighbor.
double neighbor_kernel_sum(const Dataset& dataset, const KernelSpec& kernel,
                           std::span<const float> query, std::span<const std::size_t> neighbors,
                           std::span<const double> sq_distances = {}) {
  const bool reuse = kernel.euclidean() && sq_distances.size() == neighbors.size();
  double sum = 0.0;
  for (std::size_t j = 0; j < neighbors.size(); ++j) {
    const std::size_t i = neighbors[j];
    if (i >= dataset.size()) throw std::out_of_range("neighbor index out of range");
    sum += reuse ? kernel.from_sqdist(sq_distances[j]) : kernel_at(kernel, dataset.row(i), query);
  }
  return sum;
}

// Combines the exact neighbor part with the remainder estimate, using the
// actual neighbor count as the partition size.
Estimate combine(std::size_t n, std::size_t khat, double neighbor_sum, double remainder_sum,
                 std::size_t samples) {
  Estimate e;
  e.neighbors_used = khat;
  e.samples_used = samples;
  e.kernel_evals = khat + samples;
  const double nd = static_cast<double>(n);
  const double z1 = khat > 0 ? neighbor_sum / static_cast<double>(khat) : 0.0;
  const double z2 = samples > 0 ? remainder_sum / static_cast<double>(samples) : 0.0;
  e.value = (static_cast<double>(khat) / nd) * z1 + (static_cast<double>(n - khat) / nd) * z2;
  e.truncated = samples == 0 && khat < n;
  return e;
}

void check_distinct(std::span<const std::size_t> sorted) {
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("neighbor list contains duplicate indices");
}

NeighborList query_neighbors(const Dataset& dataset, const AnnIndex* ann,
                             std::span<const float> query, std::size_t k) {
  if (k > dataset.size())
    throw std::invalid_argument("k = " + std::to_string(k) + " exceeds n = " +
                                std::to_string(dataset.size()));
  if (k == 0) return {};
  if (ann == nullptr) throw std::invalid_argument("k > 0 requires an ANN index");
  if (ann->size() != dataset.size())
    throw std::invalid_argument("ANN index size does not match the dataset");
  NeighborList nl = ann->query(query, k);
  if (nl.size() > k) throw std::logic_error("ANN returned more than k neighbors");
  return nl;
}

}  // namespace

class RspAccess {
 public:
  static std::size_t& cursor(RspState& s) { return s.cursor_; }
  static std::optional<Rng>& rng(RspState& s) { return s.rng_; }
  static SampleWindow& window(RspState& s) { return s.last_window_; }
};

RspState::RspState(std::shared_ptr<const PermutedDataset> permuted, CursorMode mode,
                   std::uint64_t seed)
    : permuted_(std::move(permuted)), mode_(mode) {
  if (!permuted_) throw std::invalid_argument("RspState needs a permuted dataset");
  if (mode_ == CursorMode::Independent) rng_.emplace(seed);
}

void RspState::set_cursor(std::size_t cursor) {
  if (cursor >= size()) throw std::out_of_range("cursor out of range");
  cursor_ = cursor;
}

double naive_kde(const Dataset& dataset, const KernelSpec& kernel, std::span<const float> query) {
  check_query(dataset, query);
  const std::size_t n = dataset.size();
  double sum = 0.0;
  if (kernel.euclidean()) {
    const WideQuery wide = widen(query);
    std::vector<double> dist(std::min(kRowBlock, n));
    for (std::size_t b = 0; b < n; b += kRowBlock) {
      const std::size_t count = std::min(kRowBlock, n - b);
      sqdist_rows(dataset, b, count, wide.values, wide.sq_norm, dist.data());
      for (std::size_t i = 0; i < count; ++i) sum += kernel.from_sqdist(dist[i]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) sum += kernel_at(kernel, dataset.row(i), query);
  }
  return sum / static_cast<double>(n);
}

NaiveResult naive_kde(const Dataset& dataset, const KernelSpec& kernel, const Dataset& queries) {
  if (queries.dim() != dataset.dim())
    throw std::invalid_argument("query dimension does not match dataset dimension");
  NaiveResult result;
  result.values.assign(queries.size(), 0.0);
  result.kernel_evals = queries.size() * dataset.size();
  if (kernel.euclidean()) {
    for_each_sqdist_tile(queries, dataset, [&](const DistanceTile& t) {
      for (std::size_t j = 0; j < t.q_count; ++j) {
        const double* row = t.values + j * t.x_count;
        double sum = 0.0;
        for (std::size_t i = 0; i < t.x_count; ++i) sum += kernel.from_sqdist(row[i]);
        result.values[t.q_begin + j] += sum;
      }
    });
  } else {
    for (std::size_t j = 0; j < queries.size(); ++j)
      for (std::size_t i = 0; i < dataset.size(); ++i)
        result.values[j] += kernel_at(kernel, dataset.row(i), queries.row(j));
  }
  for (double& v : result.values) v /= static_cast<double>(dataset.size());
  return result;
}

Estimate rs_kde(const Dataset& dataset, const KernelSpec& kernel, std::span<const float> query,
                std::size_t m, Rng& rng) {
  check_query(dataset, query);
  if (m == 0) throw std::invalid_argument("rs_kde needs m >= 1");
  double sum = 0.0;
  for (std::size_t s = 0; s < m; ++s)
    sum += kernel_at(kernel, dataset.row(rng.below(dataset.size())), query);
  Estimate e;
  e.value = sum / static_cast<double>(m);
  e.samples_used = m;
  e.kernel_evals = m;
  return e;
}

Estimate rsp_kde(RspState& state, const KernelSpec& kernel, std::span<const float> query,
                 std::size_t m) {
  const PermutedDataset& permuted = state.permuted();
  check_query(permuted.base(), query);
  const std::size_t n = permuted.size();
  if (m == 0 || m > n)
    throw std::invalid_argument("rsp_kde needs 1 <= m <= n, got m = " + std::to_string(m));
  std::size_t& cursor = RspAccess::cursor(state);
  if (state.mode() == CursorMode::Independent) cursor = RspAccess::rng(state)->below(n);

  const WideQuery wide = widen(query);
  std::vector<double> scratch;
  const double sum = window_kernel_sum(permuted, kernel, query, wide, cursor, m, {}, scratch);
  RspAccess::window(state) = {cursor, m};
  cursor = (cursor + m) % n;

  Estimate e;
  e.value = sum / static_cast<double>(m);
  e.samples_used = m;
  e.kernel_evals = m;
  return e;
}

namespace {

Estimate deann_rs(const Dataset& dataset, const KernelSpec& kernel, std::span<const float> query,
                  std::span<const std::size_t> neighbors, std::span<const double> sq_distances,
                  std::size_t m, Rng& rng) {
  check_query(dataset, query);
  const std::size_t n = dataset.size();
  const std::size_t khat = neighbors.size();
  if (khat > n) throw std::invalid_argument("more neighbors than dataset rows");
  const double neighbor_sum = neighbor_kernel_sum(dataset, kernel, query, neighbors, sq_distances);
  const std::unordered_set<std::size_t> excluded(neighbors.begin(), neighbors.end());
  if (excluded.size() != khat)
    throw std::invalid_argument("neighbor list contains duplicate indices");
  if (m == 0 || khat == n) return combine(n, khat, neighbor_sum, 0.0, 0);

  double sum = 0.0;
  for (std::size_t s = 0; s < m; ++s) {
    std::size_t i = rng.below(n);
    while (excluded.count(i) != 0) i = rng.below(n);
    sum += kernel_at(kernel, dataset.row(i), query);
  }
  return combine(n, khat, neighbor_sum, sum, m);
}

Estimate deann_rsp(const Dataset& dataset, const KernelSpec& kernel, std::span<const float> query,
                   std::span<const std::size_t> neighbors, std::span<const double> sq_distances,
                   std::size_t m, RspState& state) {
  check_query(dataset, query);
  const PermutedDataset& permuted = state.permuted();
  const std::size_t n = dataset.size();
  if (permuted.size() != n || permuted.base().dim() != dataset.dim())
    throw std::invalid_argument("permuted sampler state does not match the dataset");
  const std::size_t khat = neighbors.size();
  if (khat > n) throw std::invalid_argument("more neighbors than dataset rows");
  const double neighbor_sum = neighbor_kernel_sum(dataset, kernel, query, neighbors, sq_distances);

  // Permuted positions of the neighbor rows, ascending.
  std::vector<std::size_t> positions(khat);
  const auto inverse = permuted.inverse_permutation();
  for (std::size_t j = 0; j < khat; ++j) positions[j] = inverse[neighbors[j]];
  std::sort(positions.begin(), positions.end());
  check_distinct(positions);
  if (m == 0 || khat == n) return combine(n, khat, neighbor_sum, 0.0, 0);

  std::size_t& cursor = RspAccess::cursor(state);
  if (state.mode() == CursorMode::Independent) {
    // Uniform over remainder positions, so every remainder row is equally
    // likely to fall in the window.
    Rng& rng = *RspAccess::rng(state);
    do {
      cursor = rng.below(n);
    } while (std::binary_search(positions.begin(), positions.end(), cursor));
  }

  const std::size_t remainder = n - khat;
  const bool full_pass = m >= remainder;
  const std::size_t take = full_pass ? remainder : m;

  // Window offsets (relative to the cursor) of the rows to skip, ascending;
  // the window grows by one for each skipped row that falls inside it.
  std::vector<std::size_t> skip(khat);
  for (std::size_t j = 0; j < khat; ++j) skip[j] = (positions[j] + n - cursor) % n;
  std::sort(skip.begin(), skip.end());
  std::size_t length = full_pass ? n : take;
  if (!full_pass) {
    std::size_t inside = 0;
    while (inside < skip.size() && skip[inside] < length) {
      ++length;
      ++inside;
    }
    skip.resize(inside);
  }

  const WideQuery wide = widen(query);
  std::vector<double> scratch;
  const double sum =
      window_kernel_sum(permuted, kernel, query, wide, cursor, length, skip, scratch);
  RspAccess::window(state) = {cursor, length};
  cursor = (cursor + length) % n;

  Estimate e = combine(n, khat, neighbor_sum, sum, take);
  e.exhausted = m > remainder;
  return e;
}

}  // namespace

Estimate deann_from_neighbors(const Dataset& dataset, const KernelSpec& kernel,
                              std::span<const float> query,
                              std::span<const std::size_t> neighbors, std::size_t m, Rng& rng) {
  return deann_rs(dataset, kernel, query, neighbors, {}, m, rng);
}

Estimate deann_from_neighbors(const Dataset& dataset, const KernelSpec& kernel,
                              std::span<const float> query,
                              std::span<const std::size_t> neighbors, std::size_t m,
                              RspState& state) {
  return deann_rsp(dataset, kernel, query, neighbors, {}, m, state);
}

Estimate deann(const Dataset& dataset, const KernelSpec& kernel, const AnnIndex* ann,
               std::span<const float> query, std::size_t k, std::size_t m, Rng& rng) {
  check_query(dataset, query);
  const NeighborList nl = query_neighbors(dataset, ann, query, k);
  return deann_rs(dataset, kernel, query, nl.indices, nl.sq_distances, m, rng);
}

Estimate deann(const Dataset& dataset, const KernelSpec& kernel, const AnnIndex* ann,
               std::span<const float> query, std::size_t k, std::size_t m, RspState& state) {
  check_query(dataset, query);
  const NeighborList nl = query_neighbors(dataset, ann, query, k);
  return deann_rsp(dataset, kernel, query, nl.indices, nl.sq_distances, m, state);
}

std::vector<Estimate> deann_batch(const Dataset& dataset, const KernelSpec& kernel,
                                  const AnnIndex* ann, const Dataset& queries, std::size_t k,
                                  std::size_t m, Rng& rng) {
  std::vector<Estimate> out;
  out.reserve(queries.size());
  for (std::size_t j = 0; j < queries.size(); ++j)
    out.push_back(deann(dataset, kernel, ann, queries.row(j), k, m, rng));
  return out;
}

std::vector<Estimate> deann_batch(const Dataset& dataset, const KernelSpec& kernel,
                                  const AnnIndex* ann, const Dataset& queries, std::size_t k,
                                  std::size_t m, RspState& state) {
  std::vector<Estimate> out;
  out.reserve(queries.size());
  for (std::size_t j = 0; j < queries.size(); ++j)
    out.push_back(deann(dataset, kernel, ann, queries.row(j), k, m, state));
  return out;
}

}  // namespace deann
