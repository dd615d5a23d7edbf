#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "deann/dataset.hpp"

namespace deann {

/// Sum of squared coordinate differences, accumulated in double.
double sqdist(std::span<const float> x, std::span<const float> y);

/// Sum of absolute coordinate differences, accumulated in double.
double l1dist(std::span<const float> x, std::span<const float> y);

/// Clamps a squared distance obtained from the norm identity at zero.
/// Values below -1e-3 * scale mean the cached norms are inconsistent with the
/// data and raise ConsistencyError.
double clamp_sqdist(double raw, double scale);

/// Dense N x n matrix of squared L2 distances, row j belonging to query j.
class DistanceMatrix {
 public:
  DistanceMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), values_(rows * cols) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t j, std::size_t i) const noexcept {
    return values_[j * cols_ + i];
  }
  double& operator()(std::size_t j, std::size_t i) noexcept { return values_[j * cols_ + i]; }
  std::span<const double> row(std::size_t j) const noexcept {
    return {values_.data() + j * cols_, cols_};
  }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> values_;
};

/// A block of squared distances between queries [q_begin, q_begin + q_count)
/// and data rows [x_begin, x_begin + x_count), stored row-major with stride
/// x_count.
struct DistanceTile {
  std::size_t q_begin;
  std::size_t q_count;
  std::size_t x_begin;
  std::size_t x_count;
  const double* values;
};

/// Streams the full query x data squared-distance matrix tile by tile, without
/// materializing it. Each tile is ||q||^2 + ||x||^2 - 2 Q X^T over a block,
/// the inner products coming from a double-precision matrix product.
void for_each_sqdist_tile(const Dataset& queries, const Dataset& data,
                          const std::function<void(const DistanceTile&)>& visit);

/// Materialized version of for_each_sqdist_tile.
DistanceMatrix batch_sqdist(const Dataset& queries, const Dataset& data);

/// Squared distances from `query` to the contiguous rows [begin, begin+count)
/// of `data`, written to out[0..count). Matrix-vector form of the identity.
void sqdist_rows(const Dataset& data, std::size_t begin, std::size_t count,
                 std::span<const double> query, double query_sq_norm, double* out);

/// Squared distances from `query` to permuted rows start, start+1, ...,
/// start+count-1 (indices mod n). count may not exceed n.
std::vector<double> window_sqdist(const PermutedDataset& permuted, std::size_t start,
                                  std::size_t count, std::span<const float> query);

/// Same as window_sqdist, writing into `out` (resized to count). `query` is
/// already converted to double.
void window_sqdist_into(const PermutedDataset& permuted, std::size_t start,
                        std::size_t count, std::span<const double> query,
                        double query_sq_norm, std::vector<double>& out);

}  // namespace deann
