#include "deann/distance.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "deann/errors.hpp"

namespace deann {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Tile shape for the batched path: a block of data rows is widened to double
// once and multiplied against all queries, kQueryBlock queries at a time.
constexpr std::size_t kRowBlock = 512;
constexpr std::size_t kQueryBlock = 128;

void check_dims(std::size_t a, std::size_t b) {
  if (a != b)
    throw std::invalid_argument("dimension mismatch: " + std::to_string(a) + " vs " +
                                std::to_string(b));
}

void widen_rows(const Dataset& data, std::size_t begin, std::size_t count, double* out) {
  const float* src = data.row_ptr(begin);
  const std::size_t total = count * data.dim();
  for (std::size_t t = 0; t < total; ++t) out[t] = src[t];
}

inline double dot_widened(const float* x, const double* q, std::size_t d) noexcept {
  double acc = 0.0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t t = 0; t < d; ++t) acc += static_cast<double>(x[t]) * q[t];
  return acc;
}

}  // namespace

double sqdist(std::span<const float> x, std::span<const float> y) {
  check_dims(x.size(), y.size());
  double acc = 0.0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double diff = static_cast<double>(x[t]) - static_cast<double>(y[t]);
    acc += diff * diff;
  }
  return acc;
}

double l1dist(std::span<const float> x, std::span<const float> y) {
  check_dims(x.size(), y.size());
  double acc = 0.0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t t = 0; t < x.size(); ++t)
    acc += std::abs(static_cast<double>(x[t]) - static_cast<double>(y[t]));
  return acc;
}

double clamp_sqdist(double raw, double scale) {
  if (raw >= 0.0) return raw;
  if (raw < -1e-3 * scale || std::isnan(raw))
    throw ConsistencyError("squared distance " + std::to_string(raw) +
                           " is far below zero; cached norms are inconsistent");
  return 0.0;
}

void for_each_sqdist_tile(const Dataset& queries, const Dataset& data,
                          const std::function<void(const DistanceTile&)>& visit) {
  check_dims(queries.dim(), data.dim());
  const std::size_t d = data.dim();
  const std::size_t nq = queries.size();
  const std::size_t n = data.size();

  RowMatrix q_wide(static_cast<Eigen::Index>(nq), static_cast<Eigen::Index>(d));
  widen_rows(queries, 0, nq, q_wide.data());

  RowMatrix x_wide(static_cast<Eigen::Index>(std::min(kRowBlock, n)),
                   static_cast<Eigen::Index>(d));
  RowMatrix products;
  std::vector<double> tile;

  for (std::size_t x0 = 0; x0 < n; x0 += kRowBlock) {
    const std::size_t xc = std::min(kRowBlock, n - x0);
    widen_rows(data, x0, xc, x_wide.data());
    const auto x_block = x_wide.topRows(static_cast<Eigen::Index>(xc));
    for (std::size_t q0 = 0; q0 < nq; q0 += kQueryBlock) {
      const std::size_t qc = std::min(kQueryBlock, nq - q0);
      products.noalias() = q_wide.middleRows(static_cast<Eigen::Index>(q0),
                                             static_cast<Eigen::Index>(qc)) *
                           x_block.transpose();
      tile.resize(qc * xc);
      for (std::size_t j = 0; j < qc; ++j) {
        const double qn = queries.sq_norm(q0 + j);
        const double* prod = products.data() + j * xc;
        double* out = tile.data() + j * xc;
        for (std::size_t i = 0; i < xc; ++i) {
          const double xn = data.sq_norm(x0 + i);
          out[i] = clamp_sqdist(qn + xn - 2.0 * prod[i], qn + xn);
        }
      }
      visit(DistanceTile{q0, qc, x0, xc, tile.data()});
    }
  }
}

DistanceMatrix batch_sqdist(const Dataset& queries, const Dataset& data) {
  DistanceMatrix result(queries.size(), data.size());
  for_each_sqdist_tile(queries, data, [&](const DistanceTile& t) {
    for (std::size_t j = 0; j < t.q_count; ++j)
      std::copy_n(t.values + j * t.x_count, t.x_count, &result(t.q_begin + j, t.x_begin));
  });
  return result;
}

void sqdist_rows(const Dataset& data, std::size_t begin, std::size_t count,
                 std::span<const double> query, double query_sq_norm, double* out) {
  check_dims(query.size(), data.dim());
  if (begin + count > data.size()) throw std::out_of_range("row range exceeds dataset");
  const std::size_t d = data.dim();
  const auto norms = data.sq_norms();
  for (std::size_t i = 0; i < count; ++i) {
    const double xn = norms[begin + i];
    const double dot = dot_widened(data.row_ptr(begin + i), query.data(), d);
    out[i] = clamp_sqdist(xn + query_sq_norm - 2.0 * dot, xn + query_sq_norm);
  }
}

void window_sqdist_into(const PermutedDataset& permuted, std::size_t start, std::size_t count,
                        std::span<const double> query, double query_sq_norm,
                        std::vector<double>& out) {
  const std::size_t n = permuted.size();
  if (start >= n) throw std::out_of_range("window start out of range");
  if (count > n) throw std::invalid_argument("window longer than the dataset");
  out.resize(count);
  const std::size_t first = std::min(count, n - start);
  sqdist_rows(permuted.base(), start, first, query, query_sq_norm, out.data());
  if (first < count)
    sqdist_rows(permuted.base(), 0, count - first, query, query_sq_norm, out.data() + first);
}

std::vector<double> window_sqdist(const PermutedDataset& permuted, std::size_t start,
                                  std::size_t count, std::span<const float> query) {
  check_dims(query.size(), permuted.base().dim());
  std::vector<double> wide(query.begin(), query.end());
  std::vector<double> out;
  window_sqdist_into(permuted, start, count, wide, sq_norm(query), out);
  return out;
}

}  // namespace deann
