#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace deann {

/// Immutable row-major n x d single-precision matrix with cached squared row
/// norms (accumulated in double).
class Dataset {
 public:
  /// Throws std::invalid_argument if n or d is zero, data.size() != n*d, or
  /// any entry is non-finite.
  Dataset(std::size_t n, std::size_t d, std::vector<float> data);

  static Dataset from_rows(const std::vector<std::vector<float>>& rows);

  std::size_t size() const noexcept { return n_; }
  std::size_t dim() const noexcept { return d_; }

  std::span<const float> row(std::size_t i) const noexcept {
    return {data_.data() + i * d_, d_};
  }
  const float* row_ptr(std::size_t i) const noexcept { return data_.data() + i * d_; }

  std::span<const float> data() const noexcept { return data_; }
  std::span<const double> sq_norms() const noexcept { return sq_norms_; }
  double sq_norm(std::size_t i) const noexcept { return sq_norms_[i]; }

  /// New dataset made of the given rows, in order.
  Dataset select(std::span<const std::size_t> indices) const;

 private:
  std::size_t n_;
  std::size_t d_;
  std::vector<float> data_;
  std::vector<double> sq_norms_;
};

/// Squared L2 norm accumulated in double.
double sq_norm(std::span<const float> x) noexcept;

enum class DataFormat { Binary, Csv };

/// Binary layout: "DEANN1\0\0", u32le n, u32le d, then n*d little-endian
/// IEEE-754 binary32 values, row-major. CSV: one row per line, comma
/// separated, no header.
Dataset load_dataset(const std::filesystem::path& path, DataFormat format);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path,
                  DataFormat format);

/// Csv for a ".csv" extension, Binary otherwise.
DataFormat format_for_path(const std::filesystem::path& path);

struct Splits {
  Dataset train;
  Dataset validation;
  Dataset test;
  std::uint64_t seed;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> validation_indices;
  std::vector<std::size_t> test_indices;
};

/// Holdout size used by split(): min(500, (n - 1) / 2).
std::size_t holdout_size(std::size_t n) noexcept;

/// Seeded random three-way split. The index order is shuffled; the first
/// holdout_size(n) indices form the validation set, the next holdout_size(n)
/// the test set, the remainder the training set (kept in shuffled order).
/// Requires n > 2.
Splits split(const Dataset& dataset, std::uint64_t seed);

/// Dataset rows reordered by a random permutation: row i of base() is row
/// permutation()[i] of the original.
class PermutedDataset {
 public:
  PermutedDataset(Dataset base, std::vector<std::size_t> permutation);

  const Dataset& base() const noexcept { return base_; }
  std::size_t size() const noexcept { return base_.size(); }
  std::span<const std::size_t> permutation() const noexcept { return perm_; }
  std::span<const std::size_t> inverse_permutation() const noexcept { return inverse_; }

 private:
  Dataset base_;
  std::vector<std::size_t> perm_;
  std::vector<std::size_t> inverse_;
};

/// Fisher-Yates shuffle of [n] driven by Rng(seed).
std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed);

PermutedDataset permute(const Dataset& dataset, std::uint64_t seed);

}  // namespace deann
