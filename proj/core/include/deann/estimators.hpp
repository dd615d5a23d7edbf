#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "deann/ann.hpp"
#include "deann/dataset.hpp"
#include "deann/kernels.hpp"
#include "deann/rng.hpp"

namespace deann {

struct Estimate {
  double value = 0.0;
  std::size_t kernel_evals = 0;
  std::size_t neighbors_used = 0;
  std::size_t samples_used = 0;
  /// m = 0 with a nonempty remainder: the far part was dropped and the
  /// estimate is biased low.
  bool truncated = false;
  /// The permuted sampler was asked for more rows than the remainder holds and
  /// evaluated the remainder exactly instead.
  bool exhausted = false;
};

struct NaiveResult {
  std::vector<double> values;
  std::size_t kernel_evals = 0;
};

/// Exact KDE of every query row. Euclidean kernels go through the batched
/// distance identity; the Laplacian kernel uses a direct L1 loop.
NaiveResult naive_kde(const Dataset& dataset, const KernelSpec& kernel, const Dataset& queries);

/// Exact KDE of a single query (matrix-vector form).
double naive_kde(const Dataset& dataset, const KernelSpec& kernel, std::span<const float> query);

/// Mean kernel value over m rows drawn uniformly with replacement.
Estimate rs_kde(const Dataset& dataset, const KernelSpec& kernel, std::span<const float> query,
                std::size_t m, Rng& rng);

enum class CursorMode {
  /// One running cursor shared by consecutive calls.
  Shared,
  /// Every call starts from a fresh uniformly random cursor, which makes
  /// estimates for different queries (or repeated calls) independent.
  Independent,
};

/// A contiguous run of permuted positions, possibly wrapping past n - 1.
struct SampleWindow {
  std::size_t start = 0;
  std::size_t length = 0;
};

/// Running-cursor state for permuted random sampling. The permuted dataset is
/// shared and immutable; the cursor is the only mutable part, so concurrent
/// users need one RspState each.
class RspState {
 public:
  explicit RspState(std::shared_ptr<const PermutedDataset> permuted,
                    CursorMode mode = CursorMode::Shared, std::uint64_t seed = 0);

  const PermutedDataset& permuted() const noexcept { return *permuted_; }
  std::size_t size() const noexcept { return permuted_->size(); }

  std::size_t cursor() const noexcept { return cursor_; }
  void set_cursor(std::size_t cursor);

  CursorMode mode() const noexcept { return mode_; }

  /// The window covered by the most recent call (including skipped rows).
  SampleWindow last_window() const noexcept { return last_window_; }

 private:
  friend class RspAccess;

  std::shared_ptr<const PermutedDataset> permuted_;
  std::size_t cursor_ = 0;
  CursorMode mode_;
  std::optional<Rng> rng_;
  SampleWindow last_window_;
};

/// Mean kernel value over the m permuted rows starting at the cursor (mod n);
/// the cursor then advances by m. Requires 1 <= m <= n.
Estimate rsp_kde(RspState& state, const KernelSpec& kernel, std::span<const float> query,
                 std::size_t m);

/// DEANN with uniform sampling of the remainder. Rows returned by the ANN are
/// evaluated exactly; m further rows are drawn uniformly with replacement from
/// the rest by rejection. With k = 0 no ANN query is made and `ann` may be null.
Estimate deann(const Dataset& dataset, const KernelSpec& kernel, const AnnIndex* ann,
               std::span<const float> query, std::size_t k, std::size_t m, Rng& rng);

/// DEANN with permuted sampling of the remainder: the permuted array is walked
/// from the cursor, skipping rows the ANN returned, until m rows are accepted.
Estimate deann(const Dataset& dataset, const KernelSpec& kernel, const AnnIndex* ann,
               std::span<const float> query, std::size_t k, std::size_t m, RspState& state);

/// The DEANN combination for an already-known neighbor set. Used by both
/// deann() overloads; exposed for callers that cache ANN answers.
Estimate deann_from_neighbors(const Dataset& dataset, const KernelSpec& kernel,
                              std::span<const float> query,
                              std::span<const std::size_t> neighbors, std::size_t m, Rng& rng);
Estimate deann_from_neighbors(const Dataset& dataset, const KernelSpec& kernel,
                              std::span<const float> query,
                              std::span<const std::size_t> neighbors, std::size_t m,
                              RspState& state);

/// Query-set entry points. The permuted variant threads `state` through the
/// queries in order; construct it with CursorMode::Independent for
/// per-query independence.
std::vector<Estimate> deann_batch(const Dataset& dataset, const KernelSpec& kernel,
                                  const AnnIndex* ann, const Dataset& queries, std::size_t k,
                                  std::size_t m, Rng& rng);
std::vector<Estimate> deann_batch(const Dataset& dataset, const KernelSpec& kernel,
                                  const AnnIndex* ann, const Dataset& queries, std::size_t k,
                                  std::size_t m, RspState& state);

}  // namespace deann
