#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deann/ann.hpp"
#include "deann/dataset.hpp"
#include "deann/estimators.hpp"
#include "deann/kernels.hpp"

namespace deann {

enum class EstimatorKind { Naive, Rs, Rsp, Deann, Deannp };

std::string_view to_string(EstimatorKind kind) noexcept;
/// "naive", "rs", "rsp", "deann", "deannp"; throws std::invalid_argument.
EstimatorKind parse_estimator(std::string_view name);

bool uses_ann(EstimatorKind kind) noexcept;

/// One point of a parameter grid. Fields irrelevant to an estimator are zero.
struct ParamPoint {
  std::size_t k = 0;
  std::size_t m = 0;
  std::size_t n_lists = 0;
  std::size_t n_probe = 0;

  friend bool operator==(const ParamPoint&, const ParamPoint&) = default;
};

struct ExperimentSpec {
  KernelFamily kernel = KernelFamily::Exponential;
  double bandwidth = 1.0;
  EstimatorKind estimator = EstimatorKind::Naive;
  std::vector<std::size_t> k_grid;
  std::vector<std::size_t> m_grid;
  std::vector<std::size_t> n_lists_grid;
  std::vector<std::size_t> n_probe_grid;
  std::uint64_t seed = 0;
  std::size_t repetitions = 5;
  double rel_err_budget = 0.1;
  double kde_floor = 1e-16;
  /// Wall-clock cap per configuration (all repetitions, excluding index build).
  double time_cap_seconds = 60.0;
  /// With timing disabled, selection uses kernel evaluations as the cost and
  /// configurations may run on several threads.
  bool timing = true;
  std::size_t threads = 1;

  /// Throws std::invalid_argument when the grids needed by the estimator are
  /// empty, repetitions is zero, or threads > 1 is combined with timing.
  void validate() const;
};

struct ResultRow {
  EstimatorKind estimator = EstimatorKind::Naive;
  ParamPoint params;
  double mean_rel_err = 0.0;
  double mean_query_ms = 0.0;
  double mean_kernel_evals = 0.0;
  std::optional<double> recall;
  std::size_t repetitions = 0;
  /// ANN build plus the permutations of all repetitions, seconds. Disjoint
  /// from the query timer.
  double preprocessing_s = 0.0;
  std::size_t queries = 0;
  std::size_t excluded_queries = 0;
  bool timed_out = false;
};

/// Per-query outcome of one repetition.
struct QueryRecord {
  std::size_t repetition = 0;
  std::size_t query = 0;
  double estimate = 0.0;
  double exact = 0.0;
  std::optional<double> rel_err;  // empty below the KDE floor
  double time_ms = 0.0;
  std::size_t kernel_evals = 0;
};

/// An estimator bound to a training set and a parameter point, ready to
/// answer queries. Permuted samplers keep one running cursor across calls.
class PreparedEstimator {
 public:
  virtual ~PreparedEstimator() = default;
  virtual Estimate query(std::span<const float> query) = 0;
};

/// Shared read-only preprocessing for one training set: IVF indexes keyed by
/// list count, built on first use with a seed derived from `seed`.
class IndexCache {
 public:
  IndexCache(const Dataset& train, std::uint64_t seed) : train_(&train), seed_(seed) {}

  const IvfIndex& ivf(std::size_t n_lists);
  /// Seconds spent building the index for n_lists (0 if not built yet).
  double build_seconds(std::size_t n_lists) const;

 private:
  struct Entry {
    std::size_t n_lists;
    std::unique_ptr<IvfIndex> index;
    double seconds;
  };
  const Dataset* train_;
  std::uint64_t seed_;
  std::vector<Entry> entries_;
};

/// Builds the estimator. `sampler_seed` drives the random sample and the
/// permutation; the ANN index comes from `cache`. The permutation time is
/// returned through `preprocessing_s`.
std::unique_ptr<PreparedEstimator> prepare_estimator(EstimatorKind kind, const Dataset& train,
                                                     const KernelSpec& kernel,
                                                     const ParamPoint& point, IndexCache& cache,
                                                     std::uint64_t sampler_seed,
                                                     double* preprocessing_s = nullptr);

/// round(10 * sqrt(2)^i) for i = 0, 1, ... while below `limit`.
std::vector<std::size_t> geometric_grid(std::size_t limit);

/// The built-in grids: k, m from geometric_grid (plus 0 for DEANN variants)
/// with k + m < n; n_lists in {32, ..., 4096} up to n; n_probe in {1, 5, 10}.
void apply_default_grids(ExperimentSpec& spec, std::size_t n);

/// The configurations a spec describes, after pruning invalid combinations
/// (k + m >= n, n_probe > n_lists, m > n for rsp). DEANN points with k = 0
/// carry no index parameters and appear once.
std::vector<ParamPoint> expand_grid(const ExperimentSpec& spec, std::size_t n);

struct EvaluationOutput {
  ResultRow row;
  std::vector<QueryRecord> records;
};

/// Runs one parameter point for spec.repetitions repetitions over `queries`.
/// Repetition r draws its randomness from derive_seed(spec.seed, r). Only the
/// estimator call itself is timed, single-threaded.
EvaluationOutput evaluate(const Dataset& train, const Dataset& queries,
                          std::span<const double> ground_truth, const ExperimentSpec& spec,
                          const ParamPoint& point, IndexCache& cache, bool keep_records = false);

struct GridSearchResult {
  std::vector<ResultRow> rows;
  /// Cheapest row within the error budget, if any.
  std::optional<std::size_t> selected;
  /// Lowest-error completed row; reported when nothing qualifies.
  std::optional<std::size_t> best_error;
};

/// Evaluates every grid point. Configurations exceeding the time cap are
/// recorded as timed out, and points with k, m both at least those of a timed
/// out point (same index parameters) are skipped as timed out too.
GridSearchResult grid_search(const Dataset& train, const Dataset& validation,
                             std::span<const double> ground_truth, const ExperimentSpec& spec);

/// Selection rule: among completed rows with mean_rel_err <= budget, the one
/// with the lowest cost (time, or kernel evaluations when by_time is false).
std::optional<std::size_t> select_row(std::span<const ResultRow> rows, double budget, bool by_time);

/// Average recall of IVF k-NN against brute force over the query rows.
double average_recall(const Dataset& dataset, const Dataset& queries, std::size_t k,
                      std::size_t n_lists, std::size_t n_probe, std::uint64_t seed);

/// FNV-1a 64 over n, d (u32le) and the little-endian float bytes.
std::uint64_t dataset_hash(const Dataset& dataset);

/// One value per line, printed with 17 significant digits.
void save_values(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> load_values(const std::filesystem::path& path);

}  // namespace deann
