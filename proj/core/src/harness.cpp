#include "deann/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>

#include "deann/analysis.hpp"
#include "deann/errors.hpp"
#include "deann/rng.hpp"

namespace deann {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

class NaiveEstimator final : public PreparedEstimator {
 public:
  NaiveEstimator(const Dataset& train, const KernelSpec& kernel) : train_(&train), kernel_(kernel) {}
  Estimate query(std::span<const float> q) override {
    Estimate e;
    e.value = naive_kde(*train_, kernel_, q);
    e.kernel_evals = train_->size();
    e.samples_used = train_->size();
    return e;
  }

 private:
  const Dataset* train_;
  KernelSpec kernel_;
};

class RsEstimator final : public PreparedEstimator {
 public:
  RsEstimator(const Dataset& train, const KernelSpec& kernel, std::size_t m, std::uint64_t seed)
      : train_(&train), kernel_(kernel), m_(m), rng_(seed) {}
  Estimate query(std::span<const float> q) override { return rs_kde(*train_, kernel_, q, m_, rng_); }

 private:
  const Dataset* train_;
  KernelSpec kernel_;
  std::size_t m_;
  Rng rng_;
};

class RspEstimator final : public PreparedEstimator {
 public:
  RspEstimator(std::shared_ptr<const PermutedDataset> permuted, const KernelSpec& kernel,
               std::size_t m)
      : state_(std::move(permuted)), kernel_(kernel), m_(m) {}
  Estimate query(std::span<const float> q) override { return rsp_kde(state_, kernel_, q, m_); }

 private:
  RspState state_;
  KernelSpec kernel_;
  std::size_t m_;
};

class DeannEstimator final : public PreparedEstimator {
 public:
  DeannEstimator(const Dataset& train, const KernelSpec& kernel, std::unique_ptr<AnnIndex> ann,
                 std::size_t k, std::size_t m, std::uint64_t seed)
      : train_(&train), kernel_(kernel), ann_(std::move(ann)), k_(k), m_(m), rng_(seed) {}
  Estimate query(std::span<const float> q) override {
    return deann(*train_, kernel_, ann_.get(), q, k_, m_, rng_);
  }

 private:
  const Dataset* train_;
  KernelSpec kernel_;
  std::unique_ptr<AnnIndex> ann_;
  std::size_t k_;
  std::size_t m_;
  Rng rng_;
};

class DeannpEstimator final : public PreparedEstimator {
 public:
  DeannpEstimator(const Dataset& train, const KernelSpec& kernel, std::unique_ptr<AnnIndex> ann,
                  std::shared_ptr<const PermutedDataset> permuted, std::size_t k, std::size_t m)
      : train_(&train), kernel_(kernel), ann_(std::move(ann)), state_(std::move(permuted)), k_(k), m_(m) {}
  Estimate query(std::span<const float> q) override {
    return deann(*train_, kernel_, ann_.get(), q, k_, m_, state_);
  }

 private:
  const Dataset* train_;
  KernelSpec kernel_;
  std::unique_ptr<AnnIndex> ann_;
  RspState state_;
  std::size_t k_;
  std::size_t m_;
};

std::unique_ptr<AnnIndex> make_ann(const ParamPoint& point, IndexCache& cache) {
  if (point.k == 0) return nullptr;
  if (point.n_lists == 0 || point.n_probe == 0)
    throw std::invalid_argument("DEANN with k > 0 needs n_lists and n_probe");
  return std::make_unique<IvfAnn>(cache.ivf(point.n_lists), point.n_probe);
}

bool dominated_by_timeout(const ParamPoint& p, EstimatorKind kind,
                          const std::vector<ParamPoint>& timed_out) {
  for (const ParamPoint& t : timed_out) {
    const bool same_index = t.n_lists == p.n_lists && t.n_probe == p.n_probe;
    if (kind == EstimatorKind::Naive) return true;
    if (same_index && p.k >= t.k && p.m >= t.m) return true;
  }
  return false;
}

EvaluationOutput evaluate_impl(const Dataset& train, const Dataset& queries,
                               std::span<const double> ground_truth, const ExperimentSpec& spec,
                               const ParamPoint& point, IndexCache& cache, bool keep_records,
                               const std::vector<NeighborList>* exact_neighbors) {
  if (ground_truth.size() != queries.size())
    throw std::invalid_argument("ground truth has " + std::to_string(ground_truth.size()) +
                                " values for " + std::to_string(queries.size()) + " queries");
  if (queries.dim() != train.dim()) throw std::invalid_argument("query dimension mismatch");
  const KernelSpec kernel(spec.kernel, spec.bandwidth);

  EvaluationOutput out;
  ResultRow& row = out.row;
  row.estimator = spec.estimator;
  row.params = point;
  row.queries = queries.size();

  const bool ann_used = uses_ann(spec.estimator) && point.k > 0;
  double build_s = 0.0;
  if (ann_used) {
    cache.ivf(point.n_lists);
    build_s = cache.build_seconds(point.n_lists);
  }

  double query_s = 0.0;
  double rel_err_sum = 0.0;
  double evals_sum = 0.0;
  double prep_sum = 0.0;
  std::size_t timed_queries = 0;
  std::size_t rel_err_count = 0;
  std::vector<double> estimates(queries.size());

  for (std::size_t r = 0; r < spec.repetitions && !row.timed_out; ++r) {
    double prep = 0.0;
    auto estimator = prepare_estimator(spec.estimator, train, kernel, point, cache,
                                       derive_seed(spec.seed, r), &prep);
    prep_sum += prep;
    for (std::size_t j = 0; j < queries.size(); ++j) {
      const auto t0 = Clock::now();
      const Estimate e = estimator->query(queries.row(j));
      const double dt = seconds_since(t0);
      query_s += dt;
      ++timed_queries;
      evals_sum += static_cast<double>(e.kernel_evals);
      estimates[j] = e.value;
      if (keep_records) {
        QueryRecord rec{r, j, e.value, ground_truth[j], std::nullopt, dt * 1e3, e.kernel_evals};
        if (ground_truth[j] >= spec.kde_floor)
          rec.rel_err = std::abs(e.value - ground_truth[j]) / ground_truth[j];
        out.records.push_back(rec);
      }
      if (query_s > spec.time_cap_seconds) {
        row.timed_out = true;
        break;
      }
    }
    if (row.timed_out) break;
    const ErrorReport report = relative_error(estimates, ground_truth, spec.kde_floor);
    rel_err_sum += report.mean_rel_err;
    ++rel_err_count;
    row.excluded_queries = report.excluded_count;
    ++row.repetitions;
  }

  row.mean_rel_err = rel_err_count > 0 ? rel_err_sum / static_cast<double>(rel_err_count)
                                       : std::numeric_limits<double>::infinity();
  row.mean_query_ms = timed_queries > 0 ? query_s * 1e3 / static_cast<double>(timed_queries) : 0.0;
  row.mean_kernel_evals =
      timed_queries > 0 ? evals_sum / static_cast<double>(timed_queries) : 0.0;
  row.preprocessing_s = build_s + prep_sum;

  if (ann_used && !row.timed_out) {
    const IvfIndex& ivf = cache.ivf(point.n_lists);
    const std::size_t k = std::min(point.k, train.size());
    double total = 0.0;
    for (std::size_t j = 0; j < queries.size(); ++j) {
      NeighborList exact;
      if (exact_neighbors != nullptr && (*exact_neighbors)[j].size() >= k) {
        const NeighborList& full = (*exact_neighbors)[j];
        exact.indices.assign(full.indices.begin(), full.indices.begin() + static_cast<std::ptrdiff_t>(k));
        exact.sq_distances.assign(full.sq_distances.begin(),
                                  full.sq_distances.begin() + static_cast<std::ptrdiff_t>(k));
      } else {
        exact = brute_force_knn(train, queries.row(j), k);
      }
      total += recall(ivf.query(queries.row(j), k, point.n_probe), exact);
    }
    row.recall = total / static_cast<double>(queries.size());
  }
  return out;
}

}  // namespace

std::string_view to_string(EstimatorKind kind) noexcept {
  switch (kind) {
    case EstimatorKind::Naive:
      return "naive";
    case EstimatorKind::Rs:
      return "rs";
    case EstimatorKind::Rsp:
      return "rsp";
    case EstimatorKind::Deann:
      return "deann";
    case EstimatorKind::Deannp:
      return "deannp";
  }
  return "unknown";
}

EstimatorKind parse_estimator(std::string_view name) {
  if (name == "naive") return EstimatorKind::Naive;
  if (name == "rs") return EstimatorKind::Rs;
  if (name == "rsp") return EstimatorKind::Rsp;
  if (name == "deann") return EstimatorKind::Deann;
  if (name == "deannp") return EstimatorKind::Deannp;
  throw std::invalid_argument("unknown estimator: " + std::string(name));
}

bool uses_ann(EstimatorKind kind) noexcept {
  return kind == EstimatorKind::Deann || kind == EstimatorKind::Deannp;
}

void ExperimentSpec::validate() const {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw std::invalid_argument("bandwidth must be positive and finite");
  if (repetitions == 0) throw std::invalid_argument("repetitions must be at least 1");
  if (!(rel_err_budget >= 0.0)) throw std::invalid_argument("rel_err_budget must be nonnegative");
  if (threads == 0) throw std::invalid_argument("threads must be at least 1");
  if (threads > 1 && timing)
    throw std::invalid_argument("parallel configurations cannot be combined with timing");
  if (estimator == EstimatorKind::Rs || estimator == EstimatorKind::Rsp) {
    if (m_grid.empty()) throw std::invalid_argument("m grid is empty");
  }
  if (uses_ann(estimator)) {
    if (k_grid.empty() || m_grid.empty()) throw std::invalid_argument("k or m grid is empty");
    const bool any_neighbors = std::any_of(k_grid.begin(), k_grid.end(), [](auto k) { return k > 0; });
    if (any_neighbors && (n_lists_grid.empty() || n_probe_grid.empty()))
      throw std::invalid_argument("n_lists or n_probe grid is empty");
  }
}

const IvfIndex& IndexCache::ivf(std::size_t n_lists) {
  for (const Entry& e : entries_)
    if (e.n_lists == n_lists) return *e.index;
  const auto t0 = Clock::now();
  auto index = std::make_unique<IvfIndex>(IvfIndex::build(*train_, n_lists, seed_));
  entries_.push_back({n_lists, std::move(index), seconds_since(t0)});
  return *entries_.back().index;
}

double IndexCache::build_seconds(std::size_t n_lists) const {
  for (const Entry& e : entries_)
    if (e.n_lists == n_lists) return e.seconds;
  return 0.0;
}

std::unique_ptr<PreparedEstimator> prepare_estimator(EstimatorKind kind, const Dataset& train,
                                                     const KernelSpec& kernel,
                                                     const ParamPoint& point, IndexCache& cache,
                                                     std::uint64_t sampler_seed,
                                                     double* preprocessing_s) {
  const std::uint64_t perm_seed = derive_seed(sampler_seed, 0);
  const std::uint64_t rng_seed = derive_seed(sampler_seed, 1);
  auto permuted = [&] {
    const auto t0 = Clock::now();
    auto p = std::make_shared<const PermutedDataset>(permute(train, perm_seed));
    if (preprocessing_s != nullptr) *preprocessing_s += seconds_since(t0);
    return p;
  };
  switch (kind) {
    case EstimatorKind::Naive:
      return std::make_unique<NaiveEstimator>(train, kernel);
    case EstimatorKind::Rs:
      if (point.m == 0) throw std::invalid_argument("rs needs m >= 1");
      return std::make_unique<RsEstimator>(train, kernel, point.m, rng_seed);
    case EstimatorKind::Rsp:
      if (point.m == 0 || point.m > train.size())
        throw std::invalid_argument("rsp needs 1 <= m <= n");
      return std::make_unique<RspEstimator>(permuted(), kernel, point.m);
    case EstimatorKind::Deann:
      return std::make_unique<DeannEstimator>(train, kernel, make_ann(point, cache), point.k,
                                              point.m, rng_seed);
    case EstimatorKind::Deannp:
      return std::make_unique<DeannpEstimator>(train, kernel, make_ann(point, cache), permuted(),
                                               point.k, point.m);
  }
  throw std::invalid_argument("unknown estimator");
}

std::vector<std::size_t> geometric_grid(std::size_t limit) {
  std::vector<std::size_t> out;
  for (int i = 0;; ++i) {
    const auto v = static_cast<std::size_t>(std::llround(10.0 * std::pow(std::sqrt(2.0), i)));
    if (v >= limit) break;
    if (out.empty() || out.back() != v) out.push_back(v);
  }
  return out;
}

void apply_default_grids(ExperimentSpec& spec, std::size_t n) {
  const std::vector<std::size_t> geo = geometric_grid(n);
  if (spec.m_grid.empty()) {
    if (uses_ann(spec.estimator)) spec.m_grid.push_back(0);
    spec.m_grid.insert(spec.m_grid.end(), geo.begin(), geo.end());
  }
  if (!uses_ann(spec.estimator)) return;
  if (spec.k_grid.empty()) {
    spec.k_grid.push_back(0);
    spec.k_grid.insert(spec.k_grid.end(), geo.begin(), geo.end());
  }
  if (spec.n_lists_grid.empty()) {
    for (std::size_t nl = 32; nl <= 4096 && nl <= n; nl *= 2) spec.n_lists_grid.push_back(nl);
    if (spec.n_lists_grid.empty()) spec.n_lists_grid.push_back(n);
  }
  if (spec.n_probe_grid.empty()) spec.n_probe_grid = {1, 5, 10};
}

std::vector<ParamPoint> expand_grid(const ExperimentSpec& spec, std::size_t n) {
  std::vector<ParamPoint> points;
  auto sorted = [](std::vector<std::size_t> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  const auto ks = sorted(spec.k_grid);
  const auto ms = sorted(spec.m_grid);
  switch (spec.estimator) {
    case EstimatorKind::Naive:
      points.push_back({});
      break;
    case EstimatorKind::Rs:
    case EstimatorKind::Rsp:
      for (const std::size_t m : ms)
        if (m >= 1 && (spec.estimator == EstimatorKind::Rs || m <= n)) points.push_back({0, m, 0, 0});
      break;
    case EstimatorKind::Deann:
    case EstimatorKind::Deannp:
      for (const std::size_t m : ms)
        if (ks.empty() || ks.front() == 0)
          if (m >= 1 && m <= n && !ks.empty()) points.push_back({0, m, 0, 0});
      for (const std::size_t nl : sorted(spec.n_lists_grid)) {
        if (nl == 0 || nl > n) continue;
        for (const std::size_t np : sorted(spec.n_probe_grid)) {
          if (np == 0 || np > nl) continue;
          for (const std::size_t k : ks) {
            if (k == 0) continue;
            for (const std::size_t m : ms)
              if (k + m < n) points.push_back({k, m, nl, np});
          }
        }
      }
      break;
  }
  return points;
}

EvaluationOutput evaluate(const Dataset& train, const Dataset& queries,
                          std::span<const double> ground_truth, const ExperimentSpec& spec,
                          const ParamPoint& point, IndexCache& cache, bool keep_records) {
  if (spec.repetitions == 0) throw std::invalid_argument("repetitions must be at least 1");
  return evaluate_impl(train, queries, ground_truth, spec, point, cache, keep_records, nullptr);
}

std::optional<std::size_t> select_row(std::span<const ResultRow> rows, double budget, bool by_time) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ResultRow& r = rows[i];
    if (r.timed_out || !(r.mean_rel_err <= budget)) continue;
    const double cost = by_time ? r.mean_query_ms : r.mean_kernel_evals;
    if (!best) {
      best = i;
      continue;
    }
    const ResultRow& b = rows[*best];
    const double best_cost = by_time ? b.mean_query_ms : b.mean_kernel_evals;
    if (cost < best_cost) best = i;
  }
  return best;
}

GridSearchResult grid_search(const Dataset& train, const Dataset& validation,
                             std::span<const double> ground_truth, const ExperimentSpec& spec) {
  spec.validate();
  if (ground_truth.size() != validation.size())
    throw std::invalid_argument("ground truth does not match the validation queries");
  const std::vector<ParamPoint> points = expand_grid(spec, train.size());
  IndexCache cache(train, spec.seed);

  std::vector<NeighborList> exact;
  std::size_t max_k = 0;
  for (const ParamPoint& p : points) max_k = std::max(max_k, p.k);
  max_k = std::min(max_k, train.size());
  if (uses_ann(spec.estimator) && max_k > 0) {
    exact.reserve(validation.size());
    for (std::size_t j = 0; j < validation.size(); ++j)
      exact.push_back(brute_force_knn(train, validation.row(j), max_k));
  }
  const std::vector<NeighborList>* exact_ptr = exact.empty() ? nullptr : &exact;

  GridSearchResult result;
  result.rows.resize(points.size());
  std::vector<ParamPoint> timed_out;
  std::mutex mutex;

  auto run_point = [&](std::size_t i) {
    {
      std::lock_guard lock(mutex);
      if (dominated_by_timeout(points[i], spec.estimator, timed_out)) {
        ResultRow& row = result.rows[i];
        row.estimator = spec.estimator;
        row.params = points[i];
        row.queries = validation.size();
        row.timed_out = true;
        row.mean_rel_err = std::numeric_limits<double>::infinity();
        return;
      }
    }
    EvaluationOutput out =
        evaluate_impl(train, validation, ground_truth, spec, points[i], cache, false, exact_ptr);
    std::lock_guard lock(mutex);
    if (out.row.timed_out) timed_out.push_back(points[i]);
    result.rows[i] = std::move(out.row);
  };

  if (spec.threads <= 1) {
    for (std::size_t i = 0; i < points.size(); ++i) run_point(i);
  } else {
    // The index cache is not thread-safe: build everything up front.
    for (const ParamPoint& p : points)
      if (p.k > 0) cache.ivf(p.n_lists);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (std::size_t t = 0; t < spec.threads; ++t)
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < points.size(); i = next++) run_point(i);
      });
    for (auto& w : workers) w.join();
  }

  result.selected = select_row(result.rows, spec.rel_err_budget, spec.timing);
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const ResultRow& r = result.rows[i];
    if (r.timed_out) continue;
    if (!result.best_error || r.mean_rel_err < result.rows[*result.best_error].mean_rel_err)
      result.best_error = i;
  }
  return result;
}

double average_recall(const Dataset& dataset, const Dataset& queries, std::size_t k,
                      std::size_t n_lists, std::size_t n_probe, std::uint64_t seed) {
  if (k == 0 || k > dataset.size()) throw std::invalid_argument("k must be in [1, n]");
  if (queries.dim() != dataset.dim()) throw std::invalid_argument("query dimension mismatch");
  const IvfIndex index = IvfIndex::build(dataset, n_lists, seed);
  double total = 0.0;
  for (std::size_t j = 0; j < queries.size(); ++j)
    total += recall(index.query(queries.row(j), k, n_probe),
                    brute_force_knn(dataset, queries.row(j), k));
  return total / static_cast<double>(queries.size());
}

std::uint64_t dataset_hash(const Dataset& dataset) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint32_t word) {
    for (int b = 0; b < 4; ++b) {
      h ^= (word >> (8 * b)) & 0xFFu;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint32_t>(dataset.size()));
  mix(static_cast<std::uint32_t>(dataset.dim()));
  for (const float v : dataset.data()) mix(std::bit_cast<std::uint32_t>(v));
  return h;
}

void save_values(const std::filesystem::path& path, std::span<const double> values) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  char buf[64];
  for (const double v : values) {
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    out.write(buf, res.ptr - buf);
    out.put('\n');
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<double> load_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    double v = 0.0;
    const auto [end, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || end != line.data() + line.size())
      throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": not a number");
    values.push_back(v);
  }
  return values;
}

}  // namespace deann
