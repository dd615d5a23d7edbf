#include "output.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace deann::cli {

namespace {

std::string fixed(double v, int decimals) {
  if (!std::isfinite(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string general(double v) {
  if (!std::isfinite(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

nlohmann::ordered_json row_json(const ResultRow& row) {
  nlohmann::ordered_json j;
  j["type"] = "row";
  j["estimator"] = std::string(to_string(row.estimator));
  j["k"] = row.params.k;
  j["m"] = row.params.m;
  j["n_lists"] = row.params.n_lists;
  j["n_probe"] = row.params.n_probe;
  if (std::isfinite(row.mean_rel_err))
    j["mean_rel_err"] = row.mean_rel_err;
  else
    j["mean_rel_err"] = nullptr;
  j["mean_query_ms"] = row.mean_query_ms;
  j["mean_kernel_evals"] = row.mean_kernel_evals;
  if (row.recall)
    j["recall"] = *row.recall;
  else
    j["recall"] = nullptr;
  j["repetitions"] = row.repetitions;
  j["preprocessing_s"] = row.preprocessing_s;
  j["queries"] = row.queries;
  j["excluded_queries"] = row.excluded_queries;
  j["timed_out"] = row.timed_out;
  return j;
}

nlohmann::ordered_json record_json(const QueryRecord& rec) {
  nlohmann::ordered_json j;
  j["type"] = "query";
  j["repetition"] = rec.repetition;
  j["query"] = rec.query;
  j["estimate"] = rec.estimate;
  j["exact"] = rec.exact;
  if (rec.rel_err)
    j["rel_err"] = *rec.rel_err;
  else
    j["rel_err"] = nullptr;
  j["time_ms"] = rec.time_ms;
  j["kernel_evals"] = rec.kernel_evals;
  return j;
}

std::string row_csv(const ResultRow& row, bool selected) {
  std::string s;
  s += std::string(to_string(row.estimator)) + ',';
  s += std::to_string(row.params.k) + ',' + std::to_string(row.params.m) + ',';
  s += std::to_string(row.params.n_lists) + ',' + std::to_string(row.params.n_probe) + ',';
  s += general(row.mean_rel_err) + ',';
  s += fixed(row.mean_query_ms, 3) + ',';
  s += general(row.mean_kernel_evals) + ',';
  s += (row.recall ? general(*row.recall) : std::string()) + ',';
  s += std::to_string(row.repetitions) + ',';
  s += fixed(row.preprocessing_s, 3) + ',';
  s += std::to_string(row.queries) + ',' + std::to_string(row.excluded_queries) + ',';
  s += row.timed_out ? "1," : "0,";
  s += selected ? "1" : "0";
  return s;
}

void print_table(std::ostream& out, std::span<const ResultRow> rows,
                 std::optional<std::size_t> selected) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "  %-7s %6s %7s %7s %7s %12s %10s %12s %7s %8s\n", "est", "k",
                "m", "n_lists", "n_probe", "rel_err", "query_ms", "kernel_evals", "recall",
                "status");
  out << buf;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ResultRow& r = rows[i];
    const std::string est(to_string(r.estimator));
    std::snprintf(buf, sizeof buf, "%c %-7s %6zu %7zu %7zu %7zu %12s %10s %12s %7s %8s\n",
                  selected == i ? '*' : ' ', est.c_str(), r.params.k, r.params.m,
                  r.params.n_lists, r.params.n_probe, general(r.mean_rel_err).c_str(),
                  fixed(r.mean_query_ms, 3).c_str(), general(r.mean_kernel_evals).c_str(),
                  r.recall ? fixed(*r.recall, 3).c_str() : "-", r.timed_out ? "timeout" : "ok");
    out << buf;
  }
}

}  // namespace deann::cli
