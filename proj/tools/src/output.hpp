#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "deann/harness.hpp"

namespace deann::cli {

nlohmann::ordered_json row_json(const ResultRow& row);
nlohmann::ordered_json record_json(const QueryRecord& rec);

/// Column order of the CSV summary. Stable; new columns go at the end.
inline constexpr const char* kCsvHeader =
    "estimator,k,m,n_lists,n_probe,mean_rel_err,mean_query_ms,mean_kernel_evals,recall,"
    "repetitions,preprocessing_s,queries,excluded_queries,timed_out,selected";

std::string row_csv(const ResultRow& row, bool selected);

/// Fixed-width table of result rows; `selected` marks one row with '*'.
void print_table(std::ostream& out, std::span<const ResultRow> rows,
                 std::optional<std::size_t> selected);

}  // namespace deann::cli
