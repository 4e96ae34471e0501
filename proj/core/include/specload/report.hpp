#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "specload/cache_sim.hpp"
#include "specload/load_sim.hpp"
#include "specload/predictor.hpp"
#include "specload/prefetch.hpp"
#include "specload/resource_graph.hpp"

namespace specload {

using Cell = std::variant<std::string, std::int64_t, double>;

// Flat table with a fixed column set per experiment, plus run metadata that
// goes to the structured sidecar.
struct Report {
  std::string experiment;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::vector<std::pair<std::string, std::string>> meta;

  void add_row(std::vector<Cell> row);
};

// Shortest round-trip form, always with a dot decimal.
std::string format_number(double value);

void write_csv(std::ostream& out, const Report& report);
std::string to_csv(const Report& report);
// {"experiment", "meta", "columns", "rows": [{column: value}]}
std::string to_json(const Report& report);

Report cache_report(const std::vector<CacheSimReport>& runs);
Report prefetch_report(const PrefetchReport& result, const PrefetchOptions& options);
Report speculative_report(const SimResult& result, CacheStateKind cache_state);
Report series_report(const ReplaySeries& series, bool monthly = false);
Report repo_stats_report(const RepoStats& stats);

}  // namespace specload
