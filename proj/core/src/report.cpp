#include "specload/report.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "specload/error.hpp"

namespace specload {

void Report::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size()) throw InvalidParams("report row does not match its columns");
  rows.push_back(std::move(row));
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0) return "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

std::string cell_text(const Cell& cell) {
  if (const auto* s = std::get_if<std::string>(&cell)) return *s;
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
  return format_number(std::get<double>(cell));
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

nlohmann::ordered_json cell_json(const Cell& cell) {
  if (const auto* s = std::get_if<std::string>(&cell)) return *s;
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return *i;
  double d = std::get<double>(cell);
  if (!std::isfinite(d)) return format_number(d);
  return d;
}

std::int64_t i64(std::uint64_t v) { return static_cast<std::int64_t>(v); }

}  // namespace

void write_csv(std::ostream& out, const Report& report) {
  for (std::size_t i = 0; i < report.columns.size(); ++i)
    out << (i ? "," : "") << csv_field(report.columns[i]);
  out << '\n';
  for (const auto& row : report.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_field(cell_text(row[i]));
    out << '\n';
  }
}

std::string to_csv(const Report& report) {
  std::ostringstream out;
  write_csv(out, report);
  return out.str();
}

std::string to_json(const Report& report) {
  nlohmann::ordered_json doc;
  doc["experiment"] = report.experiment;
  auto& meta = doc["meta"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.meta) meta[k] = v;
  doc["columns"] = report.columns;
  auto& rows = doc["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : report.rows) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < row.size(); ++i) obj[report.columns[i]] = cell_json(row[i]);
    rows.push_back(std::move(obj));
  }
  return doc.dump(2) + "\n";
}

Report cache_report(const std::vector<CacheSimReport>& runs) {
  Report r{"sim-cache", {"capacity", "fresh", "revalidate", "miss", "network_activity", "requests"}, {}, {}};
  for (const auto& run : runs)
    r.add_row({run.capacity.to_string(), run.fresh_fraction(), run.revalidation_fraction(),
               run.miss_fraction(), run.network_activity_fraction(), i64(run.overall.total())});
  return r;
}

Report prefetch_report(const PrefetchReport& result, const PrefetchOptions& options) {
  Report r{"sim-prefetch",
           {"train_days", "top_k", "refresh_s", "visits", "hit_ratio", "usefulness",
            "unnecessary_bytes_fraction", "upper_bound_delay_reduction_fraction"},
           {},
           {}};
  r.add_row({options.training_window_s / kSecondsPerDay, std::int64_t{options.top_k},
             options.refresh_interval_s, i64(result.n_visits), result.hit_ratio, result.usefulness,
             result.unnecessary_bytes_fraction, result.upper_bound_delay_reduction_fraction});
  return r;
}

Report speculative_report(const SimResult& result, CacheStateKind cache_state) {
  Report r{"sim-speculative",
           {"page_url", "cache_state", "mode", "delay_ms", "reduction_ms", "reduction_pct"},
           {},
           {}};
  const std::string state(to_string(cache_state));
  for (const auto& p : result.pages) {
    r.add_row({p.page_url, state, std::string("legacy"), p.legacy_delay_ms, 0.0, 0.0});
    r.add_row({p.page_url, state, std::string("speculative"), p.speculative_delay_ms, p.reduction_ms,
               100.0 * p.reduction_fraction});
  }
  r.add_row({std::string("*mean*"), state, std::string("legacy"), result.mean_legacy_ms, 0.0, 0.0});
  r.add_row({std::string("*mean*"), state, std::string("speculative"), result.mean_speculative_ms,
             result.mean_reduction_ms, 100.0 * result.reduction_fraction});
  return r;
}

Report series_report(const ReplaySeries& series, bool monthly) {
  Report r{monthly ? "predictor-monthly" : "predictor-weekly",
           {"bucket", "hit_ratio", "usefulness", "n_predictions"},
           {},
           {}};
  for (const auto& p : monthly ? series.monthly : series.weekly)
    r.add_row({p.bucket, p.hit_ratio, p.usefulness, i64(p.n_predictions)});
  return r;
}

Report repo_stats_report(const RepoStats& stats) {
  Report r{"graph-stats",
           {"websites", "subdomains", "webpages", "subresources", "serialized_bytes"},
           {},
           {}};
  r.add_row({i64(stats.n_websites), i64(stats.n_subdomains), i64(stats.n_webpages),
             i64(stats.n_subresources), i64(stats.serialized_size_bytes)});
  return r;
}

}  // namespace specload
