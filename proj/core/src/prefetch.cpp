#include "specload/prefetch.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_map>

#include "specload/error.hpp"

namespace specload {

namespace {

void count_window(const Trace& trace, std::span<const std::size_t> order, Timestamp begin,
                  Timestamp end, std::map<std::string, std::uint64_t>& counts) {
  auto by_ts = [&](std::size_t i, Timestamp t) { return trace.visits[i].timestamp < t; };
  auto first = std::lower_bound(order.begin(), order.end(), begin, by_ts);
  auto last = std::lower_bound(order.begin(), order.end(), end, by_ts);
  for (auto it = first; it != last; ++it) ++counts[trace.visits[*it].main.url];
}

std::uint64_t page_bytes(const PageVisit& visit) {
  std::uint64_t total = visit.main.size_bytes;
  for (const auto& sub : visit.subresources) total += sub.size_bytes;
  return total;
}

}  // namespace

PopularityModel train(const Trace& trace, Timestamp window_end, std::int64_t training_window_s,
                      int top_k) {
  if (top_k < 1) throw InvalidParams("top_k must be >= 1");
  if (training_window_s <= 0) throw InvalidParams("training window must be positive");
  PopularityModel model;
  model.training_window_s = training_window_s;
  model.top_k = top_k;
  for (const auto& v : trace.visits)
    if (v.timestamp >= window_end - training_window_s && v.timestamp < window_end)
      ++model.counts[v.main.url];
  if (model.counts.empty()) throw EmptyWindow();
  return model;
}

std::vector<std::string> predict_pages(const PopularityModel& model) {
  std::vector<std::pair<std::string, std::uint64_t>> ranked(model.counts.begin(), model.counts.end());
  // The map already orders by URL, so a stable sort keeps the tie rule.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(model.top_k); ++i)
    out.push_back(ranked[i].first);
  return out;
}

PrefetchReport evaluate_prefetch(const Trace& trace, const PrefetchOptions& options) {
  if (options.top_k < 1) throw InvalidParams("top_k must be >= 1");
  if (options.training_window_s <= 0 || options.refresh_interval_s <= 0)
    throw InvalidParams("training window and refresh interval must be positive");
  validate(options.net);
  if (trace.visits.empty()) throw EmptyTrace();

  std::vector<std::size_t> order(trace.visits.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return trace.visits[a].timestamp < trace.visits[b].timestamp;
  });
  const Timestamp first_ts = trace.visits[order.front()].timestamp;
  const Timestamp last_ts = trace.visits[order.back()].timestamp;
  if (last_ts - first_ts <= options.training_window_s)
    throw InsufficientTrace("trace does not extend past the training window");

  CacheState empty = CacheState::empty();
  PrefetchReport report;
  std::unordered_map<std::string, std::uint64_t> last_bytes;
  double delay_all = 0, delay_hit = 0;
  std::size_t cursor = 0;  // next visit not yet folded into last_bytes
  std::size_t n_predicted = 0, n_predicted_visited = 0;

  for (Timestamp boundary = first_ts + options.training_window_s; boundary <= last_ts;
       boundary += options.refresh_interval_s) {
    for (; cursor < order.size() && trace.visits[order[cursor]].timestamp < boundary; ++cursor) {
      const PageVisit& v = trace.visits[order[cursor]];
      last_bytes[v.main.url] = page_bytes(v);
    }

    PopularityModel model;
    model.training_window_s = options.training_window_s;
    model.top_k = options.top_k;
    count_window(trace, order, boundary - options.training_window_s, boundary, model.counts);
    const std::vector<std::string> predicted = predict_pages(model);
    const std::set<std::string> predicted_set(predicted.begin(), predicted.end());

    PrefetchInterval interval;
    interval.start = boundary;
    interval.n_predicted = predicted.size();
    std::set<std::string> visited;
    const Timestamp end = boundary + options.refresh_interval_s;
    for (std::size_t i = cursor; i < order.size() && trace.visits[order[i]].timestamp < end; ++i) {
      const PageVisit& v = trace.visits[order[i]];
      const bool hit = predicted_set.contains(v.main.url);
      const double legacy =
          simulate_page_timing(v, LoadMode::legacy(), empty, options.net, options.max_connections)
              .delay_ms;
      delay_all += legacy;
      ++interval.n_visits;
      if (hit) {
        delay_hit += legacy;
        ++interval.n_hit_visits;
        visited.insert(v.main.url);
      }
    }
    interval.n_predicted_visited = visited.size();

    for (const auto& url : predicted) {
      const std::uint64_t bytes = last_bytes.at(url);
      report.prefetched_bytes += bytes;
      if (!visited.contains(url)) report.unnecessary_bytes += bytes;
    }
    n_predicted += interval.n_predicted;
    n_predicted_visited += interval.n_predicted_visited;
    report.n_visits += interval.n_visits;
    report.n_hit_visits += interval.n_hit_visits;
    report.intervals.push_back(interval);
  }

  auto ratio = [](double num, double den) { return den > 0 ? num / den : 0.0; };
  report.hit_ratio = ratio(static_cast<double>(n_predicted_visited), static_cast<double>(n_predicted));
  report.usefulness = ratio(static_cast<double>(report.n_hit_visits), static_cast<double>(report.n_visits));
  report.unnecessary_bytes_fraction =
      ratio(static_cast<double>(report.unnecessary_bytes), static_cast<double>(report.prefetched_bytes));
  report.upper_bound_delay_reduction_fraction = ratio(delay_hit, delay_all);
  return report;
}

}  // namespace specload
