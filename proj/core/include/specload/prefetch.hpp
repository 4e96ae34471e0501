#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "specload/load_sim.hpp"
#include "specload/trace.hpp"

namespace specload {

// Most-popular webpage prefetching: the client's own past visits, ranked.
struct PopularityModel {
  std::map<std::string, std::uint64_t> counts;  // page URL -> visits
  std::int64_t training_window_s = 30 * kSecondsPerDay;
  int top_k = 10;
};

// Counts visits with timestamp in [window_end - training_window, window_end).
// Throws EmptyWindow, InvalidParams.
PopularityModel train(const Trace& trace, Timestamp window_end,
                      std::int64_t training_window_s = 30 * kSecondsPerDay, int top_k = 10);

// Descending count, URL ascending on ties, at most top_k.
std::vector<std::string> predict_pages(const PopularityModel& model);

struct PrefetchOptions {
  std::int64_t training_window_s = 30 * kSecondsPerDay;
  int top_k = 10;
  std::int64_t refresh_interval_s = kSecondsPerDay;
  // Used to weight visits by their simulated legacy delay (empty cache).
  NetworkParams net;
  int max_connections = 4;
};

struct PrefetchInterval {
  Timestamp start = 0;
  std::size_t n_predicted = 0;
  std::size_t n_predicted_visited = 0;
  std::size_t n_visits = 0;
  std::size_t n_hit_visits = 0;
};

struct PrefetchReport {
  // Predicted pages visited during their interval / predicted pages.
  double hit_ratio = 0;
  // Visits to a page prefetched for that interval / visits.
  double usefulness = 0;
  double unnecessary_bytes_fraction = 0;
  // Legacy delay of hit visits / legacy delay of all evaluated visits, as if
  // prefetched pages load instantly.
  double upper_bound_delay_reduction_fraction = 0;

  std::uint64_t prefetched_bytes = 0;
  std::uint64_t unnecessary_bytes = 0;
  std::size_t n_visits = 0;
  std::size_t n_hit_visits = 0;
  std::vector<PrefetchInterval> intervals;
};

// Sliding evaluation: the model is retrained at every refresh boundary from
// the preceding training window and scored over the following interval.
// Throws InsufficientTrace when the trace does not outlast one window,
// InvalidParams.
PrefetchReport evaluate_prefetch(const Trace& trace, const PrefetchOptions& options = {});

}  // namespace specload
