#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "specload/http_cache.hpp"
#include "specload/trace.hpp"

namespace specload {

struct OutcomeCounts {
  std::uint64_t fresh = 0;
  std::uint64_t revalidate = 0;
  std::uint64_t miss = 0;

  std::uint64_t total() const { return fresh + revalidate + miss; }
  double network_activity_fraction() const {
    return total() == 0 ? 0.0 : static_cast<double>(revalidate + miss) / static_cast<double>(total());
  }
  bool operator==(const OutcomeCounts&) const = default;
};

struct CacheSimReport {
  Capacity capacity = Capacity::infinite();
  OutcomeCounts overall;
  std::map<std::string, OutcomeCounts> per_site;  // keyed by website_key
  CacheCounters counters;

  double fresh_fraction() const;
  double revalidation_fraction() const;
  double miss_fraction() const;
  // miss_fraction + revalidation_fraction
  double network_activity_fraction() const;
};

// Replays every main and subresource request of the trace through one
// browser cache, in timestamp order. Throws EmptyTrace.
CacheSimReport replay_cache_sim(const Trace& trace, Capacity capacity);

}  // namespace specload
