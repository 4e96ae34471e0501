#include "specload/cache_sim.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "specload/error.hpp"
#include "specload/url.hpp"

namespace specload {
namespace {

double ratio(std::uint64_t n, std::uint64_t d) {
  return d == 0 ? 0.0 : static_cast<double>(n) / static_cast<double>(d);
}

}  // namespace

double CacheSimReport::fresh_fraction() const { return ratio(overall.fresh, overall.total()); }
double CacheSimReport::revalidation_fraction() const {
  return ratio(overall.revalidate, overall.total());
}
double CacheSimReport::miss_fraction() const { return ratio(overall.miss, overall.total()); }
double CacheSimReport::network_activity_fraction() const {
  return ratio(overall.revalidate + overall.miss, overall.total());
}

CacheSimReport replay_cache_sim(const Trace& trace, Capacity capacity) {
  if (trace.visits.empty()) throw EmptyTrace();
  std::vector<std::size_t> order(trace.visits.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return trace.visits[a].timestamp < trace.visits[b].timestamp;
  });

  CacheSimReport report;
  report.capacity = capacity;
  CacheStore store(capacity);
  for (std::size_t i : order) {
    const PageVisit& visit = trace.visits[i];
    OutcomeCounts& site = report.per_site[website_key(visit.main.url)];
    auto request = [&](const ResourceRecord& r) {
      switch (store.lookup(r.url, visit.timestamp)) {
        case LookupOutcome::FreshHit:
          ++report.overall.fresh;
          ++site.fresh;
          break;
        case LookupOutcome::ExpiredRevalidate:
          ++report.overall.revalidate;
          ++site.revalidate;
          store.revalidated(r, visit.timestamp);
          break;
        case LookupOutcome::Miss:
          ++report.overall.miss;
          ++site.miss;
          store.admit(r, visit.timestamp);
          break;
      }
    };
    request(visit.main);
    for (const auto& sub : visit.subresources) request(sub);
    store.page_complete();
  }
  report.counters = store.counters();
  return report;
}

}  // namespace specload
