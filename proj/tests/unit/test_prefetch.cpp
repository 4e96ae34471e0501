#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "specload/error.hpp"
#include "specload/prefetch.hpp"
#include "specload/synth.hpp"
#include "test_support.hpp"

using namespace specload;
using testing::visit;

namespace {

constexpr Timestamp kDay = kSecondsPerDay;

Trace synthetic(std::uint64_t seed, double new_visit_rate = 0.75) {
  SynthParams p;
  p.visits = 1500;
  p.n_sites = 5;
  p.pages_per_site = 2000;
  p.subresources_per_page = 6;
  p.duration_days = 120;
  p.new_visit_rate = new_visit_rate;
  p.seed = seed;
  return generate_synthetic(p);
}

struct Recount {
  std::size_t visits = 0;
  std::size_t hits = 0;
  std::size_t first_time = 0;
};

// Per-visit membership count: for every evaluated visit, rebuild the
// ranking of its own refresh interval from scratch.
Recount membership_recount(const Trace& t, const PrefetchOptions& o) {
  Timestamp first = t.visits.front().timestamp, last = t.visits.front().timestamp;
  for (const auto& v : t.visits) {
    first = std::min(first, v.timestamp);
    last = std::max(last, v.timestamp);
  }
  Recount r;
  std::set<std::string> ever;
  std::vector<const PageVisit*> sorted;
  for (const auto& v : t.visits) sorted.push_back(&v);
  std::stable_sort(sorted.begin(), sorted.end(), [](auto a, auto b) { return a->timestamp < b->timestamp; });
  for (const PageVisit* v : sorted) {
    bool seen = !ever.insert(v->main.url).second;
    if (v->timestamp < first + o.training_window_s) continue;
    Timestamp boundary = first + o.training_window_s +
                         (v->timestamp - first - o.training_window_s) / o.refresh_interval_s * o.refresh_interval_s;
    std::map<std::string, std::uint64_t> counts;
    for (const auto& w : t.visits)
      if (w.timestamp >= boundary - o.training_window_s && w.timestamp < boundary) ++counts[w.main.url];
    std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (ranked.size() > static_cast<std::size_t>(o.top_k)) ranked.resize(static_cast<std::size_t>(o.top_k));
    ++r.visits;
    r.first_time += seen ? 0 : 1;
    for (const auto& [url, c] : ranked)
      if (url == v->main.url) ++r.hits;
  }
  (void)last;
  return r;
}

}  // namespace

TEST_CASE("train counts the half-open window") {
  Trace t;
  t.visits.push_back(visit("http://a.com/1", 0, {}));
  t.visits.push_back(visit("http://a.com/1", 10, {}));
  t.visits.push_back(visit("http://a.com/2", 20, {}));
  t.visits.push_back(visit("http://a.com/3", 30, {}));
  PopularityModel m = train(t, 30, 30, 2);
  CHECK(m.counts.size() == 2);
  CHECK(m.counts.at("http://a.com/1") == 2);
  CHECK(predict_pages(m) == std::vector<std::string>{"http://a.com/1", "http://a.com/2"});
  m = train(t, 31, 21, 5);
  CHECK(m.counts.size() == 3);
  CHECK(predict_pages(m) == std::vector<std::string>{"http://a.com/1", "http://a.com/2", "http://a.com/3"});
  CHECK_THROWS_AS(train(t, 1000, 10), EmptyWindow);
  CHECK_THROWS_AS(train(t, 30, 30, 0), InvalidParams);
}

TEST_CASE("evaluation examples") {
  // Two pages visited daily; a third only after the first month.
  Trace t;
  for (int d = 0; d < 40; ++d) {
    t.visits.push_back(visit("http://a.com/home", d * kDay + 10, {"http://a.com/x.png"}, 100));
    if (d >= 30) t.visits.push_back(visit("http://a.com/new" + std::to_string(d), d * kDay + 20, {}, 0));
  }
  PrefetchOptions o;
  o.top_k = 1;
  PrefetchReport r = evaluate_prefetch(t, o);
  CHECK(r.n_visits == 20);
  CHECK(r.n_hit_visits == 10);
  CHECK(r.usefulness == 0.5);
  CHECK(r.hit_ratio == 1.0);
  CHECK(r.unnecessary_bytes == 0);
  CHECK(r.prefetched_bytes == r.intervals.size() * 100);
  CHECK(r.upper_bound_delay_reduction_fraction > 0.0);
  CHECK(r.upper_bound_delay_reduction_fraction < 1.0);

  Trace fresh_pages;
  for (int i = 0; i < 100; ++i) fresh_pages.visits.push_back(visit("http://a.com/p" + std::to_string(i), i * kDay / 2, {}));
  PrefetchReport none = evaluate_prefetch(fresh_pages);
  CHECK(none.usefulness == 0.0);
  CHECK(none.hit_ratio == 0.0);
  CHECK(none.unnecessary_bytes_fraction == 0.0);

  Trace short_trace;
  short_trace.visits.push_back(visit("http://a.com/", 0, {}));
  short_trace.visits.push_back(visit("http://a.com/", 10 * kDay, {}));
  CHECK_THROWS_AS(evaluate_prefetch(short_trace), InsufficientTrace);
  CHECK_THROWS_AS(evaluate_prefetch(Trace{}), EmptyTrace);
  PrefetchOptions bad;
  bad.top_k = 0;
  CHECK_THROWS_AS(evaluate_prefetch(t, bad), InvalidParams);
}

TEST_CASE("usefulness matches the membership recount") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Trace t = synthetic(seed);
    for (int k : {1, 5, 10, 40}) {
      PrefetchOptions o;
      o.top_k = k;
      o.refresh_interval_s = (seed % 2 ? 1 : 3) * kDay;
      PrefetchReport r = evaluate_prefetch(t, o);
      Recount rc = membership_recount(t, o);
      CAPTURE(seed);
      CAPTURE(k);
      CHECK(r.n_visits == rc.visits);
      CHECK(r.n_hit_visits == rc.hits);
      CHECK(r.usefulness <= 1.0 - static_cast<double>(rc.first_time) / static_cast<double>(rc.visits) + 1e-12);
      CHECK(r.hit_ratio >= 0.0);
      CHECK(r.hit_ratio <= 1.0);
      CHECK(r.unnecessary_bytes <= r.prefetched_bytes);
    }
  }
}

TEST_CASE("larger top_k never lowers usefulness") {
  for (std::uint64_t seed : {4u, 5u}) {
    Trace t = synthetic(seed, 0.4);
    double prev = -1;
    for (int k = 1; k <= 30; k += 3) {
      PrefetchOptions o;
      o.top_k = k;
      double u = evaluate_prefetch(t, o).usefulness;
      CHECK(u >= prev);
      prev = u;
    }
  }
}

TEST_CASE("default synthetic trace stays under the structural bound") {
  Trace t = synthetic(11);
  PrefetchReport r = evaluate_prefetch(t);
  CHECK(r.usefulness <= 0.25);
}
