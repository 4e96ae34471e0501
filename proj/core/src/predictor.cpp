#include "specload/predictor.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <tuple>
#include <unordered_set>

#include "specload/error.hpp"
#include "specload/url.hpp"

namespace specload {
namespace {

int kind_rank(ResourceKind k) {
  switch (k) {
    case ResourceKind::Script: return 0;
    case ResourceKind::Stylesheet: return 1;
    case ResourceKind::Image: return 2;
    default: return 3;
  }
}

std::vector<std::string> sorted_urls(const ResourceGraph& g, const std::vector<NodeId>& ids) {
  std::vector<PredictionCandidate> candidates;
  candidates.reserve(ids.size());
  for (NodeId id : ids) candidates.push_back(make_candidate(g, id));
  sort_candidates(candidates);
  std::vector<std::string> urls;
  urls.reserve(candidates.size());
  for (auto& c : candidates) urls.push_back(std::move(c.url));
  return urls;
}

}  // namespace

PredictionCandidate make_candidate(const ResourceGraph& graph, NodeId subresource) {
  const GraphNode& n = graph.node(subresource);
  return {n.name, n.kind, n.parents.size(), n.n_visits, n.name.size()};
}

bool candidate_before(const PredictionCandidate& a, const PredictionCandidate& b) {
  auto key = [](const PredictionCandidate& c) {
    return std::make_tuple(-static_cast<std::int64_t>(c.n_parents), kind_rank(c.kind),
                           -static_cast<std::int64_t>(c.n_visits), c.url_length,
                           std::string_view(c.url));
  };
  return key(a) < key(b);
}

void sort_candidates(std::vector<PredictionCandidate>& candidates) {
  std::stable_sort(candidates.begin(), candidates.end(), candidate_before);
}

std::string_view to_string(VisitClass c) {
  switch (c) {
    case VisitClass::Revisit: return "revisit";
    case VisitClass::NewVisitSubdomainKnown: return "new_subdomain_known";
    case VisitClass::NewVisitWebsiteKnown: return "new_website_known";
    case VisitClass::Unknown: return "unknown";
  }
  return "unknown";
}

Prediction predict(const MetadataRepository& repo, std::string_view url) {
  const std::string normalized = normalize_url(url);
  Prediction out;
  const ResourceGraph* g = repo.graph_for_url(normalized);
  if (!g) return out;

  if (auto page = g->find(NodeType::Webpage, normalized)) {
    const auto& children = g->node(*page).children;
    out.urls = sorted_urls(*g, {children.begin(), children.end()});
    out.visit_class = VisitClass::Revisit;
    return out;
  }

  std::vector<NodeId> scope_pages;
  auto collect_pages = [&](NodeId subdomain) {
    for (NodeId p : g->node(subdomain).children) scope_pages.push_back(p);
  };
  if (auto sub = g->find(NodeType::Subdomain, url_host(normalized))) {
    out.visit_class = VisitClass::NewVisitSubdomainKnown;
    collect_pages(*sub);
  } else {
    out.visit_class = VisitClass::NewVisitWebsiteKnown;
    for (NodeId sd : g->node(g->website()).children) collect_pages(sd);
  }
  if (scope_pages.empty()) return out;

  std::set<NodeId> candidates;
  std::size_t total_children = 0;
  for (NodeId p : scope_pages) {
    const auto& children = g->node(p).children;
    total_children += children.size();
    candidates.insert(children.begin(), children.end());
  }
  // round-half-up of the mean, at least one
  const std::size_t n = scope_pages.size();
  std::size_t num_predicted = std::max<std::size_t>(1, (2 * total_children + n) / (2 * n));

  out.urls = sorted_urls(*g, {candidates.begin(), candidates.end()});
  if (out.urls.size() > num_predicted) out.urls.resize(num_predicted);
  return out;
}

LoadPlan plan_loads(const Prediction& prediction, const CacheStore& cache, Timestamp now,
                    int max_connections) {
  return plan_loads(
      prediction, [&](std::string_view url) { return cache.classify(url, now); }, max_connections);
}

LoadPlan plan_loads(const Prediction& prediction,
                    const std::function<LookupOutcome(std::string_view)>& classify,
                    int max_connections) {
  LoadPlan plan;
  plan.max_connections = max_connections;
  const std::size_t slots = static_cast<std::size_t>(std::max(0, max_connections - 1));
  std::unordered_set<std::string> seen;
  for (const auto& url : prediction.urls) {
    if (!seen.insert(url).second) continue;
    LoadType type = LoadType::Full;
    switch (classify(url)) {
      case LookupOutcome::FreshHit: continue;
      case LookupOutcome::ExpiredRevalidate: type = LoadType::Revalidate; break;
      case LookupOutcome::Miss: break;
    }
    if (plan.immediate.size() < slots)
      plan.immediate.push_back({url, type});
    else
      plan.waiting_queue.push_back({url, type});
  }
  return plan;
}

LoadPlan revise_queue(const LoadPlan& plan, std::span<const std::string> actual_needed,
                      std::span<const std::string> issued) {
  std::unordered_set<std::string> needed(actual_needed.begin(), actual_needed.end());
  std::unordered_set<std::string> in_flight(issued.begin(), issued.end());
  for (const auto& load : plan.immediate) in_flight.insert(load.url);

  LoadPlan revised;
  revised.max_connections = plan.max_connections;
  revised.immediate = plan.immediate;
  std::unordered_set<std::string> queued;
  for (const auto& load : plan.waiting_queue) {
    if (needed.contains(load.url) && !in_flight.contains(load.url) && queued.insert(load.url).second)
      revised.waiting_queue.push_back(load);
  }
  for (const auto& url : actual_needed) {
    if (in_flight.contains(url) || queued.contains(url)) continue;
    queued.insert(url);
    revised.waiting_queue.push_back({url, LoadType::Discovered});
  }
  return revised;
}

PredictionScore evaluate_prediction(std::span<const std::string> predicted,
                                    std::span<const std::string> requested) {
  std::unordered_set<std::string> p(predicted.begin(), predicted.end());
  std::unordered_set<std::string> r(requested.begin(), requested.end());
  std::size_t both = 0;
  for (const auto& u : p) both += r.contains(u) ? 1 : 0;
  PredictionScore s;
  s.hit_ratio = p.empty() ? 0.0 : static_cast<double>(both) / static_cast<double>(p.size());
  s.usefulness = r.empty() ? 0.0 : static_cast<double>(both) / static_cast<double>(r.size());
  return s;
}

namespace {

struct Accumulator {
  double hit = 0;
  double use = 0;
  std::size_t n = 0;

  void add(const PredictionScore& s) {
    hit += s.hit_ratio;
    use += s.usefulness;
    ++n;
  }
  ClassScore score() const {
    if (n == 0) return {};
    return {hit / static_cast<double>(n), use / static_cast<double>(n), n};
  }
};

std::vector<SeriesPoint> to_series(const std::map<std::int64_t, Accumulator>& buckets) {
  std::vector<SeriesPoint> out;
  for (const auto& [b, acc] : buckets) {
    auto s = acc.score();
    out.push_back({b, s.hit_ratio, s.usefulness, s.n});
  }
  return out;
}

}  // namespace

ReplaySeries replay_predictor(const Trace& trace, const ReplayOptions& options) {
  if (trace.visits.empty()) throw EmptyTrace();
  if (!(options.warmup_fraction >= 0.0 && options.warmup_fraction < 1.0))
    throw InvalidParams("warmup_fraction must lie in [0, 1)");

  std::vector<std::size_t> order(trace.visits.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return trace.visits[a].timestamp < trace.visits[b].timestamp;
  });
  const auto warmup = static_cast<std::size_t>(options.warmup_fraction * static_cast<double>(order.size()));

  MetadataRepository repo;
  ReplaySeries series;
  std::map<std::int64_t, Accumulator> weekly, monthly;
  Accumulator overall, revisits, fresh_pages, unknown;
  const Timestamp origin = trace.visits[order.front()].timestamp;
  std::int64_t trimmed_day = 0;
  std::optional<Timestamp> eval_origin;

  for (std::size_t i = 0; i < order.size(); ++i) {
    const PageVisit& visit = trace.visits[order[i]];
    if (options.trim_days) {
      std::int64_t day = (visit.timestamp - origin) / kSecondsPerDay;
      if (day > trimmed_day) {
        trimmed_day = day;
        repo.trim(origin + day * kSecondsPerDay, *options.trim_days);
      }
    }
    if (i >= warmup) {
      Prediction p = predict(repo, visit.main.url);
      auto requested = visit.subresource_urls();
      PredictionScore s = evaluate_prediction(p.urls, requested);
      if (!eval_origin) eval_origin = visit.timestamp;
      Timestamp since = visit.timestamp - *eval_origin;
      weekly[since / (7 * kSecondsPerDay)].add(s);
      monthly[since / (30 * kSecondsPerDay)].add(s);
      overall.add(s);
      switch (p.visit_class) {
        case VisitClass::Revisit: revisits.add(s); break;
        case VisitClass::NewVisitSubdomainKnown:
        case VisitClass::NewVisitWebsiteKnown: fresh_pages.add(s); break;
        case VisitClass::Unknown: unknown.add(s); break;
      }
      series.per_visit.push_back(s);
    }
    repo.update(visit);
  }
  series.weekly = to_series(weekly);
  series.monthly = to_series(monthly);
  series.overall = overall.score();
  series.revisits = revisits.score();
  series.new_visits = fresh_pages.score();
  series.unknown = unknown.score();
  return series;
}

}  // namespace specload
