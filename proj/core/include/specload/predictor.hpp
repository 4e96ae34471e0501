#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "specload/http_cache.hpp"
#include "specload/resource_graph.hpp"
#include "specload/trace.hpp"

namespace specload {

struct PredictionCandidate {
  std::string url;
  ResourceKind kind = ResourceKind::Other;
  std::size_t n_parents = 0;
  std::uint64_t n_visits = 0;
  std::size_t url_length = 0;
};

PredictionCandidate make_candidate(const ResourceGraph& graph, NodeId subresource);

// Priority order: shared by more pages first, then scripts before
// stylesheets before images, then more visits, then shorter URLs; URL text
// breaks any remaining tie.
bool candidate_before(const PredictionCandidate& a, const PredictionCandidate& b);
void sort_candidates(std::vector<PredictionCandidate>& candidates);

enum class VisitClass { Revisit, NewVisitSubdomainKnown, NewVisitWebsiteKnown, Unknown };

std::string_view to_string(VisitClass c);

struct Prediction {
  std::vector<std::string> urls;
  VisitClass visit_class = VisitClass::Unknown;
};

// Revisits return every child of the page. New visits return the top
// round(mean children per page) subresources of the matching subdomain, or
// of the whole website when the subdomain is unknown. Throws MalformedUrl.
Prediction predict(const MetadataRepository& repo, std::string_view url);

enum class LoadType {
  Revalidate,  // expired copy in cache: conditional request
  Full,        // not cached
  Discovered,  // appended after parsing; classified at dispatch
};

struct PlannedLoad {
  std::string url;
  LoadType type = LoadType::Full;

  bool operator==(const PlannedLoad&) const = default;
};

struct LoadPlan {
  // Issued together with the main resource.
  std::vector<PlannedLoad> immediate;
  std::deque<PlannedLoad> waiting_queue;
  int max_connections = 4;
};

// Drops predicted resources that are fresh in `cache`; fills all but one
// connection (the main resource's) and queues the rest in priority order.
LoadPlan plan_loads(const Prediction& prediction, const CacheStore& cache, Timestamp now,
                    int max_connections = 4);
LoadPlan plan_loads(const Prediction& prediction,
                    const std::function<LookupOutcome(std::string_view)>& classify,
                    int max_connections = 4);

// Once the main resource is parsed: unneeded queued loads are dropped and
// needed resources not yet issued or queued are appended in document order.
// `issued` lists loads already on the wire; when empty, the plan's
// immediate loads are assumed to be.
LoadPlan revise_queue(const LoadPlan& plan, std::span<const std::string> actual_needed,
                      std::span<const std::string> issued = {});

struct PredictionScore {
  double hit_ratio = 0;   // |predicted ∩ requested| / |predicted|
  double usefulness = 0;  // |predicted ∩ requested| / |requested|
};

PredictionScore evaluate_prediction(std::span<const std::string> predicted,
                                    std::span<const std::string> requested);

struct SeriesPoint {
  std::int64_t bucket = 0;  // index from the first evaluated visit
  double hit_ratio = 0;
  double usefulness = 0;
  std::size_t n_predictions = 0;
};

struct ClassScore {
  double hit_ratio = 0;
  double usefulness = 0;
  std::size_t n = 0;
};

struct ReplaySeries {
  std::vector<SeriesPoint> weekly;
  std::vector<SeriesPoint> monthly;  // 30-day buckets
  ClassScore overall;
  ClassScore revisits;
  ClassScore new_visits;  // both new-visit classes
  ClassScore unknown;
  // Per evaluated visit, in replay order.
  std::vector<PredictionScore> per_visit;
};

struct ReplayOptions {
  // Leading share of the trace that only trains the repository.
  double warmup_fraction = 0.0;
  // When set, the repository is trimmed at every day boundary.
  std::optional<int> trim_days;
};

// Before each visit: predict from the repository built so far, score the
// prediction against the visit's subresources, then learn the visit.
// Throws EmptyTrace, InvalidParams.
ReplaySeries replay_predictor(const Trace& trace, const ReplayOptions& options = {});

}  // namespace specload
