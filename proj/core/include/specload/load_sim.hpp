#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "specload/http_cache.hpp"
#include "specload/predictor.hpp"
#include "specload/trace.hpp"

namespace specload {

// Fixed-RTT network: each connection is an independent pipe, bandwidth is
// per connection and never shared.
struct NetworkParams {
  double rtt_ms = 200;
  double bandwidth_bytes_per_s = std::numeric_limits<double>::infinity();
  // DNS lookup and TCP setup before the main request.
  int main_extra_rtts = 1;
  // Time between the main response and subresource discovery.
  double parse_ms = 300;
  int redirect_hops = 0;
};

void validate(const NetworkParams& net);

enum class CacheStateKind { Fresh, Expired, Empty, Realistic };

std::string_view to_string(CacheStateKind kind);
std::optional<CacheStateKind> parse_cache_state(std::string_view name);

// Fresh, Expired and Empty fix the state of every subresource (the main
// document is always fetched). Realistic carries a browser cache that each
// simulated visit reads and then updates.
class CacheState {
 public:
  static CacheState fresh() { return CacheState(CacheStateKind::Fresh); }
  static CacheState expired() { return CacheState(CacheStateKind::Expired); }
  static CacheState empty() { return CacheState(CacheStateKind::Empty); }
  static CacheState realistic(Capacity capacity = Capacity::bytes(6ull << 20)) {
    CacheState s(CacheStateKind::Realistic);
    s.store_ = std::make_shared<CacheStore>(capacity);
    return s;
  }
  static CacheState of(CacheStateKind kind, Capacity capacity = Capacity::bytes(6ull << 20));

  CacheStateKind kind() const { return kind_; }
  // Only for Realistic.
  CacheStore* store() const { return store_.get(); }

  // Outcome of requesting `url` during the visit at `now`; `is_main`
  // selects the main-document rule for the fixed states.
  LookupOutcome classify(std::string_view url, Timestamp now, bool is_main) const;

 private:
  explicit CacheState(CacheStateKind kind) : kind_(kind) {}
  CacheStateKind kind_;
  std::shared_ptr<CacheStore> store_;
};

enum class OperationClass { MainFetch, Parse, SubresourceFetch };

// Multipliers for the what-if analysis.
struct DurationScale {
  double main_fetch = 1;
  double parse = 1;
  double subresource_fetch = 1;
};

struct LoadMode {
  enum class Kind { Legacy, Speculative };
  Kind kind = Kind::Legacy;
  Prediction prediction;

  static LoadMode legacy() { return {}; }
  static LoadMode speculative(Prediction p) { return {Kind::Speculative, std::move(p)}; }
};

// One simulated request.
struct RequestTiming {
  std::string url;
  LookupOutcome outcome = LookupOutcome::Miss;
  bool required = true;
  bool speculative = false;  // issued from the prediction
  int connection = -1;       // -1 when served locally
  double ready_ms = 0;
  double start_ms = 0;
  double end_ms = 0;
};

struct PageTiming {
  double delay_ms = 0;
  double main_done_ms = 0;
  double discovery_ms = 0;  // main parsed
  std::vector<RequestTiming> requests;  // main first
  std::size_t mispredicted = 0;
};

// Runs the event simulation without mutating a Realistic cache.
PageTiming simulate_page_timing(const PageVisit& visit, const LoadMode& mode,
                                const CacheState& cache_state, const NetworkParams& net,
                                int max_connections = 4, const DurationScale& scale = {});

// Browser delay in ms: time until the last required response is available.
// A Realistic cache is updated with the page's resources afterwards.
double simulate_page(const PageVisit& visit, const LoadMode& mode, CacheState& cache_state,
                     const NetworkParams& net, int max_connections = 4);

// Same as simulate_page with every duration of one operation class
// multiplied by `scale` (>= 0). Throws InvalidParams.
double whatif_scale(const PageVisit& visit, const LoadMode& mode, OperationClass operation,
                    double scale, const NetworkParams& net, CacheState& cache_state,
                    int max_connections = 4);

// Applies a finished visit to a carried cache, with replay semantics.
void commit_visit(CacheStore& store, const PageVisit& visit);

// The visit's own subresource list in discovery order: a perfect prediction.
Prediction oracle_prediction(const PageVisit& visit);

struct PageSimRow {
  std::string page_url;
  double legacy_delay_ms = 0;
  double speculative_delay_ms = 0;
  double reduction_ms = 0;
  double reduction_fraction = 0;
  PredictionScore prediction;
};

struct SimResult {
  std::vector<PageSimRow> pages;
  double mean_legacy_ms = 0;
  double mean_speculative_ms = 0;
  double mean_reduction_ms = 0;
  // Total reduction over total legacy delay.
  double reduction_fraction = 0;
};

// Legacy vs speculative for every visit. Without the predictor the
// speculative side gets the oracle prediction (upper bound); with it, the
// repository is learned in replay order. Throws EmptyTrace.
SimResult simulate_trace(const Trace& trace, const NetworkParams& net, CacheState cache_state,
                         bool with_predictor, int max_connections = 4);

}  // namespace specload
