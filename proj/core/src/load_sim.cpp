#include "specload/load_sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <queue>
#include <tuple>
#include <unordered_map>

#include "specload/error.hpp"

namespace specload {

void validate(const NetworkParams& net) {
  if (!(net.rtt_ms >= 0) || !(net.bandwidth_bytes_per_s > 0) || net.main_extra_rtts < 0 ||
      !(net.parse_ms >= 0) || net.redirect_hops < 0)
    throw InvalidParams("network parameters must be non-negative (bandwidth positive)");
}

std::string_view to_string(CacheStateKind kind) {
  switch (kind) {
    case CacheStateKind::Fresh: return "fresh";
    case CacheStateKind::Expired: return "expired";
    case CacheStateKind::Empty: return "empty";
    case CacheStateKind::Realistic: return "realistic";
  }
  return "empty";
}

std::optional<CacheStateKind> parse_cache_state(std::string_view name) {
  for (auto k : {CacheStateKind::Fresh, CacheStateKind::Expired, CacheStateKind::Empty,
                 CacheStateKind::Realistic})
    if (name == to_string(k)) return k;
  return std::nullopt;
}

CacheState CacheState::of(CacheStateKind kind, Capacity capacity) {
  switch (kind) {
    case CacheStateKind::Fresh: return fresh();
    case CacheStateKind::Expired: return expired();
    case CacheStateKind::Empty: return empty();
    case CacheStateKind::Realistic: return realistic(capacity);
  }
  return empty();
}

LookupOutcome CacheState::classify(std::string_view url, Timestamp now, bool is_main) const {
  switch (kind_) {
    case CacheStateKind::Realistic: return store_->classify(url, now);
    case CacheStateKind::Fresh:
      return is_main ? LookupOutcome::Miss : LookupOutcome::FreshHit;
    case CacheStateKind::Expired:
      return is_main ? LookupOutcome::Miss : LookupOutcome::ExpiredRevalidate;
    case CacheStateKind::Empty: return LookupOutcome::Miss;
  }
  return LookupOutcome::Miss;
}

namespace {

enum class EventType { ConnectionDone = 0, MainParsed = 1, Ready = 2 };

struct Event {
  double time;
  EventType type;
  std::uint64_t seq;
  std::size_t request;

  bool operator>(const Event& o) const {
    return std::tie(time, type, seq) > std::tie(o.time, o.type, o.seq);
  }
};

struct Queued {
  std::size_t request;
  double ready;
};

class Engine {
 public:
  Engine(const PageVisit& visit, const LoadMode& mode, const CacheState& state,
         const NetworkParams& net, int max_connections, const DurationScale& scale)
      : visit_(visit), mode_(mode), state_(state), net_(net), scale_(scale),
        busy_(static_cast<std::size_t>(std::max(1, max_connections)), false) {
    add_request(visit.main.url, visit.main.size_bytes, true, true);
    for (const auto& sub : visit.subresources) add_request(sub.url, sub.size_bytes, true, false);
  }

  PageTiming run() {
    start(0, 0, 0.0);
    if (mode_.kind == LoadMode::Kind::Speculative) {
      plan_ = plan_loads(
          mode_.prediction,
          [&](std::string_view url) { return state_.classify(url, visit_.timestamp, false); },
          static_cast<int>(busy_.size()));
      for (const auto& load : plan_.immediate) {
        std::size_t r = request_for(load.url);
        timing_.requests[r].speculative = true;
        start(r, next_idle(), 0.0);
      }
      for (const auto& load : plan_.waiting_queue) {
        std::size_t r = request_for(load.url);
        timing_.requests[r].speculative = true;
        queue_.push_back({r, 0.0});
      }
    }
    dispatch(0.0);

    while (!events_.empty()) {
      Event ev = events_.top();
      events_.pop();
      switch (ev.type) {
        case EventType::ConnectionDone: finish(ev.request); break;
        case EventType::MainParsed: discover(ev.time); break;
        case EventType::Ready: break;
      }
      dispatch(ev.time);
    }

    timing_.delay_ms = 0;
    for (const auto& r : timing_.requests)
      if (r.required) timing_.delay_ms = std::max(timing_.delay_ms, r.end_ms);
    for (const auto& r : timing_.requests) timing_.mispredicted += r.required ? 0 : 1;
    return std::move(timing_);
  }

 private:
  std::size_t add_request(const std::string& url, std::uint64_t size, bool required, bool is_main) {
    RequestTiming r;
    r.url = url;
    r.required = required;
    r.outcome = state_.classify(url, visit_.timestamp, is_main);
    double cost = 0;
    if (r.outcome != LookupOutcome::FreshHit) {
      cost = net_.rtt_ms;
      if (r.outcome == LookupOutcome::Miss && std::isfinite(net_.bandwidth_bytes_per_s))
        cost += 1000.0 * static_cast<double>(size) / net_.bandwidth_bytes_per_s;
      if (is_main) cost += (net_.main_extra_rtts + net_.redirect_hops) * net_.rtt_ms;
    }
    cost *= is_main ? scale_.main_fetch : scale_.subresource_fetch;
    index_.emplace(url, timing_.requests.size());
    timing_.requests.push_back(std::move(r));
    cost_.push_back(cost);
    return timing_.requests.size() - 1;
  }

  // Predicted URLs the page never asks for become extra, unrequired requests.
  std::size_t request_for(const std::string& url) {
    if (auto it = index_.find(url); it != index_.end() && it->second != 0) return it->second;
    std::uint64_t size = 0;
    if (state_.kind() == CacheStateKind::Realistic)
      if (const CacheEntry* e = state_.store()->find(url)) size = e->size_bytes;
    return add_request(url, size, false, false);
  }

  std::size_t next_idle() const {
    for (std::size_t c = 0; c < busy_.size(); ++c)
      if (!busy_[c]) return c;
    return busy_.size();
  }

  void push(double time, EventType type, std::size_t request) {
    events_.push({time, type, seq_++, request});
  }

  void start(std::size_t r, std::size_t conn, double t) {
    RequestTiming& req = timing_.requests[r];
    started_.push_back(req.url);
    req.start_ms = t;
    if (req.outcome == LookupOutcome::FreshHit) {
      req.end_ms = t;
      if (r == 0) main_done(t);
      return;
    }
    req.connection = static_cast<int>(conn);
    req.end_ms = t + cost_[r];
    busy_[conn] = true;
    push(req.end_ms, EventType::ConnectionDone, r);
  }

  void finish(std::size_t r) {
    busy_[static_cast<std::size_t>(timing_.requests[r].connection)] = false;
    if (r == 0) main_done(timing_.requests[0].end_ms);
  }

  void main_done(double t) {
    timing_.main_done_ms = t;
    push(t + net_.parse_ms * scale_.parse, EventType::MainParsed, 0);
  }

  void discover(double t) {
    timing_.discovery_ms = t;
    plan_.waiting_queue.clear();
    for (const auto& q : queue_) plan_.waiting_queue.push_back({timing_.requests[q.request].url, LoadType::Full});
    plan_.immediate.clear();
    std::vector<std::string> needed;
    std::vector<double> ready_at;
    for (std::size_t i = 0; i < visit_.subresources.size(); ++i) {
      needed.push_back(visit_.subresources[i].url);
      ready_at.push_back(t + visit_.discovery_offsets_ms[i]);
    }
    LoadPlan revised = revise_queue(plan_, needed, started_);
    std::unordered_map<std::string, double> discovery;
    for (std::size_t i = 0; i < needed.size(); ++i) discovery.emplace(needed[i], ready_at[i]);

    std::deque<Queued> next;
    for (const auto& load : revised.waiting_queue) {
      std::size_t r = index_.at(load.url);
      double ready = load.type == LoadType::Discovered ? discovery.at(load.url) : 0.0;
      next.push_back({r, ready});
      if (ready > t) push(ready, EventType::Ready, r);
    }
    queue_ = std::move(next);
    plan_ = std::move(revised);
  }

  void dispatch(double t) {
    for (auto it = queue_.begin(); it != queue_.end();) {
      if (it->ready <= t && timing_.requests[it->request].outcome == LookupOutcome::FreshHit) {
        timing_.requests[it->request].ready_ms = it->ready;
        start(it->request, busy_.size(), t);
        it = queue_.erase(it);
      } else {
        ++it;
      }
    }
    for (std::size_t c = next_idle(); c < busy_.size(); c = next_idle()) {
      auto it = std::find_if(queue_.begin(), queue_.end(), [&](const Queued& q) { return q.ready <= t; });
      if (it == queue_.end()) break;
      timing_.requests[it->request].ready_ms = it->ready;
      std::size_t r = it->request;
      queue_.erase(it);
      start(r, c, t);
    }
  }

  const PageVisit& visit_;
  const LoadMode& mode_;
  const CacheState& state_;
  const NetworkParams& net_;
  DurationScale scale_;

  std::vector<bool> busy_;
  std::vector<double> cost_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> started_;
  std::deque<Queued> queue_;
  LoadPlan plan_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t seq_ = 0;
  PageTiming timing_;
};

}  // namespace

PageTiming simulate_page_timing(const PageVisit& visit, const LoadMode& mode,
                                const CacheState& cache_state, const NetworkParams& net,
                                int max_connections, const DurationScale& scale) {
  validate(net);
  if (max_connections < 1) throw InvalidParams("max_connections must be >= 1");
  Engine engine(visit, mode, cache_state, net, max_connections, scale);
  return engine.run();
}

void commit_visit(CacheStore& store, const PageVisit& visit) {
  auto request = [&](const ResourceRecord& r) {
    switch (store.lookup(r.url, visit.timestamp)) {
      case LookupOutcome::FreshHit: break;
      case LookupOutcome::ExpiredRevalidate: store.revalidated(r, visit.timestamp); break;
      case LookupOutcome::Miss: store.admit(r, visit.timestamp); break;
    }
  };
  request(visit.main);
  for (const auto& sub : visit.subresources) request(sub);
  store.page_complete();
}

double simulate_page(const PageVisit& visit, const LoadMode& mode, CacheState& cache_state,
                     const NetworkParams& net, int max_connections) {
  double delay = simulate_page_timing(visit, mode, cache_state, net, max_connections).delay_ms;
  if (cache_state.kind() == CacheStateKind::Realistic) commit_visit(*cache_state.store(), visit);
  return delay;
}

double whatif_scale(const PageVisit& visit, const LoadMode& mode, OperationClass operation,
                    double scale, const NetworkParams& net, CacheState& cache_state,
                    int max_connections) {
  if (!(scale >= 0)) throw InvalidParams("scale must be >= 0");
  DurationScale s;
  switch (operation) {
    case OperationClass::MainFetch: s.main_fetch = scale; break;
    case OperationClass::Parse: s.parse = scale; break;
    case OperationClass::SubresourceFetch: s.subresource_fetch = scale; break;
  }
  double delay = simulate_page_timing(visit, mode, cache_state, net, max_connections, s).delay_ms;
  if (cache_state.kind() == CacheStateKind::Realistic) commit_visit(*cache_state.store(), visit);
  return delay;
}

Prediction oracle_prediction(const PageVisit& visit) {
  std::vector<std::size_t> order(visit.subresources.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return visit.discovery_offsets_ms[a] < visit.discovery_offsets_ms[b];
  });
  Prediction p;
  p.visit_class = VisitClass::Revisit;
  for (std::size_t i : order) p.urls.push_back(visit.subresources[i].url);
  return p;
}

SimResult simulate_trace(const Trace& trace, const NetworkParams& net, CacheState cache_state,
                         bool with_predictor, int max_connections) {
  if (trace.visits.empty()) throw EmptyTrace();
  std::vector<std::size_t> order(trace.visits.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return trace.visits[a].timestamp < trace.visits[b].timestamp;
  });

  SimResult result;
  MetadataRepository repo;
  double legacy_total = 0, spec_total = 0;
  for (std::size_t i : order) {
    const PageVisit& visit = trace.visits[i];
    Prediction prediction = with_predictor ? predict(repo, visit.main.url) : oracle_prediction(visit);
    PageSimRow row;
    row.page_url = visit.main.url;
    row.legacy_delay_ms =
        simulate_page_timing(visit, LoadMode::legacy(), cache_state, net, max_connections).delay_ms;
    row.speculative_delay_ms =
        simulate_page_timing(visit, LoadMode::speculative(prediction), cache_state, net, max_connections)
            .delay_ms;
    row.reduction_ms = row.legacy_delay_ms - row.speculative_delay_ms;
    row.reduction_fraction = row.legacy_delay_ms > 0 ? row.reduction_ms / row.legacy_delay_ms : 0.0;
    row.prediction = evaluate_prediction(prediction.urls, visit.subresource_urls());
    legacy_total += row.legacy_delay_ms;
    spec_total += row.speculative_delay_ms;
    result.pages.push_back(std::move(row));

    if (cache_state.kind() == CacheStateKind::Realistic) commit_visit(*cache_state.store(), visit);
    if (with_predictor) repo.update(visit);
  }
  const auto n = static_cast<double>(result.pages.size());
  result.mean_legacy_ms = legacy_total / n;
  result.mean_speculative_ms = spec_total / n;
  result.mean_reduction_ms = (legacy_total - spec_total) / n;
  result.reduction_fraction = legacy_total > 0 ? (legacy_total - spec_total) / legacy_total : 0.0;
  return result;
}

}  // namespace specload
