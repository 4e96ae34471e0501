#include "specload/live/fetcher.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>

#include <httplib.h>

#include "specload/error.hpp"
#include "specload/live/html_extract.hpp"
#include "specload/predictor.hpp"
#include "specload/url.hpp"

namespace specload {

std::string_view to_string(FetchMode mode) { return mode == FetchMode::Legacy ? "legacy" : "tempo"; }

std::optional<FetchMode> parse_fetch_mode(std::string_view name) {
  if (name == "legacy") return FetchMode::Legacy;
  if (name == "tempo") return FetchMode::Tempo;
  return std::nullopt;
}

std::string_view to_string(ResourceOutcome outcome) {
  switch (outcome) {
    case ResourceOutcome::Fresh: return "fresh";
    case ResourceOutcome::Revalidated: return "revalidated";
    case ResourceOutcome::Fetched: return "fetched";
    case ResourceOutcome::Mispredicted: return "mispredicted";
    case ResourceOutcome::Failed: return "failed";
  }
  return "failed";
}

namespace {

constexpr int kMaxRedirects = 5;

std::string proxy_from_env() {
  const char* raw = std::getenv("HTTP_PROXY");
  if (!raw) raw = std::getenv("http_proxy");
  if (!raw || !*raw) return {};
  std::string p(raw);
  if (auto pos = p.find("://"); pos != std::string::npos) p = p.substr(pos + 3);
  if (auto slash = p.find('/'); slash != std::string::npos) p.resize(slash);
  return p;
}

struct HttpResult {
  int status = 0;
  std::string body;
  std::string cache_control, expires, last_modified, etag, content_type;
  std::string final_url;
  int redirects = 0;
  std::string error;
};

struct ClientConfig {
  std::string user_agent;
  std::string proxy;
  int timeout_ms = 10000;
};

HttpResult http_get(const std::string& url, const std::string& etag, const ClientConfig& cfg) {
  HttpResult out;
  std::string current = url;
  for (int hop = 0;; ++hop) {
    auto parts = parse_url(current);
    if (!parts) {
      out.error = "ConnectionError(" + url + ")";
      return out;
    }
    std::string origin = parts->scheme + "://" + parts->host + (parts->port.empty() ? "" : ":" + parts->port);
    httplib::Client client(origin);
    if (!client.is_valid()) {
      out.error = "ConnectionError(" + url + ")";
      return out;
    }
    const auto sec = cfg.timeout_ms / 1000, usec = (cfg.timeout_ms % 1000) * 1000;
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
    client.set_keep_alive(false);
    if (!cfg.proxy.empty()) {
      auto colon = cfg.proxy.rfind(':');
      if (colon != std::string::npos)
        client.set_proxy(cfg.proxy.substr(0, colon), std::atoi(cfg.proxy.c_str() + colon + 1));
    }
    httplib::Headers headers{{"User-Agent", cfg.user_agent}};
    if (!etag.empty() && hop == 0) headers.emplace("If-None-Match", etag);
    std::string target = parts->path.empty() ? "/" : parts->path;
    if (parts->query) target += "?" + *parts->query;

    auto res = client.Get(target, headers);
    if (!res) {
      auto err = res.error();
      bool timeout = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
      out.error = (timeout ? "Timeout(" : "ConnectionError(") + url + ")";
      return out;
    }
    if (res->status >= 300 && res->status < 400 && res->status != 304 && res->has_header("Location")) {
      if (hop >= kMaxRedirects) {
        out.error = "ConnectionError(" + url + ")";
        return out;
      }
      auto next = resolve_url(current, res->get_header_value("Location"));
      if (!next) {
        out.error = "ConnectionError(" + url + ")";
        return out;
      }
      current = *next;
      ++out.redirects;
      continue;
    }
    out.status = res->status;
    out.body = std::move(res->body);
    out.cache_control = res->get_header_value("Cache-Control");
    out.expires = res->get_header_value("Expires");
    out.last_modified = res->get_header_value("Last-Modified");
    out.etag = res->get_header_value("ETag");
    out.content_type = res->get_header_value("Content-Type");
    out.final_url = current;
    return out;
  }
}

// Completion queue between the pool threads and the coordinator.
struct Completion {
  std::size_t load;
  HttpResult result;
  double t_end_ms;
};

class CompletionQueue {
 public:
  void push(Completion c) {
    {
      std::lock_guard lock(mu_);
      items_.push_back(std::move(c));
    }
    cv_.notify_one();
  }
  Completion pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !items_.empty(); });
    Completion c = std::move(items_.front());
    items_.pop_front();
    return c;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Completion> items_;
};

}  // namespace

FetchSession::FetchSession(int max_connections, int timeout_ms, std::string user_agent)
    : max_connections_(max_connections), timeout_ms_(timeout_ms), user_agent_(std::move(user_agent)),
      proxy_(proxy_from_env()) {
  if (max_connections_ < 1) throw InvalidParams("max_connections must be >= 1");
  if (timeout_ms_ < 1) throw InvalidParams("timeout_ms must be >= 1");
  if (user_agent_.empty()) {
    const char* ua = std::getenv("SPECLOAD_UA");
    user_agent_ = ua && *ua ? ua : "specload/0.1";
  }
}

LoadReport fetch_page(FetchSession& session, std::string_view raw_url, FetchMode mode) {
  const std::string page_url = normalize_url(raw_url);
  const Timestamp now = std::chrono::duration_cast<std::chrono::seconds>(
                            std::chrono::system_clock::now().time_since_epoch())
                            .count();
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };
  const ClientConfig cfg{session.user_agent_, session.proxy_, session.timeout_ms_};
  const int n_conn = session.max_connections_;
  CacheStore& cache = session.cache_;

  LoadReport report;
  report.page_url = page_url;
  report.mode = mode;
  std::vector<LookupOutcome> lookups;
  std::unordered_map<std::string, std::size_t> index;
  std::unordered_map<std::string, ResourceKind> kinds;
  std::vector<std::string> issued;
  std::deque<std::string> queue;
  std::vector<std::thread> pool;
  CompletionQueue completions;
  std::atomic<int> active{0};
  std::atomic<int> max_active{0};
  int in_flight = 0;

  auto join_all = [&] {
    for (auto& t : pool) t.join();
    pool.clear();
  };

  auto dispatch = [&](const std::string& url, bool speculative) {
    const std::size_t i = report.resources.size();
    index.emplace(url, i);
    issued.push_back(url);
    ResourceLoad load;
    load.url = url;
    load.speculative = speculative;
    load.required = i == 0;
    load.t_start_ms = elapsed_ms();
    LookupOutcome outcome = cache.lookup(url, now);
    // The cache keeps no bodies; the main document needs one to be parsed.
    if (i == 0 && outcome != LookupOutcome::Miss && !session.html_.contains(url)) outcome = LookupOutcome::Miss;
    lookups.push_back(outcome);
    if (outcome == LookupOutcome::FreshHit) {
      load.outcome = ResourceOutcome::Fresh;
      load.t_end_ms = load.t_start_ms;
      report.resources.push_back(std::move(load));
      return;
    }
    report.resources.push_back(std::move(load));
    std::string etag;
    if (outcome == LookupOutcome::ExpiredRevalidate)
      if (auto it = session.etags_.find(url); it != session.etags_.end()) etag = it->second;
    ++in_flight;
    pool.emplace_back([&, i, url, etag] {
      int now_active = ++active;
      for (int seen = max_active.load(); now_active > seen && !max_active.compare_exchange_weak(seen, now_active);) {
      }
      HttpResult r = http_get(url, etag, cfg);
      --active;
      completions.push({i, std::move(r), elapsed_ms()});
    });
  };

  auto record_for = [&](const std::string& url, const HttpResult& r, std::uint64_t size) {
    ResourceRecord rec;
    rec.url = url;
    auto k = kinds.find(url);
    rec.kind = url == page_url ? ResourceKind::Html
               : k != kinds.end() ? k->second
                                  : kind_from_mime(r.content_type, url);
    rec.size_bytes = size;
    rec.cache = parse_cache_headers(r.cache_control, r.expires, !r.etag.empty() || !r.last_modified.empty(),
                                    r.last_modified);
    rec.fetched_at = now;
    return rec;
  };

  std::vector<std::string> needed;
  bool main_done = false;
  auto on_main = [&](const std::string& html, const std::string& base) {
    main_done = true;
    for (const auto& e : extract_subresources(html, base)) {
      needed.push_back(e.url);
      kinds.emplace(e.url, e.kind);
    }
    LoadPlan plan;
    plan.max_connections = n_conn;
    for (const auto& u : queue) plan.waiting_queue.push_back({u, LoadType::Full});
    LoadPlan revised = revise_queue(plan, needed, issued);
    queue.clear();
    for (const auto& l : revised.waiting_queue) queue.push_back(l.url);
    for (const auto& u : needed)
      if (auto it = index.find(u); it != index.end()) report.resources[it->second].required = true;
  };

  dispatch(page_url, false);
  if (mode == FetchMode::Tempo) {
    Prediction prediction = predict(session.repo_, page_url);
    LoadPlan plan = plan_loads(
        prediction, [&](std::string_view u) { return cache.classify(u, now); }, n_conn);
    for (const auto& l : plan.immediate)
      if (!index.contains(l.url)) dispatch(l.url, true);
    for (const auto& l : plan.waiting_queue) queue.push_back(l.url);
  }
  if (report.resources[0].outcome == ResourceOutcome::Fresh) on_main(session.html_.at(page_url), page_url);

  std::string main_error;
  for (;;) {
    while (in_flight < n_conn && !queue.empty()) {
      std::string url = std::move(queue.front());
      queue.pop_front();
      if (index.contains(url)) continue;
      dispatch(url, !main_done);
      if (main_done) report.resources.back().required = true;
    }
    if (in_flight == 0) break;

    Completion c = completions.pop();
    --in_flight;
    ResourceLoad& load = report.resources[c.load];
    HttpResult& r = c.result;
    load.t_end_ms = c.t_end_ms;
    load.redirects = r.redirects;
    const bool is_main = c.load == 0;

    if (!r.error.empty() || (r.status != 304 && (r.status < 200 || r.status >= 300))) {
      load.outcome = ResourceOutcome::Failed;
      load.error = r.error.empty() ? "HTTP " + std::to_string(r.status) + "(" + load.url + ")" : r.error;
      if (is_main) {
        main_error = load.error;
        queue.clear();
      }
      continue;
    }
    if (r.status == 304) {
      load.outcome = ResourceOutcome::Revalidated;
      ResourceRecord rec = session.records_.at(load.url);
      if (!r.cache_control.empty() || !r.expires.empty())
        rec.cache = parse_cache_headers(r.cache_control, r.expires, rec.cache.has_validator, r.last_modified);
      rec.fetched_at = now;
      cache.revalidated(rec, now);
      session.records_[load.url] = rec;
    } else {
      load.outcome = ResourceOutcome::Fetched;
      load.bytes = r.body.size();
      ResourceRecord rec = record_for(load.url, r, r.body.size());
      cache.admit(rec, now);
      session.records_[load.url] = rec;
      if (!r.etag.empty()) session.etags_[load.url] = r.etag;
      if (is_main) session.html_[load.url] = r.body;
    }
    if (is_main) on_main(session.html_.at(load.url), r.final_url.empty() ? page_url : normalize_url(r.final_url));
  }
  join_all();
  cache.page_complete();
  if (!main_error.empty()) throw MainResourceFailed(main_error);

  report.max_in_flight = max_active.load();
  for (auto& load : report.resources) {
    if (!load.required && load.outcome != ResourceOutcome::Failed) {
      load.outcome = ResourceOutcome::Mispredicted;
      report.overhead_bytes += load.bytes;
    }
    if (load.required) report.delay_ms = std::max(report.delay_ms, load.t_end_ms);
  }

  PageVisit& visit = report.observed;
  visit.user_id = "live";
  visit.timestamp = now;
  visit.main = session.records_.at(page_url);
  visit.main.kind = ResourceKind::Html;
  for (const auto& u : needed) {
    const ResourceLoad& load = report.resources[index.at(u)];
    if (load.outcome == ResourceOutcome::Failed) continue;
    auto rec = session.records_.find(u);
    if (rec == session.records_.end()) continue;
    visit.subresources.push_back(rec->second);
    visit.discovery_offsets_ms.push_back(0);
  }
  session.repo_.update(visit);
  return report;
}

}  // namespace specload

namespace specload {

Report fetch_report(const std::vector<LoadReport>& reports) {
  Report r{"fetch",
           {"page_url", "mode", "run", "url", "outcome", "required", "bytes", "t_start_ms", "t_end_ms",
            "delay_ms", "overhead_bytes"},
           {},
           {}};
  for (std::size_t run = 0; run < reports.size(); ++run) {
    const LoadReport& rep = reports[run];
    const std::string mode(to_string(rep.mode));
    const auto run_id = static_cast<std::int64_t>(run);
    for (const auto& l : rep.resources)
      r.add_row({rep.page_url, mode, run_id, l.url,
                 l.error.empty() ? std::string(to_string(l.outcome)) : l.error,
                 std::int64_t{l.required}, static_cast<std::int64_t>(l.bytes), l.t_start_ms, l.t_end_ms,
                 0.0, std::int64_t{0}});
    r.add_row({rep.page_url, mode, run_id, std::string("*page*"), std::string("complete"), std::int64_t{1},
               std::int64_t{0}, 0.0, rep.delay_ms, rep.delay_ms, static_cast<std::int64_t>(rep.overhead_bytes)});
  }
  return r;
}

}  // namespace specload
