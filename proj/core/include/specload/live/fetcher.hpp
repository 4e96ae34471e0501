#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "specload/http_cache.hpp"
#include "specload/resource_graph.hpp"
#include "specload/trace.hpp"

namespace specload {

enum class FetchMode { Legacy, Tempo };

std::string_view to_string(FetchMode mode);
std::optional<FetchMode> parse_fetch_mode(std::string_view name);

enum class ResourceOutcome { Fresh, Revalidated, Fetched, Mispredicted, Failed };

std::string_view to_string(ResourceOutcome outcome);

struct ResourceLoad {
  std::string url;
  ResourceOutcome outcome = ResourceOutcome::Fetched;
  bool required = false;
  bool speculative = false;
  std::uint64_t bytes = 0;  // body bytes received
  double t_start_ms = 0;
  double t_end_ms = 0;
  int redirects = 0;
  std::string error;  // "Timeout(url)" or "ConnectionError(url)" when Failed
};

struct LoadReport {
  std::string page_url;
  FetchMode mode = FetchMode::Legacy;
  double delay_ms = 0;
  std::vector<ResourceLoad> resources;  // main first, then in dispatch order
  std::uint64_t overhead_bytes = 0;
  int max_in_flight = 0;
  // What the page turned out to need; fed to the repository.
  PageVisit observed;
};

// Browser state carried across fetches: cache, resource graphs and the
// validators and bodies the cache itself does not keep.
class FetchSession {
 public:
  explicit FetchSession(int max_connections = 4, int timeout_ms = 10000, std::string user_agent = {});

  int max_connections() const { return max_connections_; }
  int timeout_ms() const { return timeout_ms_; }
  const std::string& user_agent() const { return user_agent_; }
  // "host:port" from HTTP_PROXY, empty when unset.
  const std::string& proxy() const { return proxy_; }

  MetadataRepository& repo() { return repo_; }
  CacheStore& cache() { return cache_; }

 private:
  friend LoadReport fetch_page(FetchSession&, std::string_view, FetchMode);

  int max_connections_;
  int timeout_ms_;
  std::string user_agent_;
  std::string proxy_;
  MetadataRepository repo_;
  CacheStore cache_{Capacity::bytes(6ull << 20)};
  std::map<std::string, std::string, std::less<>> etags_;
  std::map<std::string, ResourceRecord, std::less<>> records_;
  std::map<std::string, std::string, std::less<>> html_;
};

// Loads a page over at most max_connections concurrent requests. Per
// resource failures are recorded in the report; a failed main resource
// throws MainResourceFailed. Afterwards the cache is settled and the
// repository learns the observed visit.
LoadReport fetch_page(FetchSession& session, std::string_view url, FetchMode mode);

}  // namespace specload

#include "specload/report.hpp"

namespace specload {

// One row per resource of each report: page_url, mode, run, url, outcome,
// required, bytes, t_start_ms, t_end_ms, plus a page summary row.
Report fetch_report(const std::vector<LoadReport>& reports);

}  // namespace specload
