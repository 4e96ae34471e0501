#pragma once

#include <cstdint>
#include <list>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "specload/trace.hpp"

namespace specload {

// Seconds a response stays fresh after it is stored; nullopt means it is
// expired the moment it is stored. Order of precedence: no-cache, max-age,
// Expires, 10% of the Last-Modified age.
std::optional<std::int64_t> freshness_lifetime(const CacheDirectives& directives,
                                               Timestamp fetched_at,
                                               std::optional<Timestamp> last_modified);
inline std::optional<std::int64_t> freshness_lifetime(const CacheDirectives& directives,
                                                      Timestamp fetched_at) {
  return freshness_lifetime(directives, fetched_at, directives.last_modified);
}

enum class LookupOutcome { FreshHit, ExpiredRevalidate, Miss };

std::string_view to_string(LookupOutcome outcome);

// Revalidations and misses both cost a round trip.
constexpr bool is_network_activity(LookupOutcome o) { return o != LookupOutcome::FreshHit; }

struct CacheEntry {
  std::string url;
  std::uint64_t size_bytes = 0;
  Timestamp stored_at = 0;
  std::optional<std::int64_t> freshness_lifetime;
  bool has_validator = false;
  Timestamp last_access = 0;

  bool fresh_at(Timestamp t) const {
    return freshness_lifetime.has_value() && t < stored_at + *freshness_lifetime;
  }
};

struct CacheCounters {
  std::uint64_t fresh_hits = 0;
  std::uint64_t revalidations = 0;
  std::uint64_t misses = 0;
  std::uint64_t bytes_fetched = 0;
  std::uint64_t bytes_saved_by_304 = 0;

  bool operator==(const CacheCounters&) const = default;
};

class Capacity {
 public:
  static Capacity infinite() { return Capacity(); }
  static Capacity bytes(std::uint64_t n) { return Capacity(n); }
  // "6MB", "512KB", "1GB", "inf", or a plain byte count. Units are binary.
  static std::optional<Capacity> parse(std::string_view text);

  bool is_infinite() const { return !bytes_; }
  std::uint64_t value() const { return bytes_.value_or(UINT64_MAX); }
  bool fits(std::uint64_t n) const { return !bytes_ || n <= *bytes_; }
  std::string to_string() const;

  bool operator==(const Capacity&) const = default;

 private:
  Capacity() = default;
  explicit Capacity(std::uint64_t n) : bytes_(n) {}
  std::optional<std::uint64_t> bytes_;
};

// Browser cache with LRU eviction plus the session-scoped temporary cache
// for no-store responses. Single writer; const members are safe to call
// concurrently between mutations.
class CacheStore {
 public:
  explicit CacheStore(Capacity capacity = Capacity::infinite()) : capacity_(capacity) {}

  // Classifies a request and records it in the counters. Hits refresh the
  // entry's recency. The temporary cache is consulted first.
  LookupOutcome lookup(std::string_view url, Timestamp now);

  // Same classification without touching counters or recency.
  LookupOutcome classify(std::string_view url, Timestamp now) const;

  // Stores a fully fetched response. no-store responses go to the temporary
  // cache; responses larger than the capacity are fetched but not kept.
  void admit(const ResourceRecord& record, Timestamp now);

  // A conditional request for an expired entry came back not-modified: the
  // entry is re-stored at `now` with its lifetime recomputed from `record`,
  // and only validator bytes cross the network.
  void revalidated(const ResourceRecord& record, Timestamp now);

  // Drops the temporary cache once the page is open.
  void page_complete() { temp_.clear(); }

  const CacheEntry* find(std::string_view url) const;
  const CacheEntry* find_temp(std::string_view url) const;

  std::size_t size() const { return index_.size(); }
  std::size_t temp_size() const { return temp_.size(); }
  std::uint64_t used_bytes() const { return used_; }
  Capacity capacity() const { return capacity_; }
  const CacheCounters& counters() const { return counters_; }

  // Least recently used first.
  std::vector<const CacheEntry*> entries() const;

 private:
  void erase(std::string_view url);
  void insert(CacheEntry entry);

  Capacity capacity_;
  std::list<CacheEntry> lru_;  // front = least recently used
  std::unordered_map<std::string, std::list<CacheEntry>::iterator> index_;
  std::unordered_map<std::string, CacheEntry> temp_;
  std::uint64_t used_ = 0;
  CacheCounters counters_;
};

}  // namespace specload
