#include "specload/http_cache.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace specload {

std::optional<std::int64_t> freshness_lifetime(const CacheDirectives& d, Timestamp fetched_at,
                                               std::optional<Timestamp> last_modified) {
  if (d.no_cache || d.no_store) return std::nullopt;
  if (d.max_age) return *d.max_age;
  if (d.expires) return std::max<std::int64_t>(0, *d.expires - fetched_at);
  if (last_modified) return std::max<std::int64_t>(0, (fetched_at - *last_modified) / 10);
  return std::nullopt;
}

std::string_view to_string(LookupOutcome outcome) {
  switch (outcome) {
    case LookupOutcome::FreshHit: return "fresh";
    case LookupOutcome::ExpiredRevalidate: return "revalidate";
    case LookupOutcome::Miss: return "miss";
  }
  return "miss";
}

std::optional<Capacity> Capacity::parse(std::string_view text) {
  std::string t;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c)))
      t += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (t == "INF" || t == "INFINITE" || t == "UNLIMITED") return infinite();
  std::uint64_t n = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), n);
  if (ec != std::errc() || ptr == t.data()) return std::nullopt;
  std::string_view unit(ptr, static_cast<std::size_t>(t.data() + t.size() - ptr));
  std::uint64_t scale = 0;
  if (unit.empty() || unit == "B") scale = 1;
  else if (unit == "KB" || unit == "K") scale = 1ull << 10;
  else if (unit == "MB" || unit == "M") scale = 1ull << 20;
  else if (unit == "GB" || unit == "G") scale = 1ull << 30;
  else return std::nullopt;
  return bytes(n * scale);
}

std::string Capacity::to_string() const {
  if (!bytes_) return "inf";
  if (*bytes_ % (1ull << 20) == 0) return std::to_string(*bytes_ >> 20) + "MB";
  if (*bytes_ % (1ull << 10) == 0) return std::to_string(*bytes_ >> 10) + "KB";
  return std::to_string(*bytes_);
}

LookupOutcome CacheStore::classify(std::string_view url, Timestamp now) const {
  if (find_temp(url)) return LookupOutcome::FreshHit;
  const CacheEntry* e = find(url);
  if (!e) return LookupOutcome::Miss;
  return e->fresh_at(now) ? LookupOutcome::FreshHit : LookupOutcome::ExpiredRevalidate;
}

LookupOutcome CacheStore::lookup(std::string_view url, Timestamp now) {
  LookupOutcome outcome = classify(url, now);
  switch (outcome) {
    case LookupOutcome::FreshHit: ++counters_.fresh_hits; break;
    case LookupOutcome::ExpiredRevalidate: ++counters_.revalidations; break;
    case LookupOutcome::Miss: ++counters_.misses; break;
  }
  if (auto t = temp_.find(std::string(url)); t != temp_.end()) {
    t->second.last_access = now;
  } else if (auto it = index_.find(std::string(url)); it != index_.end()) {
    it->second->last_access = now;
    lru_.splice(lru_.end(), lru_, it->second);
  }
  return outcome;
}

void CacheStore::admit(const ResourceRecord& record, Timestamp now) {
  counters_.bytes_fetched += record.size_bytes;
  CacheEntry entry{record.url,
                   record.size_bytes,
                   now,
                   freshness_lifetime(record.cache, record.fetched_at),
                   record.cache.has_validator,
                   now};
  if (record.cache.no_store) {
    erase(record.url);
    temp_[record.url] = std::move(entry);
    return;
  }
  insert(std::move(entry));
}

void CacheStore::revalidated(const ResourceRecord& record, Timestamp now) {
  auto it = index_.find(record.url);
  if (record.cache.no_store || it == index_.end()) {
    admit(record, now);
    return;
  }
  CacheEntry& e = *it->second;
  counters_.bytes_saved_by_304 += e.size_bytes;
  e.stored_at = now;
  e.last_access = now;
  e.freshness_lifetime = freshness_lifetime(record.cache, record.fetched_at);
  e.has_validator = record.cache.has_validator;
  lru_.splice(lru_.end(), lru_, it->second);
}

const CacheEntry* CacheStore::find(std::string_view url) const {
  auto it = index_.find(std::string(url));
  return it == index_.end() ? nullptr : &*it->second;
}

const CacheEntry* CacheStore::find_temp(std::string_view url) const {
  auto it = temp_.find(std::string(url));
  return it == temp_.end() ? nullptr : &it->second;
}

std::vector<const CacheEntry*> CacheStore::entries() const {
  std::vector<const CacheEntry*> out;
  out.reserve(lru_.size());
  for (const auto& e : lru_) out.push_back(&e);
  return out;
}

void CacheStore::erase(std::string_view url) {
  auto it = index_.find(std::string(url));
  if (it == index_.end()) return;
  used_ -= it->second->size_bytes;
  lru_.erase(it->second);
  index_.erase(it);
}

void CacheStore::insert(CacheEntry entry) {
  erase(entry.url);
  if (!capacity_.fits(entry.size_bytes)) return;
  while (!lru_.empty() && !capacity_.fits(used_ + entry.size_bytes)) {
    used_ -= lru_.front().size_bytes;
    index_.erase(lru_.front().url);
    lru_.pop_front();
  }
  used_ += entry.size_bytes;
  std::string key = entry.url;
  lru_.push_back(std::move(entry));
  index_[std::move(key)] = std::prev(lru_.end());
}

}  // namespace specload
