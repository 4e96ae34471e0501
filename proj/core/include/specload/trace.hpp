#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace specload {

// Wall-clock instants are UTC seconds since the Unix epoch.
using Timestamp = std::int64_t;

constexpr Timestamp kSecondsPerDay = 86400;

enum class ResourceKind { Html, Script, Stylesheet, Image, Other };

std::string_view to_string(ResourceKind kind);
std::optional<ResourceKind> parse_resource_kind(std::string_view name);

// Best guess from a MIME type, falling back to the URL's extension.
ResourceKind kind_from_mime(std::string_view mime, std::string_view url);

struct CacheDirectives {
  bool no_store = false;
  bool no_cache = false;
  std::optional<std::int64_t> max_age;
  std::optional<Timestamp> expires;
  bool has_validator = false;
  // Not a directive, but the input to the heuristic freshness rule.
  std::optional<Timestamp> last_modified;

  bool operator==(const CacheDirectives&) const = default;
};

// Builds directives from raw response header values. Empty strings mean the
// header was absent.
CacheDirectives parse_cache_headers(std::string_view cache_control, std::string_view expires,
                                    bool has_validator, std::string_view last_modified = {});

// RFC 7231 IMF-fixdate ("Sun, 06 Nov 1994 08:49:37 GMT"); also accepts the
// obsolete RFC 850 and asctime forms.
std::optional<Timestamp> parse_http_date(std::string_view text);
std::string format_http_date(Timestamp t);

struct ResourceRecord {
  std::string url;
  ResourceKind kind = ResourceKind::Other;
  std::uint64_t size_bytes = 0;
  CacheDirectives cache;
  Timestamp fetched_at = 0;

  bool operator==(const ResourceRecord&) const = default;
};

struct PageVisit {
  std::string user_id;
  Timestamp timestamp = 0;
  ResourceRecord main;
  std::vector<ResourceRecord> subresources;
  // Milliseconds after the main resource is parsed at which each
  // subresource is discovered; same length as `subresources`.
  std::vector<double> discovery_offsets_ms;

  std::vector<std::string> subresource_urls() const;
  bool operator==(const PageVisit&) const = default;
};

struct Trace {
  std::vector<PageVisit> visits;

  bool operator==(const Trace&) const = default;
};

// Normalizes every URL, fills missing discovery offsets with zeros and
// checks the visit invariants. Throws SchemaError (line 0) or MalformedUrl.
void canonicalize_visit(PageVisit& visit);

// Stable sort by timestamp, preserving file order among equal timestamps.
void sort_visits(Trace& trace);

// Newline-delimited records, one PageVisit per line.
Trace read_trace(std::istream& in);
Trace load_trace(const std::filesystem::path& path);
void write_trace(const Trace& trace, std::ostream& out);
void save_trace(const Trace& trace, const std::filesystem::path& path);

std::string visit_to_line(const PageVisit& visit);

}  // namespace specload
