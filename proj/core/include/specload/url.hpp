#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace specload {

// Components of an absolute hierarchical URL, kept as they appeared in the
// input (no case folding, no port stripping). `query` and `fragment` are
// engaged when their delimiter was present, even if the component is empty.
struct UrlParts {
  std::string scheme;
  std::string userinfo;
  std::string host;
  std::string port;
  std::string path;
  std::optional<std::string> query;
  std::optional<std::string> fragment;
};

// Splits an absolute `scheme://authority...` URL. Returns nullopt when the
// input has no scheme, no authority, an empty host, a non-numeric port, or
// contains whitespace/control characters.
std::optional<UrlParts> parse_url(std::string_view raw);

// Canonical form used as resource identity everywhere in the toolkit:
// scheme and host lower-cased, default port dropped, fragment stripped,
// path and query preserved byte for byte. Idempotent.
// Throws MalformedUrl.
std::string normalize_url(std::string_view raw);

// Lower-cased host of an absolute URL. Throws MalformedUrl.
std::string url_host(std::string_view url);

// Registrable domain used to key a site: the last two host labels, or the
// last three when the last two form an entry of multi_label_suffixes().
// IP literals and single-label hosts are returned whole.
// Throws MalformedUrl.
std::string website_key(std::string_view url);

// Two-label public suffixes under which registrations happen one level
// deeper (bbc.co.uk, not co.uk). Extend here when a new ccTLD shows up in
// traces.
std::span<const std::string_view> multi_label_suffixes();

// RFC 3986 reference resolution. `base` must be absolute; the result is not
// normalized. Returns nullopt if either side cannot be parsed.
std::optional<std::string> resolve_url(std::string_view base, std::string_view reference);

}  // namespace specload
