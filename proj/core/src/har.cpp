#include "specload/har.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "specload/error.hpp"
#include "specload/url.hpp"

namespace specload {

using nlohmann::json;

namespace {

struct Entry {
  std::string url;
  std::string mime;
  double started = 0;  // seconds
  double time_ms = 0;
  std::uint64_t size = 0;
  CacheDirectives cache;
};

std::string header_value(const json& headers, std::string_view name) {
  if (!headers.is_array()) return {};
  for (const auto& h : headers) {
    auto n = h.value("name", std::string{});
    if (n.size() != name.size()) continue;
    bool same = true;
    for (std::size_t i = 0; i < n.size(); ++i)
      same &= std::tolower(static_cast<unsigned char>(n[i])) ==
              std::tolower(static_cast<unsigned char>(name[i]));
    if (same) return h.value("value", std::string{});
  }
  return {};
}

std::uint64_t entry_size(const json& response) {
  if (auto c = response.find("content"); c != response.end() && c->is_object()) {
    auto size = c->value("size", std::int64_t{-1});
    if (size >= 0) return static_cast<std::uint64_t>(size);
  }
  auto body = response.value("bodySize", std::int64_t{-1});
  return body >= 0 ? static_cast<std::uint64_t>(body) : 0;
}

ResourceRecord to_record(const Entry& e, ResourceKind kind) {
  ResourceRecord r;
  r.url = e.url;
  r.kind = kind;
  r.size_bytes = e.size;
  r.cache = e.cache;
  r.fetched_at = static_cast<Timestamp>(std::floor(e.started));
  return r;
}

}  // namespace

std::optional<double> parse_iso8601(std::string_view text) {
  std::string s(text);
  int y, mo, d, h, mi;
  double sec;
  int consumed = 0;
  if (std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%lf%n", &y, &mo, &d, &h, &mi, &sec, &consumed) != 6)
    return std::nullopt;
  std::tm tm{};
  tm.tm_year = y - 1900;
  tm.tm_mon = mo - 1;
  tm.tm_mday = d;
  tm.tm_hour = h;
  tm.tm_min = mi;
  tm.tm_sec = 0;
  double t = static_cast<double>(timegm(&tm)) + sec;
  std::string_view zone = std::string_view(s).substr(static_cast<std::size_t>(consumed));
  if (zone.empty() || zone == "Z") return t;
  int zh = 0, zm = 0;
  char sign = zone[0];
  if ((sign != '+' && sign != '-') ||
      std::sscanf(std::string(zone.substr(1)).c_str(), "%d:%d", &zh, &zm) < 1)
    return std::nullopt;
  double offset = zh * 3600.0 + zm * 60.0;
  return sign == '+' ? t - offset : t + offset;
}

HarImport parse_har(std::string_view document, std::string_view user_id) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw SchemaError(0, std::string("HAR is not JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("log") || !doc["log"].is_object())
    throw SchemaError(0, "HAR document lacks a 'log' object");
  const json& log = doc["log"];
  if (!log.contains("entries") || !log["entries"].is_array())
    throw SchemaError(0, "HAR log lacks an 'entries' array");

  HarImport out;
  std::vector<std::pair<std::string, double>> pages;
  if (auto p = log.find("pages"); p != log.end() && p->is_array()) {
    for (const auto& page : *p) {
      auto id = page.value("id", std::string{});
      auto started = parse_iso8601(page.value("startedDateTime", std::string{}));
      pages.emplace_back(id, started.value_or(0.0));
    }
  }

  std::map<std::string, std::vector<Entry>> by_page;
  for (const auto& e : log["entries"]) {
    auto ref = e.value("pageref", std::string{});
    const json& request = e.contains("request") ? e["request"] : json::object();
    const json& response = e.contains("response") ? e["response"] : json::object();
    std::string url;
    try {
      url = normalize_url(request.value("url", std::string{}));
    } catch (const MalformedUrl&) {
      ++out.dropped_entries;
      continue;
    }
    if (ref.empty()) {
      ++out.dropped_entries;
      continue;
    }
    Entry entry;
    entry.url = std::move(url);
    entry.started = parse_iso8601(e.value("startedDateTime", std::string{})).value_or(0.0);
    entry.time_ms = e.value("time", 0.0);
    entry.size = entry_size(response);
    const json& headers = response.contains("headers") ? response["headers"] : json::array();
    if (auto c = response.find("content"); c != response.end() && c->is_object())
      entry.mime = c->value("mimeType", std::string{});
    if (entry.mime.empty()) entry.mime = header_value(headers, "content-type");
    auto last_modified = header_value(headers, "last-modified");
    bool validator = !header_value(headers, "etag").empty() || !last_modified.empty();
    entry.cache = parse_cache_headers(header_value(headers, "cache-control"),
                                      header_value(headers, "expires"), validator, last_modified);
    by_page[ref].push_back(std::move(entry));
  }

  for (const auto& [id, started] : pages) {
    auto it = by_page.find(id);
    if (it == by_page.end()) {
      ++out.skipped_pages;
      continue;
    }
    auto& entries = it->second;
    auto main_it = std::find_if(entries.begin(), entries.end(), [](const Entry& e) {
      return kind_from_mime(e.mime, e.url) == ResourceKind::Html;
    });
    if (main_it == entries.end()) {
      ++out.skipped_pages;
      continue;
    }
    PageVisit visit;
    visit.user_id = std::string(user_id);
    visit.timestamp = static_cast<Timestamp>(std::floor(started > 0 ? started : main_it->started));
    visit.main = to_record(*main_it, ResourceKind::Html);
    double parsed_at = main_it->started + main_it->time_ms / 1000.0;
    std::unordered_set<std::string> seen{visit.main.url};
    for (auto e = entries.begin(); e != entries.end(); ++e) {
      if (e == main_it || !seen.insert(e->url).second) continue;
      visit.subresources.push_back(to_record(*e, kind_from_mime(e->mime, e->url)));
      visit.discovery_offsets_ms.push_back(std::max(0.0, (e->started - parsed_at) * 1000.0));
    }
    canonicalize_visit(visit);
    out.visits.push_back(std::move(visit));
  }
  for (const auto& [ref, entries] : by_page) {
    bool known = std::any_of(pages.begin(), pages.end(),
                             [&](const auto& p) { return p.first == ref; });
    if (!known) out.dropped_entries += entries.size();
  }
  return out;
}

HarImport import_har(const std::filesystem::path& path, std::string_view user_id) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open HAR " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_har(buf.str(), user_id);
}

}  // namespace specload
