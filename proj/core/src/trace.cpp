#include "specload/trace.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <ctime>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "specload/error.hpp"
#include "specload/url.hpp"

namespace specload {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

bool ends_with_ci(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && iequals(s.substr(s.size() - suffix.size()), suffix);
}

json directives_to_json(const CacheDirectives& cc) {
  json j = json::object();
  if (cc.no_store) j["no_store"] = true;
  if (cc.no_cache) j["no_cache"] = true;
  if (cc.max_age) j["max_age"] = *cc.max_age;
  if (cc.expires) j["expires"] = *cc.expires;
  if (cc.has_validator) j["validator"] = true;
  if (cc.last_modified) j["last_modified"] = *cc.last_modified;
  return j;
}

json record_to_json(const ResourceRecord& r) {
  return json{{"url", r.url},
              {"kind", to_string(r.kind)},
              {"size", r.size_bytes},
              {"cc", directives_to_json(r.cache)},
              {"fetched_at", r.fetched_at}};
}

template <typename T>
T require(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(line, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw SchemaError(line, std::string("field '") + key + "' has the wrong type");
  }
}

CacheDirectives directives_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) throw SchemaError(line, "field 'cc' must be an object");
  CacheDirectives cc;
  try {
    cc.no_store = j.value("no_store", false);
    cc.no_cache = j.value("no_cache", false);
    if (j.contains("max_age")) cc.max_age = j.at("max_age").get<std::int64_t>();
    if (j.contains("expires")) cc.expires = j.at("expires").get<Timestamp>();
    cc.has_validator = j.value("validator", false);
    if (j.contains("last_modified")) cc.last_modified = j.at("last_modified").get<Timestamp>();
  } catch (const json::exception&) {
    throw SchemaError(line, "malformed cache directives");
  }
  return cc;
}

ResourceRecord record_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) throw SchemaError(line, "resource record must be an object");
  ResourceRecord r;
  r.url = require<std::string>(j, "url", line);
  auto kind = parse_resource_kind(require<std::string>(j, "kind", line));
  if (!kind) throw SchemaError(line, "unknown resource kind");
  r.kind = *kind;
  auto size = require<std::int64_t>(j, "size", line);
  if (size < 0) throw SchemaError(line, "negative size");
  r.size_bytes = static_cast<std::uint64_t>(size);
  r.cache = j.contains("cc") ? directives_from_json(j.at("cc"), line) : CacheDirectives{};
  r.fetched_at = require<Timestamp>(j, "fetched_at", line);
  return r;
}

PageVisit visit_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) throw SchemaError(line, "record must be an object");
  PageVisit v;
  v.user_id = require<std::string>(j, "user", line);
  v.timestamp = require<Timestamp>(j, "ts", line);
  if (!j.contains("main")) throw SchemaError(line, "missing field 'main'");
  v.main = record_from_json(j.at("main"), line);
  if (j.contains("subs")) {
    const auto& subs = j.at("subs");
    if (!subs.is_array()) throw SchemaError(line, "field 'subs' must be an array");
    for (const auto& s : subs) v.subresources.push_back(record_from_json(s, line));
  }
  if (j.contains("offsets")) {
    v.discovery_offsets_ms = require<std::vector<double>>(j, "offsets", line);
  }
  try {
    canonicalize_visit(v);
  } catch (const SchemaError& e) {
    throw SchemaError(line, e.what());
  } catch (const MalformedUrl& e) {
    throw SchemaError(line, e.what());
  }
  return v;
}

}  // namespace

std::string_view to_string(ResourceKind kind) {
  switch (kind) {
    case ResourceKind::Html: return "html";
    case ResourceKind::Script: return "script";
    case ResourceKind::Stylesheet: return "stylesheet";
    case ResourceKind::Image: return "image";
    case ResourceKind::Other: return "other";
  }
  return "other";
}

std::optional<ResourceKind> parse_resource_kind(std::string_view name) {
  for (auto k : {ResourceKind::Html, ResourceKind::Script, ResourceKind::Stylesheet,
                 ResourceKind::Image, ResourceKind::Other}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

ResourceKind kind_from_mime(std::string_view mime, std::string_view url) {
  std::string m(trim(mime.substr(0, mime.find(';'))));
  std::transform(m.begin(), m.end(), m.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (m == "text/html" || m == "application/xhtml+xml") return ResourceKind::Html;
  if (m == "text/css") return ResourceKind::Stylesheet;
  if (m.find("javascript") != std::string::npos || m.find("ecmascript") != std::string::npos)
    return ResourceKind::Script;
  if (m.starts_with("image/")) return ResourceKind::Image;
  if (!m.empty() && m != "application/octet-stream") return ResourceKind::Other;

  std::string_view path = url.substr(0, url.find_first_of("?#"));
  if (ends_with_ci(path, ".html") || ends_with_ci(path, ".htm")) return ResourceKind::Html;
  if (ends_with_ci(path, ".css")) return ResourceKind::Stylesheet;
  if (ends_with_ci(path, ".js")) return ResourceKind::Script;
  for (auto ext : {".png", ".jpg", ".jpeg", ".gif", ".webp", ".svg", ".ico"})
    if (ends_with_ci(path, ext)) return ResourceKind::Image;
  return ResourceKind::Other;
}

CacheDirectives parse_cache_headers(std::string_view cache_control, std::string_view expires,
                                    bool has_validator, std::string_view last_modified) {
  CacheDirectives cc;
  cc.has_validator = has_validator;
  std::string_view rest = cache_control;
  while (!rest.empty()) {
    auto comma = rest.find(',');
    std::string_view token = trim(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    auto eq = token.find('=');
    std::string_view name = trim(token.substr(0, eq));
    if (iequals(name, "no-store")) {
      cc.no_store = true;
    } else if (iequals(name, "no-cache")) {
      cc.no_cache = true;
    } else if (iequals(name, "max-age") && eq != std::string_view::npos) {
      std::string_view value = trim(token.substr(eq + 1));
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
        value = value.substr(1, value.size() - 2);
      std::int64_t seconds = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), seconds);
      if (ec == std::errc() && ptr == value.data() + value.size() && seconds >= 0)
        cc.max_age = seconds;
      else
        cc.max_age = 0;
    }
  }
  if (!trim(expires).empty()) {
    // Unparseable Expires values ("0", "-1") mean "already expired".
    cc.expires = parse_http_date(expires).value_or(0);
  }
  if (!trim(last_modified).empty()) cc.last_modified = parse_http_date(last_modified);
  return cc;
}

std::optional<Timestamp> parse_http_date(std::string_view text) {
  std::string s(trim(text));
  for (const char* fmt : {"%a, %d %b %Y %H:%M:%S", "%A, %d-%b-%y %H:%M:%S", "%a %b %d %H:%M:%S %Y"}) {
    std::tm tm{};
    const char* end = strptime(s.c_str(), fmt, &tm);
    if (end == nullptr) continue;
    std::string_view tail = trim(end);
    if (!tail.empty() && tail != "GMT" && tail != "UTC") continue;
    return static_cast<Timestamp>(timegm(&tm));
  }
  return std::nullopt;
}

std::string format_http_date(Timestamp t) {
  std::time_t tt = static_cast<std::time_t>(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, "%a, %d %b %Y %H:%M:%S GMT", &tm);
  return buf;
}

std::vector<std::string> PageVisit::subresource_urls() const {
  std::vector<std::string> urls;
  urls.reserve(subresources.size());
  for (const auto& r : subresources) urls.push_back(r.url);
  return urls;
}

void canonicalize_visit(PageVisit& visit) {
  if (visit.main.kind != ResourceKind::Html) throw SchemaError(0, "main resource must be html");
  visit.main.url = normalize_url(visit.main.url);
  std::unordered_set<std::string> seen;
  for (auto& sub : visit.subresources) {
    sub.url = normalize_url(sub.url);
    if (!seen.insert(sub.url).second) throw SchemaError(0, "duplicate subresource " + sub.url);
  }
  if (visit.discovery_offsets_ms.empty()) {
    visit.discovery_offsets_ms.assign(visit.subresources.size(), 0.0);
  } else if (visit.discovery_offsets_ms.size() != visit.subresources.size()) {
    throw SchemaError(0, "offsets length does not match subresources");
  }
  for (double off : visit.discovery_offsets_ms)
    if (!(off >= 0.0)) throw SchemaError(0, "negative discovery offset");
}

void sort_visits(Trace& trace) {
  std::stable_sort(trace.visits.begin(), trace.visits.end(),
                   [](const PageVisit& a, const PageVisit& b) { return a.timestamp < b.timestamp; });
}

std::string visit_to_line(const PageVisit& visit) {
  json subs = json::array();
  for (const auto& s : visit.subresources) subs.push_back(record_to_json(s));
  json j{{"user", visit.user_id},
         {"ts", visit.timestamp},
         {"main", record_to_json(visit.main)},
         {"subs", std::move(subs)},
         {"offsets", visit.discovery_offsets_ms}};
  return j.dump();
}

Trace read_trace(std::istream& in) {
  Trace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SchemaError(line_no, std::string("not a JSON record: ") + e.what());
    }
    trace.visits.push_back(visit_from_json(j, line_no));
  }
  sort_visits(trace);
  return trace;
}

Trace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace " + path.string());
  return read_trace(in);
}

void write_trace(const Trace& trace, std::ostream& out) {
  for (const auto& v : trace.visits) out << visit_to_line(v) << '\n';
}

void save_trace(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write trace " + path.string());
  write_trace(trace, out);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace specload
