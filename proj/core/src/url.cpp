#include "specload/url.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <vector>

#include "specload/error.hpp"

namespace specload {
namespace {

constexpr std::array<std::string_view, 5> kMultiLabelSuffixes = {
    "co.uk", "com.au", "co.jp", "ac.uk", "com.br"};

bool is_scheme_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.';
}

bool has_forbidden_chars(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return u <= 0x20 || u == 0x7f;
  });
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Returns the length of a valid scheme prefix followed by ':', or 0.
std::size_t scheme_length(std::string_view s) {
  if (s.empty() || !std::isalpha(static_cast<unsigned char>(s[0]))) return 0;
  std::size_t i = 1;
  while (i < s.size() && is_scheme_char(s[i])) ++i;
  return (i < s.size() && s[i] == ':') ? i : 0;
}

std::string_view default_port(std::string_view scheme) {
  if (scheme == "http" || scheme == "ws") return "80";
  if (scheme == "https" || scheme == "wss") return "443";
  if (scheme == "ftp") return "21";
  return {};
}

bool is_ipv4_literal(std::string_view host) {
  int dots = 0;
  for (char c : host) {
    if (c == '.') {
      ++dots;
    } else if (!std::isdigit(static_cast<unsigned char>(c))) {
      return false;
    }
  }
  return dots == 3;
}

// RFC 3986 5.2.4.
std::string remove_dot_segments(std::string_view input) {
  std::string in(input);
  std::string out;
  while (!in.empty()) {
    if (in.starts_with("../")) {
      in.erase(0, 3);
    } else if (in.starts_with("./")) {
      in.erase(0, 2);
    } else if (in.starts_with("/./")) {
      in.erase(0, 2);
    } else if (in == "/.") {
      in = "/";
    } else if (in.starts_with("/../") || in == "/..") {
      in = in.size() == 3 ? std::string("/") : in.substr(3);
      auto pos = out.rfind('/');
      out.erase(pos == std::string::npos ? 0 : pos);
    } else if (in == "." || in == "..") {
      in.clear();
    } else {
      std::size_t start = in[0] == '/' ? 1 : 0;
      auto next = in.find('/', start);
      if (next == std::string::npos) next = in.size();
      out += in.substr(0, next);
      in.erase(0, next);
    }
  }
  return out;
}

struct Reference {
  std::optional<std::string> scheme;
  std::optional<std::string> authority;
  std::string path;
  std::optional<std::string> query;
  std::optional<std::string> fragment;
};

Reference split_reference(std::string_view s) {
  Reference r;
  if (auto n = scheme_length(s); n > 0) {
    r.scheme = std::string(s.substr(0, n));
    s.remove_prefix(n + 1);
  }
  if (auto hash = s.find('#'); hash != std::string_view::npos) {
    r.fragment = std::string(s.substr(hash + 1));
    s = s.substr(0, hash);
  }
  if (auto q = s.find('?'); q != std::string_view::npos) {
    r.query = std::string(s.substr(q + 1));
    s = s.substr(0, q);
  }
  if (s.starts_with("//")) {
    s.remove_prefix(2);
    auto slash = s.find('/');
    r.authority = std::string(s.substr(0, slash));
    s = slash == std::string_view::npos ? std::string_view{} : s.substr(slash);
  }
  r.path = std::string(s);
  return r;
}

std::string merge_paths(const Reference& base, std::string_view ref_path) {
  if (base.authority && base.path.empty()) return "/" + std::string(ref_path);
  auto slash = base.path.rfind('/');
  if (slash == std::string::npos) return std::string(ref_path);
  return base.path.substr(0, slash + 1) + std::string(ref_path);
}

}  // namespace

std::optional<UrlParts> parse_url(std::string_view raw) {
  if (raw.empty() || has_forbidden_chars(raw)) return std::nullopt;
  auto n = scheme_length(raw);
  if (n == 0) return std::nullopt;
  UrlParts parts;
  parts.scheme = std::string(raw.substr(0, n));
  std::string_view rest = raw.substr(n + 1);
  if (!rest.starts_with("//")) return std::nullopt;
  rest.remove_prefix(2);

  auto auth_end = rest.find_first_of("/?#");
  std::string_view authority = rest.substr(0, auth_end);
  rest = auth_end == std::string_view::npos ? std::string_view{} : rest.substr(auth_end);

  if (auto at = authority.rfind('@'); at != std::string_view::npos) {
    parts.userinfo = std::string(authority.substr(0, at));
    authority.remove_prefix(at + 1);
  }
  std::string_view host = authority;
  std::string_view port;
  if (authority.starts_with("[")) {
    auto close = authority.find(']');
    if (close == std::string_view::npos) return std::nullopt;
    host = authority.substr(0, close + 1);
    auto after = authority.substr(close + 1);
    if (!after.empty()) {
      if (after[0] != ':') return std::nullopt;
      port = after.substr(1);
    }
  } else if (auto colon = authority.rfind(':'); colon != std::string_view::npos) {
    host = authority.substr(0, colon);
    port = authority.substr(colon + 1);
  }
  if (host.empty()) return std::nullopt;
  if (!std::all_of(port.begin(), port.end(),
                   [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    return std::nullopt;
  parts.host = std::string(host);
  parts.port = std::string(port);

  if (auto hash = rest.find('#'); hash != std::string_view::npos) {
    parts.fragment = std::string(rest.substr(hash + 1));
    rest = rest.substr(0, hash);
  }
  if (auto q = rest.find('?'); q != std::string_view::npos) {
    parts.query = std::string(rest.substr(q + 1));
    rest = rest.substr(0, q);
  }
  parts.path = std::string(rest);
  return parts;
}

std::string normalize_url(std::string_view raw) {
  auto parts = parse_url(raw);
  if (!parts) throw MalformedUrl(std::string(raw));
  std::string scheme = lower(parts->scheme);
  std::string out = scheme + "://";
  if (!parts->userinfo.empty()) out += parts->userinfo + "@";
  out += lower(parts->host);
  if (!parts->port.empty() && parts->port != default_port(scheme)) out += ":" + parts->port;
  out += parts->path;
  if (parts->query) out += "?" + *parts->query;
  return out;
}

std::string url_host(std::string_view url) {
  auto parts = parse_url(url);
  if (!parts) throw MalformedUrl(std::string(url));
  return lower(parts->host);
}

std::span<const std::string_view> multi_label_suffixes() { return kMultiLabelSuffixes; }

std::string website_key(std::string_view url) {
  std::string host = url_host(url);
  while (!host.empty() && host.back() == '.') host.pop_back();
  if (host.empty()) throw MalformedUrl(std::string(url));
  if (host.front() == '[' || is_ipv4_literal(host)) return host;

  std::vector<std::size_t> dots;
  for (std::size_t i = 0; i < host.size(); ++i)
    if (host[i] == '.') dots.push_back(i);
  if (dots.size() < 2) return host;

  std::string_view last_two = std::string_view(host).substr(dots[dots.size() - 2] + 1);
  bool multi = std::find(kMultiLabelSuffixes.begin(), kMultiLabelSuffixes.end(), last_two) !=
               kMultiLabelSuffixes.end();
  if (!multi) return std::string(last_two);
  if (dots.size() < 3) return host;
  return host.substr(dots[dots.size() - 3] + 1);
}

std::optional<std::string> resolve_url(std::string_view base, std::string_view reference) {
  if (!parse_url(base)) return std::nullopt;
  if (has_forbidden_chars(reference)) return std::nullopt;
  Reference b = split_reference(base);
  Reference r = split_reference(reference);
  Reference t;
  if (r.scheme) {
    t = r;
    t.path = remove_dot_segments(r.path);
  } else {
    if (r.authority) {
      t.authority = r.authority;
      t.path = remove_dot_segments(r.path);
      t.query = r.query;
    } else {
      if (r.path.empty()) {
        t.path = b.path;
        t.query = r.query ? r.query : b.query;
      } else {
        t.path = r.path.starts_with("/") ? remove_dot_segments(r.path)
                                         : remove_dot_segments(merge_paths(b, r.path));
        t.query = r.query;
      }
      t.authority = b.authority;
    }
    t.scheme = b.scheme;
  }
  t.fragment = r.fragment;

  std::string out = *t.scheme + ":";
  if (t.authority) out += "//" + *t.authority;
  out += t.path;
  if (t.query) out += "?" + *t.query;
  if (t.fragment) out += "#" + *t.fragment;
  if (!parse_url(out)) return std::nullopt;
  return out;
}

}  // namespace specload
