#include "specload/live/html_extract.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "specload/url.hpp"

namespace specload {

namespace {

struct Tag {
  std::string name;
  std::map<std::string, std::string> attrs;  // first occurrence of each name
};

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), lower);
  return out;
}

// Case-insensitive search for `needle` (already lower case) from `pos`.
std::size_t find_ci(std::string_view hay, std::string_view needle, std::size_t pos) {
  for (; pos + needle.size() <= hay.size(); ++pos) {
    bool match = true;
    for (std::size_t i = 0; i < needle.size() && match; ++i) match = lower(hay[pos + i]) == needle[i];
    if (match) return pos;
  }
  return std::string_view::npos;
}

// Parses the tag starting after '<' at `pos`; returns the position after '>'.
std::size_t parse_tag(std::string_view html, std::size_t pos, Tag& tag) {
  std::size_t i = pos;
  while (i < html.size() && !is_space(html[i]) && html[i] != '>' && html[i] != '/') ++i;
  tag.name = to_lower(html.substr(pos, i - pos));
  while (i < html.size() && html[i] != '>') {
    if (is_space(html[i]) || html[i] == '/') {
      ++i;
      continue;
    }
    std::size_t name_start = i;
    while (i < html.size() && !is_space(html[i]) && html[i] != '=' && html[i] != '>' && html[i] != '/') ++i;
    std::string name = to_lower(html.substr(name_start, i - name_start));
    while (i < html.size() && is_space(html[i])) ++i;
    std::string value;
    if (i < html.size() && html[i] == '=') {
      ++i;
      while (i < html.size() && is_space(html[i])) ++i;
      if (i < html.size() && (html[i] == '"' || html[i] == '\'')) {
        char quote = html[i++];
        std::size_t end = html.find(quote, i);
        if (end == std::string_view::npos) end = html.size();
        value = std::string(html.substr(i, end - i));
        i = std::min(end + 1, html.size());
      } else {
        std::size_t start = i;
        while (i < html.size() && !is_space(html[i]) && html[i] != '>') ++i;
        value = std::string(html.substr(start, i - start));
      }
    }
    if (!name.empty()) tag.attrs.emplace(std::move(name), std::move(value));
  }
  return std::min(i + 1, html.size());
}

std::string trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

bool has_token(std::string_view list, std::string_view token) {
  std::string lowered = to_lower(list);
  std::size_t i = 0;
  while (i < lowered.size()) {
    while (i < lowered.size() && is_space(lowered[i])) ++i;
    std::size_t start = i;
    while (i < lowered.size() && !is_space(lowered[i])) ++i;
    if (std::string_view(lowered).substr(start, i - start) == token) return true;
  }
  return false;
}

std::vector<Tag> scan_tags(std::string_view html) {
  static const std::set<std::string> raw_text = {"script", "style", "textarea", "title"};
  std::vector<Tag> tags;
  std::size_t i = 0;
  while ((i = html.find('<', i)) != std::string_view::npos) {
    if (html.substr(i, 4) == "<!--") {
      std::size_t end = html.find("-->", i + 4);
      if (end == std::string_view::npos) break;
      i = end + 3;
      continue;
    }
    if (i + 1 >= html.size() || !std::isalpha(static_cast<unsigned char>(html[i + 1]))) {
      ++i;
      continue;
    }
    Tag tag;
    i = parse_tag(html, i + 1, tag);
    if (raw_text.contains(tag.name)) {
      std::size_t close = find_ci(html, "</" + tag.name, i);
      i = close == std::string_view::npos ? html.size() : close;
    }
    tags.push_back(std::move(tag));
  }
  return tags;
}

}  // namespace

std::vector<ExtractedResource> extract_subresources(std::string_view html, std::string_view base_url) {
  const std::vector<Tag> tags = scan_tags(html);

  std::string base(base_url);
  for (const auto& tag : tags) {
    if (tag.name != "base") continue;
    auto href = tag.attrs.find("href");
    if (href == tag.attrs.end()) continue;
    if (auto resolved = resolve_url(base_url, trim(href->second))) base = *resolved;
    break;
  }

  std::vector<ExtractedResource> out;
  std::set<std::string> seen;
  auto add = [&](const std::string& ref, ResourceKind kind) {
    std::string r = trim(ref);
    if (r.empty()) return;
    auto resolved = resolve_url(base, r);
    if (!resolved) return;
    auto parts = parse_url(*resolved);
    if (!parts || (parts->scheme != "http" && parts->scheme != "https")) return;
    std::string url = normalize_url(*resolved);
    if (seen.insert(url).second) out.push_back({std::move(url), kind});
  };

  for (const auto& tag : tags) {
    auto attr = [&](const char* name) -> const std::string* {
      auto it = tag.attrs.find(name);
      return it == tag.attrs.end() ? nullptr : &it->second;
    };
    if (tag.name == "script") {
      if (const auto* src = attr("src")) add(*src, ResourceKind::Script);
    } else if (tag.name == "link") {
      const auto* rel = attr("rel");
      const auto* href = attr("href");
      if (rel && href && has_token(*rel, "stylesheet")) add(*href, ResourceKind::Stylesheet);
    } else if (tag.name == "img") {
      if (const auto* src = attr("src")) add(*src, ResourceKind::Image);
    }
  }
  return out;
}

}  // namespace specload
