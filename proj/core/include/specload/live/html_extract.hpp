#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "specload/trace.hpp"

namespace specload {

struct ExtractedResource {
  std::string url;
  ResourceKind kind = ResourceKind::Other;

  bool operator==(const ExtractedResource&) const = default;
};

// Tolerant tag scan in document order: script src, stylesheet links and img
// src. URLs resolve against a <base href> when present, else base_url.
// Only http(s) results are kept, first occurrence wins. Never throws on
// malformed markup.
std::vector<ExtractedResource> extract_subresources(std::string_view html, std::string_view base_url);

}  // namespace specload
