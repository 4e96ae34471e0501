#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "specload/trace.hpp"

namespace specload {

struct HarImport {
  std::vector<PageVisit> visits;
  // Entries without a usable page reference or URL.
  std::size_t dropped_entries = 0;
  // Pages that had no HTML entry to serve as the main resource.
  std::size_t skipped_pages = 0;
};

// HAR 1.2: one visit per page, the page's first HTML entry is the main
// resource. Throws SchemaError when the document is not HAR.
HarImport parse_har(std::string_view document, std::string_view user_id = "har");
HarImport import_har(const std::filesystem::path& path, std::string_view user_id = "har");

// ISO 8601 date-time to fractional UTC seconds.
std::optional<double> parse_iso8601(std::string_view text);

}  // namespace specload
