#pragma once

#include <cstdint>
#include <string>

#include "specload/trace.hpp"

namespace specload {

struct SynthParams {
  int n_sites = 10;
  // Size of each site's page universe; new visits draw unvisited pages from
  // it and fall back to revisits once it is exhausted.
  int pages_per_site = 5000;
  int subresources_per_page = 20;
  // Expected fraction of a page's subresources that also belong to other
  // pages of the same site.
  double shared_fraction = 0.76;
  // Probability that a visit goes to a page never visited before.
  double new_visit_rate = 0.75;
  // Per-day probability that a subresource URL is replaced by a new one.
  double churn_rate_per_day = 0.02;
  int visits = 5000;
  std::uint64_t seed = 1;

  // Span of the generated trace; visits are spread uniformly over it.
  int duration_days = 365;
  // Fraction of resources that are uncacheable or expire within an hour
  // (no-cache, no-store, or max-age <= 3600).
  double short_lived_fraction = 0.6;
  // Popularity skew across sites (Zipf exponent; 0 = uniform).
  double site_skew = 0.8;
  std::string user_id = "u0";
  Timestamp start = 1293840000;  // 2011-01-01T00:00:00Z
};

// Throws InvalidParams for out-of-range fields.
void validate(const SynthParams& params);

// Deterministic for a fixed parameter set, including the seed.
Trace generate_synthetic(const SynthParams& params);

}  // namespace specload
