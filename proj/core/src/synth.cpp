#include "specload/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rng.hpp"
#include "specload/error.hpp"

namespace specload {
namespace {

using detail::Rng;

struct Slot {
  std::string stem;  // URL without the version query
  ResourceKind kind = ResourceKind::Other;
  std::uint64_t size = 0;
  CacheDirectives cache;  // template; expires/last_modified are relative
  std::int64_t expires_in = -1;
  std::int64_t modified_ago = -1;
  double offset_ms = 0;
  int version = 0;

  std::string url() const { return stem + "?v=" + std::to_string(version); }
};

struct Page {
  std::string url;
  Slot main;
  int shared_count = 0;
  std::vector<Slot> unique;
};

struct Site {
  std::string domain;
  std::vector<Slot> shared;
  std::vector<Page> pages;  // created lazily, in visit order
};

std::string_view extension(ResourceKind kind) {
  switch (kind) {
    case ResourceKind::Script: return ".js";
    case ResourceKind::Stylesheet: return ".css";
    case ResourceKind::Image: return ".png";
    case ResourceKind::Html: return ".html";
    case ResourceKind::Other: return ".dat";
  }
  return ".dat";
}

ResourceKind draw_kind(Rng& rng) {
  double u = rng.uniform();
  if (u < 0.30) return ResourceKind::Script;
  if (u < 0.45) return ResourceKind::Stylesheet;
  if (u < 0.95) return ResourceKind::Image;
  return ResourceKind::Other;
}

std::uint64_t draw_size(Rng& rng, ResourceKind kind) {
  switch (kind) {
    case ResourceKind::Script: return static_cast<std::uint64_t>(rng.range(2'000, 40'000));
    case ResourceKind::Stylesheet: return static_cast<std::uint64_t>(rng.range(1'000, 25'000));
    case ResourceKind::Image: return static_cast<std::uint64_t>(rng.range(500, 40'000));
    case ResourceKind::Html: return static_cast<std::uint64_t>(rng.range(5'000, 40'000));
    case ResourceKind::Other: return static_cast<std::uint64_t>(rng.range(500, 10'000));
  }
  return 0;
}

// Header profile of a response: short-lived (uncacheable or <= 1 h) with
// probability `short_lived`, long-lived otherwise.
void draw_cache_profile(Rng& rng, double short_lived, Slot& slot) {
  slot.cache = {};
  slot.expires_in = -1;
  slot.modified_ago = -1;
  if (rng.bernoulli(short_lived)) {
    double u = rng.uniform();
    if (u < 0.1) {
      slot.cache.no_store = true;
    } else if (u < 0.55) {
      slot.cache.no_cache = true;
      slot.cache.has_validator = true;
    } else {
      slot.cache.max_age = rng.range(60, 3600);
      slot.cache.has_validator = true;
    }
    return;
  }
  slot.cache.has_validator = true;
  double u = rng.uniform();
  if (u < 0.5) {
    slot.cache.max_age = rng.range(kSecondsPerDay, 30 * kSecondsPerDay);
  } else if (u < 0.7) {
    slot.expires_in = rng.range(kSecondsPerDay, 30 * kSecondsPerDay);
  } else {
    slot.modified_ago = rng.range(10 * kSecondsPerDay, 100 * kSecondsPerDay);
  }
}

Slot make_slot(Rng& rng, const SynthParams& p, const std::string& stem_prefix, ResourceKind kind) {
  Slot slot;
  slot.kind = kind;
  // Path depth varies so URL length carries some signal.
  std::string dirs;
  for (std::int64_t d = rng.range(0, 2); d > 0; --d) dirs += "/d" + std::to_string(rng.below(100));
  slot.stem = stem_prefix + dirs + extension(kind).data();
  slot.size = draw_size(rng, kind);
  draw_cache_profile(rng, kind == ResourceKind::Html ? std::max(p.short_lived_fraction, 0.9)
                                                     : p.short_lived_fraction,
                     slot);
  if (kind != ResourceKind::Html && rng.bernoulli(0.1)) slot.offset_ms = static_cast<double>(rng.range(50, 500));
  return slot;
}

void churn(Rng& rng, const SynthParams& p, Slot& slot) {
  if (!rng.bernoulli(p.churn_rate_per_day)) return;
  ++slot.version;
  slot.size = draw_size(rng, slot.kind);
}

ResourceRecord materialize(const Slot& slot, Timestamp now, bool versioned) {
  ResourceRecord r;
  r.url = versioned ? slot.url() : slot.stem;
  r.kind = slot.kind;
  r.size_bytes = slot.size;
  r.cache = slot.cache;
  if (slot.expires_in >= 0) r.cache.expires = now + slot.expires_in;
  if (slot.modified_ago >= 0) r.cache.last_modified = now - slot.modified_ago;
  r.fetched_at = now;
  return r;
}

int kind_order(ResourceKind k) {
  switch (k) {
    case ResourceKind::Stylesheet: return 0;
    case ResourceKind::Script: return 1;
    case ResourceKind::Image: return 2;
    default: return 3;
  }
}

}  // namespace

void validate(const SynthParams& p) {
  auto fraction = [](double f) { return f >= 0.0 && f <= 1.0; };
  if (p.n_sites < 1 || p.pages_per_site < 1 || p.subresources_per_page < 1 || p.visits < 1 ||
      p.duration_days < 1)
    throw InvalidParams("counts must be >= 1");
  if (!fraction(p.shared_fraction) || !fraction(p.new_visit_rate) ||
      !fraction(p.churn_rate_per_day) || !fraction(p.short_lived_fraction))
    throw InvalidParams("fractions must lie in [0, 1]");
  if (!(p.site_skew >= 0.0)) throw InvalidParams("site_skew must be >= 0");
}

Trace generate_synthetic(const SynthParams& p) {
  validate(p);
  Rng rng(p.seed);
  const int k = p.subresources_per_page;
  const double shared_expect = p.shared_fraction * k;
  const int pool = static_cast<int>(std::ceil(shared_expect));

  std::vector<Site> sites(static_cast<std::size_t>(p.n_sites));
  std::vector<double> cumulative;
  double total_weight = 0;
  for (int s = 0; s < p.n_sites; ++s) {
    Site& site = sites[static_cast<std::size_t>(s)];
    site.domain = "site" + std::to_string(s) + ".com";
    for (int j = 0; j < pool; ++j) {
      site.shared.push_back(make_slot(rng, p, "http://static." + site.domain + "/shared/r" + std::to_string(j),
                                      draw_kind(rng)));
    }
    total_weight += 1.0 / std::pow(static_cast<double>(s + 1), p.site_skew);
    cumulative.push_back(total_weight);
  }

  std::vector<Timestamp> times;
  times.reserve(static_cast<std::size_t>(p.visits));
  const std::int64_t span = static_cast<std::int64_t>(p.duration_days) * kSecondsPerDay;
  for (int i = 0; i < p.visits; ++i) times.push_back(p.start + rng.range(0, span - 1));
  std::sort(times.begin(), times.end());

  Trace trace;
  trace.visits.reserve(times.size());
  std::int64_t day = 0;
  for (Timestamp now : times) {
    for (std::int64_t d = (now - p.start) / kSecondsPerDay; day < d; ++day) {
      for (auto& site : sites) {
        for (auto& slot : site.shared) churn(rng, p, slot);
        for (auto& page : site.pages)
          for (auto& slot : page.unique) churn(rng, p, slot);
      }
    }

    double pick = rng.uniform() * total_weight;
    auto site_idx = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
    Site& site = sites[std::min(site_idx, sites.size() - 1)];

    bool want_new = rng.bernoulli(p.new_visit_rate);
    bool can_new = static_cast<int>(site.pages.size()) < p.pages_per_site;
    std::size_t page_idx;
    if (site.pages.empty() || (want_new && can_new)) {
      Page page;
      auto n = site.pages.size();
      page.url = "http://www." + site.domain + "/s" + std::to_string(n % 7) + "/page" +
                 std::to_string(n) + ".html";
      page.main = make_slot(rng, p, page.url, ResourceKind::Html);
      page.main.stem = page.url;
      page.shared_count = static_cast<int>(std::floor(shared_expect));
      if (page.shared_count < pool && rng.bernoulli(shared_expect - std::floor(shared_expect)))
        ++page.shared_count;
      for (int u = page.shared_count; u < k; ++u) {
        page.unique.push_back(make_slot(
            rng, p,
            "http://static." + site.domain + "/p" + std::to_string(n) + "/u" + std::to_string(u),
            draw_kind(rng)));
      }
      site.pages.push_back(std::move(page));
      page_idx = site.pages.size() - 1;
    } else {
      page_idx = rng.below(site.pages.size());
    }
    const Page& page = site.pages[page_idx];

    std::vector<const Slot*> slots;
    for (int j = 0; j < page.shared_count; ++j) slots.push_back(&site.shared[static_cast<std::size_t>(j)]);
    for (const auto& u : page.unique) slots.push_back(&u);
    std::stable_sort(slots.begin(), slots.end(), [](const Slot* a, const Slot* b) {
      return kind_order(a->kind) < kind_order(b->kind);
    });

    PageVisit visit;
    visit.user_id = p.user_id;
    visit.timestamp = now;
    visit.main = materialize(page.main, now, false);
    for (const Slot* slot : slots) {
      visit.subresources.push_back(materialize(*slot, now, true));
      visit.discovery_offsets_ms.push_back(slot->offset_ms);
    }
    trace.visits.push_back(std::move(visit));
  }
  return trace;
}

}  // namespace specload
