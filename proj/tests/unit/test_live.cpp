#include <doctest.h>

#include <algorithm>
#include <httplib.h>

#include "specload/error.hpp"
#include "specload/live/fetcher.hpp"
#include "specload/live/fixture_server.hpp"
#include "specload/live/html_extract.hpp"
#include "specload/load_sim.hpp"

using namespace specload;

namespace {

FixtureSpec site_spec(int delay_ms) {
  FixtureSpec spec = FixtureSpec::load(SPECLOAD_FIXTURES "/site.json");
  spec.delay_ms = delay_ms;
  return spec;
}

const ResourceLoad* find_load(const LoadReport& r, const std::string& url) {
  for (const auto& l : r.resources)
    if (l.url == url) return &l;
  return nullptr;
}

}  // namespace

TEST_CASE("extract examples") {
  CHECK(extract_subresources("<img src=\"/a.png\">", "http://x.com/p/") ==
        std::vector<ExtractedResource>{{"http://x.com/a.png", ResourceKind::Image}});
  CHECK(extract_subresources("<script src=b.js></script><link rel=stylesheet href=c.css>", "http://x.com/p/") ==
        std::vector<ExtractedResource>{{"http://x.com/p/b.js", ResourceKind::Script},
                                       {"http://x.com/p/c.css", ResourceKind::Stylesheet}});
  CHECK(extract_subresources("<img src='i.png'><IMG SRC='i.png'>", "http://x.com/").size() == 1);
}

TEST_CASE("extraction is tolerant") {
  const char* html =
      "<!-- <img src='/commented.png'> -->"
      "<base href='http://cdn.x.com/assets/'>"
      "<script>var s = '<img src=\"/inline.png\">';</script>"
      "<link rel='icon' href='/favicon.ico'>"
      "<link href='main.css' rel='preload stylesheet'>"
      "<img src='data:image/png;base64,AAAA'>"
      "<img src=\"mailto:a@b\">"
      "<img alt=x>"
      "<img src='https://other.org/x.png'"
      "<script src=\"//proto.rel/x.js\"></script>";
  auto r = extract_subresources(html, "http://www.x.com/dir/page");
  std::vector<std::string> urls;
  for (const auto& e : r) urls.push_back(e.url);
  CHECK(std::find(urls.begin(), urls.end(), "http://cdn.x.com/assets/main.css") != urls.end());
  CHECK(std::find(urls.begin(), urls.end(), "http://www.x.com/commented.png") == urls.end());
  CHECK(std::find(urls.begin(), urls.end(), "http://cdn.x.com/inline.png") == urls.end());
  for (const auto& u : urls) CHECK((u.starts_with("http://") || u.starts_with("https://")));
  CHECK(extract_subresources("", "http://x.com/").empty());
  CHECK(extract_subresources("<<<img src=", "http://x.com/").empty());
}

TEST_CASE("fixture spec validation") {
  CHECK_THROWS_AS(FixtureSpec::parse("not json"), BadSpec);
  CHECK_THROWS_AS(FixtureSpec::parse(R"({"pages": [{"path": "no-slash"}]})"), BadSpec);
  CHECK_THROWS_AS(FixtureSpec::parse(R"({"pages": [{"path": "/p", "subresources": ["/missing.js"]}]})"), BadSpec);
  CHECK_THROWS_AS(FixtureSpec::parse(R"({"resources": [{"path": "/a"}, {"path": "/a"}]})"), BadSpec);
  CHECK_THROWS_AS(FixtureSpec::parse(R"({"resources": [{"path": "/a", "kind": "video"}]})"), BadSpec);
  CHECK_THROWS_AS(FixtureSpec::parse(R"({"delay_ms": -1})"), BadSpec);
  CHECK_THROWS_AS(FixtureSpec::load("/nonexistent/spec.json"), IoError);
  FixtureSpec ok = FixtureSpec::parse(R"({"pages": [{"path": "/p", "subresources": ["http://elsewhere/x.js"]}]})");
  CHECK(ok.pages.size() == 1);
}

TEST_CASE("fixture server serves validators and 304s") {
  FixtureServer server(site_spec(0));
  httplib::Client client(server.base_url());
  auto first = client.Get("/app.js");
  REQUIRE(first);
  CHECK(first->status == 200);
  CHECK(first->body.size() == 12000);
  std::string etag = first->get_header_value("ETag");
  REQUIRE_FALSE(etag.empty());
  auto second = client.Get("/app.js", {{"If-None-Match", etag}});
  REQUIRE(second);
  CHECK(second->status == 304);
  CHECK(second->body.empty());
  CHECK(server.not_modified() == 1);
  auto missing = client.Get("/nope");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  auto ad = client.Get("/ads.js");
  CHECK_FALSE(ad->has_header("ETag"));

  CHECK_THROWS_AS(FixtureServer(site_spec(0), server.port()), PortInUse);
  CHECK_THROWS_AS(server.set_page_subresources("/index.html", {"/unknown"}), BadSpec);
  CHECK(server.page_html("/index.html").find("/app.js") != std::string::npos);

  auto mutate = client.Post("/__mutate", R"({"page": "/index.html", "subresources": ["/app.js"]})", "application/json");
  REQUIRE(mutate);
  CHECK(mutate->status == 200);
  CHECK(server.page_html("/index.html").find("/vendor.js") == std::string::npos);
  auto bad = client.Post("/__mutate", R"({"page": "/nope"})", "application/json");
  CHECK(bad->status == 400);
}

TEST_CASE("legacy fetch discovers and loads every subresource") {
  FixtureServer server(site_spec(0));
  FetchSession session;
  LoadReport r = fetch_page(session, server.url("/index.html"), FetchMode::Legacy);
  CHECK(r.resources.size() == 7);
  CHECK(r.resources[0].url == server.url("/index.html"));
  CHECK(r.resources[0].t_start_ms <= r.resources[1].t_start_ms);
  for (const auto& l : r.resources) {
    CHECK(l.required);
    CHECK(l.outcome == ResourceOutcome::Fetched);
  }
  CHECK(find_load(r, server.url("/vendor.js"))->bytes == 30000);
  CHECK(r.overhead_bytes == 0);
  CHECK(r.observed.subresources.size() == 6);
  CHECK(session.repo().get_webpage_node(server.url("/index.html")) != nullptr);
  double max_end = 0, min_start = 1e18;
  for (const auto& l : r.resources) {
    max_end = std::max(max_end, l.t_end_ms);
    min_start = std::min(min_start, l.t_start_ms);
  }
  CHECK(r.delay_ms >= max_end - min_start);

  // Second load: every resource is revalidated; the validator-less one is refetched.
  LoadReport again = fetch_page(session, server.url("/index.html"), FetchMode::Legacy);
  CHECK(find_load(again, server.url("/app.js"))->outcome == ResourceOutcome::Revalidated);
  CHECK(find_load(again, server.url("/app.js"))->bytes == 0);
  CHECK(find_load(again, server.url("/ads.js"))->outcome == ResourceOutcome::Fetched);
  CHECK(server.not_modified() == 6);
}

TEST_CASE("tempo beats legacy once the graph is warm") {
  FixtureServer server(site_spec(100));
  const std::string page = server.url("/index.html");
  FetchSession legacy_session, tempo_session;
  fetch_page(legacy_session, page, FetchMode::Legacy);
  fetch_page(tempo_session, page, FetchMode::Tempo);
  LoadReport legacy = fetch_page(legacy_session, page, FetchMode::Legacy);
  LoadReport tempo = fetch_page(tempo_session, page, FetchMode::Tempo);
  // Legacy: main, then two waves of four; tempo: the first wave rides with the main.
  CHECK(legacy.delay_ms >= 300.0);
  CHECK(tempo.delay_ms < legacy.delay_ms - 50.0);
  CHECK(tempo.overhead_bytes == 0);
  std::size_t speculative = 0;
  for (const auto& l : tempo.resources) speculative += l.speculative ? 1 : 0;
  CHECK(speculative >= 3);
  CHECK(tempo.resources[0].t_start_ms <= 5.0);
}

TEST_CASE("a swapped subresource is one misprediction and one new fetch") {
  FixtureServer server(site_spec(0));
  const std::string page = server.url("/index.html");
  FetchSession session;
  fetch_page(session, page, FetchMode::Tempo);
  server.set_page_subresources("/index.html", {"/app.js", "/vendor.js", "/site.css", "/logo.png", "/hero.png", "/promo.png"});
  LoadReport r = fetch_page(session, page, FetchMode::Tempo);
  std::size_t mispredicted = 0;
  for (const auto& l : r.resources) mispredicted += l.outcome == ResourceOutcome::Mispredicted ? 1 : 0;
  CHECK(mispredicted == 1);
  const ResourceLoad* ads = find_load(r, server.url("/ads.js"));
  REQUIRE(ads != nullptr);
  CHECK(ads->outcome == ResourceOutcome::Mispredicted);
  CHECK(r.overhead_bytes == 7777);
  const ResourceLoad* promo = find_load(r, server.url("/promo.png"));
  REQUIRE(promo != nullptr);
  CHECK(promo->outcome == ResourceOutcome::Fetched);
  CHECK(promo->required);
  CHECK_FALSE(promo->speculative);

  // The graph only grows, so the old child is still predicted; once the page
  // lists every known child again, nothing is wasted.
  server.set_page_subresources("/index.html", {"/app.js", "/vendor.js", "/site.css", "/logo.png", "/hero.png", "/ads.js", "/promo.png"});
  LoadReport steady = fetch_page(session, page, FetchMode::Tempo);
  CHECK(steady.overhead_bytes == 0);
}

TEST_CASE("in-flight requests never exceed the connection limit") {
  FixtureSpec spec;
  spec.delay_ms = 20;
  FixturePage page{"/big", {}, {}};
  for (int i = 0; i < 40; ++i) {
    std::string path = "/r" + std::to_string(i) + ".png";
    spec.resources.push_back({path, ResourceKind::Image, 100, {}, true});
    page.subresources.push_back(path);
  }
  spec.pages.push_back(page);
  FixtureServer server(spec);
  for (int conns : {1, 3, 4}) {
    FetchSession session(conns);
    LoadReport legacy = fetch_page(session, server.url("/big"), FetchMode::Legacy);
    LoadReport tempo = fetch_page(session, server.url("/big"), FetchMode::Tempo);
    CHECK(legacy.max_in_flight <= conns);
    CHECK(tempo.max_in_flight <= conns);
    CHECK(legacy.max_in_flight == conns);
  }
  CHECK(server.max_concurrent() <= 4);
}

TEST_CASE("failures are per resource; a failed main aborts") {
  FixtureSpec spec;
  spec.pages.push_back({"/p", {"/ok.js", "http://127.0.0.1:1/x.png"}, {}});
  spec.resources.push_back({"/ok.js", ResourceKind::Script, 10, {}, true});
  FixtureServer server(spec);
  FetchSession session(4, 2000);
  LoadReport r = fetch_page(session, server.url("/p"), FetchMode::Legacy);
  const ResourceLoad* bad = find_load(r, "http://127.0.0.1:1/x.png");
  REQUIRE(bad != nullptr);
  CHECK(bad->outcome == ResourceOutcome::Failed);
  CHECK(bad->error == "ConnectionError(http://127.0.0.1:1/x.png)");
  CHECK(find_load(r, server.url("/ok.js"))->outcome == ResourceOutcome::Fetched);
  CHECK(r.observed.subresources.size() == 1);

  CHECK_THROWS_AS(fetch_page(session, "http://127.0.0.1:1/", FetchMode::Legacy), MainResourceFailed);
  CHECK_THROWS_AS(fetch_page(session, server.url("/missing"), FetchMode::Tempo), MainResourceFailed);
}

TEST_CASE("slow responses time out") {
  FixtureServer server(site_spec(1500));
  FetchSession session(4, 300);
  CHECK_THROWS_WITH_AS(fetch_page(session, server.url("/index.html"), FetchMode::Legacy),
                       doctest::Contains("Timeout("), MainResourceFailed);
}

TEST_CASE("cache after live loads equals the replay of the observed visits") {
  FixtureServer server(site_spec(0));
  FetchSession session;
  CacheStore replay(Capacity::bytes(6ull << 20));
  const std::string page = server.url("/index.html");
  std::uint64_t last_main_size = 0;
  for (int i = 0; i < 3; ++i) {
    if (i == 2) server.set_page_subresources("/index.html", {"/app.js", "/promo.png"});
    LoadReport r = fetch_page(session, page, FetchMode::Legacy);
    commit_visit(replay, r.observed);
    last_main_size = r.observed.main.size_bytes;
  }
  // Byte counters differ by design: a conditional request answered with a
  // full body is a refetch live but a revalidation in replay.
  CHECK(session.cache().counters().fresh_hits == replay.counters().fresh_hits);
  CHECK(session.cache().counters().revalidations == replay.counters().revalidations);
  CHECK(session.cache().counters().misses == replay.counters().misses);
  // Completion order is concurrent live, so recency order is not compared.
  auto live = session.cache().entries();
  auto expected = replay.entries();
  auto by_url = [](const auto* a, const auto* b) { return a->url < b->url; };
  std::sort(live.begin(), live.end(), by_url);
  std::sort(expected.begin(), expected.end(), by_url);
  REQUIRE(live.size() == expected.size());
  for (std::size_t i = 0; i < live.size(); ++i) {
    CHECK(live[i]->url == expected[i]->url);
    // The rewritten page comes back as a full body; live stores the new size.
    if (live[i]->url == page)
      CHECK(live[i]->size_bytes == last_main_size);
    else
      CHECK(live[i]->size_bytes == expected[i]->size_bytes);
    CHECK(live[i]->freshness_lifetime == expected[i]->freshness_lifetime);
  }
}

TEST_CASE("user agent and proxy come from the environment") {
  ::setenv("SPECLOAD_UA", "probe/1", 1);
  ::setenv("HTTP_PROXY", "http://proxy.local:3128/", 1);
  FetchSession s;
  CHECK(s.user_agent() == "probe/1");
  CHECK(s.proxy() == "proxy.local:3128");
  ::unsetenv("SPECLOAD_UA");
  ::unsetenv("HTTP_PROXY");
  FetchSession d;
  CHECK(d.user_agent() == "specload/0.1");
  CHECK(d.proxy().empty());
  CHECK_THROWS_AS(FetchSession(0), InvalidParams);
  CHECK(parse_fetch_mode("tempo") == FetchMode::Tempo);
  CHECK_FALSE(parse_fetch_mode("fast").has_value());
}
