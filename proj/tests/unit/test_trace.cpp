#include <unistd.h>

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "specload/error.hpp"
#include "specload/har.hpp"
#include "specload/trace.hpp"
#include "test_support.hpp"

using namespace specload;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("specload_test_" + std::to_string(::getpid()) + "_" + name);
}

const char* kRecord =
    R"({"user":"u1","ts":100,"main":{"url":"HTTP://A.com:80/p#x","kind":"html","size":10,"cc":{"no_cache":true,"validator":true},"fetched_at":100},)"
    R"("subs":[{"url":"http://a.com/s.js","kind":"script","size":5,"cc":{"max_age":60},"fetched_at":100}],"offsets":[12.5]})";

}  // namespace

TEST_CASE("empty input reads as an empty trace") {
  std::istringstream in("");
  CHECK(read_trace(in).visits.empty());
  std::istringstream blank("\n  \n");
  CHECK(read_trace(blank).visits.empty());
}

TEST_CASE("one record keeps its fields, with URLs normalized") {
  std::istringstream in(kRecord);
  Trace t = read_trace(in);
  REQUIRE(t.visits.size() == 1);
  const PageVisit& v = t.visits[0];
  CHECK(v.user_id == "u1");
  CHECK(v.timestamp == 100);
  CHECK(v.main.url == "http://a.com/p");
  CHECK(v.main.cache.no_cache);
  CHECK(v.main.cache.has_validator);
  REQUIRE(v.subresources.size() == 1);
  CHECK(v.subresources[0].kind == ResourceKind::Script);
  CHECK(v.subresources[0].cache.max_age == 60);
  CHECK(v.discovery_offsets_ms == std::vector<double>{12.5});
}

TEST_CASE("schema violations report their line") {
  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      read_trace(in);
    } catch (const SchemaError& e) {
      return e.line();
    }
    return 0;
  };
  const std::string good = std::string(kRecord) + "\n";
  CHECK(line_of(good + R"({"user":"u","ts":1})") == 2);
  CHECK(line_of(good + "\n" + "{not json") == 3);
  CHECK(line_of(R"({"user":"u","ts":1,"main":{"url":"http://a.com/","kind":"script","size":1,"fetched_at":1}})") == 1);
  CHECK(line_of(R"({"user":"u","ts":1,"main":{"url":"nourl","kind":"html","size":1,"fetched_at":1}})") == 1);
  CHECK(line_of(R"({"user":"u","ts":1,"main":{"url":"http://a.com/","kind":"html","size":-1,"fetched_at":1}})") == 1);
  CHECK(line_of(good + R"({"user":"u","ts":1,"main":{"url":"http://a.com/","kind":"html","size":1,"fetched_at":1},"subs":[],"offsets":[1]})") == 2);
}

TEST_CASE("duplicate subresources are rejected") {
  PageVisit v = testing::visit("http://a.com/", 1, {"http://a.com/x.png", "http://a.com/x.png#frag"});
  CHECK_THROWS_AS(canonicalize_visit(v), SchemaError);
}

TEST_CASE("visits are re-sorted by timestamp with file order among ties") {
  Trace t;
  t.visits.push_back(testing::visit("http://a.com/3", 30, {}));
  t.visits.push_back(testing::visit("http://a.com/1", 10, {}));
  t.visits.push_back(testing::visit("http://a.com/2a", 20, {}));
  t.visits.push_back(testing::visit("http://a.com/2b", 20, {}));
  std::ostringstream out;
  write_trace(t, out);
  std::istringstream in(out.str());
  Trace back = read_trace(in);
  REQUIRE(back.visits.size() == 4);
  CHECK(back.visits[0].main.url == "http://a.com/1");
  CHECK(back.visits[1].main.url == "http://a.com/2a");
  CHECK(back.visits[2].main.url == "http://a.com/2b");
  CHECK(back.visits[3].main.url == "http://a.com/3");
}

TEST_CASE("save then load is the identity on canonical traces") {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 20; ++round) {
    Trace t = testing::random_trace(rng);
    for (auto& v : t.visits) {
      v.main.cache.max_age = static_cast<std::int64_t>(rng() % 1000);
      v.main.cache.last_modified = static_cast<Timestamp>(rng() % 1000);
      for (std::size_t i = 0; i < v.subresources.size(); ++i) {
        v.discovery_offsets_ms[i] = static_cast<double>(rng() % 500) / 4.0;
        v.subresources[i].cache.no_store = rng() % 2;
        v.subresources[i].cache.expires = static_cast<Timestamp>(rng() % 100000);
      }
    }
    const fs::path path = temp_file("roundtrip.jsonl");
    save_trace(t, path);
    CHECK(load_trace(path) == t);
    fs::remove(path);
  }
}

TEST_CASE("missing trace file is an IoError") {
  CHECK_THROWS_AS(load_trace("/nonexistent/trace.jsonl"), IoError);
}

TEST_CASE("cache headers map onto directives") {
  auto d = parse_cache_headers("public, max-age=600", "", false);
  CHECK(d.max_age == 600);
  CHECK_FALSE(d.no_cache);
  d = parse_cache_headers("No-Store", "", false);
  CHECK(d.no_store);
  d = parse_cache_headers("no-cache, must-revalidate", "", true);
  CHECK(d.no_cache);
  CHECK(d.has_validator);
  d = parse_cache_headers("", "Thu, 01 Dec 1994 16:00:00 GMT", false);
  CHECK(d.expires == 786297600);
  d = parse_cache_headers("", "0", false);
  CHECK(d.expires == 0);
  d = parse_cache_headers("max-age=abc", "", false);
  CHECK(d.max_age == 0);
  d = parse_cache_headers("", "", true, "Sun, 06 Nov 1994 08:49:37 GMT");
  CHECK(d.last_modified == 784111777);
}

TEST_CASE("HTTP dates accept the three RFC forms") {
  CHECK(parse_http_date("Sun, 06 Nov 1994 08:49:37 GMT") == 784111777);
  CHECK(parse_http_date("Sunday, 06-Nov-94 08:49:37 GMT") == 784111777);
  CHECK(parse_http_date("Sun Nov  6 08:49:37 1994") == 784111777);
  CHECK_FALSE(parse_http_date("yesterday").has_value());
  CHECK(format_http_date(784111777) == "Sun, 06 Nov 1994 08:49:37 GMT");
}

TEST_CASE("kind inference prefers MIME, then extension") {
  CHECK(kind_from_mime("text/html; charset=utf-8", "http://a/x") == ResourceKind::Html);
  CHECK(kind_from_mime("application/x-javascript", "http://a/x") == ResourceKind::Script);
  CHECK(kind_from_mime("", "http://a/x.CSS?v=1") == ResourceKind::Stylesheet);
  CHECK(kind_from_mime("image/gif", "http://a/x.js") == ResourceKind::Image);
  CHECK(kind_from_mime("", "http://a/x") == ResourceKind::Other);
}

TEST_CASE("HAR import maps pages, headers and discovery offsets") {
  HarImport imp = import_har(SPECLOAD_FIXTURES "/sample.har", "alice");
  REQUIRE(imp.visits.size() == 1);
  CHECK(imp.skipped_pages == 1);
  CHECK(imp.dropped_entries == 1);
  const PageVisit& v = imp.visits[0];
  CHECK(v.user_id == "alice");
  CHECK(v.timestamp == 1298973600);
  CHECK(v.main.url == "http://www.example.com/index.html");
  CHECK(v.main.cache.no_cache);
  CHECK(v.main.cache.has_validator);
  CHECK(v.main.size_bytes == 5120);
  REQUIRE(v.subresources.size() == 2);
  CHECK(v.subresources[0].url == "http://static.example.com/app.js");
  CHECK(v.subresources[0].cache.max_age == 600);
  CHECK(v.subresources[1].cache.no_store);
  // Main finishes at 10:00:00.200; app.js starts 100 ms later, logo.png at once.
  CHECK(v.discovery_offsets_ms[0] == doctest::Approx(100.0));
  CHECK(v.discovery_offsets_ms[1] == doctest::Approx(0.0));
}

TEST_CASE("HAR edge cases") {
  CHECK(parse_har(R"({"log":{"pages":[],"entries":[]}})").visits.empty());
  CHECK_THROWS_AS(parse_har("[]"), SchemaError);
  CHECK_THROWS_AS(parse_har("not json"), SchemaError);
  CHECK(parse_iso8601("2011-03-01T10:00:00.500+01:00") == doctest::Approx(1298970000.5));
}
