#include <doctest.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

const fs::path& workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("specload_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Runs a shell command line where "$CLI" is the tool under test.
Run sh(const std::string& line) {
  const fs::path err = workdir() / "stderr.txt";
  std::string cmd = "CLI='" SPECLOAD_CLI "'; cd '" + workdir().string() + "' && { " + line + " ; } 2>'" + err.string() + "'";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

const std::string kSynth = "\"$CLI\" synth --seed 7 --visits 600 --sites 4 --pages-per-site 300 --subresources 8 --days 90";

}  // namespace

TEST_CASE("exit codes") {
  CHECK(sh("\"$CLI\"").code == 2);
  CHECK(sh("\"$CLI\" --help").code == 0);
  CHECK(sh("\"$CLI\" sim-cache --no-such-flag").code == 2);
  CHECK(sh("\"$CLI\" sim-speculative --cache-state lukewarm").code == 2);
  CHECK(sh("\"$CLI\" sim-cache --trace x.jsonl --capacity 6XB < /dev/null").code != 0);

  Run missing = sh("\"$CLI\" sim-cache --trace does-not-exist.jsonl");
  CHECK(missing.code == 1);
  CHECK(missing.err.starts_with("error: "));
  CHECK(std::count(missing.err.begin(), missing.err.end(), '\n') == 1);

  Run bad = sh("echo '{not json' | \"$CLI\" sim-cache");
  CHECK(bad.code == 1);
  CHECK(bad.err.find("line 1") != std::string::npos);

  CHECK(sh("\"$CLI\" synth --visits 0").code == 1);
  CHECK(sh("\"$CLI\" fetch --url http://127.0.0.1:1/ --timeout-ms 500").code == 1);
}

TEST_CASE("help lists the documented defaults") {
  Run spec = sh("\"$CLI\" sim-speculative --help");
  CHECK(spec.code == 0);
  for (const char* s : {"--rtt-ms", "200", "--connections", "4", "--cache-state", "--oracle", "--parse-ms", "--trace", "--out"})
    CHECK(spec.out.find(s) != std::string::npos);
  Run graph = sh("\"$CLI\" graph --help");
  CHECK(graph.out.find("--trim-days") != std::string::npos);
  CHECK(graph.out.find("30") != std::string::npos);
  Run cache = sh("\"$CLI\" sim-cache --help");
  CHECK(cache.out.find("6MB") != std::string::npos);
  Run pf = sh("\"$CLI\" sim-prefetch --help");
  for (const char* s : {"--train-days", "--top-k", "30", "10"}) CHECK(pf.out.find(s) != std::string::npos);
  Run fetch = sh("\"$CLI\" fetch --help");
  for (const char* s : {"--fixture", "--mode", "tempo", "--connections"}) CHECK(fetch.out.find(s) != std::string::npos);
  for (const char* cmd : {"ingest", "synth", "report"}) CHECK(sh(std::string("\"$CLI\" ") + cmd + " --help").code == 0);
}

TEST_CASE("commands are byte-for-byte deterministic") {
  REQUIRE(sh(kSynth + " --out t.jsonl").code == 0);
  CHECK(sh(kSynth).out == slurp(workdir() / "t.jsonl"));
  const char* commands[] = {
      "sim-cache --trace t.jsonl --capacity 6MB --capacity inf",
      "sim-prefetch --trace t.jsonl --train-days 30 --top-k 10",
      "sim-speculative --trace t.jsonl --cache-state empty --oracle",
      "sim-speculative --trace t.jsonl --cache-state realistic --format json",
      "report --trace t.jsonl --series monthly",
      "report --trace t.jsonl --series summary --warmup 0.2",
      "graph --trace t.jsonl --trim-days 30",
  };
  for (const char* c : commands) {
    CAPTURE(c);
    Run a = sh(std::string("\"$CLI\" ") + c);
    Run b = sh(std::string("\"$CLI\" ") + c);
    CHECK(a.code == 0);
    CHECK_FALSE(a.out.empty());
    CHECK(a.out == b.out);
  }
}

TEST_CASE("synth pipes into the evaluators") {
  Run r = sh(kSynth + " | \"$CLI\" sim-prefetch --train-days 30");
  CHECK(r.code == 0);
  CHECK(r.out.starts_with("train_days,top_k,refresh_s,visits,hit_ratio,usefulness,"));
  Run s = sh(kSynth + " | \"$CLI\" sim-speculative --cache-state empty --oracle --summary");
  CHECK(s.code == 0);
  CHECK(std::count(s.out.begin(), s.out.end(), '\n') == 3);
}

TEST_CASE("file output gets a metadata sidecar") {
  REQUIRE(sh(kSynth + " --out t.jsonl").code == 0);
  Run r = sh("\"$CLI\" sim-cache --trace t.jsonl --capacity 32MB --out cache.csv");
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  std::string csv = slurp(workdir() / "cache.csv");
  CHECK(csv.starts_with("capacity,fresh,revalidate,miss,network_activity,requests\n32MB,"));
  std::string meta = slurp(workdir() / "cache.csv.meta.json");
  CHECK(meta.find("\"command\": \"sim-cache\"") != std::string::npos);
  CHECK(meta.find("\"capacity\": \"32MB\"") != std::string::npos);
}

TEST_CASE("ingest, graph round trip and fixture fetch") {
  Run ingest = sh("\"$CLI\" ingest --har '" SPECLOAD_FIXTURES "/sample.har' --user alice");
  CHECK(ingest.code == 0);
  CHECK(std::count(ingest.out.begin(), ingest.out.end(), '\n') == 1);
  CHECK(ingest.err.find("skipped 1") != std::string::npos);

  REQUIRE(sh(kSynth + " --out t.jsonl").code == 0);
  Run save = sh("\"$CLI\" graph --trace t.jsonl --save repo.bin");
  CHECK(save.code == 0);
  Run load = sh("\"$CLI\" graph --repo repo.bin");
  CHECK(load.code == 0);
  CHECK(load.out == save.out);
  sh("head -c 20 repo.bin > broken.bin");
  Run broken = sh("\"$CLI\" graph --repo broken.bin");
  CHECK(broken.code == 1);
  CHECK(broken.err.find("truncated") != std::string::npos);

  Run fetch = sh("\"$CLI\" fetch --fixture '" SPECLOAD_FIXTURES "/site.json' --url /index.html --mode tempo --warm");
  CHECK(fetch.code == 0);
  CHECK(fetch.out.find("*page*") != std::string::npos);
  CHECK(fetch.out.find("revalidated") != std::string::npos);
}
