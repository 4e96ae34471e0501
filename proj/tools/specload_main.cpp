#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "specload/cache_sim.hpp"
#include "specload/error.hpp"
#include "specload/har.hpp"
#include "specload/live/fetcher.hpp"
#include "specload/live/fixture_server.hpp"
#include "specload/load_sim.hpp"
#include "specload/predictor.hpp"
#include "specload/prefetch.hpp"
#include "specload/report.hpp"
#include "specload/resource_graph.hpp"
#include "specload/synth.hpp"
#include "specload/trace.hpp"

using namespace specload;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Output {
  std::string path = "-";
  std::string format = "csv";
};

void add_output(CLI::App* cmd, Output& out) {
  cmd->add_option("--out", out.path, "Report destination ('-' for stdout)")->capture_default_str();
  cmd->add_option("--format", out.format, "Report format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << text;
  if (!f) throw IoError("write failed: " + path);
}

// CSV goes to --out with a JSON sidecar next to it; stdout gets the report only.
void emit(Report report, const Output& out, const std::string& command,
          std::vector<std::pair<std::string, std::string>> flags) {
  report.meta.emplace_back("command", command);
  report.meta.emplace_back("version", kVersion);
  for (auto& f : flags) report.meta.push_back(std::move(f));
  const std::string text = out.format == "json" ? to_json(report) : to_csv(report);
  if (out.path == "-") {
    std::cout << text;
    return;
  }
  write_file(out.path, text);
  if (out.format == "csv") write_file(out.path + ".meta.json", to_json(report));
}

Trace read_input(const std::string& path) {
  if (path == "-") return read_trace(std::cin);
  return load_trace(path);
}

std::string num(double v) { return format_number(v); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speculative resource loading toolkit: trace replay, simulation and live fetching"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // ingest
  std::vector<std::string> har_files;
  std::string ingest_trace;
  std::string ingest_user = "har";
  std::string ingest_out = "-";
  auto* ingest = app.add_subcommand("ingest", "Import HAR files or a trace into canonical trace JSONL");
  ingest->add_option("--har", har_files, "HAR file(s) to import")->check(CLI::ExistingFile);
  ingest->add_option("--trace", ingest_trace, "Trace JSONL to canonicalize ('-' for stdin)");
  ingest->add_option("--user", ingest_user, "User id for imported HAR visits")->capture_default_str();
  ingest->add_option("--out", ingest_out, "Trace destination ('-' for stdout)")->capture_default_str();

  // synth
  SynthParams sp;
  std::string synth_out = "-";
  auto* synth = app.add_subcommand("synth", "Generate a synthetic browsing trace");
  synth->add_option("--seed", sp.seed, "Random seed")->capture_default_str();
  synth->add_option("--sites", sp.n_sites, "Number of websites")->capture_default_str();
  synth->add_option("--pages-per-site", sp.pages_per_site, "Pages per website")->capture_default_str();
  synth->add_option("--subresources", sp.subresources_per_page, "Subresources per page")->capture_default_str();
  synth->add_option("--shared-fraction", sp.shared_fraction, "Fraction of subresources shared across pages")
      ->capture_default_str();
  synth->add_option("--new-visit-rate", sp.new_visit_rate, "Probability a visit is to a new page")
      ->capture_default_str();
  synth->add_option("--churn", sp.churn_rate_per_day, "Per-day subresource churn probability")
      ->capture_default_str();
  synth->add_option("--short-lived-fraction", sp.short_lived_fraction,
                    "Fraction of resources with no-cache/no-store/short max-age")
      ->capture_default_str();
  synth->add_option("--site-skew", sp.site_skew, "Zipf exponent of site popularity")->capture_default_str();
  synth->add_option("--visits", sp.visits, "Number of visits")->capture_default_str();
  synth->add_option("--days", sp.duration_days, "Trace duration in days")->capture_default_str();
  synth->add_option("--user", sp.user_id, "User id")->capture_default_str();
  synth->add_option("--out", synth_out, "Trace destination ('-' for stdout)")->capture_default_str();

  // sim-cache
  std::string cache_trace = "-";
  std::vector<std::string> capacities;
  Output cache_out;
  auto* sim_cache = app.add_subcommand("sim-cache", "Replay the trace through a browser cache");
  sim_cache->add_option("--trace", cache_trace, "Trace JSONL ('-' for stdin)")->capture_default_str();
  sim_cache->add_option("--capacity", capacities, "Cache capacity {6MB|32MB|64MB|inf}; repeatable")
      ->default_str("6MB");
  add_output(sim_cache, cache_out);

  // sim-prefetch
  std::string pf_trace = "-";
  int train_days = 30, top_k = 10, refresh_days = 1, pf_connections = 4;
  double pf_rtt = 200;
  Output pf_out;
  auto* sim_prefetch = app.add_subcommand("sim-prefetch", "Evaluate most-popular webpage prefetching");
  sim_prefetch->add_option("--trace", pf_trace, "Trace JSONL ('-' for stdin)")->capture_default_str();
  sim_prefetch->add_option("--train-days", train_days, "Training window in days")->capture_default_str();
  sim_prefetch->add_option("--top-k", top_k, "Pages prefetched per refresh")->capture_default_str();
  sim_prefetch->add_option("--refresh-days", refresh_days, "Retraining interval in days")->capture_default_str();
  sim_prefetch->add_option("--rtt-ms", pf_rtt, "Round-trip time for delay weighting")->capture_default_str();
  sim_prefetch->add_option("--connections", pf_connections, "Concurrent connections")->capture_default_str();
  add_output(sim_prefetch, pf_out);

  // sim-speculative
  std::string spec_trace = "-", cache_state_name = "empty", spec_capacity = "6MB";
  bool oracle = false, summary = false;
  int connections = 4;
  NetworkParams net;
  Output spec_out;
  auto* sim_spec = app.add_subcommand("sim-speculative", "Simulate legacy vs speculative page loads");
  sim_spec->add_option("--trace", spec_trace, "Trace JSONL ('-' for stdin)")->capture_default_str();
  sim_spec->add_option("--cache-state", cache_state_name, "Cache state")
      ->check(CLI::IsMember({"fresh", "expired", "empty", "realistic"}))
      ->capture_default_str();
  sim_spec->add_option("--capacity", spec_capacity, "Cache capacity for the realistic state")
      ->capture_default_str();
  sim_spec->add_flag("--oracle", oracle, "Use the perfect prediction instead of the predictor");
  sim_spec->add_option("--connections", connections, "Concurrent connections")->capture_default_str();
  sim_spec->add_option("--rtt-ms", net.rtt_ms, "Round-trip time in ms")->capture_default_str();
  sim_spec->add_option("--parse-ms", net.parse_ms, "Main resource parse time in ms")->capture_default_str();
  sim_spec->add_option("--main-extra-rtts", net.main_extra_rtts, "Setup round trips before the main request")
      ->capture_default_str();
  sim_spec->add_option("--redirect-hops", net.redirect_hops, "Redirects per page")->capture_default_str();
  sim_spec->add_option("--bandwidth", net.bandwidth_bytes_per_s, "Per-connection bandwidth in bytes/s")
      ->default_str("inf");
  sim_spec->add_flag("--summary", summary, "Only emit the mean rows");
  add_output(sim_spec, spec_out);

  // graph
  std::string graph_trace, graph_repo, graph_save;
  int trim_days = 30;
  Output graph_out;
  auto* graph = app.add_subcommand("graph", "Build, trim, save and summarize resource graphs");
  graph->add_option("--trace", graph_trace, "Trace JSONL to learn ('-' for stdin)");
  graph->add_option("--repo", graph_repo, "Existing repository file to load first")->check(CLI::ExistingFile);
  graph->add_option("--trim-days", trim_days, "Drop nodes and edges unseen for this many days")
      ->capture_default_str();
  graph->add_option("--save", graph_save, "Write the repository here");
  add_output(graph, graph_out);

  // fetch
  std::string fetch_url, fixture, mode_name = "tempo", fetch_repo;
  int fetch_connections = 4, timeout_ms = 10000, repeat = 1;
  bool warm = false;
  Output fetch_out;
  auto* fetch = app.add_subcommand("fetch", "Load a page over the network and report timings");
  fetch->add_option("--url", fetch_url, "Page URL, or a path on the fixture server")->required();
  fetch->add_option("--fixture", fixture, "Serve this fixture spec locally and fetch from it")
      ->check(CLI::ExistingFile);
  fetch->add_option("--mode", mode_name, "Loading strategy")
      ->check(CLI::IsMember({"legacy", "tempo"}))
      ->capture_default_str();
  fetch->add_option("--connections", fetch_connections, "Concurrent connections")->capture_default_str();
  fetch->add_option("--timeout-ms", timeout_ms, "Per-request timeout")->capture_default_str();
  fetch->add_option("--repeat", repeat, "Number of consecutive loads in one session")->capture_default_str();
  fetch->add_flag("--warm", warm, "Load once before measuring so graph and cache are warm");
  fetch->add_option("--repo", fetch_repo, "Repository file to load and update");
  add_output(fetch, fetch_out);

  // report
  std::string rep_trace = "-", series = "weekly";
  double warmup = 0;
  std::optional<int> rep_trim;
  Output rep_out;
  auto* report = app.add_subcommand("report", "Replay the predictor and emit hit-ratio/usefulness series");
  report->add_option("--trace", rep_trace, "Trace JSONL ('-' for stdin)")->capture_default_str();
  report->add_option("--series", series, "Series to emit")
      ->check(CLI::IsMember({"weekly", "monthly", "summary"}))
      ->capture_default_str();
  report->add_option("--warmup", warmup, "Leading fraction of visits used only for training")
      ->capture_default_str();
  report->add_option("--trim-days", rep_trim, "Trim the repository daily with this age limit");
  add_output(report, rep_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*ingest) {
      if (har_files.empty() == ingest_trace.empty())
        throw CLI::ValidationError("ingest", "exactly one of --har or --trace is required");
      Trace trace;
      if (!har_files.empty()) {
        std::size_t dropped = 0, skipped = 0;
        for (const auto& f : har_files) {
          HarImport imp = import_har(f, ingest_user);
          dropped += imp.dropped_entries;
          skipped += imp.skipped_pages;
          for (auto& v : imp.visits) trace.visits.push_back(std::move(v));
        }
        sort_visits(trace);
        std::cerr << "imported " << trace.visits.size() << " visits; skipped " << skipped
                  << " pages without an HTML entry; dropped " << dropped << " entries\n";
      } else {
        trace = read_input(ingest_trace);
      }
      if (ingest_out == "-")
        write_trace(trace, std::cout);
      else
        save_trace(trace, ingest_out);
    } else if (*synth) {
      Trace trace = generate_synthetic(sp);
      if (synth_out == "-")
        write_trace(trace, std::cout);
      else
        save_trace(trace, synth_out);
    } else if (*sim_cache) {
      if (capacities.empty()) capacities.push_back("6MB");
      Trace trace = read_input(cache_trace);
      std::vector<CacheSimReport> runs;
      for (const auto& c : capacities) {
        auto cap = Capacity::parse(c);
        if (!cap) throw CLI::ValidationError("--capacity", "unrecognized capacity '" + c + "'");
        runs.push_back(replay_cache_sim(trace, *cap));
      }
      std::string caps;
      for (const auto& c : capacities) caps += (caps.empty() ? "" : ";") + c;
      emit(cache_report(runs), cache_out, "sim-cache", {{"trace", cache_trace}, {"capacity", caps}});
    } else if (*sim_prefetch) {
      Trace trace = read_input(pf_trace);
      PrefetchOptions opt;
      opt.training_window_s = std::int64_t{train_days} * kSecondsPerDay;
      opt.top_k = top_k;
      opt.refresh_interval_s = std::int64_t{refresh_days} * kSecondsPerDay;
      opt.net.rtt_ms = pf_rtt;
      opt.max_connections = pf_connections;
      emit(prefetch_report(evaluate_prefetch(trace, opt), opt), pf_out, "sim-prefetch",
           {{"trace", pf_trace},
            {"train_days", std::to_string(train_days)},
            {"top_k", std::to_string(top_k)},
            {"refresh_days", std::to_string(refresh_days)},
            {"rtt_ms", num(pf_rtt)},
            {"connections", std::to_string(pf_connections)}});
    } else if (*sim_spec) {
      Trace trace = read_input(spec_trace);
      auto kind = parse_cache_state(cache_state_name);
      auto cap = Capacity::parse(spec_capacity);
      if (!cap) throw CLI::ValidationError("--capacity", "unrecognized capacity '" + spec_capacity + "'");
      SimResult result = simulate_trace(trace, net, CacheState::of(*kind, *cap), !oracle, connections);
      if (summary) result.pages.clear();
      emit(speculative_report(result, *kind), spec_out, "sim-speculative",
           {{"trace", spec_trace},
            {"cache_state", cache_state_name},
            {"oracle", oracle ? "true" : "false"},
            {"connections", std::to_string(connections)},
            {"rtt_ms", num(net.rtt_ms)},
            {"parse_ms", num(net.parse_ms)},
            {"main_extra_rtts", std::to_string(net.main_extra_rtts)},
            {"redirect_hops", std::to_string(net.redirect_hops)},
            {"bandwidth", num(net.bandwidth_bytes_per_s)}});
    } else if (*graph) {
      if (graph_trace.empty() && graph_repo.empty())
        throw CLI::ValidationError("graph", "--trace or --repo is required");
      MetadataRepository repo = graph_repo.empty() ? MetadataRepository{} : load_repo(graph_repo);
      if (!graph_trace.empty()) {
        Trace trace = read_input(graph_trace);
        sort_visits(trace);
        for (const auto& v : trace.visits) repo.update(v);
        if (!trace.visits.empty()) repo.trim(trace.visits.back().timestamp, trim_days);
      }
      if (!graph_save.empty()) save_repo(repo, graph_save);
      emit(repo_stats_report(repo_stats(repo)), graph_out, "graph",
           {{"trace", graph_trace}, {"repo", graph_repo}, {"trim_days", std::to_string(trim_days)}});
    } else if (*fetch) {
      std::unique_ptr<FixtureServer> server;
      std::string url = fetch_url;
      if (!fixture.empty()) {
        server = std::make_unique<FixtureServer>(FixtureSpec::load(fixture));
        url = server->url(fetch_url.starts_with("/") ? fetch_url : "/" + fetch_url);
      }
      FetchSession session(fetch_connections, timeout_ms);
      if (!fetch_repo.empty() && std::ifstream(fetch_repo)) session.repo() = load_repo(fetch_repo);
      const FetchMode mode = *parse_fetch_mode(mode_name);
      if (warm) fetch_page(session, url, mode);
      std::vector<LoadReport> reports;
      for (int i = 0; i < repeat; ++i) reports.push_back(fetch_page(session, url, mode));
      if (!fetch_repo.empty()) save_repo(session.repo(), fetch_repo);
      emit(fetch_report(reports), fetch_out, "fetch",
           {{"url", fetch_url}, {"mode", mode_name}, {"connections", std::to_string(fetch_connections)}});
    } else if (*report) {
      Trace trace = read_input(rep_trace);
      ReplayOptions opt;
      opt.warmup_fraction = warmup;
      opt.trim_days = rep_trim;
      ReplaySeries s = replay_predictor(trace, opt);
      Report r;
      if (series == "summary") {
        r = Report{"predictor-summary", {"class", "hit_ratio", "usefulness", "n"}, {}, {}};
        auto row = [&](const char* name, const ClassScore& c) {
          r.add_row({std::string(name), c.hit_ratio, c.usefulness, static_cast<std::int64_t>(c.n)});
        };
        row("overall", s.overall);
        row("revisit", s.revisits);
        row("new_visit", s.new_visits);
        row("unknown", s.unknown);
      } else {
        r = series_report(s, series == "monthly");
      }
      emit(std::move(r), rep_out, "report",
           {{"trace", rep_trace},
            {"series", series},
            {"warmup", num(warmup)},
            {"trim_days", rep_trim ? std::to_string(*rep_trim) : "none"}});
    }
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
