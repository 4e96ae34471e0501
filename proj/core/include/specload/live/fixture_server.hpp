#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "specload/trace.hpp"

namespace httplib {
class Server;
}

namespace specload {

struct FixtureResource {
  std::string path;
  ResourceKind kind = ResourceKind::Other;
  std::uint64_t size = 0;
  std::map<std::string, std::string> headers;
  bool validator = true;  // send an ETag and honour If-None-Match
};

struct FixturePage {
  std::string path;
  // Paths on this server or absolute URLs, in document order.
  std::vector<std::string> subresources;
  std::map<std::string, std::string> headers;
};

// JSON: {"delay_ms": 100,
//        "pages": [{"path", "subresources": [...], "headers": {...}}],
//        "resources": [{"path", "kind", "size", "headers": {...}, "validator"}]}
struct FixtureSpec {
  int delay_ms = 0;
  std::vector<FixturePage> pages;
  std::vector<FixtureResource> resources;

  // Throws BadSpec.
  static FixtureSpec parse(std::string_view json);
  // Throws IoError, BadSpec.
  static FixtureSpec load(const std::filesystem::path& path);
};

// Local origin serving a FixtureSpec on 127.0.0.1. Each response is delayed
// by delay_ms. POST /__mutate accepts {"page", "subresources"} and/or
// {"delay_ms"} to change the site between fetches.
class FixtureServer {
 public:
  // port 0 picks a free port. Throws BadSpec, PortInUse.
  explicit FixtureServer(FixtureSpec spec, int port = 0);
  ~FixtureServer();
  FixtureServer(const FixtureServer&) = delete;
  FixtureServer& operator=(const FixtureServer&) = delete;

  int port() const { return port_; }
  std::string base_url() const;
  std::string url(std::string_view path) const { return base_url() + std::string(path); }

  void set_page_subresources(const std::string& page_path, std::vector<std::string> subresources);
  void set_delay_ms(int delay_ms);
  void stop();

  std::uint64_t requests() const { return requests_.load(); }
  std::uint64_t not_modified() const { return not_modified_.load(); }
  int max_concurrent() const { return max_concurrent_.load(); }

  // The HTML served for a page.
  std::string page_html(const std::string& page_path) const;

 private:
  void install_routes();

  mutable std::mutex mu_;
  FixtureSpec spec_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::uint64_t> not_modified_{0};
  std::atomic<int> active_{0};
  std::atomic<int> max_concurrent_{0};
};

}  // namespace specload
