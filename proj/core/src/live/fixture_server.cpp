#include "specload/live/fixture_server.hpp"

#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "specload/error.hpp"

namespace specload {

namespace {

using nlohmann::json;

std::map<std::string, std::string> parse_headers(const json& j) {
  std::map<std::string, std::string> out;
  if (j.is_null()) return out;
  if (!j.is_object()) throw BadSpec("headers must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) throw BadSpec("header values must be strings");
    out[k] = v.get<std::string>();
  }
  return out;
}

bool is_absolute(std::string_view ref) { return ref.find("://") != std::string_view::npos; }

std::string content_type(ResourceKind kind) {
  switch (kind) {
    case ResourceKind::Html: return "text/html";
    case ResourceKind::Script: return "application/javascript";
    case ResourceKind::Stylesheet: return "text/css";
    case ResourceKind::Image: return "image/png";
    case ResourceKind::Other: return "application/octet-stream";
  }
  return "application/octet-stream";
}

std::string etag_of(std::string_view content) {
  std::ostringstream out;
  out << '"' << std::hex << std::hash<std::string_view>{}(content) << '"';
  return out.str();
}

void validate_spec(const FixtureSpec& spec) {
  if (spec.delay_ms < 0) throw BadSpec("delay_ms must be >= 0");
  std::set<std::string> paths;
  for (const auto& r : spec.resources) {
    if (r.path.empty() || r.path.front() != '/') throw BadSpec("resource path must start with '/': " + r.path);
    if (!paths.insert(r.path).second) throw BadSpec("duplicate path: " + r.path);
  }
  for (const auto& p : spec.pages) {
    if (p.path.empty() || p.path.front() != '/') throw BadSpec("page path must start with '/': " + p.path);
    if (!paths.insert(p.path).second) throw BadSpec("duplicate path: " + p.path);
  }
  for (const auto& p : spec.pages)
    for (const auto& s : p.subresources)
      if (!is_absolute(s) && !paths.contains(s)) throw BadSpec("unknown subresource: " + s);
}

}  // namespace

FixtureSpec FixtureSpec::parse(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw BadSpec(std::string("fixture spec is not valid JSON: ") + e.what());
  }
  FixtureSpec spec;
  try {
    if (!doc.is_object()) throw BadSpec("fixture spec must be an object");
    spec.delay_ms = doc.value("delay_ms", 0);
    for (const auto& r : doc.value("resources", json::array())) {
      FixtureResource res;
      res.path = r.at("path").get<std::string>();
      auto kind = parse_resource_kind(r.value("kind", std::string("other")));
      if (!kind) throw BadSpec("unknown resource kind for " + res.path);
      res.kind = *kind;
      res.size = r.value("size", std::uint64_t{0});
      res.headers = parse_headers(r.value("headers", json()));
      res.validator = r.value("validator", true);
      spec.resources.push_back(std::move(res));
    }
    for (const auto& p : doc.value("pages", json::array())) {
      FixturePage page;
      page.path = p.at("path").get<std::string>();
      page.subresources = p.value("subresources", std::vector<std::string>{});
      page.headers = parse_headers(p.value("headers", json()));
      spec.pages.push_back(std::move(page));
    }
  } catch (const json::exception& e) {
    throw BadSpec(std::string("fixture spec: ") + e.what());
  }
  validate_spec(spec);
  return spec;
}

FixtureSpec FixtureSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open fixture spec: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

FixtureServer::FixtureServer(FixtureSpec spec, int port)
    : spec_(std::move(spec)), server_(std::make_unique<httplib::Server>()) {
  validate_spec(spec_);
  server_->new_task_queue = [] { return new httplib::ThreadPool(32); };
  install_routes();
  // httplib's default sets SO_REUSEPORT, which lets a second server share a busy port.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  if (port == 0) {
    port_ = server_->bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw PortInUse("no free port on 127.0.0.1");
  } else {
    if (!server_->bind_to_port("127.0.0.1", port)) throw PortInUse("port in use: " + std::to_string(port));
    port_ = port;
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

FixtureServer::~FixtureServer() { stop(); }

void FixtureServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string FixtureServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

void FixtureServer::set_page_subresources(const std::string& page_path,
                                          std::vector<std::string> subresources) {
  std::lock_guard lock(mu_);
  for (auto& p : spec_.pages)
    if (p.path == page_path) {
      FixturePage old = p;
      p.subresources = std::move(subresources);
      try {
        validate_spec(spec_);
      } catch (...) {
        p = std::move(old);
        throw;
      }
      return;
    }
  throw BadSpec("unknown page: " + page_path);
}

void FixtureServer::set_delay_ms(int delay_ms) {
  if (delay_ms < 0) throw BadSpec("delay_ms must be >= 0");
  std::lock_guard lock(mu_);
  spec_.delay_ms = delay_ms;
}

std::string FixtureServer::page_html(const std::string& page_path) const {
  std::lock_guard lock(mu_);
  const FixturePage* page = nullptr;
  for (const auto& p : spec_.pages)
    if (p.path == page_path) page = &p;
  if (!page) throw BadSpec("unknown page: " + page_path);
  std::string html = "<!doctype html>\n<html><head><title>" + page_path + "</title>\n";
  std::string body;
  for (const auto& ref : page->subresources) {
    ResourceKind kind = ResourceKind::Image;
    for (const auto& r : spec_.resources)
      if (r.path == ref) kind = r.kind;
    if (is_absolute(ref) && ref.ends_with(".js")) kind = ResourceKind::Script;
    if (is_absolute(ref) && ref.ends_with(".css")) kind = ResourceKind::Stylesheet;
    switch (kind) {
      case ResourceKind::Script: html += "<script src=\"" + ref + "\"></script>\n"; break;
      case ResourceKind::Stylesheet: html += "<link rel=\"stylesheet\" href=\"" + ref + "\">\n"; break;
      default: body += "<img src=\"" + ref + "\">\n"; break;
    }
  }
  return html + "</head><body>\n" + body + "</body></html>\n";
}

void FixtureServer::install_routes() {
  server_->Post("/__mutate", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      json doc = json::parse(req.body);
      if (doc.contains("delay_ms")) set_delay_ms(doc["delay_ms"].get<int>());
      if (doc.contains("page"))
        set_page_subresources(doc["page"].get<std::string>(),
                              doc.value("subresources", std::vector<std::string>{}));
      res.set_content("ok\n", "text/plain");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(std::string(e.what()) + "\n", "text/plain");
    }
  });

  server_->Get(".*", [this](const httplib::Request& req, httplib::Response& res) {
    int now_active = ++active_;
    for (int seen = max_concurrent_.load(); now_active > seen && !max_concurrent_.compare_exchange_weak(seen, now_active);) {
    }
    ++requests_;

    int delay = 0;
    std::string body, etag, type;
    std::map<std::string, std::string> headers;
    bool found = false, validator = true;
    {
      std::lock_guard lock(mu_);
      delay = spec_.delay_ms;
      for (const auto& r : spec_.resources)
        if (r.path == req.path) {
          found = true;
          body.assign(r.size, 'x');
          etag = etag_of(r.path + "#" + std::to_string(r.size));
          type = content_type(r.kind);
          headers = r.headers;
          validator = r.validator;
        }
      for (const auto& p : spec_.pages)
        if (p.path == req.path) {
          found = true;
          headers = p.headers;
          type = "text/html";
        }
    }
    if (found && type == "text/html") {
      body = page_html(req.path);
      etag = etag_of(body);
    }
    if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));

    if (!found) {
      res.status = 404;
      res.set_content("not found\n", "text/plain");
    } else {
      for (const auto& [k, v] : headers) res.set_header(k, v);
      if (validator) res.set_header("ETag", etag);
      if (validator && req.get_header_value("If-None-Match") == etag) {
        res.status = 304;
        ++not_modified_;
      } else {
        res.set_content(body, type);
      }
    }
    --active_;
  });
}

}  // namespace specload
