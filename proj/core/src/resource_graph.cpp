#include "specload/resource_graph.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>
#include <tuple>
#include <vector>

#include "specload/error.hpp"
#include "specload/url.hpp"

namespace specload {

std::string_view to_string(NodeType type) {
  switch (type) {
    case NodeType::Website: return "website";
    case NodeType::Subdomain: return "subdomain";
    case NodeType::Webpage: return "webpage";
    case NodeType::Subresource: return "subresource";
  }
  return "?";
}

namespace {

// Expected parent type for each node type; Website has none.
std::optional<NodeType> parent_type(NodeType t) {
  switch (t) {
    case NodeType::Website: return std::nullopt;
    case NodeType::Subdomain: return NodeType::Website;
    case NodeType::Webpage: return NodeType::Subdomain;
    case NodeType::Subresource: return NodeType::Webpage;
  }
  return std::nullopt;
}

}  // namespace

ResourceGraph::ResourceGraph(std::string website_key) : key_(std::move(website_key)) {
  GraphNode site;
  site.type = NodeType::Website;
  site.name = key_;
  website_ = next_id_++;
  nodes_.emplace(website_, std::move(site));
  index_.emplace(Key{NodeType::Website, key_}, website_);
}

std::optional<NodeId> ResourceGraph::find(NodeType type, std::string_view name) const {
  auto it = index_.find(Key{type, std::string(name)});
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<Timestamp> ResourceGraph::edge_last_seen(NodeId page, NodeId resource) const {
  auto it = edge_seen_.find({page, resource});
  if (it == edge_seen_.end()) return std::nullopt;
  return it->second;
}

std::pair<NodeId, bool> ResourceGraph::touch(NodeType type, std::string_view name,
                                             ResourceKind kind, Timestamp when) {
  if (auto id = find(type, name)) {
    GraphNode& n = nodes_.at(*id);
    ++n.n_visits;
    n.last_visit = std::max(n.last_visit, when);
    if (type == NodeType::Webpage || type == NodeType::Subresource) n.kind = kind;
    return {*id, false};
  }
  GraphNode n;
  n.type = type;
  n.name = std::string(name);
  n.kind = kind;
  n.last_visit = when;
  n.n_visits = 1;
  NodeId id = next_id_++;
  nodes_.emplace(id, std::move(n));
  index_.emplace(Key{type, std::string(name)}, id);
  return {id, true};
}

void ResourceGraph::link(NodeId parent, NodeId child, Timestamp when) {
  nodes_.at(parent).children.insert(child);
  nodes_.at(child).parents.insert(parent);
  if (nodes_.at(child).type == NodeType::Subresource) {
    auto [it, inserted] = edge_seen_.emplace(std::pair{parent, child}, when);
    if (!inserted) it->second = std::max(it->second, when);
  }
}

void ResourceGraph::unlink(NodeId parent, NodeId child) {
  nodes_.at(parent).children.erase(child);
  nodes_.at(child).parents.erase(parent);
  edge_seen_.erase({parent, child});
}

void ResourceGraph::remove(NodeId id) {
  auto it = nodes_.find(id);
  if (it == nodes_.end() || id == website_) return;
  for (NodeId p : std::vector<NodeId>(it->second.parents.begin(), it->second.parents.end()))
    unlink(p, id);
  for (NodeId c : std::vector<NodeId>(it->second.children.begin(), it->second.children.end()))
    unlink(id, c);
  index_.erase(Key{it->second.type, it->second.name});
  nodes_.erase(it);
}

NodeId ResourceGraph::restore(GraphNode node) {
  node.parents.clear();
  node.children.clear();
  if (node.type == NodeType::Website) {
    GraphNode& site = nodes_.at(website_);
    site.last_visit = node.last_visit;
    site.n_visits = node.n_visits;
    return website_;
  }
  NodeId id = next_id_++;
  index_.emplace(Key{node.type, node.name}, id);
  nodes_.emplace(id, std::move(node));
  return id;
}

void ResourceGraph::restore_edge(NodeId parent, NodeId child, Timestamp last_seen) {
  link(parent, child, last_seen);
  if (nodes_.at(child).type == NodeType::Subresource) edge_seen_[{parent, child}] = last_seen;
}

std::string ResourceGraph::check_invariants() const {
  std::size_t websites = 0;
  for (const auto& [id, n] : nodes_) {
    std::string where = std::string(to_string(n.type)) + " '" + n.name + "'";
    if (n.type == NodeType::Website) {
      ++websites;
      if (n.name != key_) return where + " does not match graph key '" + key_ + "'";
    }
    if (n.type != NodeType::Website && n.n_visits < 1) return where + " has no visits";
    auto found = index_.find(Key{n.type, n.name});
    if (found == index_.end() || found->second != id) return where + " missing from index";
    for (NodeId c : n.children) {
      auto child = nodes_.find(c);
      if (child == nodes_.end()) return where + " has a dangling child";
      if (!child->second.parents.contains(id)) return where + " has an asymmetric child edge";
      if (parent_type(child->second.type) != n.type) return where + " links across type levels";
    }
    for (NodeId p : n.parents) {
      auto parent = nodes_.find(p);
      if (parent == nodes_.end()) return where + " has a dangling parent";
      if (!parent->second.children.contains(id)) return where + " has an asymmetric parent edge";
    }
    auto expected = parent_type(n.type);
    if (!expected && !n.parents.empty()) return where + " has parents";
    if (expected && n.parents.empty()) return where + " has no parent";
    if ((n.type == NodeType::Subdomain || n.type == NodeType::Webpage) && n.parents.size() != 1)
      return where + " must have exactly one parent";
  }
  if (websites != 1) return "graph '" + key_ + "' must have exactly one website node";
  if (index_.size() != nodes_.size()) return "graph '" + key_ + "' index out of sync";
  return {};
}

// ---------------------------------------------------------------------------

UpdateDelta MetadataRepository::update(const PageVisit& visit) {
  const std::string key = website_key(visit.main.url);
  const std::string host = url_host(visit.main.url);
  auto it = graphs_.find(key);
  if (it == graphs_.end()) it = graphs_.emplace(key, ResourceGraph(key)).first;
  ResourceGraph& g = it->second;
  const Timestamp ts = visit.timestamp;

  UpdateDelta delta;
  auto touch = [&](NodeType type, std::string_view name, ResourceKind kind) {
    auto [id, added] = g.touch(type, name, kind, ts);
    delta.nodes_added += added ? 1 : 0;
    ++delta.nodes_touched;
    return id;
  };
  // The website node exists from construction; it still counts as touched.
  auto site = touch(NodeType::Website, key, ResourceKind::Other);
  if (g.node(site).n_visits == 1 && delta.nodes_added == 0) ++delta.nodes_added;
  auto sub = touch(NodeType::Subdomain, host, ResourceKind::Other);
  g.link(site, sub, ts);
  auto page = touch(NodeType::Webpage, visit.main.url, ResourceKind::Html);
  g.link(sub, page, ts);
  for (const auto& r : visit.subresources) {
    auto res = touch(NodeType::Subresource, r.url, r.kind);
    g.link(page, res, ts);
  }
  return delta;
}

std::size_t MetadataRepository::trim(Timestamp now, int max_age_days) {
  const Timestamp max_age = static_cast<Timestamp>(max_age_days) * kSecondsPerDay;
  auto stale = [&](Timestamp t) { return now - t > max_age; };
  std::size_t removed = 0;
  for (auto it = graphs_.begin(); it != graphs_.end();) {
    ResourceGraph& g = it->second;
    std::vector<NodeId> doomed;
    std::vector<std::pair<NodeId, NodeId>> stale_edges;
    for (const auto& [id, n] : g.nodes()) {
      if ((n.type == NodeType::Webpage || n.type == NodeType::Subresource) && stale(n.last_visit)) {
        doomed.push_back(id);
      } else if (n.type == NodeType::Webpage) {
        for (NodeId c : n.children)
          if (auto seen = g.edge_last_seen(id, c); seen && stale(*seen)) stale_edges.emplace_back(id, c);
      }
    }
    for (NodeId id : doomed) g.remove(id);
    for (auto [p, c] : stale_edges)
      if (g.nodes().contains(p) && g.nodes().contains(c)) g.unlink(p, c);
    removed += doomed.size();

    // Cascade: orphaned subresources, then empty subdomains.
    std::vector<NodeId> orphans;
    for (const auto& [id, n] : g.nodes()) {
      if (n.type == NodeType::Subresource && n.parents.empty()) orphans.push_back(id);
      if (n.type == NodeType::Subdomain && n.children.empty()) orphans.push_back(id);
    }
    for (NodeId id : orphans) g.remove(id);
    removed += orphans.size();

    if (g.node(g.website()).children.empty()) {
      removed += g.nodes().size();
      it = graphs_.erase(it);
    } else {
      ++it;
    }
  }
  return removed;
}

const GraphNode* MetadataRepository::get_webpage_node(std::string_view url) const {
  const std::string normalized = normalize_url(url);
  const ResourceGraph* g = graph_for_url(normalized);
  if (!g) return nullptr;
  auto id = g->find(NodeType::Webpage, normalized);
  return id ? &g->node(*id) : nullptr;
}

const GraphNode* MetadataRepository::get_subdomain_node(std::string_view url) const {
  const ResourceGraph* g = graph_for_url(url);
  if (!g) return nullptr;
  auto id = g->find(NodeType::Subdomain, url_host(url));
  return id ? &g->node(*id) : nullptr;
}

const ResourceGraph* MetadataRepository::graph(std::string_view key) const {
  auto it = graphs_.find(key);
  return it == graphs_.end() ? nullptr : &it->second;
}

const ResourceGraph* MetadataRepository::graph_for_url(std::string_view url) const {
  return graph(website_key(url));
}

void MetadataRepository::put(ResourceGraph graph) {
  std::string key = graph.website_key();
  graphs_.insert_or_assign(std::move(key), std::move(graph));
}

// ---------------------------------------------------------------------------
// Persistence. Little-endian, length-prefixed:
//   "SLRG" u32 version u32 n_graphs
//   per graph: str key u32 n_nodes {u8 type u8 kind str name i64 last u64 visits}*
//              u32 n_edges {u32 parent u32 child i64 last_seen}*
//   "END."

namespace {

constexpr char kMagic[4] = {'S', 'L', 'R', 'G'};
constexpr char kTrailer[4] = {'E', 'N', 'D', '.'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  template <typename T>
  void num(T v) {
    unsigned char b[sizeof(T)];
    auto u = static_cast<std::make_unsigned_t<T>>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    raw(b, sizeof(T));
  }
  void str(std::string_view s) {
    num<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  void raw(void* p, std::size_t n) {
    if (in_.size() - pos_ < n) throw CorruptRepository("repository file is truncated");
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T num() {
    unsigned char b[sizeof(T)];
    raw(b, sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      u |= static_cast<std::make_unsigned_t<T>>(b[i]) << (8 * i);
    return static_cast<T>(u);
  }
  std::string str() {
    auto n = num<std::uint32_t>();
    if (in_.size() - pos_ < n) throw CorruptRepository("repository file is truncated");
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_repo(const MetadataRepository& repo) {
  Writer w;
  w.raw(kMagic, 4);
  w.num<std::uint32_t>(kFormatVersion);
  w.num<std::uint32_t>(static_cast<std::uint32_t>(repo.graphs().size()));
  for (const auto& [key, g] : repo.graphs()) {
    w.str(key);
    std::map<NodeId, std::uint32_t> local;
    w.num<std::uint32_t>(static_cast<std::uint32_t>(g.nodes().size()));
    std::uint32_t edges = 0;
    for (const auto& [id, n] : g.nodes()) {
      local[id] = static_cast<std::uint32_t>(local.size());
      w.num<std::uint8_t>(static_cast<std::uint8_t>(n.type));
      w.num<std::uint8_t>(static_cast<std::uint8_t>(n.kind));
      w.str(n.name);
      w.num<std::int64_t>(n.last_visit);
      w.num<std::uint64_t>(n.n_visits);
      edges += static_cast<std::uint32_t>(n.children.size());
    }
    w.num<std::uint32_t>(edges);
    for (const auto& [id, n] : g.nodes()) {
      for (NodeId c : n.children) {
        w.num<std::uint32_t>(local.at(id));
        w.num<std::uint32_t>(local.at(c));
        w.num<std::int64_t>(g.edge_last_seen(id, c).value_or(0));
      }
    }
  }
  w.raw(kTrailer, 4);
  return w.take();
}

MetadataRepository deserialize_repo(std::string_view bytes) {
  Reader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw CorruptRepository("not a repository file");
  auto version = r.num<std::uint32_t>();
  if (version != kFormatVersion)
    throw CorruptRepository("unsupported repository version " + std::to_string(version));
  MetadataRepository repo;
  auto n_graphs = r.num<std::uint32_t>();
  for (std::uint32_t gi = 0; gi < n_graphs; ++gi) {
    std::string key = r.str();
    if (repo.graph(key)) throw CorruptRepository("duplicate website '" + key + "'");
    ResourceGraph g(key);
    std::vector<NodeId> ids;
    auto n_nodes = r.num<std::uint32_t>();
    std::size_t websites = 0;
    for (std::uint32_t i = 0; i < n_nodes; ++i) {
      GraphNode n;
      auto type = r.num<std::uint8_t>();
      auto kind = r.num<std::uint8_t>();
      if (type > static_cast<std::uint8_t>(NodeType::Subresource) ||
          kind > static_cast<std::uint8_t>(ResourceKind::Other))
        throw CorruptRepository("invalid node type or kind in '" + key + "'");
      n.type = static_cast<NodeType>(type);
      n.kind = static_cast<ResourceKind>(kind);
      n.name = r.str();
      n.last_visit = r.num<std::int64_t>();
      n.n_visits = r.num<std::uint64_t>();
      if (n.type == NodeType::Website) {
        if (++websites > 1 || n.name != key)
          throw CorruptRepository("graph '" + key + "' has a bad website node");
      } else if (g.find(n.type, n.name)) {
        throw CorruptRepository("duplicate node '" + n.name + "' in '" + key + "'");
      }
      ids.push_back(g.restore(std::move(n)));
    }
    if (websites != 1) throw CorruptRepository("graph '" + key + "' has no website node");
    auto n_edges = r.num<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_edges; ++i) {
      auto p = r.num<std::uint32_t>();
      auto c = r.num<std::uint32_t>();
      auto seen = r.num<std::int64_t>();
      if (p >= ids.size() || c >= ids.size())
        throw CorruptRepository("edge endpoint out of range in '" + key + "'");
      g.restore_edge(ids[p], ids[c], seen);
    }
    if (auto err = g.check_invariants(); !err.empty()) throw CorruptRepository(err);
    repo.put(std::move(g));
  }
  char trailer[4];
  r.raw(trailer, 4);
  if (std::memcmp(trailer, kTrailer, 4) != 0 || !r.done())
    throw CorruptRepository("repository file has a bad trailer");
  return repo;
}

void save_repo(const MetadataRepository& repo, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write repository " + path.string());
  auto bytes = serialize_repo(repo);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

MetadataRepository load_repo(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open repository " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize_repo(buf.str());
}

RepoStats repo_stats(const MetadataRepository& repo) {
  RepoStats s;
  s.n_websites = repo.graphs().size();
  for (const auto& [key, g] : repo.graphs()) {
    for (const auto& [id, n] : g.nodes()) {
      switch (n.type) {
        case NodeType::Website: break;
        case NodeType::Subdomain: ++s.n_subdomains; break;
        case NodeType::Webpage: ++s.n_webpages; break;
        case NodeType::Subresource: ++s.n_subresources; break;
      }
    }
  }
  s.serialized_size_bytes = repo.empty() ? 0 : serialize_repo(repo).size();
  return s;
}

namespace {

using NodeSig = std::tuple<int, std::string, int, Timestamp, std::uint64_t>;
using EdgeSig = std::tuple<int, std::string, int, std::string, Timestamp>;

std::pair<std::set<NodeSig>, std::set<EdgeSig>> signature(const ResourceGraph& g, bool counts) {
  std::set<NodeSig> nodes;
  std::set<EdgeSig> edges;
  for (const auto& [id, n] : g.nodes()) {
    nodes.emplace(static_cast<int>(n.type), n.name, static_cast<int>(n.kind), n.last_visit,
                  counts ? n.n_visits : 0);
    for (NodeId c : n.children) {
      const GraphNode& child = g.node(c);
      edges.emplace(static_cast<int>(n.type), n.name, static_cast<int>(child.type), child.name,
                    g.edge_last_seen(id, c).value_or(0));
    }
  }
  return {std::move(nodes), std::move(edges)};
}

}  // namespace

bool structurally_equal(const MetadataRepository& a, const MetadataRepository& b,
                        bool compare_counts) {
  if (a.graphs().size() != b.graphs().size()) return false;
  for (const auto& [key, ga] : a.graphs()) {
    const ResourceGraph* gb = b.graph(key);
    if (!gb || signature(ga, compare_counts) != signature(*gb, compare_counts)) return false;
  }
  return true;
}

}  // namespace specload
