#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>

#include "specload/trace.hpp"

namespace specload {

using NodeId = std::uint64_t;

enum class NodeType { Website, Subdomain, Webpage, Subresource };

std::string_view to_string(NodeType type);

struct GraphNode {
  NodeType type = NodeType::Website;
  // Website key, subdomain host, or normalized URL.
  std::string name;
  ResourceKind kind = ResourceKind::Other;
  Timestamp last_visit = 0;
  std::uint64_t n_visits = 0;
  std::set<NodeId> parents;
  std::set<NodeId> children;
};

// One website's resource graph: Website -> Subdomain -> Webpage ->
// Subresource. Subresources discovered transitively (by scripts or
// stylesheets) hang directly off the page that needed them.
class ResourceGraph {
 public:
  explicit ResourceGraph(std::string website_key);

  const std::string& website_key() const { return key_; }
  NodeId website() const { return website_; }
  const GraphNode& node(NodeId id) const { return nodes_.at(id); }
  const std::map<NodeId, GraphNode>& nodes() const { return nodes_; }

  std::optional<NodeId> find(NodeType type, std::string_view name) const;

  // Last visit that exercised a Webpage -> Subresource edge.
  std::optional<Timestamp> edge_last_seen(NodeId page, NodeId resource) const;

  // Creates the node or bumps its visit count and last_visit. Returns the
  // id and whether the node was created.
  std::pair<NodeId, bool> touch(NodeType type, std::string_view name, ResourceKind kind,
                                Timestamp when);
  void link(NodeId parent, NodeId child, Timestamp when);
  void unlink(NodeId parent, NodeId child);
  void remove(NodeId id);

  // Restores a node verbatim; used when loading a saved repository.
  NodeId restore(GraphNode node);
  void restore_edge(NodeId parent, NodeId child, Timestamp last_seen);

  // Description of the first violated structural invariant, or empty.
  std::string check_invariants() const;

 private:
  using Key = std::pair<NodeType, std::string>;

  std::string key_;
  NodeId website_ = 0;
  NodeId next_id_ = 0;
  std::map<NodeId, GraphNode> nodes_;
  std::map<Key, NodeId> index_;
  std::map<std::pair<NodeId, NodeId>, Timestamp> edge_seen_;
};

struct UpdateDelta {
  std::size_t nodes_added = 0;
  std::size_t nodes_touched = 0;
};

// Key-value store from website key to that website's resource graph.
class MetadataRepository {
 public:
  // Records a finished page load. Re-applying a visit adds no nodes.
  // Throws MalformedUrl.
  UpdateDelta update(const PageVisit& visit);

  // Drops pages and subresources not visited within `max_age_days` of
  // `now`, along with edges not exercised in that window, then any
  // subdomains and websites left without pages. Returns the number of nodes
  // removed.
  std::size_t trim(Timestamp now, int max_age_days = 30);

  const GraphNode* get_webpage_node(std::string_view url) const;
  const GraphNode* get_subdomain_node(std::string_view url) const;

  const ResourceGraph* graph(std::string_view website_key) const;
  const ResourceGraph* graph_for_url(std::string_view url) const;
  const std::map<std::string, ResourceGraph, std::less<>>& graphs() const { return graphs_; }
  bool empty() const { return graphs_.empty(); }

  // Used by the loader; replaces any graph with the same key.
  void put(ResourceGraph graph);

 private:
  std::map<std::string, ResourceGraph, std::less<>> graphs_;
};

struct RepoStats {
  std::size_t n_websites = 0;
  std::size_t n_subdomains = 0;
  std::size_t n_webpages = 0;
  std::size_t n_subresources = 0;
  std::size_t serialized_size_bytes = 0;
};

RepoStats repo_stats(const MetadataRepository& repo);

// Versioned binary format. Node ids are renumbered on load; loading
// validates every graph invariant and throws CorruptRepository otherwise.
std::string serialize_repo(const MetadataRepository& repo);
MetadataRepository deserialize_repo(std::string_view bytes);
void save_repo(const MetadataRepository& repo, const std::filesystem::path& path);
MetadataRepository load_repo(const std::filesystem::path& path);

// Id-independent comparison: node identities, kinds, last visits and edges.
// Visit counts are compared only when `compare_counts` is set.
bool structurally_equal(const MetadataRepository& a, const MetadataRepository& b,
                        bool compare_counts = false);

}  // namespace specload
