#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "credgraph/errors.hpp"

namespace credgraph {

// ---------------------------------------------------------------------------
// Typed node/edge model for the credibility graph: website domains, social
// media users, and dredge words, connected by four relations.
// ---------------------------------------------------------------------------

enum class NodeType : std::uint8_t { Domain = 0, User = 1, Dredge = 2 };

/// phi1: domain->domain backlink, phi2: user->domain mention,
/// phi3: user->dredge usage, phi4: dredge->domain SERP containment.
enum class EdgeType : std::uint8_t { Phi1 = 0, Phi2 = 1, Phi3 = 2, Phi4 = 3 };

constexpr int kNodeTypeCount = 3;
constexpr int kEdgeTypeCount = 4;
constexpr int kAttributeCount = 23;

constexpr NodeType edge_src_type(EdgeType t) {
  constexpr NodeType src[kEdgeTypeCount] = {NodeType::Domain, NodeType::User, NodeType::User,
                                            NodeType::Dredge};
  return src[static_cast<int>(t)];
}

constexpr NodeType edge_dst_type(EdgeType t) {
  constexpr NodeType dst[kEdgeTypeCount] = {NodeType::Domain, NodeType::Domain, NodeType::Dredge,
                                            NodeType::Domain};
  return dst[static_cast<int>(t)];
}

std::string_view to_string(NodeType t);
std::string_view to_string(EdgeType t);
NodeType node_type_from_string(std::string_view s);
EdgeType edge_type_from_string(std::string_view s);

enum class BinaryLabel : std::uint8_t { Reliable = 0, Unreliable = 1 };
enum class SplitTag : std::uint8_t { Train = 0, Val = 1, Test = 2, Unlabeled = 3 };

std::string_view to_string(BinaryLabel l);
std::string_view to_string(SplitTag s);

/// A website with its 23 log-normalized SEO attributes and (when labeled) a
/// continuous reliability score in [0,1] plus the derived binary label.
struct DomainRecord {
  std::string id;
  std::vector<double> attributes;  // empty, or exactly kAttributeCount values
  std::optional<double> reliability_score;
  std::optional<BinaryLabel> label;  // present iff reliability_score present
  std::optional<SplitTag> split;
};

struct UserRecord {
  std::string id;
  std::vector<double> features;  // empty until a feature source is attached
};

struct DredgeWordRecord {
  std::string phrase;
  std::vector<double> embedding;
  std::vector<std::string> target_domains;  // labeled domains the phrase ranks for
};

struct Edge {
  std::uint32_t src;
  std::uint32_t dst;
  EdgeType type;
  std::int64_t weight;  // positive
};

/// Immutable heterogeneous graph. Node ids are unique across all types;
/// every edge's endpoints match its relation signature; per-relation forward
/// and reverse CSR indexes are exact transposes of each other.
class HeteroGraph {
 public:
  struct Adjacency {
    // CSR over global node ids; offsets has node_count()+1 entries.
    std::vector<std::int64_t> offsets;
    std::vector<std::uint32_t> neighbors;
    std::vector<std::int64_t> weights;
  };

  std::size_t node_count() const { return types_.size(); }
  std::size_t node_count(NodeType t) const { return by_type_[static_cast<int>(t)].size(); }
  std::size_t edge_count() const { return edges_.size(); }
  std::size_t edge_count(EdgeType t) const;

  std::optional<std::uint32_t> find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id).has_value(); }
  const std::string& id_of(std::uint32_t node) const { return ids_[node]; }
  NodeType type_of(std::uint32_t node) const { return types_[node]; }

  /// Global ids of all nodes of one type, in insertion order.
  const std::vector<std::uint32_t>& nodes_of(NodeType t) const {
    return by_type_[static_cast<int>(t)];
  }
  const std::vector<Edge>& edges() const { return edges_; }

  /// Out-neighbors indexed by source node.
  const Adjacency& forward(EdgeType t) const { return forward_[static_cast<int>(t)]; }
  /// In-neighbors indexed by destination node.
  const Adjacency& reverse(EdgeType t) const { return reverse_[static_cast<int>(t)]; }

  const DomainRecord& domain(std::uint32_t node) const;
  const UserRecord& user(std::uint32_t node) const;
  const DredgeWordRecord& dredge(std::uint32_t node) const;

  /// Count of phi1 self-loops (a domain backlinking itself); retained in the
  /// store and surfaced in snapshot manifests.
  std::size_t self_loop_count() const;

 private:
  friend class GraphBuilder;

  std::vector<std::string> ids_;
  std::vector<NodeType> types_;
  std::vector<std::uint32_t> record_index_;  // node -> index into its typed record store
  std::array<std::vector<std::uint32_t>, kNodeTypeCount> by_type_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<DomainRecord> domains_;
  std::vector<UserRecord> users_;
  std::vector<DredgeWordRecord> dredges_;
  std::vector<Edge> edges_;
  std::array<Adjacency, kEdgeTypeCount> forward_;
  std::array<Adjacency, kEdgeTypeCount> reverse_;
};

/// Single-writer construction; the result is immutable and safe to read
/// concurrently. Duplicate (src, dst, type) edges accumulate weight.
class GraphBuilder {
 public:
  std::uint32_t add_domain(DomainRecord record);
  std::uint32_t add_user(UserRecord record);
  std::uint32_t add_dredge(DredgeWordRecord record);
  bool has_node(std::string_view id) const { return index_.count(std::string(id)) > 0; }

  void add_edge(std::string_view src_id, std::string_view dst_id, EdgeType type,
                std::int64_t weight = 1);

  /// Validates invariants and freezes the graph.
  HeteroGraph build();

 private:
  std::uint32_t add_node(std::string id, NodeType type, std::uint32_t record_index);

  std::vector<std::string> ids_;
  std::vector<NodeType> types_;
  std::vector<std::uint32_t> record_index_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<DomainRecord> domains_;
  std::vector<UserRecord> users_;
  std::vector<DredgeWordRecord> dredges_;
  std::vector<Edge> edges_;
  // per edge type, (src << 32 | dst) -> edges_ index
  std::array<std::unordered_map<std::uint64_t, std::size_t>, kEdgeTypeCount> edge_slot_;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Default principal-component threshold: scores below it are unreliable
/// (the bottom two quintiles of the released label distribution).
constexpr double kDefaultBinarizeThreshold = 0.5162;

/// Maps a continuous reliability score to a binary label. With
/// `boundary_reliable` (the default), a score exactly equal to the threshold
/// is reliable, i.e. unreliable means score < threshold.
BinaryLabel binarize_label(double score, double threshold = kDefaultBinarizeThreshold,
                           bool boundary_reliable = true);

/// Set union of nodes and edges. Nodes shared by both inputs must agree on
/// type (and on any attached records). An edge carried identically by both
/// inputs is a single set element; distinct weight observations for the same
/// (src, dst, type) accumulate. Hence union with an identical graph is an
/// exact identity, weights included.
HeteroGraph graph_union(const HeteroGraph& a, const HeteroGraph& b);

struct LabeledId {
  std::string id;
  BinaryLabel label;
};

struct Splits {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

/// Label-stratified split, deterministic under `seed`. Per-class counts are
/// rounded to the requested ratios; the three splits partition the input
/// exactly.
Splits stratified_split(const std::vector<LabeledId>& labeled, std::array<double, 3> ratios,
                        std::uint64_t seed);

enum class AssortativityMode {
  Full,           // unlabeled endpoints form their own category
  LabeledInduced  // edges with any unlabeled endpoint are dropped first
};

/// Newman's nominal attribute assortativity over one relation, computed on
/// the undirected view (each edge counted in both orientations). Throws
/// DataError when no qualifying edges exist or the statistic is undefined
/// (all endpoints in a single category).
double label_assortativity(const HeteroGraph& g, EdgeType type, AssortativityMode mode);

// ---------------------------------------------------------------------------
// Snapshot serialization: a directory of typed node and edge tables plus a
// manifest (counts, threshold/seed, self-loop flag). See docs/formats.md.
// ---------------------------------------------------------------------------

struct SnapshotMeta {
  double binarize_threshold = kDefaultBinarizeThreshold;
  bool boundary_reliable = true;
  std::uint64_t seed = 0;
  std::string variant;  // graph variant tag, e.g. "E_domains_users"
};

void save_snapshot(const HeteroGraph& g, const std::filesystem::path& dir,
                   const SnapshotMeta& meta);

struct LoadedSnapshot {
  HeteroGraph graph;
  SnapshotMeta meta;
};

LoadedSnapshot load_snapshot(const std::filesystem::path& dir);

}  // namespace credgraph
