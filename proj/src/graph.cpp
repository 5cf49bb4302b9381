#include "credgraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "credgraph/rng.hpp"
#include "credgraph/table.hpp"

#include <nlohmann/json.hpp>

namespace credgraph {

using json = nlohmann::ordered_json;

std::string_view to_string(NodeType t) {
  switch (t) {
    case NodeType::Domain: return "domain";
    case NodeType::User: return "user";
    case NodeType::Dredge: return "dredge";
  }
  return "?";
}

std::string_view to_string(EdgeType t) {
  switch (t) {
    case EdgeType::Phi1: return "phi1";
    case EdgeType::Phi2: return "phi2";
    case EdgeType::Phi3: return "phi3";
    case EdgeType::Phi4: return "phi4";
  }
  return "?";
}

std::string_view to_string(BinaryLabel l) {
  return l == BinaryLabel::Reliable ? "reliable" : "unreliable";
}

std::string_view to_string(SplitTag s) {
  switch (s) {
    case SplitTag::Train: return "train";
    case SplitTag::Val: return "val";
    case SplitTag::Test: return "test";
    case SplitTag::Unlabeled: return "unlabeled";
  }
  return "?";
}

NodeType node_type_from_string(std::string_view s) {
  if (s == "domain") return NodeType::Domain;
  if (s == "user") return NodeType::User;
  if (s == "dredge") return NodeType::Dredge;
  throw SchemaError("unknown node type: " + std::string(s));
}

EdgeType edge_type_from_string(std::string_view s) {
  if (s == "phi1") return EdgeType::Phi1;
  if (s == "phi2") return EdgeType::Phi2;
  if (s == "phi3") return EdgeType::Phi3;
  if (s == "phi4") return EdgeType::Phi4;
  throw SchemaError("unknown edge type: " + std::string(s));
}

// ---------------------------------------------------------------------------
// HeteroGraph accessors
// ---------------------------------------------------------------------------

std::size_t HeteroGraph::edge_count(EdgeType t) const {
  return forward_[static_cast<int>(t)].neighbors.size();
}

std::optional<std::uint32_t> HeteroGraph::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const DomainRecord& HeteroGraph::domain(std::uint32_t node) const {
  if (types_[node] != NodeType::Domain) throw SchemaError("node is not a domain: " + ids_[node]);
  return domains_[record_index_[node]];
}

const UserRecord& HeteroGraph::user(std::uint32_t node) const {
  if (types_[node] != NodeType::User) throw SchemaError("node is not a user: " + ids_[node]);
  return users_[record_index_[node]];
}

const DredgeWordRecord& HeteroGraph::dredge(std::uint32_t node) const {
  if (types_[node] != NodeType::Dredge) throw SchemaError("node is not a dredge word: " + ids_[node]);
  return dredges_[record_index_[node]];
}

std::size_t HeteroGraph::self_loop_count() const {
  std::size_t n = 0;
  for (const Edge& e : edges_)
    if (e.type == EdgeType::Phi1 && e.src == e.dst) ++n;
  return n;
}

// ---------------------------------------------------------------------------
// GraphBuilder
// ---------------------------------------------------------------------------

std::uint32_t GraphBuilder::add_node(std::string id, NodeType type, std::uint32_t record_index) {
  if (id.empty()) throw SchemaError("empty node id");
  auto [it, inserted] = index_.emplace(id, static_cast<std::uint32_t>(ids_.size()));
  if (!inserted) {
    if (types_[it->second] != type)
      throw SchemaError("node id '" + id + "' already present with type " +
                        std::string(to_string(types_[it->second])));
    throw SchemaError("duplicate node id: " + id);
  }
  ids_.push_back(std::move(id));
  types_.push_back(type);
  record_index_.push_back(record_index);
  return it->second;
}

std::uint32_t GraphBuilder::add_domain(DomainRecord record) {
  if (!record.attributes.empty() && record.attributes.size() != kAttributeCount)
    throw SchemaError("domain '" + record.id + "': attribute vector must have " +
                      std::to_string(kAttributeCount) + " entries, got " +
                      std::to_string(record.attributes.size()));
  if (record.label.has_value() != record.reliability_score.has_value())
    throw SchemaError("domain '" + record.id + "': binary label present iff reliability score present");
  std::uint32_t node = add_node(record.id, NodeType::Domain,
                                static_cast<std::uint32_t>(domains_.size()));
  domains_.push_back(std::move(record));
  return node;
}

std::uint32_t GraphBuilder::add_user(UserRecord record) {
  std::uint32_t node = add_node(record.id, NodeType::User, static_cast<std::uint32_t>(users_.size()));
  users_.push_back(std::move(record));
  return node;
}

std::uint32_t GraphBuilder::add_dredge(DredgeWordRecord record) {
  if (record.phrase.empty()) throw SchemaError("dredge word phrase must be non-empty");
  if (record.target_domains.empty())
    throw SchemaError("dredge word '" + record.phrase + "' has no associated target domain");
  std::uint32_t node = add_node(record.phrase, NodeType::Dredge,
                                static_cast<std::uint32_t>(dredges_.size()));
  dredges_.push_back(std::move(record));
  return node;
}

void GraphBuilder::add_edge(std::string_view src_id, std::string_view dst_id, EdgeType type,
                            std::int64_t weight) {
  if (weight <= 0) throw SchemaError("edge weight must be a positive integer");
  auto src_it = index_.find(std::string(src_id));
  auto dst_it = index_.find(std::string(dst_id));
  if (src_it == index_.end()) throw SchemaError("edge references unknown node: " + std::string(src_id));
  if (dst_it == index_.end()) throw SchemaError("edge references unknown node: " + std::string(dst_id));
  std::uint32_t src = src_it->second, dst = dst_it->second;
  if (types_[src] != edge_src_type(type) || types_[dst] != edge_dst_type(type))
    throw SchemaError("edge type " + std::string(to_string(type)) + " expects " +
                      std::string(to_string(edge_src_type(type))) + "->" +
                      std::string(to_string(edge_dst_type(type))) + ", got " +
                      std::string(to_string(types_[src])) + "->" +
                      std::string(to_string(types_[dst])));
  std::uint64_t key = (static_cast<std::uint64_t>(src) << 32) | dst;
  auto& slots = edge_slot_[static_cast<int>(type)];
  auto [it, inserted] = slots.emplace(key, edges_.size());
  if (inserted) {
    edges_.push_back(Edge{src, dst, type, weight});
  } else {
    edges_[it->second].weight += weight;
  }
}

namespace {

HeteroGraph::Adjacency build_csr(std::size_t n, const std::vector<Edge>& edges, EdgeType type,
                                 bool by_dst) {
  HeteroGraph::Adjacency adj;
  adj.offsets.assign(n + 1, 0);
  for (const Edge& e : edges)
    if (e.type == type) ++adj.offsets[(by_dst ? e.dst : e.src) + 1];
  for (std::size_t i = 0; i < n; ++i) adj.offsets[i + 1] += adj.offsets[i];
  adj.neighbors.resize(adj.offsets[n]);
  adj.weights.resize(adj.offsets[n]);
  std::vector<std::int64_t> cursor(adj.offsets.begin(), adj.offsets.end() - 1);
  for (const Edge& e : edges) {
    if (e.type != type) continue;
    std::uint32_t key = by_dst ? e.dst : e.src;
    std::uint32_t val = by_dst ? e.src : e.dst;
    adj.neighbors[cursor[key]] = val;
    adj.weights[cursor[key]] = e.weight;
    ++cursor[key];
  }
  return adj;
}

}  // namespace

HeteroGraph GraphBuilder::build() {
  // stable edge order: by type, then source, then destination
  std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
    if (a.type != b.type) return a.type < b.type;
    if (a.src != b.src) return a.src < b.src;
    return a.dst < b.dst;
  });
  HeteroGraph g;
  g.ids_ = std::move(ids_);
  g.types_ = std::move(types_);
  g.record_index_ = std::move(record_index_);
  g.index_ = std::move(index_);
  g.domains_ = std::move(domains_);
  g.users_ = std::move(users_);
  g.dredges_ = std::move(dredges_);
  g.edges_ = std::move(edges_);
  for (std::size_t i = 0; i < g.ids_.size(); ++i)
    g.by_type_[static_cast<int>(g.types_[i])].push_back(static_cast<std::uint32_t>(i));
  for (int t = 0; t < kEdgeTypeCount; ++t) {
    g.forward_[t] = build_csr(g.ids_.size(), g.edges_, static_cast<EdgeType>(t), /*by_dst=*/false);
    g.reverse_[t] = build_csr(g.ids_.size(), g.edges_, static_cast<EdgeType>(t), /*by_dst=*/true);
  }
  // user feature dimensions must be uniform within one build
  std::size_t user_dim = 0;
  bool first = true;
  for (const auto& u : g.users_) {
    if (first) {
      user_dim = u.features.size();
      first = false;
    } else if (u.features.size() != user_dim) {
      throw SchemaError("user feature dimension must be uniform: '" + u.id + "' has " +
                        std::to_string(u.features.size()) + ", expected " + std::to_string(user_dim));
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// binarize_label
// ---------------------------------------------------------------------------

BinaryLabel binarize_label(double score, double threshold, bool boundary_reliable) {
  if (!(score >= 0.0 && score <= 1.0))
    throw DataError("reliability score out of [0,1]: " + format_double(score));
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw DataError("binarize threshold out of [0,1]: " + format_double(threshold));
  if (boundary_reliable) return score < threshold ? BinaryLabel::Unreliable : BinaryLabel::Reliable;
  return score <= threshold ? BinaryLabel::Unreliable : BinaryLabel::Reliable;
}

// ---------------------------------------------------------------------------
// graph_union
// ---------------------------------------------------------------------------

namespace {

bool same_domain_record(const DomainRecord& a, const DomainRecord& b) {
  return a.attributes == b.attributes && a.reliability_score == b.reliability_score &&
         a.label == b.label;
}

}  // namespace

HeteroGraph graph_union(const HeteroGraph& a, const HeteroGraph& b) {
  GraphBuilder builder;
  auto add_all_nodes = [&builder](const HeteroGraph& g, const HeteroGraph* other) {
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      auto node = static_cast<std::uint32_t>(i);
      const std::string& id = g.id_of(node);
      if (builder.has_node(id)) continue;
      switch (g.type_of(node)) {
        case NodeType::Domain: {
          DomainRecord rec = g.domain(node);
          if (other) {
            if (auto o = other->find(id)) {
              if (other->type_of(*o) != NodeType::Domain)
                throw SchemaError("conflicting node types for id '" + id + "'");
              if (!same_domain_record(rec, other->domain(*o)))
                throw SchemaError("conflicting domain records for id '" + id + "'");
            }
          }
          builder.add_domain(std::move(rec));
          break;
        }
        case NodeType::User: {
          if (other) {
            if (auto o = other->find(id)) {
              if (other->type_of(*o) != NodeType::User)
                throw SchemaError("conflicting node types for id '" + id + "'");
              if (other->user(*o).features != g.user(node).features)
                throw SchemaError("conflicting user features for id '" + id + "'");
            }
          }
          builder.add_user(g.user(node));
          break;
        }
        case NodeType::Dredge: {
          DredgeWordRecord rec = g.dredge(node);
          if (other) {
            if (auto o = other->find(id)) {
              if (other->type_of(*o) != NodeType::Dredge)
                throw SchemaError("conflicting node types for id '" + id + "'");
              const auto& orec = other->dredge(*o);
              if (!orec.embedding.empty() && !rec.embedding.empty() &&
                  orec.embedding != rec.embedding)
                throw SchemaError("conflicting dredge embeddings for '" + id + "'");
              if (rec.embedding.empty()) rec.embedding = orec.embedding;
              std::set<std::string> targets(rec.target_domains.begin(), rec.target_domains.end());
              targets.insert(orec.target_domains.begin(), orec.target_domains.end());
              rec.target_domains.assign(targets.begin(), targets.end());
            }
          }
          builder.add_dredge(std::move(rec));
          break;
        }
      }
    }
  };
  add_all_nodes(a, &b);
  add_all_nodes(b, nullptr);  // type conflicts already checked against a

  // Tuple-set union: an edge present identically in both inputs is one set
  // element; distinct weight observations for the same key accumulate.
  struct Key {
    std::string src, dst;
    EdgeType type;
    bool operator<(const Key& o) const {
      if (int c = src.compare(o.src); c != 0) return c < 0;
      if (int c = dst.compare(o.dst); c != 0) return c < 0;
      return type < o.type;
    }
  };
  std::map<Key, std::pair<std::optional<std::int64_t>, std::optional<std::int64_t>>> merged;
  for (const Edge& e : a.edges())
    merged[Key{a.id_of(e.src), a.id_of(e.dst), e.type}].first = e.weight;
  for (const Edge& e : b.edges())
    merged[Key{b.id_of(e.src), b.id_of(e.dst), e.type}].second = e.weight;
  for (const auto& [key, w] : merged) {
    std::int64_t weight;
    if (w.first && w.second)
      weight = (*w.first == *w.second) ? *w.first : *w.first + *w.second;
    else
      weight = w.first ? *w.first : *w.second;
    builder.add_edge(key.src, key.dst, key.type, weight);
  }
  return builder.build();
}

// ---------------------------------------------------------------------------
// stratified_split
// ---------------------------------------------------------------------------

Splits stratified_split(const std::vector<LabeledId>& labeled, std::array<double, 3> ratios,
                        std::uint64_t seed) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  for (double r : ratios)
    if (r < 0.0) throw ConfigError("split ratios must be non-negative");
  int active_splits = 0;
  for (double r : ratios)
    if (r > 0.0) ++active_splits;

  std::array<std::vector<std::string>, 2> by_class;
  for (const auto& item : labeled) by_class[static_cast<int>(item.label)].push_back(item.id);

  Splits out;
  Rng rng(Rng::derive(seed, "split"));
  for (auto& ids : by_class) {
    if (ids.empty()) continue;
    if (ids.size() < static_cast<std::size_t>(active_splits))
      throw ConfigError("class has fewer members (" + std::to_string(ids.size()) +
                        ") than active splits (" + std::to_string(active_splits) + ")");
    std::sort(ids.begin(), ids.end());  // input-order independence
    rng.shuffle(ids);
    auto n = static_cast<std::int64_t>(ids.size());
    auto n_train = static_cast<std::int64_t>(std::llround(static_cast<double>(n) * ratios[0]));
    auto n_val = static_cast<std::int64_t>(std::llround(static_cast<double>(n) * ratios[1]));
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);
    for (std::int64_t i = 0; i < n; ++i) {
      if (i < n_train)
        out.train.push_back(ids[i]);
      else if (i < n_train + n_val)
        out.val.push_back(ids[i]);
      else
        out.test.push_back(ids[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// label_assortativity
// ---------------------------------------------------------------------------

double label_assortativity(const HeteroGraph& g, EdgeType type, AssortativityMode mode) {
  // categories: 0 reliable, 1 unreliable, 2 unlabeled (Full mode only)
  auto category = [&g](std::uint32_t node) -> int {
    if (g.type_of(node) != NodeType::Domain) return 2;
    const auto& rec = g.domain(node);
    if (!rec.label) return 2;
    return rec.label == BinaryLabel::Reliable ? 0 : 1;
  };

  double e[3][3] = {};
  double total = 0.0;
  for (const Edge& edge : g.edges()) {
    if (edge.type != type) continue;
    int cs = category(edge.src), cd = category(edge.dst);
    if (mode == AssortativityMode::LabeledInduced && (cs == 2 || cd == 2)) continue;
    // undirected convention: each edge counted in both orientations
    e[cs][cd] += 1.0;
    e[cd][cs] += 1.0;
    total += 2.0;
  }
  if (total == 0.0)
    throw DataError("assortativity undefined: no qualifying edges for " +
                    std::string(to_string(type)));
  double trace = 0.0, ab = 0.0;
  for (int i = 0; i < 3; ++i) {
    double row = 0.0, col = 0.0;
    for (int j = 0; j < 3; ++j) {
      row += e[i][j] / total;
      col += e[j][i] / total;
    }
    trace += e[i][i] / total;
    ab += row * col;
  }
  if (std::abs(1.0 - ab) < 1e-15)
    throw DataError("assortativity undefined: all qualifying endpoints share one category");
  return (trace - ab) / (1.0 - ab);
}

// ---------------------------------------------------------------------------
// Snapshot serialization
// ---------------------------------------------------------------------------

namespace {

std::string join_targets(const std::vector<std::string>& targets) {
  std::string out;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (i) out += '|';
    out += targets[i];
  }
  return out;
}

std::vector<std::string> split_targets(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t bar = s.find('|', start);
    if (bar == std::string::npos) {
      if (start < s.size()) out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, bar - start));
    start = bar + 1;
  }
  return out;
}

SplitTag split_from_string(const std::string& s) {
  if (s == "train") return SplitTag::Train;
  if (s == "val") return SplitTag::Val;
  if (s == "test") return SplitTag::Test;
  if (s == "unlabeled") return SplitTag::Unlabeled;
  throw SchemaError("unknown split tag: " + s);
}

}  // namespace

void save_snapshot(const HeteroGraph& g, const std::filesystem::path& dir,
                   const SnapshotMeta& meta) {
  std::filesystem::create_directories(dir);

  Table domains;
  domains.header = {"id", "score", "label", "split"};
  for (int i = 0; i < kAttributeCount; ++i) domains.header.push_back("attr_" + std::to_string(i));
  bool any_attrs = false;
  for (std::uint32_t node : g.nodes_of(NodeType::Domain)) {
    const DomainRecord& rec = g.domain(node);
    if (!rec.attributes.empty()) any_attrs = true;
    std::vector<std::string> row = {
        rec.id,
        rec.reliability_score ? format_double(*rec.reliability_score) : "",
        rec.label ? std::string(to_string(*rec.label)) : "",
        rec.split ? std::string(to_string(*rec.split)) : "",
    };
    for (int i = 0; i < kAttributeCount; ++i)
      row.push_back(rec.attributes.empty() ? "" : format_double(rec.attributes[i]));
    domains.rows.push_back(std::move(row));
  }
  write_table(dir / "domains.tsv", domains);

  Table users;
  users.header = {"id", "dim", "values"};
  for (std::uint32_t node : g.nodes_of(NodeType::User)) {
    const UserRecord& rec = g.user(node);
    std::vector<std::string> row = {rec.id, std::to_string(rec.features.size())};
    for (double v : rec.features) row.push_back(format_double(v));
    users.rows.push_back(std::move(row));
  }
  write_table(dir / "users.tsv", users);

  Table dredge;
  dredge.header = {"phrase", "targets", "dim", "values"};
  for (std::uint32_t node : g.nodes_of(NodeType::Dredge)) {
    const DredgeWordRecord& rec = g.dredge(node);
    std::vector<std::string> row = {rec.phrase, join_targets(rec.target_domains),
                                    std::to_string(rec.embedding.size())};
    for (double v : rec.embedding) row.push_back(format_double(v));
    dredge.rows.push_back(std::move(row));
  }
  write_table(dir / "dredge.tsv", dredge);

  for (int t = 0; t < kEdgeTypeCount; ++t) {
    Table edges;
    edges.header = {"src", "dst", "weight"};
    for (const Edge& e : g.edges()) {
      if (static_cast<int>(e.type) != t) continue;
      edges.rows.push_back({g.id_of(e.src), g.id_of(e.dst), std::to_string(e.weight)});
    }
    write_table(dir / ("edges_" + std::string(to_string(static_cast<EdgeType>(t))) + ".tsv"), edges);
  }

  json manifest;
  manifest["format_version"] = 1;
  json counts;
  counts["domains"] = g.node_count(NodeType::Domain);
  counts["users"] = g.node_count(NodeType::User);
  counts["dredge_words"] = g.node_count(NodeType::Dredge);
  for (int t = 0; t < kEdgeTypeCount; ++t)
    counts[std::string(to_string(static_cast<EdgeType>(t)))] =
        g.edge_count(static_cast<EdgeType>(t));
  manifest["counts"] = counts;
  std::size_t n_rel = 0, n_unrel = 0, n_unlab = 0;
  for (std::uint32_t node : g.nodes_of(NodeType::Domain)) {
    const auto& rec = g.domain(node);
    if (!rec.label)
      ++n_unlab;
    else if (*rec.label == BinaryLabel::Reliable)
      ++n_rel;
    else
      ++n_unrel;
  }
  manifest["labels"] = {{"reliable", n_rel}, {"unreliable", n_unrel}, {"unlabeled", n_unlab}};
  manifest["binarize_threshold"] = meta.binarize_threshold;
  manifest["boundary_reliable"] = meta.boundary_reliable;
  manifest["seed"] = meta.seed;
  manifest["variant"] = meta.variant;
  manifest["has_domain_attributes"] = any_attrs;
  // labeled source domains can backlink themselves; such loops are retained
  manifest["phi1_self_loops"] = g.self_loop_count();

  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << "\n";
  if (!out) throw DataError("cannot write snapshot manifest in " + dir.string());
}

LoadedSnapshot load_snapshot(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("not a graph snapshot (missing manifest.json): " + dir.string());
  json manifest = json::parse(in, nullptr, true);
  if (manifest.value("format_version", 0) != 1)
    throw SchemaError("unsupported snapshot format_version in " + dir.string());

  GraphBuilder builder;
  auto dpath = dir / "domains.tsv";
  Table domains = read_table(dpath);
  std::size_t c_id = domains.column("id"), c_score = domains.column("score");
  std::size_t c_label = domains.column("label"), c_split = domains.column("split");
  std::size_t c_attr0 = domains.column("attr_0");
  for (std::size_t r = 0; r < domains.rows.size(); ++r) {
    const auto& row = domains.rows[r];
    DomainRecord rec;
    rec.id = row[c_id];
    if (!row[c_score].empty()) rec.reliability_score = parse_double(row[c_score], dpath, r + 2);
    if (!row[c_label].empty())
      rec.label = row[c_label] == "reliable" ? BinaryLabel::Reliable : BinaryLabel::Unreliable;
    if (!row[c_split].empty()) rec.split = split_from_string(row[c_split]);
    if (!row[c_attr0].empty()) {
      rec.attributes.resize(kAttributeCount);
      for (int i = 0; i < kAttributeCount; ++i)
        rec.attributes[i] = parse_double(row[c_attr0 + i], dpath, r + 2);
    }
    builder.add_domain(std::move(rec));
  }

  auto upath = dir / "users.tsv";
  Table users = read_table(upath);
  std::size_t u_id = users.column("id"), u_dim = users.column("dim");
  for (std::size_t r = 0; r < users.rows.size(); ++r) {
    const auto& row = users.rows[r];
    UserRecord rec;
    rec.id = row[u_id];
    auto dim = static_cast<std::size_t>(parse_int(row[u_dim], upath, r + 2));
    if (row.size() != 2 + dim) throw SchemaError(upath.string() + ": row has wrong value count");
    for (std::size_t i = 0; i < dim; ++i)
      rec.features.push_back(parse_double(row[2 + i], upath, r + 2));
    builder.add_user(std::move(rec));
  }

  auto qpath = dir / "dredge.tsv";
  Table dredge = read_table(qpath);
  std::size_t q_phrase = dredge.column("phrase"), q_targets = dredge.column("targets");
  std::size_t q_dim = dredge.column("dim");
  for (std::size_t r = 0; r < dredge.rows.size(); ++r) {
    const auto& row = dredge.rows[r];
    DredgeWordRecord rec;
    rec.phrase = row[q_phrase];
    rec.target_domains = split_targets(row[q_targets]);
    auto dim = static_cast<std::size_t>(parse_int(row[q_dim], qpath, r + 2));
    if (row.size() != 3 + dim) throw SchemaError(qpath.string() + ": row has wrong value count");
    for (std::size_t i = 0; i < dim; ++i)
      rec.embedding.push_back(parse_double(row[3 + i], qpath, r + 2));
    builder.add_dredge(std::move(rec));
  }

  for (int t = 0; t < kEdgeTypeCount; ++t) {
    auto type = static_cast<EdgeType>(t);
    auto epath = dir / ("edges_" + std::string(to_string(type)) + ".tsv");
    Table edges = read_table(epath);
    std::size_t e_src = edges.column("src"), e_dst = edges.column("dst");
    std::size_t e_w = edges.column("weight");
    for (std::size_t r = 0; r < edges.rows.size(); ++r) {
      const auto& row = edges.rows[r];
      builder.add_edge(row[e_src], row[e_dst], type, parse_int(row[e_w], epath, r + 2));
    }
  }

  LoadedSnapshot out{builder.build(), SnapshotMeta{}};
  out.meta.binarize_threshold = manifest.value("binarize_threshold", kDefaultBinarizeThreshold);
  out.meta.boundary_reliable = manifest.value("boundary_reliable", true);
  out.meta.seed = manifest.value("seed", std::uint64_t{0});
  out.meta.variant = manifest.value("variant", std::string{});
  return out;
}

}  // namespace credgraph
