#include "credgraph/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace credgraph {

using json = nlohmann::ordered_json;

FeatureSource feature_source_from_string(std::string_view s) {
  if (s == "attributes") return FeatureSource::Attributes;
  if (s == "positional") return FeatureSource::Positional;
  if (s == "text") return FeatureSource::Text;
  throw ConfigError("unknown feature source: " + std::string(s));
}

std::string_view to_string(FeatureSource s) {
  switch (s) {
    case FeatureSource::Attributes: return "attributes";
    case FeatureSource::Positional: return "positional";
    case FeatureSource::Text: return "text";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// ModelGraph construction
// ---------------------------------------------------------------------------

namespace {

class PositionalLookup {
 public:
  explicit PositionalLookup(const EmbeddingTable* table) : table_(table) {
    if (table_)
      for (std::size_t i = 0; i < table_->ids.size(); ++i) row_[table_->ids[i]] = i;
  }
  bool available() const { return table_ != nullptr; }
  const Eigen::MatrixXd* matrix() const { return table_ ? &table_->vectors : nullptr; }
  std::size_t dim() const { return table_->dim; }
  std::optional<std::size_t> row(const std::string& id) const {
    auto it = row_.find(id);
    if (it == row_.end()) return std::nullopt;
    return it->second;
  }

 private:
  const EmbeddingTable* table_;
  std::unordered_map<std::string, std::size_t> row_;
};

Matrix features_for_type(const HeteroGraph& g, NodeType type,
                         const std::vector<std::uint32_t>& nodes, FeatureSource source,
                         const FeatureSpec& spec, const PositionalLookup& positional) {
  const auto n = static_cast<Eigen::Index>(nodes.size());
  switch (source) {
    case FeatureSource::Attributes: {
      if (type != NodeType::Domain)
        throw ConfigError("attribute features are only defined for domain nodes");
      Matrix x(n, kAttributeCount);
      std::size_t missing = 0;
      std::string example;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto& rec = g.domain(nodes[i]);
        if (rec.attributes.empty()) {
          ++missing;
          if (example.empty()) example = rec.id;
          continue;
        }
        for (int d = 0; d < kAttributeCount; ++d) x(i, d) = rec.attributes[d];
      }
      if (missing > 0)
        throw DataError(std::to_string(missing) +
                        " domain nodes lack attribute vectors (e.g. '" + example + "')");
      return x;
    }
    case FeatureSource::Positional: {
      if (!positional.available())
        throw ConfigError("positional features requested but no embedding table provided");
      Matrix x(n, static_cast<Eigen::Index>(positional.dim()));
      for (Eigen::Index i = 0; i < n; ++i) {
        const std::string& id = g.id_of(nodes[i]);
        auto row = positional.row(id);
        if (!row)
          throw DataError("no positional embedding for node '" + id + "'");
        x.row(i) = positional.matrix()->row(static_cast<Eigen::Index>(*row));
      }
      return x;
    }
    case FeatureSource::Text: {
      // prefer vectors stored on the records; fall back to sidecar tables
      const VectorTable* sidecar =
          type == NodeType::User ? spec.user_text : type == NodeType::Dredge ? spec.dredge_text
                                                                             : nullptr;
      if (type == NodeType::Domain)
        throw ConfigError("text features are not supported for domain nodes");
      std::size_t dim = 0;
      auto vector_of = [&](std::uint32_t node) -> const std::vector<double>* {
        const std::vector<double>* v = nullptr;
        if (type == NodeType::User) {
          const auto& rec = g.user(node);
          if (!rec.features.empty()) v = &rec.features;
        } else {
          const auto& rec = g.dredge(node);
          if (!rec.embedding.empty()) v = &rec.embedding;
        }
        if (!v && sidecar) {
          auto it = sidecar->by_id.find(g.id_of(node));
          if (it != sidecar->by_id.end()) v = &it->second;
        }
        return v;
      };
      for (std::uint32_t node : nodes) {
        const auto* v = vector_of(node);
        if (!v)
          throw DataError("no text vector for node '" + g.id_of(node) + "'");
        if (dim == 0) dim = v->size();
        if (v->size() != dim)
          throw ShapeError("text vectors for type " + std::string(to_string(type)) +
                           " have inconsistent dimensions");
      }
      Matrix x(n, static_cast<Eigen::Index>(dim));
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto* v = vector_of(nodes[i]);
        for (std::size_t d = 0; d < dim; ++d) x(i, static_cast<Eigen::Index>(d)) = (*v)[d];
      }
      return x;
    }
  }
  throw ConfigError("unreachable feature source");
}

// CSR over local dst indices with mean (or weighted-mean) coefficients
RelationRef make_relation(const std::string& name, int src_type, int dst_type,
                          const std::vector<std::uint32_t>& dst_nodes,
                          const HeteroGraph::Adjacency& in_adj,
                          const std::vector<std::int32_t>& local_of_src, bool weighted) {
  RelationRef rel;
  rel.name = name;
  rel.src_type = src_type;
  rel.dst_type = dst_type;
  rel.offsets.assign(dst_nodes.size() + 1, 0);
  for (std::size_t i = 0; i < dst_nodes.size(); ++i) {
    std::uint32_t node = dst_nodes[i];
    rel.offsets[i + 1] = rel.offsets[i] + (in_adj.offsets[node + 1] - in_adj.offsets[node]);
  }
  rel.neighbors.resize(rel.offsets.back());
  rel.coeff.resize(rel.offsets.back());
  for (std::size_t i = 0; i < dst_nodes.size(); ++i) {
    std::uint32_t node = dst_nodes[i];
    auto begin = in_adj.offsets[node], end = in_adj.offsets[node + 1];
    double denom;
    if (weighted) {
      double sum = 0.0;
      for (auto k = begin; k < end; ++k) sum += static_cast<double>(in_adj.weights[k]);
      denom = sum;
    } else {
      denom = static_cast<double>(end - begin);
    }
    auto cursor = rel.offsets[i];
    for (auto k = begin; k < end; ++k, ++cursor) {
      rel.neighbors[cursor] = local_of_src[in_adj.neighbors[k]];
      rel.coeff[cursor] =
          weighted ? static_cast<double>(in_adj.weights[k]) / denom : 1.0 / denom;
    }
  }
  return rel;
}

std::vector<int> labels_of(const HeteroGraph& g, const std::vector<std::uint32_t>& nodes) {
  std::vector<int> labels(nodes.size(), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (g.type_of(nodes[i]) != NodeType::Domain) continue;
    const auto& rec = g.domain(nodes[i]);
    if (rec.label) labels[i] = static_cast<int>(*rec.label);
  }
  return labels;
}

}  // namespace

ModelGraph build_hetero_model_graph(const HeteroGraph& g, const FeatureSpec& spec,
                                    bool add_reverse, bool weighted_mean) {
  ModelGraph mg;
  PositionalLookup positional(spec.positional);

  std::vector<std::int32_t> type_block(kNodeTypeCount, -1);
  std::vector<std::int32_t> local_of(g.node_count(), -1);
  for (int t = 0; t < kNodeTypeCount; ++t) {
    auto type = static_cast<NodeType>(t);
    const auto& nodes = g.nodes_of(type);
    if (nodes.empty()) continue;
    TypeBlock block;
    block.name = std::string(to_string(type));
    block.globals = nodes;
    FeatureSource source = type == NodeType::Domain ? spec.domains
                           : type == NodeType::User ? spec.users
                                                    : spec.dredge;
    block.features = features_for_type(g, type, nodes, source, spec, positional);
    type_block[t] = static_cast<std::int32_t>(mg.types.size());
    for (std::size_t i = 0; i < nodes.size(); ++i)
      local_of[nodes[i]] = static_cast<std::int32_t>(i);
    mg.types.push_back(std::move(block));
  }
  if (type_block[static_cast<int>(NodeType::Domain)] < 0)
    throw ConfigError("graph has no domain nodes to supervise");
  mg.supervised_type = type_block[static_cast<int>(NodeType::Domain)];

  for (int t = 0; t < kEdgeTypeCount; ++t) {
    auto type = static_cast<EdgeType>(t);
    if (g.edge_count(type) == 0) continue;
    int src_block = type_block[static_cast<int>(edge_src_type(type))];
    int dst_block = type_block[static_cast<int>(edge_dst_type(type))];
    mg.relations.push_back(make_relation(std::string(to_string(type)), src_block, dst_block,
                                         mg.types[dst_block].globals, g.reverse(type), local_of,
                                         weighted_mean));
    // reverse relations for phi2..phi4 give user/dredge nodes layer-1 state
    if (add_reverse && type != EdgeType::Phi1) {
      mg.relations.push_back(make_relation("rev_" + std::string(to_string(type)), dst_block,
                                           src_block, mg.types[src_block].globals, g.forward(type),
                                           local_of, weighted_mean));
    }
  }

  mg.labels = labels_of(g, mg.supervised().globals);
  return mg;
}

ModelGraph build_homo_model_graph(const HeteroGraph& g, const FeatureSpec& spec,
                                  bool add_reverse, bool weighted_mean) {
  if (g.node_count() == 0) throw ConfigError("empty graph");
  ModelGraph mg;
  PositionalLookup positional(spec.positional);

  TypeBlock block;
  block.name = "node";
  block.globals.resize(g.node_count());
  for (std::size_t i = 0; i < g.node_count(); ++i)
    block.globals[i] = static_cast<std::uint32_t>(i);

  // per-node features by the node type's source; dimensions must agree
  std::array<Matrix, kNodeTypeCount> per_type;
  Eigen::Index dim = -1;
  for (int t = 0; t < kNodeTypeCount; ++t) {
    auto type = static_cast<NodeType>(t);
    const auto& nodes = g.nodes_of(type);
    if (nodes.empty()) continue;
    FeatureSource source = type == NodeType::Domain ? spec.domains
                           : type == NodeType::User ? spec.users
                                                    : spec.dredge;
    per_type[t] = features_for_type(g, type, nodes, source, spec, positional);
    if (dim < 0) dim = per_type[t].cols();
    if (per_type[t].cols() != dim)
      throw ShapeError("homogeneous graphs need one uniform feature dimension; " +
                       std::string(to_string(type)) + " features have dim " +
                       std::to_string(per_type[t].cols()) + ", expected " + std::to_string(dim));
  }
  block.features.resize(static_cast<Eigen::Index>(g.node_count()), dim);
  for (int t = 0; t < kNodeTypeCount; ++t) {
    const auto& nodes = g.nodes_of(static_cast<NodeType>(t));
    for (std::size_t i = 0; i < nodes.size(); ++i)
      block.features.row(nodes[i]) = per_type[t].row(static_cast<Eigen::Index>(i));
  }
  mg.types.push_back(std::move(block));
  mg.supervised_type = 0;

  // merge every edge type into one relation over the global index space
  HeteroGraph::Adjacency merged_in, merged_out;
  auto merge = [&g](bool by_dst) {
    HeteroGraph::Adjacency adj;
    adj.offsets.assign(g.node_count() + 1, 0);
    for (const Edge& e : g.edges()) ++adj.offsets[(by_dst ? e.dst : e.src) + 1];
    for (std::size_t i = 0; i < g.node_count(); ++i) adj.offsets[i + 1] += adj.offsets[i];
    adj.neighbors.resize(adj.offsets.back());
    adj.weights.resize(adj.offsets.back());
    std::vector<std::int64_t> cursor(adj.offsets.begin(), adj.offsets.end() - 1);
    for (const Edge& e : g.edges()) {
      std::uint32_t key = by_dst ? e.dst : e.src;
      adj.neighbors[cursor[key]] = by_dst ? e.src : e.dst;
      adj.weights[cursor[key]] = e.weight;
      ++cursor[key];
    }
    return adj;
  };
  merged_in = merge(true);
  std::vector<std::int32_t> identity(g.node_count());
  for (std::size_t i = 0; i < g.node_count(); ++i) identity[i] = static_cast<std::int32_t>(i);
  mg.relations.push_back(
      make_relation("edge", 0, 0, mg.types[0].globals, merged_in, identity, weighted_mean));
  if (add_reverse) {
    merged_out = merge(false);
    mg.relations.push_back(
        make_relation("rev_edge", 0, 0, mg.types[0].globals, merged_out, identity, weighted_mean));
  }

  mg.labels = labels_of(g, mg.types[0].globals);
  return mg;
}

void apply_split(ModelGraph& mg, const HeteroGraph& g, const Splits& splits) {
  std::unordered_map<std::string, int> local;
  const auto& block = mg.supervised();
  for (std::size_t i = 0; i < block.globals.size(); ++i)
    local[g.id_of(block.globals[i])] = static_cast<int>(i);
  auto fill = [&local](const std::vector<std::string>& ids, std::vector<int>& mask) {
    mask.clear();
    for (const auto& id : ids) {
      auto it = local.find(id);
      if (it == local.end()) throw DataError("split references unknown domain '" + id + "'");
      mask.push_back(it->second);
    }
    std::sort(mask.begin(), mask.end());
  };
  fill(splits.train, mg.train_mask);
  fill(splits.val, mg.val_mask);
  fill(splits.test, mg.test_mask);
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

SageLayer SageLayer::glorot(int in, int out, Rng& rng) {
  SageLayer layer;
  double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  auto fill = [&rng, limit](Matrix& m, int rows, int cols) {
    m.resize(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-limit, limit);
  };
  fill(layer.w_self, out, in);
  fill(layer.w_neigh, out, in);
  layer.bias = Matrix::Zero(out, 1);
  return layer;
}

Matrix aggregate_neighbors(const RelationRef& rel, const Matrix& src_features) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(rel.offsets.size()) - 1, src_features.cols());
  for (std::size_t v = 0; v + 1 < rel.offsets.size(); ++v) {
    for (auto k = rel.offsets[v]; k < rel.offsets[v + 1]; ++k)
      m.row(static_cast<Eigen::Index>(v)) += rel.coeff[k] * src_features.row(rel.neighbors[k]);
  }
  return m;
}

Matrix scatter_to_sources(const RelationRef& rel, const Matrix& dst_grad, Eigen::Index n_src) {
  Matrix out = Matrix::Zero(n_src, dst_grad.cols());
  for (std::size_t v = 0; v + 1 < rel.offsets.size(); ++v) {
    for (auto k = rel.offsets[v]; k < rel.offsets[v + 1]; ++k)
      out.row(rel.neighbors[k]) += rel.coeff[k] * dst_grad.row(static_cast<Eigen::Index>(v));
  }
  return out;
}

Matrix sage_forward(const SageLayer& layer, const Matrix& x_dst, const Matrix& neighbor_mean) {
  if (x_dst.cols() != layer.w_self.cols() || neighbor_mean.cols() != layer.w_neigh.cols())
    throw ShapeError("sage_forward: feature dim does not match layer input dim");
  Matrix h = x_dst * layer.w_self.transpose();
  h.noalias() += neighbor_mean * layer.w_neigh.transpose();
  h.rowwise() += layer.bias.col(0).transpose();
  return h;
}

Matrix log_softmax_rows(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double mx = z.row(i).maxCoeff();
    double lse = std::log((z.row(i).array() - mx).exp().sum()) + mx;
    out.row(i) = z.row(i).array() - lse;
  }
  return out;
}

double masked_nll(const Matrix& logp, const std::vector<int>& labels,
                  const std::vector<int>& mask) {
  if (mask.empty()) throw ConfigError("masked_nll: empty mask");
  double sum = 0.0;
  for (int idx : mask) {
    int y = labels[static_cast<std::size_t>(idx)];
    if (y < 0) throw DataError("mask selects unlabeled node at local index " + std::to_string(idx));
    sum -= logp(idx, y);
  }
  return sum / static_cast<double>(mask.size());
}

std::pair<double, Matrix> masked_nll_with_grad(const Matrix& logp, const std::vector<int>& labels,
                                               const std::vector<int>& mask) {
  double loss = masked_nll(logp, labels, mask);
  Matrix dz = Matrix::Zero(logp.rows(), logp.cols());
  double scale = 1.0 / static_cast<double>(mask.size());
  for (int idx : mask) {
    int y = labels[static_cast<std::size_t>(idx)];
    for (Eigen::Index c = 0; c < logp.cols(); ++c)
      dz(idx, c) = std::exp(logp(idx, c)) * scale;
    dz(idx, y) -= scale;
  }
  return {loss, dz};
}

// ---------------------------------------------------------------------------
// SageModel shared helpers
// ---------------------------------------------------------------------------

std::vector<Matrix> SageModel::clone_params() const {
  std::vector<Matrix> out;
  for (const Matrix* p : params()) out.push_back(*p);
  return out;
}

void SageModel::restore_params(const std::vector<Matrix>& saved) {
  auto ps = params();
  if (ps.size() != saved.size()) throw ShapeError("parameter count mismatch on restore");
  for (std::size_t i = 0; i < ps.size(); ++i) *ps[i] = saved[i];
}

namespace {

Matrix sample_dropmask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Matrix mask(rows, cols);
  double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) mask(i, j) = rng.uniform() >= p ? keep_scale : 0.0;
  return mask;
}

}  // namespace

// ---------------------------------------------------------------------------
// HomoSageModel
// ---------------------------------------------------------------------------

HomoSageModel::HomoSageModel(int in, int hidden, double drop, std::uint64_t model_seed) {
  in_dim = in;
  hidden_dim = hidden;
  dropout = drop;
  seed = model_seed;
  Rng rng(Rng::derive(model_seed, "init"));
  layer1 = SageLayer::glorot(in, hidden, rng);
  layer2 = SageLayer::glorot(hidden, kNumClasses, rng);
}

std::vector<Matrix*> HomoSageModel::params() {
  return {&layer1.w_self, &layer1.w_neigh, &layer1.bias,
          &layer2.w_self, &layer2.w_neigh, &layer2.bias};
}

std::vector<const Matrix*> HomoSageModel::params() const {
  return {&layer1.w_self, &layer1.w_neigh, &layer1.bias,
          &layer2.w_self, &layer2.w_neigh, &layer2.bias};
}

std::vector<std::string> HomoSageModel::param_names() const {
  return {"edge.l1.w_self", "edge.l1.w_neigh", "edge.l1.bias",
          "edge.l2.w_self", "edge.l2.w_neigh", "edge.l2.bias"};
}

ForwardCache HomoSageModel::forward(const ModelGraph& g, bool training, Rng* dropout_rng,
                                    const std::vector<Matrix>* fixed_dropmask) const {
  if (g.types.size() != 1 || g.relations.empty())
    throw SchemaError("homogeneous model expects a single-type, single-relation graph view");
  const Matrix& x = g.types[0].features;
  const RelationRef& rel = g.relations[0];

  ForwardCache cache;
  cache.x.push_back(x);
  cache.m1.push_back(aggregate_neighbors(rel, x));
  Matrix h1pre = sage_forward(layer1, x, cache.m1[0]);
  for (std::size_t r = 1; r < g.relations.size(); ++r) {
    cache.m1.push_back(aggregate_neighbors(g.relations[r], x));
    h1pre += sage_forward(layer1, x, cache.m1[r]);
  }
  Matrix h1 = h1pre.cwiseMax(0.0);
  Matrix h1drop;
  if (training && dropout > 0.0) {
    Matrix mask = fixed_dropmask
                      ? (*fixed_dropmask)[0]
                      : sample_dropmask(h1.rows(), h1.cols(), dropout, *dropout_rng);
    h1drop = h1.cwiseProduct(mask);
    cache.dropmask.push_back(std::move(mask));
  } else {
    h1drop = h1;
    cache.dropmask.emplace_back();
  }
  cache.h1pre.push_back(std::move(h1pre));
  cache.h1drop.push_back(std::move(h1drop));

  cache.m2.push_back(aggregate_neighbors(rel, cache.h1drop[0]));
  Matrix z = sage_forward(layer2, cache.h1drop[0], cache.m2[0]);
  for (std::size_t r = 1; r < g.relations.size(); ++r) {
    cache.m2.push_back(aggregate_neighbors(g.relations[r], cache.h1drop[0]));
    z += sage_forward(layer2, cache.h1drop[0], cache.m2[r]);
  }
  cache.z.push_back(std::move(z));
  cache.logp = log_softmax_rows(cache.z[0]);
  return cache;
}

std::vector<Matrix> HomoSageModel::backward(const ModelGraph& g, const ForwardCache& cache,
                                            const Matrix& dz) const {
  const Matrix& x = cache.x[0];
  const Matrix& h1drop = cache.h1drop[0];
  const Eigen::Index n = x.rows();

  Matrix dw2s = dz.transpose() * h1drop;
  Matrix dw2n = Matrix::Zero(kNumClasses, hidden_dim);
  Matrix db2 = dz.colwise().sum().transpose();
  Matrix dhd = dz * layer2.w_self;
  for (std::size_t r = 0; r < g.relations.size(); ++r) {
    dw2n += dz.transpose() * cache.m2[r];
    dhd += scatter_to_sources(g.relations[r], dz * layer2.w_neigh, n);
  }

  if (cache.dropmask[0].size() > 0) dhd = dhd.cwiseProduct(cache.dropmask[0]);
  Matrix dh1pre =
      dhd.cwiseProduct((cache.h1pre[0].array() > 0.0).cast<double>().matrix());

  Matrix dw1s = dh1pre.transpose() * x;
  Matrix dw1n = Matrix::Zero(hidden_dim, in_dim);
  Matrix db1 = dh1pre.colwise().sum().transpose();
  for (std::size_t r = 0; r < g.relations.size(); ++r) dw1n += dh1pre.transpose() * cache.m1[r];

  return {std::move(dw1s), std::move(dw1n), std::move(db1),
          std::move(dw2s), std::move(dw2n), std::move(db2)};
}

// ---------------------------------------------------------------------------
// HeteroSageModel
// ---------------------------------------------------------------------------

HeteroSageModel::HeteroSageModel(const ModelGraph& g, int hidden, double drop,
                                 std::uint64_t model_seed) {
  hidden_dim = hidden;
  dropout = drop;
  seed = model_seed;
  in_dim = static_cast<int>(g.supervised().features.cols());

  // every type that sends messages must also receive some relation, or it
  // would have no layer-1 state to send
  std::vector<bool> receives(g.types.size(), false), sends(g.types.size(), false);
  for (const auto& rel : g.relations) {
    receives[rel.dst_type] = true;
    sends[rel.src_type] = true;
  }
  for (std::size_t t = 0; t < g.types.size(); ++t)
    if (sends[t] && !receives[t])
      throw SchemaError("node type '" + g.types[t].name +
                        "' sends messages but receives none; enable reverse relations");

  Rng rng(Rng::derive(model_seed, "init"));
  for (const auto& rel : g.relations) {
    RelationStack stack;
    stack.name = rel.name;
    stack.l1 = SageLayer::glorot(in_dim, hidden, rng);
    stack.l2 = SageLayer::glorot(hidden, kNumClasses, rng);
    stacks.push_back(std::move(stack));
  }
  for (std::size_t t = 0; t < g.types.size(); ++t) {
    auto d = static_cast<int>(g.types[t].features.cols());
    if (d == in_dim) continue;
    Projection proj;
    proj.type_index = static_cast<int>(t);
    double limit = std::sqrt(6.0 / static_cast<double>(d + in_dim));
    proj.w.resize(in_dim, d);
    for (int i = 0; i < in_dim; ++i)
      for (int j = 0; j < d; ++j) proj.w(i, j) = rng.uniform(-limit, limit);
    proj.bias = Matrix::Zero(in_dim, 1);
    projections.push_back(std::move(proj));
  }
}

std::vector<Matrix*> HeteroSageModel::params() {
  std::vector<Matrix*> out;
  for (auto& s : stacks) {
    out.push_back(&s.l1.w_self);
    out.push_back(&s.l1.w_neigh);
    out.push_back(&s.l1.bias);
    out.push_back(&s.l2.w_self);
    out.push_back(&s.l2.w_neigh);
    out.push_back(&s.l2.bias);
  }
  for (auto& p : projections) {
    out.push_back(&p.w);
    out.push_back(&p.bias);
  }
  return out;
}

std::vector<const Matrix*> HeteroSageModel::params() const {
  std::vector<const Matrix*> out;
  for (const auto& s : stacks) {
    out.push_back(&s.l1.w_self);
    out.push_back(&s.l1.w_neigh);
    out.push_back(&s.l1.bias);
    out.push_back(&s.l2.w_self);
    out.push_back(&s.l2.w_neigh);
    out.push_back(&s.l2.bias);
  }
  for (const auto& p : projections) {
    out.push_back(&p.w);
    out.push_back(&p.bias);
  }
  return out;
}

std::vector<std::string> HeteroSageModel::param_names() const {
  std::vector<std::string> out;
  for (const auto& s : stacks)
    for (const char* suffix :
         {".l1.w_self", ".l1.w_neigh", ".l1.bias", ".l2.w_self", ".l2.w_neigh", ".l2.bias"})
      out.push_back(s.name + suffix);
  for (const auto& p : projections) {
    out.push_back("proj." + std::to_string(p.type_index) + ".w");
    out.push_back("proj." + std::to_string(p.type_index) + ".bias");
  }
  return out;
}

const HeteroSageModel::RelationStack& HeteroSageModel::stack_for(const std::string& name) const {
  for (const auto& s : stacks)
    if (s.name == name) return s;
  throw SchemaError("model has no parameters for relation '" + name + "'");
}

Matrix project_features(const Matrix& raw, const Matrix& w, const Matrix& bias) {
  if (raw.cols() != w.cols()) throw ShapeError("projection input dim mismatch");
  Matrix out = raw * w.transpose();
  out.rowwise() += bias.col(0).transpose();
  return out;
}

ForwardCache HeteroSageModel::forward(const ModelGraph& g, bool training, Rng* dropout_rng,
                                      const std::vector<Matrix>* fixed_dropmask) const {
  if (g.relations.size() != stacks.size())
    throw SchemaError("graph relation count does not match model parameterization");
  ForwardCache cache;
  const auto n_types = g.types.size();

  cache.x.resize(n_types);
  for (std::size_t t = 0; t < n_types; ++t) cache.x[t] = g.types[t].features;
  for (const auto& proj : projections)
    cache.x[proj.type_index] = project_features(g.types[proj.type_index].features, proj.w, proj.bias);
  for (std::size_t t = 0; t < n_types; ++t)
    if (cache.x[t].cols() != in_dim)
      throw ShapeError("type '" + g.types[t].name + "' features not aligned to shared input dim");

  // layer 1: per-relation messages, summed per destination type
  cache.h1pre.resize(n_types);
  cache.m1.resize(g.relations.size());
  std::vector<bool> has_h1(n_types, false);
  for (std::size_t r = 0; r < g.relations.size(); ++r) {
    const auto& rel = g.relations[r];
    const auto& stack = stack_for(rel.name);
    cache.m1[r] = aggregate_neighbors(rel, cache.x[rel.src_type]);
    Matrix term = sage_forward(stack.l1, cache.x[rel.dst_type], cache.m1[r]);
    if (!has_h1[rel.dst_type]) {
      cache.h1pre[rel.dst_type] = std::move(term);
      has_h1[rel.dst_type] = true;
    } else {
      cache.h1pre[rel.dst_type] += term;
    }
  }
  for (std::size_t t = 0; t < n_types; ++t)
    if (!has_h1[t])
      cache.h1pre[t] = Matrix::Zero(g.types[t].features.rows(), hidden_dim);

  cache.h1drop.resize(n_types);
  cache.dropmask.resize(n_types);
  for (std::size_t t = 0; t < n_types; ++t) {
    Matrix h1 = cache.h1pre[t].cwiseMax(0.0);
    if (training && dropout > 0.0) {
      cache.dropmask[t] = fixed_dropmask
                              ? (*fixed_dropmask)[t]
                              : sample_dropmask(h1.rows(), h1.cols(), dropout, *dropout_rng);
      cache.h1drop[t] = h1.cwiseProduct(cache.dropmask[t]);
    } else {
      cache.h1drop[t] = std::move(h1);
    }
  }

  // layer 2
  cache.z.resize(n_types);
  cache.m2.resize(g.relations.size());
  std::vector<bool> has_z(n_types, false);
  for (std::size_t r = 0; r < g.relations.size(); ++r) {
    const auto& rel = g.relations[r];
    const auto& stack = stack_for(rel.name);
    cache.m2[r] = aggregate_neighbors(rel, cache.h1drop[rel.src_type]);
    Matrix term = sage_forward(stack.l2, cache.h1drop[rel.dst_type], cache.m2[r]);
    if (!has_z[rel.dst_type]) {
      cache.z[rel.dst_type] = std::move(term);
      has_z[rel.dst_type] = true;
    } else {
      cache.z[rel.dst_type] += term;
    }
  }
  for (std::size_t t = 0; t < n_types; ++t)
    if (!has_z[t]) cache.z[t] = Matrix::Zero(g.types[t].features.rows(), kNumClasses);

  if (!has_z[g.supervised_type])
    throw SchemaError("supervised type receives no messages; graph has no usable relations");
  cache.logp = log_softmax_rows(cache.z[g.supervised_type]);
  return cache;
}

std::vector<Matrix> HeteroSageModel::backward(const ModelGraph& g, const ForwardCache& cache,
                                              const Matrix& dz_supervised) const {
  const auto n_types = g.types.size();
  const auto n_rel = g.relations.size();

  std::vector<Matrix> dz(n_types);
  for (std::size_t t = 0; t < n_types; ++t)
    dz[t] = Matrix::Zero(g.types[t].features.rows(), kNumClasses);
  dz[g.supervised_type] = dz_supervised;

  // grads aligned with params(): 6 per relation stack, then projections
  std::vector<Matrix> grads;
  grads.resize(6 * n_rel + 2 * projections.size());

  std::vector<Matrix> dhd(n_types);
  for (std::size_t t = 0; t < n_types; ++t)
    dhd[t] = Matrix::Zero(g.types[t].features.rows(), hidden_dim);

  for (std::size_t r = 0; r < n_rel; ++r) {
    const auto& rel = g.relations[r];
    const auto& stack = stack_for(rel.name);
    const Matrix& d = dz[rel.dst_type];
    grads[6 * r + 3] = d.transpose() * cache.h1drop[rel.dst_type];
    grads[6 * r + 4] = d.transpose() * cache.m2[r];
    grads[6 * r + 5] = d.colwise().sum().transpose();
    dhd[rel.dst_type] += d * stack.l2.w_self;
    dhd[rel.src_type] +=
        scatter_to_sources(rel, d * stack.l2.w_neigh, g.types[rel.src_type].features.rows());
  }

  std::vector<Matrix> dh1pre(n_types);
  for (std::size_t t = 0; t < n_types; ++t) {
    Matrix dh1;
    if (cache.dropmask[t].size() > 0)
      dh1 = dhd[t].cwiseProduct(cache.dropmask[t]);
    else
      dh1 = std::move(dhd[t]);
    dh1pre[t] = dh1.cwiseProduct((cache.h1pre[t].array() > 0.0).cast<double>().matrix());
  }

  std::vector<Matrix> dx(n_types);
  for (std::size_t t = 0; t < n_types; ++t)
    dx[t] = Matrix::Zero(g.types[t].features.rows(), in_dim);

  for (std::size_t r = 0; r < n_rel; ++r) {
    const auto& rel = g.relations[r];
    const auto& stack = stack_for(rel.name);
    const Matrix& e = dh1pre[rel.dst_type];
    grads[6 * r + 0] = e.transpose() * cache.x[rel.dst_type];
    grads[6 * r + 1] = e.transpose() * cache.m1[r];
    grads[6 * r + 2] = e.colwise().sum().transpose();
    dx[rel.dst_type] += e * stack.l1.w_self;
    dx[rel.src_type] +=
        scatter_to_sources(rel, e * stack.l1.w_neigh, g.types[rel.src_type].features.rows());
  }

  for (std::size_t p = 0; p < projections.size(); ++p) {
    const auto& proj = projections[p];
    grads[6 * n_rel + 2 * p] = dx[proj.type_index].transpose() * g.types[proj.type_index].features;
    grads[6 * n_rel + 2 * p + 1] = dx[proj.type_index].colwise().sum().transpose();
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

double cosine_lr(double base_lr, int epoch, int t_max) {
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / t_max));
}

void Adam::step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads, double lr) {
  if (params.size() != grads.size()) throw ShapeError("Adam: param/grad count mismatch");
  if (m_.empty()) {
    for (const Matrix* p : params) {
      m_.push_back(Matrix::Zero(p->rows(), p->cols()));
      v_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, t_);
  double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseProduct(grads[i]);
    Matrix mhat = m_[i] / bc1;
    Matrix vhat = v_[i] / bc2;
    params[i]->array() -= lr * mhat.array() / (vhat.array().sqrt() + eps_);
  }
}

Trainer::Trainer(SageModel& model, const ModelGraph& graph, const TrainConfig& config)
    : model_(model),
      graph_(graph),
      config_(config),
      dropout_rng_(Rng::derive(config.seed, "dropout")) {
  if (config.patience >= config.max_epochs)
    throw ConfigError("patience must be smaller than max_epochs");
  if (config.base_lr <= 0.0) throw ConfigError("base_lr must be > 0");
}

double Trainer::current_lr() const {
  return cosine_lr(config_.base_lr, epoch_ - lr_epoch_base_, config_.max_epochs);
}

EpochRecord Trainer::run_epoch(const std::vector<int>& train_mask, int stage) {
  if (train_mask.empty()) throw ConfigError("training requires a non-empty train mask");
  if (graph_.val_mask.empty()) throw ConfigError("training requires a non-empty validation mask");
  double lr = current_lr();

  ForwardCache fwd = model_.forward(graph_, /*training=*/true, &dropout_rng_, nullptr);
  auto [train_loss, dz] = masked_nll_with_grad(fwd.logp, graph_.labels, train_mask);
  if (!std::isfinite(train_loss))
    throw TrainingError("training diverged (non-finite loss) at epoch " +
                        std::to_string(epoch_ + 1));
  std::vector<Matrix> grads = model_.backward(graph_, fwd, dz);
  adam_.step(model_.params(), grads, lr);

  ForwardCache eval = model_.forward(graph_, /*training=*/false, nullptr, nullptr);
  double val_loss = masked_nll(eval.logp, graph_.labels, graph_.val_mask);
  if (!std::isfinite(val_loss))
    throw TrainingError("training diverged (non-finite validation loss) at epoch " +
                        std::to_string(epoch_ + 1));
  int correct = 0;
  for (int idx : graph_.val_mask) {
    Eigen::Index argmax;
    eval.logp.row(idx).maxCoeff(&argmax);
    if (static_cast<int>(argmax) == graph_.labels[static_cast<std::size_t>(idx)]) ++correct;
  }

  ++epoch_;
  EpochRecord rec;
  rec.epoch = epoch_;
  rec.stage = stage;
  rec.train_loss = train_loss;
  rec.val_loss = val_loss;
  rec.val_accuracy = static_cast<double>(correct) / static_cast<double>(graph_.val_mask.size());
  rec.lr = lr;
  history.epochs.push_back(rec);
  return rec;
}

TrainHistory train(SageModel& model, const ModelGraph& graph, const TrainConfig& config) {
  Trainer trainer(model, graph, config);
  EarlyStopper stopper(config.patience);
  std::vector<Matrix> best = model.clone_params();
  for (int e = 0; e < config.max_epochs; ++e) {
    EpochRecord rec = trainer.run_epoch(graph.train_mask, 0);
    if (stopper.observe(rec.val_loss, rec.epoch)) best = model.clone_params();
    if (stopper.should_stop()) break;
  }
  model.restore_params(best);
  trainer.history.best_epoch = stopper.best_epoch;
  trainer.history.best_val_loss = stopper.best;
  return trainer.history;
}

Prediction predict(const SageModel& model, const ModelGraph& graph, const HeteroGraph& g) {
  ForwardCache eval = model.forward(graph, /*training=*/false, nullptr, nullptr);
  Prediction out;
  const auto& block = graph.supervised();
  // the supervised block of a homogeneous view mixes node kinds; predictions
  // are reported for domain nodes only
  Matrix probs = eval.logp.array().exp().matrix();
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < block.globals.size(); ++i)
    if (g.type_of(block.globals[i]) == NodeType::Domain) rows.push_back(i);
  out.probabilities.resize(static_cast<Eigen::Index>(rows.size()), probs.cols());
  out.ids.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.ids.push_back(g.id_of(block.globals[rows[k]]));
    out.labels.push_back(graph.labels[rows[k]]);
    out.confidence.push_back(probs(static_cast<Eigen::Index>(rows[k]), 1));
    out.probabilities.row(static_cast<Eigen::Index>(k)) =
        probs.row(static_cast<Eigen::Index>(rows[k]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {
constexpr char kCheckpointMagic[8] = {'C', 'G', 'C', 'K', 'P', 'T', '0', '1'};
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json header;
  header["kind"] = ckpt.kind;
  header["in_dim"] = ckpt.in_dim;
  header["hidden_dim"] = ckpt.hidden_dim;
  header["dropout"] = ckpt.dropout;
  header["seed"] = ckpt.seed;
  header["names"] = ckpt.names;
  json shapes = json::array();
  for (const Matrix& t : ckpt.tensors)
    shapes.push_back({static_cast<std::int64_t>(t.rows()), static_cast<std::int64_t>(t.cols())});
  header["shapes"] = shapes;
  header["extra"] = ckpt.extra_json;
  std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  std::uint64_t len = header_str.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const Matrix& t : ckpt.tensors)
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(sizeof(double) * t.size()));
  if (!out) throw DataError("checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw SchemaError("not a credgraph checkpoint: " + path.string());
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header_str(len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(len));
  json header = json::parse(header_str);

  Checkpoint ckpt;
  ckpt.kind = header.at("kind").get<std::string>();
  ckpt.in_dim = header.at("in_dim").get<int>();
  ckpt.hidden_dim = header.at("hidden_dim").get<int>();
  ckpt.dropout = header.at("dropout").get<double>();
  ckpt.seed = header.at("seed").get<std::uint64_t>();
  ckpt.names = header.at("names").get<std::vector<std::string>>();
  ckpt.extra_json = header.at("extra").get<std::string>();
  for (const auto& shape : header.at("shapes")) {
    Matrix t(shape[0].get<std::int64_t>(), shape[1].get<std::int64_t>());
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(sizeof(double) * t.size()));
    ckpt.tensors.push_back(std::move(t));
  }
  if (!in) throw SchemaError("truncated checkpoint: " + path.string());
  return ckpt;
}

Checkpoint make_checkpoint(const SageModel& model, const std::string& extra_json) {
  Checkpoint ckpt;
  ckpt.kind = model.kind();
  ckpt.in_dim = model.in_dim;
  ckpt.hidden_dim = model.hidden_dim;
  ckpt.dropout = model.dropout;
  ckpt.seed = model.seed;
  ckpt.names = model.param_names();
  for (const Matrix* p : model.params()) ckpt.tensors.push_back(*p);
  ckpt.extra_json = extra_json;
  return ckpt;
}

void apply_checkpoint(SageModel& model, const Checkpoint& ckpt) {
  if (ckpt.kind != model.kind())
    throw SchemaError("checkpoint kind '" + ckpt.kind + "' does not match model '" +
                      model.kind() + "'");
  std::unordered_map<std::string, const Matrix*> by_name;
  for (std::size_t i = 0; i < ckpt.names.size(); ++i) by_name[ckpt.names[i]] = &ckpt.tensors[i];
  auto names = model.param_names();
  auto params = model.params();
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto it = by_name.find(names[i]);
    if (it == by_name.end())
      throw SchemaError("checkpoint is missing parameter '" + names[i] + "'");
    if (it->second->rows() != params[i]->rows() || it->second->cols() != params[i]->cols())
      throw ShapeError("checkpoint shape mismatch for '" + names[i] + "'");
    *params[i] = *it->second;
  }
}

}  // namespace credgraph
