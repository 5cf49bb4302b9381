#include "credgraph/embed.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "credgraph/rng.hpp"

namespace credgraph {

std::vector<std::vector<std::uint32_t>> undirected_adjacency(const HeteroGraph& g) {
  std::vector<std::vector<std::uint32_t>> adj(g.node_count());
  for (const Edge& e : g.edges()) {
    adj[e.src].push_back(e.dst);
    adj[e.dst].push_back(e.src);
  }
  for (auto& nbrs : adj) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
  return adj;
}

namespace {

bool is_neighbor(const std::vector<std::uint32_t>& sorted, std::uint32_t x) {
  return std::binary_search(sorted.begin(), sorted.end(), x);
}

std::vector<std::uint32_t> one_walk(const std::vector<std::vector<std::uint32_t>>& adj,
                                    std::uint32_t start, const WalkConfig& cfg, Rng& rng) {
  std::vector<std::uint32_t> walk;
  walk.reserve(cfg.walk_length);
  walk.push_back(start);
  while (static_cast<int>(walk.size()) < cfg.walk_length) {
    std::uint32_t cur = walk.back();
    const auto& nbrs = adj[cur];
    if (nbrs.empty()) break;
    if (walk.size() == 1 || (cfg.p == 1.0 && cfg.q == 1.0)) {
      walk.push_back(nbrs[rng.uniform_int(nbrs.size())]);
      continue;
    }
    // second-order step biased by the previous node
    std::uint32_t prev = walk[walk.size() - 2];
    std::vector<double> cumulative(nbrs.size());
    double total = 0.0;
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      double w;
      if (nbrs[i] == prev)
        w = 1.0 / cfg.p;
      else if (is_neighbor(adj[prev], nbrs[i]))
        w = 1.0;
      else
        w = 1.0 / cfg.q;
      total += w;
      cumulative[i] = total;
    }
    double u = rng.uniform() * total;
    std::size_t pick = std::lower_bound(cumulative.begin(), cumulative.end(), u) -
                       cumulative.begin();
    if (pick >= nbrs.size()) pick = nbrs.size() - 1;
    walk.push_back(nbrs[pick]);
  }
  return walk;
}

}  // namespace

WalkCorpus generate_walks(const std::vector<std::vector<std::uint32_t>>& adjacency,
                          const WalkConfig& config) {
  if (config.walk_length < 1) throw ConfigError("walk_length must be >= 1");
  if (config.walks_per_node < 1) throw ConfigError("walks_per_node must be >= 1");
  if (adjacency.empty()) throw ConfigError("cannot generate walks on an empty graph");
  WalkCorpus corpus;
  corpus.walk_length = config.walk_length;
  corpus.walks_per_node = config.walks_per_node;
  corpus.seed = config.seed;
  corpus.walks.resize(adjacency.size() * static_cast<std::size_t>(config.walks_per_node));
  for (std::size_t v = 0; v < adjacency.size(); ++v) {
    for (int k = 0; k < config.walks_per_node; ++k) {
      // independent per-(node, walk) stream: parallel generation would
      // produce the identical corpus
      Rng rng(Rng::derive(config.seed, "walk",
                          v * static_cast<std::size_t>(config.walks_per_node) + k));
      corpus.walks[v * config.walks_per_node + k] =
          one_walk(adjacency, static_cast<std::uint32_t>(v), config, rng);
    }
  }
  return corpus;
}

WalkCorpus generate_walks(const HeteroGraph& g, const WalkConfig& config) {
  return generate_walks(undirected_adjacency(g), config);
}

// ---------------------------------------------------------------------------
// Skip-gram with negative sampling
// ---------------------------------------------------------------------------

namespace {

double stable_softplus(double x) {
  // log(1 + exp(x)) without overflow
  if (x > 30.0) return x;
  if (x < -30.0) return 0.0;
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x > 30.0) return 1.0;
  if (x < -30.0) return 0.0;
  return 1.0 / (1.0 + std::exp(-x));
}

struct NoiseTable {
  std::vector<double> cumulative;  // over node ids 0..n-1, frequency^0.75
  std::uint32_t sample(Rng& rng) const {
    double u = rng.uniform() * cumulative.back();
    auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
    auto idx = static_cast<std::size_t>(it - cumulative.begin());
    if (idx >= cumulative.size()) idx = cumulative.size() - 1;
    return static_cast<std::uint32_t>(idx);
  }
};

struct PairCursor {
  std::size_t walk = 0;
  std::size_t pos = 0;
};

// One training pass over a range of walks; returns (loss sum, pair count).
// `processed` counts center positions for the global lr schedule.
std::pair<double, std::size_t> run_pass(const WalkCorpus& corpus, std::size_t begin_walk,
                                        std::size_t end_walk, Eigen::MatrixXd& in,
                                        Eigen::MatrixXd& out, const NoiseTable& noise,
                                        const SkipgramConfig& cfg, Rng& rng,
                                        std::size_t& processed, std::size_t total_planned) {
  const int dim = cfg.dim;
  Eigen::VectorXd accum(dim);
  double loss_sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t w = begin_walk; w < end_walk; ++w) {
    const auto& walk = corpus.walks[w];
    for (std::size_t i = 0; i < walk.size(); ++i) {
      double progress = static_cast<double>(processed) / static_cast<double>(total_planned);
      double alpha = std::max(cfg.min_lr, cfg.lr * (1.0 - progress));
      ++processed;
      std::uint32_t center = walk[i];
      std::size_t lo = i >= static_cast<std::size_t>(cfg.context) ? i - cfg.context : 0;
      std::size_t hi = std::min(walk.size() - 1, i + static_cast<std::size_t>(cfg.context));
      for (std::size_t j = lo; j <= hi; ++j) {
        if (j == i) continue;
        std::uint32_t context_node = walk[j];
        accum.setZero();
        // positive pair + negatives, word2vec style: the context node's
        // input vector predicts the center node
        for (int d = 0; d <= cfg.negatives; ++d) {
          std::uint32_t target;
          double label;
          if (d == 0) {
            target = center;
            label = 1.0;
          } else {
            target = noise.sample(rng);
            if (target == center) continue;
            label = 0.0;
          }
          double f = in.row(context_node).dot(out.row(target));
          loss_sum += label > 0.5 ? stable_softplus(-f) : stable_softplus(f);
          double g = (label - sigmoid(f)) * alpha;
          accum += g * out.row(target).transpose();
          out.row(target) += g * in.row(context_node);
        }
        in.row(context_node) += accum.transpose();
        ++pairs;
      }
    }
  }
  return {loss_sum, pairs};
}

}  // namespace

SkipgramResult train_skipgram(const WalkCorpus& corpus, std::size_t node_count,
                              const SkipgramConfig& cfg) {
  if (cfg.dim < 1) throw ConfigError("embedding dim must be >= 1");
  if (corpus.walks.empty()) throw ConfigError("cannot train on an empty walk corpus");

  std::vector<double> freq(node_count, 0.0);
  for (const auto& walk : corpus.walks)
    for (std::uint32_t v : walk) {
      if (v >= node_count) throw DataError("walk references node beyond node_count");
      freq[v] += 1.0;
    }
  NoiseTable noise;
  noise.cumulative.resize(node_count);
  double total = 0.0;
  for (std::size_t v = 0; v < node_count; ++v) {
    total += std::pow(freq[v], 0.75);
    noise.cumulative[v] = total;
  }
  if (total <= 0.0) throw DataError("walk corpus covers no nodes");

  Rng init_rng(Rng::derive(cfg.seed, "skipgram-init"));
  Eigen::MatrixXd in(node_count, cfg.dim);
  for (std::size_t v = 0; v < node_count; ++v)
    for (int d = 0; d < cfg.dim; ++d) in(v, d) = (init_rng.uniform() - 0.5) / cfg.dim;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(node_count, cfg.dim);

  std::size_t positions = 0;
  for (const auto& walk : corpus.walks) positions += walk.size();
  std::size_t total_planned = positions * static_cast<std::size_t>(cfg.epochs);

  SkipgramResult result;
  std::size_t processed = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t pairs = 0;
    if (cfg.threads <= 1) {
      Rng rng(Rng::derive(cfg.seed, "skipgram-epoch", static_cast<std::uint64_t>(epoch)));
      auto [ls, pc] = run_pass(corpus, 0, corpus.walks.size(), in, out, noise, cfg, rng,
                               processed, total_planned);
      loss_sum = ls;
      pairs = pc;
    } else {
      // opt-in hogwild mode: threads share the weight matrices without
      // locks, so results are not deterministic
      std::vector<std::thread> workers;
      std::vector<double> losses(cfg.threads, 0.0);
      std::vector<std::size_t> counts(cfg.threads, 0);
      std::size_t chunk = (corpus.walks.size() + cfg.threads - 1) / cfg.threads;
      std::size_t done_before = processed;
      for (int t = 0; t < cfg.threads; ++t) {
        workers.emplace_back([&, t]() {
          std::size_t begin = t * chunk;
          std::size_t end = std::min(corpus.walks.size(), begin + chunk);
          if (begin >= end) return;
          Rng rng(Rng::derive(cfg.seed, "skipgram-thread",
                              static_cast<std::uint64_t>(epoch) * cfg.threads + t));
          std::size_t local_processed = done_before + begin;  // approximate schedule
          auto [ls, pc] = run_pass(corpus, begin, end, in, out, noise, cfg, rng,
                                   local_processed, total_planned);
          losses[t] = ls;
          counts[t] = pc;
        });
      }
      for (auto& w : workers) w.join();
      for (int t = 0; t < cfg.threads; ++t) {
        loss_sum += losses[t];
        pairs += counts[t];
      }
      processed += positions;
    }
    result.epoch_mean_loss.push_back(pairs > 0 ? loss_sum / static_cast<double>(pairs) : 0.0);
  }
  result.vectors = std::move(in);
  if (!result.vectors.allFinite()) throw TrainingError("skip-gram produced non-finite embeddings");
  return result;
}

VectorTable EmbeddingTable::to_vector_table() const {
  VectorTable t;
  t.dim = dim;
  t.ids = ids;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::vector<double> v(dim);
    for (std::size_t d = 0; d < dim; ++d) v[d] = vectors(static_cast<Eigen::Index>(i),
                                                         static_cast<Eigen::Index>(d));
    t.by_id[ids[i]] = std::move(v);
  }
  return t;
}

EmbeddingTable compute_positional_features(const HeteroGraph& g, const WalkConfig& walk_config,
                                           const SkipgramConfig& sg_config) {
  WalkCorpus corpus = generate_walks(g, walk_config);
  SkipgramResult sg = train_skipgram(corpus, g.node_count(), sg_config);
  EmbeddingTable table;
  table.dim = static_cast<std::size_t>(sg_config.dim);
  table.ids.reserve(g.node_count());
  for (std::size_t v = 0; v < g.node_count(); ++v)
    table.ids.push_back(g.id_of(static_cast<std::uint32_t>(v)));
  table.vectors = std::move(sg.vectors);
  table.epoch_mean_loss = std::move(sg.epoch_mean_loss);
  return table;
}

EmbeddingTable embedding_from_vector_table(const VectorTable& t) {
  EmbeddingTable table;
  table.dim = t.dim;
  table.ids = t.ids;
  table.vectors.resize(static_cast<Eigen::Index>(t.ids.size()), static_cast<Eigen::Index>(t.dim));
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    const auto& v = t.by_id.at(t.ids[i]);
    for (std::size_t d = 0; d < t.dim; ++d)
      table.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = v[d];
  }
  return table;
}

}  // namespace credgraph
