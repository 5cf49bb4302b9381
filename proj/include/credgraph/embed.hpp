#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "credgraph/graph.hpp"
#include "credgraph/ingest.hpp"

namespace credgraph {

// ---------------------------------------------------------------------------
// Positional node features: uniform random walks over the undirected view of
// a graph, embedded with skip-gram + negative sampling.
// ---------------------------------------------------------------------------

struct WalkConfig {
  int walk_length = 20;     // nodes per walk
  int walks_per_node = 10;
  // return/in-out biases of the second-order walk; 1/1 degenerates to a
  // uniform first-order walk
  double p = 1.0;
  double q = 1.0;
  std::uint64_t seed = 0;
};

struct WalkCorpus {
  std::vector<std::vector<std::uint32_t>> walks;
  int walk_length = 0;
  int walks_per_node = 0;
  std::uint64_t seed = 0;
};

/// Sorted, deduplicated undirected neighbor lists over every edge type.
std::vector<std::vector<std::uint32_t>> undirected_adjacency(const HeteroGraph& g);

/// Walks over an explicit adjacency structure. Walk k of node v draws from
/// its own seed-derived stream, so generation may be parallelized per start
/// node without changing the corpus. Isolated nodes yield length-1 walks.
WalkCorpus generate_walks(const std::vector<std::vector<std::uint32_t>>& adjacency,
                          const WalkConfig& config);
WalkCorpus generate_walks(const HeteroGraph& g, const WalkConfig& config);

struct SkipgramConfig {
  int dim = 23;
  int context = 10;        // window radius
  int negatives = 5;
  int epochs = 5;
  double lr = 0.025;       // linear decay to min_lr over all planned updates
  double min_lr = 1e-4;
  std::uint64_t seed = 0;
  int threads = 1;         // >1 is lock-free hogwild and not deterministic
};

struct SkipgramResult {
  Eigen::MatrixXd vectors;              // node count x dim (input vectors)
  std::vector<double> epoch_mean_loss;  // negative-sampling loss per epoch
};

/// Skip-gram with negative sampling over the walk corpus; noise distribution
/// proportional to unigram frequency^0.75. Deterministic for threads == 1.
SkipgramResult train_skipgram(const WalkCorpus& corpus, std::size_t node_count,
                              const SkipgramConfig& config);

struct EmbeddingTable {
  std::size_t dim = 0;
  std::vector<std::string> ids;    // graph insertion order
  Eigen::MatrixXd vectors;         // ids.size() x dim
  std::vector<double> epoch_mean_loss;

  const Eigen::MatrixXd& matrix() const { return vectors; }
  VectorTable to_vector_table() const;
};

/// End-to-end positional features for every node of the graph.
EmbeddingTable compute_positional_features(const HeteroGraph& g, const WalkConfig& walk_config,
                                           const SkipgramConfig& sg_config);

EmbeddingTable embedding_from_vector_table(const VectorTable& table);

}  // namespace credgraph
