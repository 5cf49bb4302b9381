#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "credgraph/embed.hpp"
#include "credgraph/graph.hpp"
#include "credgraph/rng.hpp"

namespace credgraph {

using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Model-facing graph view: per-type dense feature blocks plus per-relation
// CSR indexes with precomputed mean-aggregation coefficients.
// ---------------------------------------------------------------------------

enum class FeatureSource { Attributes, Positional, Text };

FeatureSource feature_source_from_string(std::string_view s);
std::string_view to_string(FeatureSource s);

struct FeatureSpec {
  FeatureSource domains = FeatureSource::Attributes;
  FeatureSource users = FeatureSource::Positional;
  FeatureSource dredge = FeatureSource::Text;
  const EmbeddingTable* positional = nullptr;
  const VectorTable* user_text = nullptr;
  const VectorTable* dredge_text = nullptr;
};

struct RelationRef {
  std::string name;  // "phi1".."phi4", "rev_phi2".., or "edge" for homogeneous
  int src_type = 0;
  int dst_type = 0;
  // CSR over local destination index; coeff holds the aggregation weight of
  // each in-neighbor (1/deg, or w/sum_w in weighted-mean mode)
  std::vector<std::int64_t> offsets;
  std::vector<std::int32_t> neighbors;
  std::vector<double> coeff;
};

struct TypeBlock {
  std::string name;
  std::vector<std::uint32_t> globals;  // graph node ids, local index order
  Matrix features;                     // n_local x dim
};

struct ModelGraph {
  std::vector<TypeBlock> types;
  std::vector<RelationRef> relations;
  int supervised_type = 0;         // type index carrying labels (domains)
  std::vector<int> labels;         // per supervised-type local node: 0/1/-1
  std::vector<int> train_mask, val_mask, test_mask;  // local indices

  std::size_t type_count() const { return types.size(); }
  const TypeBlock& supervised() const { return types[supervised_type]; }
};

/// Heterogeneous view: one block per populated node type, one relation per
/// populated edge type (plus rev_* relations when add_reverse is set, so
/// every type that sends messages also receives layer-1 state).
ModelGraph build_hetero_model_graph(const HeteroGraph& g, const FeatureSpec& features,
                                    bool add_reverse = true, bool weighted_mean = false);

/// Homogeneous view: every node in one untyped block, every edge in one
/// stored-direction relation.
ModelGraph build_homo_model_graph(const HeteroGraph& g, const FeatureSpec& features,
                                  bool add_reverse = false, bool weighted_mean = false);

/// Copies split tags of labeled domains into the graph-local masks.
void apply_split(ModelGraph& mg, const HeteroGraph& g, const Splits& splits);

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

struct SageLayer {
  Matrix w_self;   // out x in
  Matrix w_neigh;  // out x in
  Matrix bias;     // out x 1

  static SageLayer glorot(int in, int out, Rng& rng);
};

/// Mean aggregation of source features into destination rows.
Matrix aggregate_neighbors(const RelationRef& rel, const Matrix& src_features);

/// Scatter-transpose of aggregate_neighbors, used by backprop.
Matrix scatter_to_sources(const RelationRef& rel, const Matrix& dst_grad,
                          Eigen::Index n_src);

/// h = x_dst W_self^T + mean_neigh W_neigh^T + bias. Nodes without
/// in-neighbors use a zero neighbor mean.
Matrix sage_forward(const SageLayer& layer, const Matrix& x_dst, const Matrix& neighbor_mean);

Matrix log_softmax_rows(const Matrix& z);

/// Mean negative log-likelihood over the masked rows only.
double masked_nll(const Matrix& logp, const std::vector<int>& labels,
                  const std::vector<int>& mask);

/// Loss plus its gradient with respect to the pre-softmax logits; unmasked
/// rows get exactly zero gradient.
std::pair<double, Matrix> masked_nll_with_grad(const Matrix& logp, const std::vector<int>& labels,
                                               const std::vector<int>& mask);

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

struct ForwardCache {
  std::vector<Matrix> x;         // per type, projected inputs
  std::vector<Matrix> h1pre;     // per type, layer-1 pre-activation
  std::vector<Matrix> h1drop;    // per type, after ReLU + dropout
  std::vector<Matrix> dropmask;  // per type; empty rows in eval mode
  std::vector<Matrix> m1, m2;    // per relation aggregates
  std::vector<Matrix> z;         // per type, layer-2 output
  Matrix logp;                   // supervised type log-probabilities
};

constexpr int kHiddenDim = 512;
constexpr int kNumClasses = 2;

/// 2-layer mean-aggregation SAGE classifier. Both variants share kernels;
/// the homogeneous model is the specialized single-block implementation.
class SageModel {
 public:
  virtual ~SageModel() = default;

  virtual std::string kind() const = 0;
  virtual std::vector<Matrix*> params() = 0;
  virtual std::vector<const Matrix*> params() const = 0;
  virtual std::vector<std::string> param_names() const = 0;

  /// fixed_dropmask is a test hook: a per-type mask to use instead of
  /// sampling (entries 0 or 1/(1-p)).
  virtual ForwardCache forward(const ModelGraph& g, bool training, Rng* dropout_rng,
                               const std::vector<Matrix>* fixed_dropmask = nullptr) const = 0;

  /// Gradients for every parameter, aligned with params(), given the loss
  /// gradient w.r.t. the supervised type's layer-2 output.
  virtual std::vector<Matrix> backward(const ModelGraph& g, const ForwardCache& cache,
                                       const Matrix& dz_supervised) const = 0;

  int in_dim = 0;
  int hidden_dim = kHiddenDim;
  double dropout = 0.5;
  std::uint64_t seed = 0;

  std::vector<Matrix> clone_params() const;
  void restore_params(const std::vector<Matrix>& saved);
};

class HomoSageModel final : public SageModel {
 public:
  HomoSageModel(int in_dim, int hidden, double dropout, std::uint64_t seed);

  std::string kind() const override { return "homo"; }
  std::vector<Matrix*> params() override;
  std::vector<const Matrix*> params() const override;
  std::vector<std::string> param_names() const override;
  ForwardCache forward(const ModelGraph& g, bool training, Rng* dropout_rng,
                       const std::vector<Matrix>* fixed_dropmask) const override;
  std::vector<Matrix> backward(const ModelGraph& g, const ForwardCache& cache,
                               const Matrix& dz) const override;

  SageLayer layer1, layer2;
};

class HeteroSageModel final : public SageModel {
 public:
  /// One layer stack per relation; an input projection for every type whose
  /// feature dim differs from the shared input dim (the supervised type's).
  HeteroSageModel(const ModelGraph& g, int hidden, double dropout, std::uint64_t seed);

  std::string kind() const override { return "hetero"; }
  std::vector<Matrix*> params() override;
  std::vector<const Matrix*> params() const override;
  std::vector<std::string> param_names() const override;
  ForwardCache forward(const ModelGraph& g, bool training, Rng* dropout_rng,
                       const std::vector<Matrix>* fixed_dropmask) const override;
  std::vector<Matrix> backward(const ModelGraph& g, const ForwardCache& cache,
                               const Matrix& dz) const override;

  struct RelationStack {
    std::string name;
    SageLayer l1, l2;
  };
  struct Projection {
    int type_index;
    Matrix w;     // in_dim x d_type
    Matrix bias;  // in_dim x 1
  };

  std::vector<RelationStack> stacks;   // ordered as g.relations
  std::vector<Projection> projections;

 private:
  const RelationStack& stack_for(const std::string& name) const;
};

/// Affine feature alignment (identity when no projection is configured for
/// the type).
Matrix project_features(const Matrix& raw, const Matrix& w, const Matrix& bias);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  int max_epochs = 1000;
  int patience = 50;
  double base_lr = 1e-3;
  double dropout = 0.5;
  int hidden_dim = kHiddenDim;
  std::uint64_t seed = 0;
  bool weighted_mean = false;
  // curriculum
  bool curriculum = false;
  int stage_patience = 10;
  bool reset_lr_per_stage = false;
};

/// lr(t) = base/2 * (1 + cos(pi t / t_max)), t zero-based, t_max = max_epochs.
double cosine_lr(double base_lr, int epoch, int t_max);

/// Strict-improvement early stopping: wait resets only when the value drops
/// below the best seen.
struct EarlyStopper {
  explicit EarlyStopper(int patience) : patience(patience) {}
  bool observe(double value, int epoch) {
    if (value < best) {
      best = value;
      best_epoch = epoch;
      wait = 0;
      return true;
    }
    ++wait;
    return false;
  }
  bool should_stop() const { return wait >= patience; }

  int patience;
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int wait = 0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based, global across curriculum stages
  int stage = 0;  // 0 for plain training
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;
};

struct StageRecord {
  int stage = 0;
  std::vector<int> active_batches;  // 1-based batch numbers
  int epochs_run = 0;
  double best_val_loss = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::vector<StageRecord> stages;
  int best_epoch = -1;
  double best_val_loss = 0.0;
};

class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads, double lr);

  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }
  long step_count() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::vector<Matrix> m_, v_;
  long t_ = 0;
};

/// Single-epoch step shared by plain and curriculum training: one Adam
/// update on the train mask, then an eval-mode pass for validation loss and
/// accuracy. Throws TrainingError on non-finite loss.
class Trainer {
 public:
  Trainer(SageModel& model, const ModelGraph& graph, const TrainConfig& config);

  EpochRecord run_epoch(const std::vector<int>& train_mask, int stage);
  int global_epoch() const { return epoch_; }

  TrainHistory history;

  void reset_lr_counter() { lr_epoch_base_ = epoch_; }
  double current_lr() const;
  const Adam& optimizer() const { return adam_; }

 private:
  SageModel& model_;
  const ModelGraph& graph_;
  TrainConfig config_;
  Adam adam_;
  Rng dropout_rng_;
  int epoch_ = 0;        // epochs completed
  int lr_epoch_base_ = 0;
};

/// Full-mask training with cosine-annealed Adam and patience-based early
/// stopping; the model is left at the best-validation-loss checkpoint.
TrainHistory train(SageModel& model, const ModelGraph& graph, const TrainConfig& config);

struct Prediction {
  std::vector<std::string> ids;     // supervised-type node ids
  Matrix probabilities;             // n x 2, rows sum to 1
  std::vector<double> confidence;   // probability of the unreliable class
  std::vector<int> labels;          // aligned ground truth, -1 if unlabeled
};

Prediction predict(const SageModel& model, const ModelGraph& graph, const HeteroGraph& g);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

struct Checkpoint {
  std::string kind;
  int in_dim = 0;
  int hidden_dim = 0;
  double dropout = 0.5;
  std::uint64_t seed = 0;
  std::vector<std::string> names;
  std::vector<Matrix> tensors;
  std::string extra_json;  // config echo + history
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(const SageModel& model, const std::string& extra_json);
/// Overwrites the model's parameters by name; shapes must match.
void apply_checkpoint(SageModel& model, const Checkpoint& ckpt);

}  // namespace credgraph
