#pragma once

#include <array>
#include <string>
#include <vector>

#include "credgraph/gnn.hpp"
#include "credgraph/graph.hpp"

namespace credgraph {

// ---------------------------------------------------------------------------
// Baby Steps curriculum over reliability-score quintiles: training starts on
// the most extreme batches {d1, d10} and widens symmetrically until all ten
// are active.
// ---------------------------------------------------------------------------

struct TrainExample {
  std::string id;
  double score = 0.0;  // continuous reliability score
  BinaryLabel label = BinaryLabel::Reliable;
};

struct CurriculumSchedule {
  static constexpr int kBatches = 10;
  static constexpr int kStages = 5;

  // d1..d10: within-class score quintiles; d1 = most reliable fifth of the
  // reliable class, d10 = least reliable fifth of the unreliable class
  std::array<std::vector<std::string>, kBatches> batches;

  /// 1-based batch numbers active at `stage` in 1..5: {j <= stage} plus the
  /// mirrored {11-j}.
  std::vector<int> active_batch_numbers(int stage) const;
  std::vector<std::string> active_ids(int stage) const;
  std::size_t total_size() const;
};

/// Quintile boundaries are computed within each class; ties break by
/// (score, id); remainder elements join the last quintile of their class.
CurriculumSchedule build_quintile_batches(const std::vector<TrainExample>& train);

/// Stage s trains on the union of the active batches, ends after
/// `stage_patience` epochs without validation-loss improvement; the final
/// stage runs under the full patience rule and its best checkpoint is
/// returned. Optimizer state and the cosine schedule's epoch counter persist
/// across stages (unless reset_lr_per_stage).
TrainHistory babysteps_train(SageModel& model, const ModelGraph& mg, const HeteroGraph& g,
                             const CurriculumSchedule& schedule, const TrainConfig& config);

}  // namespace credgraph
