#include "credgraph/curriculum.hpp"

#include <algorithm>
#include <limits>
#include <unordered_map>

namespace credgraph {

std::vector<int> CurriculumSchedule::active_batch_numbers(int stage) const {
  if (stage < 1 || stage > kStages) throw ConfigError("curriculum stage out of range");
  std::vector<int> out;
  for (int j = 1; j <= stage; ++j) out.push_back(j);
  for (int j = stage; j >= 1; --j) out.push_back(kBatches + 1 - j);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> CurriculumSchedule::active_ids(int stage) const {
  std::vector<std::string> out;
  for (int b : active_batch_numbers(stage)) {
    const auto& batch = batches[b - 1];
    out.insert(out.end(), batch.begin(), batch.end());
  }
  return out;
}

std::size_t CurriculumSchedule::total_size() const {
  std::size_t n = 0;
  for (const auto& b : batches) n += b.size();
  return n;
}

CurriculumSchedule build_quintile_batches(const std::vector<TrainExample>& train) {
  std::vector<TrainExample> reliable, unreliable;
  for (const auto& ex : train)
    (ex.label == BinaryLabel::Reliable ? reliable : unreliable).push_back(ex);
  for (const auto* cls : {&reliable, &unreliable}) {
    if (cls->size() < 5)
      throw ConfigError("curriculum requires at least 5 training examples per class, got " +
                        std::to_string(cls->size()));
  }
  auto by_score_desc = [](const TrainExample& a, const TrainExample& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  };
  std::sort(reliable.begin(), reliable.end(), by_score_desc);
  std::sort(unreliable.begin(), unreliable.end(), by_score_desc);

  CurriculumSchedule schedule;
  auto chunk = [](const std::vector<TrainExample>& cls,
                  std::array<std::vector<std::string>, 10>& batches, int first_batch) {
    std::size_t base = cls.size() / 5;
    std::size_t cursor = 0;
    for (int q = 0; q < 5; ++q) {
      // remainder elements join the last quintile of the class
      std::size_t take = q == 4 ? cls.size() - cursor : base;
      auto& batch = batches[first_batch + q];
      for (std::size_t i = 0; i < take; ++i) batch.push_back(cls[cursor++].id);
    }
  };
  chunk(reliable, schedule.batches, 0);    // d1..d5, d1 = highest scores
  chunk(unreliable, schedule.batches, 5);  // d6..d10, d10 = lowest scores
  return schedule;
}

TrainHistory babysteps_train(SageModel& model, const ModelGraph& mg, const HeteroGraph& g,
                             const CurriculumSchedule& schedule, const TrainConfig& config) {
  for (int b = 0; b < CurriculumSchedule::kBatches; ++b)
    if (schedule.batches[b].empty())
      throw ConfigError("curriculum batch d" + std::to_string(b + 1) + " is empty");

  std::unordered_map<std::string, int> local;
  const auto& block = mg.supervised();
  for (std::size_t i = 0; i < block.globals.size(); ++i)
    local[g.id_of(block.globals[i])] = static_cast<int>(i);

  auto stage_mask = [&](int stage) {
    std::vector<int> mask;
    for (const auto& id : schedule.active_ids(stage)) {
      auto it = local.find(id);
      if (it == local.end())
        throw DataError("curriculum batch references unknown domain '" + id + "'");
      mask.push_back(it->second);
    }
    std::sort(mask.begin(), mask.end());
    return mask;
  };

  Trainer trainer(model, mg, config);
  std::vector<Matrix> best = model.clone_params();
  double global_best = std::numeric_limits<double>::infinity();
  int global_best_epoch = -1;
  bool final_stage_ran = false;
  double final_best = std::numeric_limits<double>::infinity();
  int final_best_epoch = -1;

  for (int stage = 1; stage <= CurriculumSchedule::kStages; ++stage) {
    if (trainer.global_epoch() >= config.max_epochs) break;
    if (config.reset_lr_per_stage) trainer.reset_lr_counter();
    bool is_final = stage == CurriculumSchedule::kStages;
    std::vector<int> mask = stage_mask(stage);
    EarlyStopper stopper(is_final ? config.patience : config.stage_patience);
    int epochs_run = 0;
    while (trainer.global_epoch() < config.max_epochs) {
      EpochRecord rec = trainer.run_epoch(mask, stage);
      ++epochs_run;
      bool improved = stopper.observe(rec.val_loss, rec.epoch);
      if (improved && rec.val_loss < global_best) {
        global_best = rec.val_loss;
        global_best_epoch = rec.epoch;
        if (!is_final) best = model.clone_params();
      }
      if (is_final && improved) {
        if (rec.val_loss < final_best) {
          final_best = rec.val_loss;
          final_best_epoch = rec.epoch;
          best = model.clone_params();
        }
      }
      if (stopper.should_stop()) break;
    }
    if (is_final && epochs_run > 0) final_stage_ran = true;
    trainer.history.stages.push_back(
        StageRecord{stage, schedule.active_batch_numbers(stage), epochs_run, stopper.best});
  }

  model.restore_params(best);
  if (final_stage_ran) {
    trainer.history.best_epoch = final_best_epoch;
    trainer.history.best_val_loss = final_best;
  } else {
    trainer.history.best_epoch = global_best_epoch;
    trainer.history.best_val_loss = global_best;
  }
  return trainer.history;
}

}  // namespace credgraph
