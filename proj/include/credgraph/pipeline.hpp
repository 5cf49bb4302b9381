#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "credgraph/curriculum.hpp"
#include "credgraph/embed.hpp"
#include "credgraph/evalkit.hpp"
#include "credgraph/gnn.hpp"
#include "credgraph/graph.hpp"
#include "credgraph/ingest.hpp"

namespace credgraph {

// ---------------------------------------------------------------------------
// Declarative run configuration (JSON file; flags override keys).
// ---------------------------------------------------------------------------

enum class GraphVariant {
  HDomains,
  HUsers,
  HDomainsUsers,
  EDomainsUsers,
  EDomainsUsersDredge,
};

GraphVariant graph_variant_from_string(std::string_view s);
std::string_view to_string(GraphVariant v);
bool variant_is_heterogeneous(GraphVariant v);

struct InputPaths {
  std::filesystem::path attributes;
  std::filesystem::path backlinks;
  std::filesystem::path labels;
  std::filesystem::path mentions;
  std::filesystem::path serp;
  std::filesystem::path dredge_texts;
  std::filesystem::path user_vectors;
  std::filesystem::path dredge_vectors;
  std::filesystem::path judgments;
  std::filesystem::path seed_list;
  std::filesystem::path eval_list;
};

struct EmbedStageConfig {
  WalkConfig walks;
  SkipgramConfig skipgram;
  std::string source = "union";  // union | users_graph
};

struct DiscoveryConfig {
  double threshold = 0.7;
  std::string variant = "gnn";  // gnn | dredge_lower | dredge_upper
  std::int64_t min_occurrence = 1;
};

struct RunConfig {
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;  // batch mode when non-empty

  GraphVariant variant = GraphVariant::EDomainsUsers;
  double binarize_threshold = kDefaultBinarizeThreshold;
  bool boundary_reliable = true;
  bool add_reverse = true;
  bool keep_self_loops = true;

  InputPaths inputs;
  FeatureSource f_domains = FeatureSource::Attributes;
  FeatureSource f_users = FeatureSource::Positional;
  FeatureSource f_dredge = FeatureSource::Text;

  EmbedStageConfig embed;
  TrainConfig train;
  std::array<double, 3> split_ratios = {0.8, 0.1, 0.1};
  CleaningParams cleaning;
  DiscoveryConfig discovery;
  std::vector<double> sweep_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
};

/// Parses the JSON config; relative paths resolve against the config file's
/// directory; a relative out_dir resolves against $CREDGRAPH_OUT_ROOT when
/// set.
RunConfig load_run_config(const std::filesystem::path& config_path);
RunConfig parse_run_config(const std::string& json_text,
                           const std::filesystem::path& base_dir);

/// Schema, path and combination checks; empty result means valid.
std::vector<std::string> validate_config(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Stages. Each stage reads its inputs from disk and persists its artifact
// under the run directory, so CLI subcommands compose; `run` executes them
// in dependency order.
// ---------------------------------------------------------------------------

struct StageLogEntry {
  std::string stage;
  std::vector<std::pair<std::string, std::string>> facts;  // ordered key/value
};

class PipelineRun {
 public:
  PipelineRun(RunConfig cfg, std::uint64_t seed, std::filesystem::path run_dir);

  void stage_build_graph();
  void stage_embed();
  void stage_train();
  void stage_predict();
  void stage_discover();
  void stage_evaluate();
  void write_report();

  /// All stages in dependency order; returns the report path.
  std::filesystem::path run_all();

  const std::filesystem::path& run_dir() const { return run_dir_; }
  const std::vector<StageLogEntry>& stage_logs() const { return logs_; }

 private:
  bool needs_positional() const;
  bool needs_embeddings_artifact() const;
  LoadedSnapshot load_graph() const;
  void log(StageLogEntry entry) { logs_.push_back(std::move(entry)); }

  RunConfig cfg_;
  std::uint64_t seed_;
  std::filesystem::path run_dir_;
  std::vector<StageLogEntry> logs_;
};

/// Single run or, when cfg.seeds is non-empty, one sub-run per seed plus an
/// aggregate report with mean and standard deviation per metric. Returns the
/// top-level report path.
std::filesystem::path run_pipeline(const RunConfig& cfg);

/// Human-readable summary of an existing run directory.
std::string summarize_run(const std::filesystem::path& run_dir);

}  // namespace credgraph
