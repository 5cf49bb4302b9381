// credgraph: build credibility graphs, train curriculum-scheduled SAGE
// classifiers, and evaluate unreliable-domain discovery.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "credgraph/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitTraining = 4;

struct CommonOpts {
  std::string config_path;
  std::string out_dir_override;
  std::string variant_override;
  std::uint64_t seed_override = 0;
  std::vector<CLI::Option*> seed_options;

  bool seed_set() const {
    for (const CLI::Option* opt : seed_options)
      if (opt->count() > 0) return true;
    return false;
  }
};

credgraph::RunConfig load_config(const CommonOpts& opts) {
  auto cfg = credgraph::load_run_config(opts.config_path);
  if (!opts.out_dir_override.empty()) cfg.out_dir = opts.out_dir_override;
  if (!opts.variant_override.empty())
    cfg.variant = credgraph::graph_variant_from_string(opts.variant_override);
  if (opts.seed_set()) {
    cfg.seed = opts.seed_override;
    cfg.seeds.clear();
  }
  return cfg;
}

void require_valid(const credgraph::RunConfig& cfg) {
  auto errors = credgraph::validate_config(cfg);
  if (errors.empty()) return;
  std::string message = "invalid configuration:";
  for (const auto& e : errors) message += "\n  - " + e;
  throw credgraph::ConfigError(message);
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("-c,--config", opts.config_path, "Run configuration (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out-dir", opts.out_dir_override, "Override out_dir from the config");
  cmd->add_option("--variant", opts.variant_override, "Override graph.variant");
  opts.seed_options.push_back(
      cmd->add_option("--seed", opts.seed_override, "Override the master seed"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"website credibility graphs, curriculum GNN training, and discovery evaluation"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string stage_to_run;
  std::string report_dir;

  for (const char* name : {"build-graph", "embed", "train", "predict", "discover", "evaluate"}) {
    auto* cmd = app.add_subcommand(name, std::string("Run the ") + name + " stage");
    add_common(cmd, opts);
    cmd->callback([&stage_to_run, name]() { stage_to_run = name; });
  }
  {
    auto* cmd = app.add_subcommand("run", "Run every stage and write the report");
    add_common(cmd, opts);
    cmd->callback([&stage_to_run]() { stage_to_run = "run"; });
  }
  {
    auto* cmd = app.add_subcommand("report", "Summarize an existing run directory");
    cmd->add_option("out_dir", report_dir, "Run directory")->required();
    cmd->callback([&stage_to_run]() { stage_to_run = "report"; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (stage_to_run == "report") {
      std::cout << credgraph::summarize_run(report_dir);
      return kExitOk;
    }

    auto cfg = load_config(opts);
    if (stage_to_run == "run") {
      auto report = credgraph::run_pipeline(cfg);
      std::cout << "report written to " << report.string() << "\n";
      return kExitOk;
    }

    require_valid(cfg);
    credgraph::PipelineRun run(cfg, cfg.seed, cfg.out_dir);
    if (stage_to_run == "build-graph")
      run.stage_build_graph();
    else if (stage_to_run == "embed")
      run.stage_embed();
    else if (stage_to_run == "train")
      run.stage_train();
    else if (stage_to_run == "predict")
      run.stage_predict();
    else if (stage_to_run == "discover")
      run.stage_discover();
    else if (stage_to_run == "evaluate")
      run.stage_evaluate();
    for (const auto& entry : run.stage_logs()) {
      std::cout << "[" << entry.stage << "]\n";
      for (const auto& [k, v] : entry.facts) std::cout << "  " << k << ": " << v << "\n";
    }
    return kExitOk;
  } catch (const credgraph::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const credgraph::TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kExitTraining;
  } catch (const credgraph::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kExitData;
  } catch (const credgraph::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
