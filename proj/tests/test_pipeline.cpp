#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "credgraph/pipeline.hpp"
#include "credgraph/sha256.hpp"
#include "credgraph/table.hpp"

using namespace credgraph;
using json = nlohmann::json;

namespace {

const std::filesystem::path kDemoDir = std::filesystem::path(CREDGRAPH_SOURCE_DIR) / "data/demo";

RunConfig demo_config(const std::filesystem::path& out_dir) {
  auto cfg = load_run_config(kDemoDir / "config.json");
  cfg.out_dir = out_dir;
  return cfg;
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "credgraph_pipeline" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

json read_json(const std::filesystem::path& p) { return json::parse(slurp(p)); }

}  // namespace

TEST_CASE("validate_config reports every problem by field name") {
  auto cfg = demo_config("/tmp/unused");
  CHECK(validate_config(cfg).empty());

  SUBCASE("missing attributes file") {
    cfg.inputs.attributes = kDemoDir / "no_such_file.tsv";
    auto errors = validate_config(cfg);
    REQUIRE(!errors.empty());
    bool found = false;
    for (const auto& e : errors) found = found || e.find("attributes") != std::string::npos;
    CHECK(found);
  }

  SUBCASE("dredge variant requires SERP inputs") {
    cfg.variant = GraphVariant::EDomainsUsersDredge;
    cfg.inputs.serp.clear();
    auto errors = validate_config(cfg);
    bool found = false;
    for (const auto& e : errors) found = found || e.find("serp") != std::string::npos;
    CHECK(found);
  }

  SUBCASE("mixed homogeneous variants need positional features") {
    cfg.variant = GraphVariant::HDomainsUsers;
    cfg.f_domains = FeatureSource::Attributes;
    auto errors = validate_config(cfg);
    CHECK(!errors.empty());
  }

  SUBCASE("ratio and hyperparameter checks") {
    cfg.split_ratios = {0.5, 0.4, 0.2};
    cfg.train.base_lr = 0.0;
    cfg.discovery.threshold = 1.5;
    auto errors = validate_config(cfg);
    CHECK(errors.size() >= 3);
  }
}

TEST_CASE("config parsing: overrides, defaults, relative paths") {
  auto cfg = load_run_config(kDemoDir / "config.json");
  CHECK(cfg.variant == GraphVariant::EDomainsUsers);
  CHECK(cfg.seed == 7);
  CHECK(cfg.binarize_threshold == doctest::Approx(0.5162));
  CHECK(cfg.inputs.attributes == kDemoDir / "attributes.tsv");
  CHECK(cfg.train.hidden_dim == 64);
  CHECK(cfg.embed.skipgram.dim == 16);
  CHECK_THROWS_AS(parse_run_config("{not json", "/tmp"), ConfigError);
  CHECK_THROWS_AS(graph_variant_from_string("H_bogus"), ConfigError);
}

TEST_CASE("relative out_dir resolves against CREDGRAPH_OUT_ROOT") {
  auto root = fresh_dir("out_root");
  setenv("CREDGRAPH_OUT_ROOT", root.string().c_str(), 1);
  auto cfg = parse_run_config(R"({"out_dir": "nested/run"})", "/tmp");
  unsetenv("CREDGRAPH_OUT_ROOT");
  CHECK(cfg.out_dir == root / "nested/run");
  auto plain = parse_run_config(R"({"out_dir": "/abs/run"})", "/tmp");
  CHECK(plain.out_dir == std::filesystem::path("/abs/run"));
}

TEST_CASE("full demo run produces a complete, digest-covered artifact set") {
  auto out = fresh_dir("full");
  auto cfg = demo_config(out);
  auto report_path = run_pipeline(cfg);
  CHECK(report_path == out / "report.json");

  for (const char* artifact :
       {"graph/manifest.json", "graph/domains.tsv", "graph/users.tsv", "graph/dredge.tsv",
        "graph/edges_phi1.tsv", "graph/edges_phi2.tsv", "embeddings.tsv", "model.ckpt",
        "predictions.tsv", "ranking.tsv", "metrics.json", "sweep.tsv", "report.json"})
    CHECK(std::filesystem::exists(out / artifact));

  json report = read_json(out / "report.json");
  // every artifact is reachable from the digest manifest; no orphans
  std::size_t files_on_disk = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(out)) {
    if (!entry.is_regular_file() || entry.path().filename() == "report.json") continue;
    ++files_on_disk;
    auto rel = std::filesystem::relative(entry.path(), out).generic_string();
    CHECK(report["artifacts"].contains(rel));
  }
  CHECK(report["artifacts"].size() == files_on_disk);

  json metrics = read_json(out / "metrics.json");
  CHECK(metrics["variant"] == "E_domains_users");
  CHECK(metrics["non_comparable"] == false);
  double acc = metrics["classification"]["test_accuracy"].get<double>();
  CHECK(acc >= 0.5);  // block structure is strongly learnable
  CHECK(metrics["discovery"]["provenance"] == "gnn");
  CHECK(metrics["discovery"]["precision_at"].contains("5"));
  CHECK(metrics["sweep"].is_array());
  CHECK(metrics["sweep"].size() == 9);

  // stage logs captured in the report
  bool saw_build = false, saw_train = false;
  for (const auto& s : report["stages"]) {
    if (s["stage"] == "build-graph") saw_build = true;
    if (s["stage"] == "train") saw_train = true;
  }
  CHECK(saw_build);
  CHECK(saw_train);
}

TEST_CASE("identical config and master seed give byte-identical reports") {
  auto out1 = fresh_dir("det1");
  auto out2 = fresh_dir("det2");
  run_pipeline(demo_config(out1));
  run_pipeline(demo_config(out2));
  CHECK(slurp(out1 / "metrics.json") == slurp(out2 / "metrics.json"));
  CHECK(slurp(out1 / "report.json") == slurp(out2 / "report.json"));
  CHECK(slurp(out1 / "predictions.tsv") == slurp(out2 / "predictions.tsv"));

  // a different master seed changes the run
  auto out3 = fresh_dir("det3");
  auto cfg3 = demo_config(out3);
  cfg3.seed = 8;
  run_pipeline(cfg3);
  CHECK(slurp(out1 / "metrics.json") != slurp(out3 / "metrics.json"));
}

TEST_CASE("batch mode aggregates mean and standard deviation per metric") {
  auto out = fresh_dir("batch");
  auto cfg = demo_config(out);
  cfg.seeds = {1, 2, 3};
  // shrink training to keep the batch quick
  cfg.train.max_epochs = 60;
  cfg.train.patience = 15;
  run_pipeline(cfg);

  json report = read_json(out / "report.json");
  REQUIRE(report["runs"].size() == 3);
  CHECK(report["aggregate"]["test_accuracy"]["n"] == 3);
  CHECK(report["aggregate"]["test_accuracy"].contains("mean"));
  CHECK(report["aggregate"]["test_accuracy"].contains("std"));

  // per-seed runs are independent: deleting one seed's artifacts leaves
  // another's digests unchanged
  std::string seed2_digest;
  for (const auto& row : report["runs"])
    if (row["seed"] == 2) seed2_digest = row["metrics_digest"].get<std::string>();
  std::filesystem::remove_all(out / "seed_1");
  auto recomputed = sha256_file_hex(out / "seed_2" / "metrics.json");
  CHECK(recomputed == seed2_digest);

  auto summary = summarize_run(out);
  CHECK(summary.find("batch aggregate") != std::string::npos);
  CHECK(summary.find("test_accuracy") != std::string::npos);
}

TEST_CASE("curriculum run logs stage records") {
  auto out = fresh_dir("curriculum");
  auto cfg = demo_config(out);
  cfg.train.curriculum = true;
  cfg.train.max_epochs = 120;
  cfg.train.patience = 20;
  cfg.train.stage_patience = 5;
  run_pipeline(cfg);

  auto ckpt = load_checkpoint(out / "model.ckpt");
  json extra = json::parse(ckpt.extra_json);
  REQUIRE(extra["history"]["stages"].is_array());
  CHECK(extra["history"]["stages"].size() >= 1);
  CHECK(extra["history"]["stages"][0]["active_batches"] == json::array({1, 10}));
}

TEST_CASE("dredge variant with SERP-based discovery ranks candidate domains") {
  auto out = fresh_dir("dredge");
  auto cfg = demo_config(out);
  cfg.variant = GraphVariant::EDomainsUsersDredge;
  cfg.discovery.variant = "dredge_upper";
  cfg.discovery.threshold = 0.0;
  cfg.train.max_epochs = 60;
  cfg.train.patience = 15;
  run_pipeline(cfg);

  json manifest = read_json(out / "graph/manifest.json");
  CHECK(manifest["counts"]["dredge_words"].get<int>() == 5);  // retained queries
  CHECK(manifest["counts"]["phi3"].get<int>() > 0);           // observed usage edges
  CHECK(manifest["counts"]["phi4"].get<int>() > 0);

  auto ranking = read_table(out / "ranking.tsv");
  CHECK(!ranking.rows.empty());
  bool has_candidate = false;
  for (const auto& row : ranking.rows)
    has_candidate = has_candidate || row[1].rfind("cand", 0) == 0;
  CHECK(has_candidate);

  // lower variant is bounded by observed dredge words
  auto out_lower = fresh_dir("dredge_lower");
  auto cfg_lower = cfg;
  cfg_lower.out_dir = out_lower;
  cfg_lower.discovery.variant = "dredge_lower";
  run_pipeline(cfg_lower);
  auto lower_ranking = read_table(out_lower / "ranking.tsv");
  CHECK(lower_ranking.rows.size() <= ranking.rows.size());
}

TEST_CASE("H_domains with attribute features skips the embed stage") {
  auto out = fresh_dir("hdomains");
  auto cfg = demo_config(out);
  cfg.variant = GraphVariant::HDomains;
  cfg.f_domains = FeatureSource::Attributes;
  cfg.train.max_epochs = 60;
  cfg.train.patience = 15;
  run_pipeline(cfg);
  CHECK(!std::filesystem::exists(out / "embeddings.tsv"));
  json metrics = read_json(out / "metrics.json");
  CHECK(metrics["variant"] == "H_domains");
  CHECK(metrics["classification"]["test_accuracy"].get<double>() >= 0.5);
  json manifest = read_json(out / "graph/manifest.json");
  CHECK(manifest["counts"]["users"].get<int>() == 0);
  CHECK(manifest["counts"]["phi2"].get<int>() == 0);
}

TEST_CASE("H_users variant is flagged non-comparable") {
  auto out = fresh_dir("husers");
  auto cfg = demo_config(out);
  cfg.variant = GraphVariant::HUsers;
  cfg.f_domains = FeatureSource::Positional;
  cfg.f_users = FeatureSource::Positional;
  cfg.train.max_epochs = 60;
  cfg.train.patience = 15;
  run_pipeline(cfg);
  json metrics = read_json(out / "metrics.json");
  CHECK(metrics["non_comparable"] == true);

  // evaluation restricted to domains mentioned in the social stream
  json manifest = read_json(out / "graph/manifest.json");
  CHECK(manifest["counts"]["domains"].get<int>() < 110);
  CHECK(manifest["counts"]["phi1"].get<int>() == 0);
}

TEST_CASE("stage failures name the failing stage") {
  auto out = fresh_dir("failure");
  auto cfg = demo_config(out);
  cfg.inputs.mentions = kDemoDir / "serp.tsv";  // wrong schema for mentions
  try {
    run_pipeline(cfg);
    FAIL("expected a schema error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("build-graph") != std::string::npos);
  }
  // partial artifacts preserved (the run directory still exists)
  CHECK(std::filesystem::exists(out));
}

TEST_CASE("standalone stages compose through the run directory") {
  auto out = fresh_dir("staged");
  auto cfg = demo_config(out);
  cfg.train.max_epochs = 40;
  cfg.train.patience = 10;

  PipelineRun run(cfg, cfg.seed, cfg.out_dir);
  // train before build-graph fails with a helpful message
  CHECK_THROWS_AS(run.stage_train(), DataError);
  run.stage_build_graph();
  CHECK_THROWS_AS(run.stage_train(), DataError);  // embeddings missing
  run.stage_embed();
  run.stage_train();
  run.stage_predict();
  run.stage_discover();
  run.stage_evaluate();
  CHECK(std::filesystem::exists(out / "metrics.json"));
}
