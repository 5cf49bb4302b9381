#include "credgraph/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "credgraph/rng.hpp"
#include "credgraph/sha256.hpp"
#include "credgraph/table.hpp"

namespace credgraph {

using json = nlohmann::ordered_json;

GraphVariant graph_variant_from_string(std::string_view s) {
  if (s == "H_domains") return GraphVariant::HDomains;
  if (s == "H_users") return GraphVariant::HUsers;
  if (s == "H_domains_users") return GraphVariant::HDomainsUsers;
  if (s == "E_domains_users") return GraphVariant::EDomainsUsers;
  if (s == "E_domains_users_dredge") return GraphVariant::EDomainsUsersDredge;
  throw ConfigError("unknown graph variant: " + std::string(s));
}

std::string_view to_string(GraphVariant v) {
  switch (v) {
    case GraphVariant::HDomains: return "H_domains";
    case GraphVariant::HUsers: return "H_users";
    case GraphVariant::HDomainsUsers: return "H_domains_users";
    case GraphVariant::EDomainsUsers: return "E_domains_users";
    case GraphVariant::EDomainsUsersDredge: return "E_domains_users_dredge";
  }
  return "?";
}

bool variant_is_heterogeneous(GraphVariant v) {
  return v == GraphVariant::EDomainsUsers || v == GraphVariant::EDomainsUsersDredge;
}

namespace {

bool variant_has_users(GraphVariant v) { return v != GraphVariant::HDomains; }
bool variant_has_webgraph(GraphVariant v) { return v != GraphVariant::HUsers; }
bool variant_has_dredge(GraphVariant v) { return v == GraphVariant::EDomainsUsersDredge; }

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;

  if (j.contains("out_dir")) {
    std::filesystem::path out(j.at("out_dir").get<std::string>());
    if (out.is_relative()) {
      if (const char* root = std::getenv("CREDGRAPH_OUT_ROOT"))
        out = std::filesystem::path(root) / out;
    }
    cfg.out_dir = out;
  }
  cfg.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();

  if (j.contains("graph")) {
    const auto& g = j.at("graph");
    if (g.contains("variant"))
      cfg.variant = graph_variant_from_string(g.at("variant").get<std::string>());
    cfg.binarize_threshold = g.value("binarize_threshold", cfg.binarize_threshold);
    cfg.boundary_reliable = g.value("boundary_reliable", cfg.boundary_reliable);
    cfg.add_reverse = g.value("add_reverse", cfg.add_reverse);
    cfg.keep_self_loops = g.value("keep_self_loops", cfg.keep_self_loops);
  }

  if (j.contains("inputs")) {
    const auto& in = j.at("inputs");
    auto get = [&in, &base_dir](const char* key) -> std::filesystem::path {
      if (!in.contains(key)) return {};
      return resolve(base_dir, in.at(key).get<std::string>());
    };
    cfg.inputs.attributes = get("attributes");
    cfg.inputs.backlinks = get("backlinks");
    cfg.inputs.labels = get("labels");
    cfg.inputs.mentions = get("mentions");
    cfg.inputs.serp = get("serp");
    cfg.inputs.dredge_texts = get("dredge_texts");
    cfg.inputs.user_vectors = get("user_vectors");
    cfg.inputs.dredge_vectors = get("dredge_vectors");
    cfg.inputs.judgments = get("judgments");
    cfg.inputs.seed_list = get("seed_list");
    cfg.inputs.eval_list = get("eval_list");
  }

  if (j.contains("features")) {
    const auto& f = j.at("features");
    if (f.contains("domains"))
      cfg.f_domains = feature_source_from_string(f.at("domains").get<std::string>());
    if (f.contains("users"))
      cfg.f_users = feature_source_from_string(f.at("users").get<std::string>());
    if (f.contains("dredge"))
      cfg.f_dredge = feature_source_from_string(f.at("dredge").get<std::string>());
  }

  if (j.contains("embed")) {
    const auto& e = j.at("embed");
    cfg.embed.walks.walk_length = e.value("walk_length", cfg.embed.walks.walk_length);
    cfg.embed.walks.walks_per_node = e.value("walks_per_node", cfg.embed.walks.walks_per_node);
    cfg.embed.walks.p = e.value("p", cfg.embed.walks.p);
    cfg.embed.walks.q = e.value("q", cfg.embed.walks.q);
    cfg.embed.skipgram.dim = e.value("dim", cfg.embed.skipgram.dim);
    cfg.embed.skipgram.context = e.value("context", cfg.embed.skipgram.context);
    cfg.embed.skipgram.negatives = e.value("negatives", cfg.embed.skipgram.negatives);
    cfg.embed.skipgram.epochs = e.value("epochs", cfg.embed.skipgram.epochs);
    cfg.embed.skipgram.lr = e.value("lr", cfg.embed.skipgram.lr);
    cfg.embed.skipgram.min_lr = e.value("min_lr", cfg.embed.skipgram.min_lr);
    cfg.embed.skipgram.threads = e.value("threads", cfg.embed.skipgram.threads);
    cfg.embed.source = e.value("source", cfg.embed.source);
  }

  if (j.contains("train")) {
    const auto& t = j.at("train");
    cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
    cfg.train.patience = t.value("patience", cfg.train.patience);
    cfg.train.base_lr = t.value("base_lr", cfg.train.base_lr);
    cfg.train.dropout = t.value("dropout", cfg.train.dropout);
    cfg.train.hidden_dim = t.value("hidden_dim", cfg.train.hidden_dim);
    cfg.train.weighted_mean = t.value("weighted_mean", cfg.train.weighted_mean);
    cfg.train.curriculum = t.value("curriculum", cfg.train.curriculum);
    cfg.train.stage_patience = t.value("stage_patience", cfg.train.stage_patience);
    cfg.train.reset_lr_per_stage = t.value("reset_lr_per_stage", cfg.train.reset_lr_per_stage);
  }

  if (j.contains("split")) {
    auto ratios = j.at("split").value("ratios", std::vector<double>{0.8, 0.1, 0.1});
    if (ratios.size() != 3) throw ConfigError("split.ratios must have 3 entries");
    cfg.split_ratios = {ratios[0], ratios[1], ratios[2]};
  }

  if (j.contains("cleaning")) {
    const auto& c = j.at("cleaning");
    cfg.cleaning.min_user_tweets = c.value("min_user_tweets", cfg.cleaning.min_user_tweets);
    cfg.cleaning.min_tweet_observations =
        c.value("min_tweet_observations", cfg.cleaning.min_tweet_observations);
    cfg.cleaning.min_domain_users = c.value("min_domain_users", cfg.cleaning.min_domain_users);
    cfg.cleaning.min_user_domains = c.value("min_user_domains", cfg.cleaning.min_user_domains);
  }

  if (j.contains("discovery")) {
    const auto& d = j.at("discovery");
    cfg.discovery.threshold = d.value("threshold", cfg.discovery.threshold);
    cfg.discovery.variant = d.value("variant", cfg.discovery.variant);
    cfg.discovery.min_occurrence = d.value("min_occurrence", cfg.discovery.min_occurrence);
  }

  if (j.contains("sweep")) cfg.sweep_grid = j.at("sweep").value("grid", cfg.sweep_grid);

  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& config_path) {
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open config: " + config_path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_run_config(text, std::filesystem::absolute(config_path).parent_path());
}

std::vector<std::string> validate_config(const RunConfig& cfg) {
  std::vector<std::string> errors;
  auto need_path = [&errors](const std::filesystem::path& p, const char* field,
                             const char* why) {
    if (p.empty())
      errors.push_back(std::string("inputs.") + field + " is required (" + why + ")");
    else if (!std::filesystem::exists(p))
      errors.push_back(std::string("inputs.") + field + " does not exist: " + p.string());
  };

  if (cfg.out_dir.empty()) errors.push_back("out_dir is required");

  double ratio_sum = cfg.split_ratios[0] + cfg.split_ratios[1] + cfg.split_ratios[2];
  if (std::abs(ratio_sum - 1.0) > 1e-9) errors.push_back("split.ratios must sum to 1");
  if (cfg.binarize_threshold < 0.0 || cfg.binarize_threshold > 1.0)
    errors.push_back("graph.binarize_threshold must lie in [0,1]");
  if (cfg.train.base_lr <= 0.0) errors.push_back("train.base_lr must be > 0");
  if (cfg.train.patience >= cfg.train.max_epochs)
    errors.push_back("train.patience must be smaller than train.max_epochs");
  if (cfg.train.dropout < 0.0 || cfg.train.dropout >= 1.0)
    errors.push_back("train.dropout must lie in [0,1)");
  if (cfg.discovery.threshold < 0.0 || cfg.discovery.threshold > 1.0)
    errors.push_back("discovery.threshold must lie in [0,1]");

  need_path(cfg.inputs.labels, "labels", "training needs reliability labels");
  if (variant_has_webgraph(cfg.variant))
    need_path(cfg.inputs.backlinks, "backlinks", "variant uses the webgraph");
  if (variant_has_users(cfg.variant))
    need_path(cfg.inputs.mentions, "mentions", "variant uses the social stream");
  if (variant_has_dredge(cfg.variant)) {
    need_path(cfg.inputs.serp, "serp", "dredge variant needs SERP results");
    need_path(cfg.inputs.dredge_texts, "dredge_texts", "dredge variant needs usage texts");
  }

  // feature/variant combinations per the ablation grid
  if (variant_is_heterogeneous(cfg.variant)) {
    if (cfg.f_domains != FeatureSource::Attributes)
      errors.push_back("heterogeneous variants use attribute features for domains");
    if (cfg.f_users == FeatureSource::Attributes)
      errors.push_back("users cannot take attribute features");
  } else {
    if (cfg.variant == GraphVariant::HDomains) {
      if (cfg.f_domains == FeatureSource::Text)
        errors.push_back("text features are not defined for domains");
    } else if (cfg.f_domains != FeatureSource::Positional ||
               cfg.f_users != FeatureSource::Positional) {
      errors.push_back("mixed-node homogeneous variants require positional features everywhere");
    }
  }
  if (cfg.f_domains == FeatureSource::Attributes && variant_has_webgraph(cfg.variant))
    need_path(cfg.inputs.attributes, "attributes", "domain features come from the attribute table");
  if (cfg.f_users == FeatureSource::Text && variant_has_users(cfg.variant))
    need_path(cfg.inputs.user_vectors, "user_vectors", "text user features need a vectors file");
  if (cfg.f_dredge == FeatureSource::Text && variant_has_dredge(cfg.variant))
    need_path(cfg.inputs.dredge_vectors, "dredge_vectors",
              "text dredge features need a vectors file");

  if (cfg.train.curriculum && cfg.inputs.labels.empty())
    errors.push_back("curriculum training needs continuous reliability scores (inputs.labels)");

  if (cfg.discovery.variant != "gnn" && cfg.discovery.variant != "dredge_lower" &&
      cfg.discovery.variant != "dredge_upper")
    errors.push_back("discovery.variant must be gnn | dredge_lower | dredge_upper");
  if (cfg.discovery.variant != "gnn") {
    need_path(cfg.inputs.serp, "serp", "dredge-word discovery needs SERP results");
    if (cfg.discovery.variant == "dredge_lower")
      need_path(cfg.inputs.dredge_texts, "dredge_texts",
                "the lower discovery variant is bounded by observed dredge words");
  }
  if (cfg.embed.source != "union" && cfg.embed.source != "users_graph")
    errors.push_back("embed.source must be union | users_graph");
  return errors;
}

// ---------------------------------------------------------------------------
// PipelineRun
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kGraphDir = "graph";
constexpr const char* kEmbeddingsFile = "embeddings.tsv";
constexpr const char* kCheckpointFile = "model.ckpt";
constexpr const char* kPredictionsFile = "predictions.tsv";
constexpr const char* kRankingFile = "ranking.tsv";
constexpr const char* kMetricsFile = "metrics.json";
constexpr const char* kSweepFile = "sweep.tsv";
constexpr const char* kReportFile = "report.json";

json env_fingerprint() {
  json env;
  env["library"] = "credgraph 0.1.0";
  env["compiler"] = __VERSION__;
  env["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                 "." + std::to_string(EIGEN_MINOR_VERSION);
#if defined(__linux__)
  env["platform"] = "linux";
#elif defined(__APPLE__)
  env["platform"] = "darwin";
#else
  env["platform"] = "other";
#endif
  return env;
}

json config_echo(const RunConfig& cfg, std::uint64_t seed) {
  json j;
  j["variant"] = std::string(to_string(cfg.variant));
  j["seed"] = seed;
  j["binarize_threshold"] = cfg.binarize_threshold;
  j["boundary_reliable"] = cfg.boundary_reliable;
  j["add_reverse"] = cfg.add_reverse;
  j["keep_self_loops"] = cfg.keep_self_loops;
  j["features"] = {{"domains", std::string(to_string(cfg.f_domains))},
                   {"users", std::string(to_string(cfg.f_users))},
                   {"dredge", std::string(to_string(cfg.f_dredge))}};
  j["embed"] = {{"walk_length", cfg.embed.walks.walk_length},
                {"walks_per_node", cfg.embed.walks.walks_per_node},
                {"p", cfg.embed.walks.p},
                {"q", cfg.embed.walks.q},
                {"dim", cfg.embed.skipgram.dim},
                {"context", cfg.embed.skipgram.context},
                {"negatives", cfg.embed.skipgram.negatives},
                {"epochs", cfg.embed.skipgram.epochs},
                {"lr", cfg.embed.skipgram.lr},
                {"source", cfg.embed.source}};
  j["train"] = {{"max_epochs", cfg.train.max_epochs},
                {"patience", cfg.train.patience},
                {"base_lr", cfg.train.base_lr},
                {"dropout", cfg.train.dropout},
                {"hidden_dim", cfg.train.hidden_dim},
                {"weighted_mean", cfg.train.weighted_mean},
                {"curriculum", cfg.train.curriculum},
                {"stage_patience", cfg.train.stage_patience},
                {"reset_lr_per_stage", cfg.train.reset_lr_per_stage}};
  j["split_ratios"] = {cfg.split_ratios[0], cfg.split_ratios[1], cfg.split_ratios[2]};
  j["discovery"] = {{"threshold", cfg.discovery.threshold},
                    {"variant", cfg.discovery.variant},
                    {"min_occurrence", cfg.discovery.min_occurrence}};
  j["sweep_grid"] = cfg.sweep_grid;
  // edge weights do not modulate aggregation unless weighted_mean is set;
  // surfaced here so reports carry the choice
  j["edge_weights_used"] = cfg.train.weighted_mean;
  return j;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return json::parse(in);
}

struct PredictionRow {
  std::string domain;
  std::optional<BinaryLabel> label;
  std::optional<SplitTag> split;
  double p_reliable = 0.0;
  double p_unreliable = 0.0;
};

std::vector<PredictionRow> load_predictions(const std::filesystem::path& path) {
  Table t = read_table(path);
  std::size_t c_d = t.column("domain"), c_l = t.column("label"), c_s = t.column("split");
  std::size_t c_pr = t.column("p_reliable"), c_pu = t.column("p_unreliable");
  std::vector<PredictionRow> rows;
  rows.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    PredictionRow p;
    p.domain = row[c_d];
    if (!row[c_l].empty())
      p.label = row[c_l] == "reliable" ? BinaryLabel::Reliable : BinaryLabel::Unreliable;
    if (!row[c_s].empty()) {
      if (row[c_s] == "train")
        p.split = SplitTag::Train;
      else if (row[c_s] == "val")
        p.split = SplitTag::Val;
      else if (row[c_s] == "test")
        p.split = SplitTag::Test;
      else
        p.split = SplitTag::Unlabeled;
    }
    p.p_reliable = parse_double(row[c_pr], path, r + 2);
    p.p_unreliable = parse_double(row[c_pu], path, r + 2);
    rows.push_back(std::move(p));
  }
  return rows;
}

Splits splits_from_snapshot(const HeteroGraph& g) {
  Splits splits;
  for (std::uint32_t node : g.nodes_of(NodeType::Domain)) {
    const auto& rec = g.domain(node);
    if (!rec.split) continue;
    switch (*rec.split) {
      case SplitTag::Train: splits.train.push_back(rec.id); break;
      case SplitTag::Val: splits.val.push_back(rec.id); break;
      case SplitTag::Test: splits.test.push_back(rec.id); break;
      case SplitTag::Unlabeled: break;
    }
  }
  return splits;
}

}  // namespace

PipelineRun::PipelineRun(RunConfig cfg, std::uint64_t seed, std::filesystem::path run_dir)
    : cfg_(std::move(cfg)), seed_(seed), run_dir_(std::move(run_dir)) {
  std::filesystem::create_directories(run_dir_);
}

bool PipelineRun::needs_positional() const {
  bool users_present = variant_has_users(cfg_.variant);
  bool dredge_present = variant_has_dredge(cfg_.variant);
  return cfg_.f_domains == FeatureSource::Positional ||
         (users_present && cfg_.f_users == FeatureSource::Positional) ||
         (dredge_present && cfg_.f_dredge == FeatureSource::Positional);
}

bool PipelineRun::needs_embeddings_artifact() const { return needs_positional(); }

LoadedSnapshot PipelineRun::load_graph() const {
  auto dir = run_dir_ / kGraphDir;
  if (!std::filesystem::exists(dir / "manifest.json"))
    throw DataError("no graph snapshot under " + run_dir_.string() + "; run build-graph first");
  return load_snapshot(dir);
}

// ---------------------------------------------------------------------------
// build-graph
// ---------------------------------------------------------------------------

void PipelineRun::stage_build_graph() {
  StageLogEntry log_entry{"build-graph", {}};
  auto note = [&log_entry](const std::string& k, const std::string& v) {
    log_entry.facts.push_back({k, v});
  };

  // ---- load raw inputs -----------------------------------------------------
  std::vector<DomainRecord> attr_records;
  bool have_attrs = !cfg_.inputs.attributes.empty();
  if (have_attrs) attr_records = load_attributes(cfg_.inputs.attributes);

  auto label_rows = load_labels(cfg_.inputs.labels);

  std::vector<BacklinkRow> backlinks;
  if (variant_has_webgraph(cfg_.variant)) backlinks = load_backlinks(cfg_.inputs.backlinks);

  std::vector<SocialMention> mentions;
  if (variant_has_users(cfg_.variant)) {
    mentions = load_mentions(cfg_.inputs.mentions);
    note("mention_rows_raw", std::to_string(mentions.size()));
  }

  std::vector<SerpResult> serp_rows;
  std::vector<DredgeTextRow> dredge_texts;
  if (variant_has_dredge(cfg_.variant)) {
    serp_rows = load_serp(cfg_.inputs.serp);
    dredge_texts = load_dredge_texts(cfg_.inputs.dredge_texts);
  }

  // ---- domain pool ----------------------------------------------------------
  std::map<std::string, DomainRecord> pool;
  if (have_attrs) {
    for (auto& rec : attr_records) pool.emplace(rec.id, std::move(rec));
  } else {
    auto ensure = [&pool](const std::string& id) {
      if (id.empty()) return;
      DomainRecord rec;
      rec.id = id;
      pool.try_emplace(id, std::move(rec));
    };
    for (const auto& row : label_rows) ensure(row.domain);
    for (const auto& row : backlinks) {
      ensure(row.source);
      ensure(row.target);
    }
    for (const auto& m : mentions) ensure(m.domain);
  }

  std::size_t labels_unknown_domain = 0;
  std::size_t labeled = 0;
  for (const auto& row : label_rows) {
    auto it = pool.find(row.domain);
    if (it == pool.end()) {
      ++labels_unknown_domain;
      continue;
    }
    it->second.reliability_score = row.pc_score;
    it->second.label =
        binarize_label(row.pc_score, cfg_.binarize_threshold, cfg_.boundary_reliable);
    ++labeled;
  }
  note("labels_attached", std::to_string(labeled));
  if (labels_unknown_domain > 0)
    note("labels_without_attribute_row", std::to_string(labels_unknown_domain));

  // restrict mentions to known domains, then clean to a fixed point
  std::size_t mention_unknown = 0;
  if (!mentions.empty()) {
    std::vector<SocialMention> known;
    known.reserve(mentions.size());
    for (auto& m : mentions) {
      if (pool.count(m.domain))
        known.push_back(std::move(m));
      else
        ++mention_unknown;
    }
    std::size_t before = known.size();
    mentions = filter_social_stream(std::move(known), cfg_.cleaning);
    note("mention_rows_unknown_domain", std::to_string(mention_unknown));
    note("mention_rows_cleaned_away", std::to_string(before - mentions.size()));
    note("mention_rows_kept", std::to_string(mentions.size()));
  }

  // dredge words: retained queries, usage matches against the cleaned users
  std::vector<DredgeWordRecord> dredge_words;
  std::vector<DredgeMatch> dredge_matches;
  std::set<std::string> retained_queries;
  if (variant_has_dredge(cfg_.variant)) {
    dredge_words = retain_ranking_queries(serp_rows);
    for (const auto& rec : dredge_words) retained_queries.insert(rec.phrase);
    note("serp_queries_retained", std::to_string(dredge_words.size()));

    std::vector<std::string> phrases(retained_queries.begin(), retained_queries.end());
    dredge_matches = filter_dredge_mentions(dredge_texts, phrases);
    note("dredge_usage_matches", std::to_string(dredge_matches.size()));

    if (cfg_.f_dredge == FeatureSource::Text) {
      auto vectors = load_vectors(cfg_.inputs.dredge_vectors);
      std::size_t missing = 0;
      for (auto& rec : dredge_words) {
        auto it = vectors.by_id.find(rec.phrase);
        if (it == vectors.by_id.end()) {
          ++missing;
          continue;
        }
        rec.embedding = it->second;
      }
      if (missing > 0)
        throw DataError(std::to_string(missing) +
                        " retained dredge words lack embeddings in " +
                        cfg_.inputs.dredge_vectors.string());
    }
  }

  // ---- assemble the store ----------------------------------------------------
  GraphBuilder builder;

  // node selection per variant
  std::set<std::string> domain_nodes;
  if (cfg_.variant == GraphVariant::HUsers) {
    for (const auto& m : mentions) domain_nodes.insert(m.domain);
  } else {
    for (const auto& [id, rec] : pool) domain_nodes.insert(id);
  }
  for (const auto& id : domain_nodes) builder.add_domain(pool.at(id));

  std::set<std::string> user_nodes;
  VectorTable user_vectors;
  if (variant_has_users(cfg_.variant)) {
    if (cfg_.f_users == FeatureSource::Text) user_vectors = load_vectors(cfg_.inputs.user_vectors);
    for (const auto& m : mentions) user_nodes.insert(m.user);
    std::size_t missing_user_vec = 0;
    for (const auto& id : user_nodes) {
      UserRecord rec{.id = id, .features = {}};
      if (cfg_.f_users == FeatureSource::Text) {
        auto it = user_vectors.by_id.find(id);
        if (it == user_vectors.by_id.end()) {
          ++missing_user_vec;
        } else {
          rec.features = it->second;
        }
      }
      builder.add_user(std::move(rec));
    }
    if (missing_user_vec > 0)
      throw DataError(std::to_string(missing_user_vec) + " users lack text vectors in " +
                      cfg_.inputs.user_vectors.string());
  }

  std::set<std::string> dredge_nodes;
  for (const auto& rec : dredge_words) {
    dredge_nodes.insert(rec.phrase);
    builder.add_dredge(rec);
  }

  // phi1
  std::size_t phi1_dropped = 0, self_loops_skipped = 0;
  for (const auto& row : backlinks) {
    if (!domain_nodes.count(row.source) || !domain_nodes.count(row.target)) {
      ++phi1_dropped;
      continue;
    }
    if (row.source == row.target && !cfg_.keep_self_loops) {
      ++self_loops_skipped;
      continue;
    }
    builder.add_edge(row.source, row.target, EdgeType::Phi1, row.link_count);
  }
  if (!backlinks.empty()) {
    note("phi1_rows_outside_pool", std::to_string(phi1_dropped));
    if (!cfg_.keep_self_loops) note("phi1_self_loops_skipped", std::to_string(self_loops_skipped));
  }

  // phi2: weight = total observations per (user, domain)
  if (!mentions.empty()) {
    std::map<std::pair<std::string, std::string>, std::int64_t> weights;
    for (const auto& m : mentions) weights[{m.user, m.domain}] += m.count;
    for (const auto& [key, w] : weights) builder.add_edge(key.first, key.second, EdgeType::Phi2, w);
    note("phi2_edges", std::to_string(weights.size()));
  }

  // phi3: observed dredge usage by cleaned users
  if (!dredge_matches.empty()) {
    std::map<std::pair<std::string, std::string>, std::int64_t> weights;
    std::size_t unknown_user = 0;
    for (const auto& match : dredge_matches) {
      const auto& user = dredge_texts[match.text_index].user;
      if (!user_nodes.count(user)) {
        ++unknown_user;
        continue;
      }
      weights[{user, match.phrase}] += 1;
    }
    for (const auto& [key, w] : weights) builder.add_edge(key.first, key.second, EdgeType::Phi3, w);
    note("phi3_edges", std::to_string(weights.size()));
    note("dredge_usage_by_uncleaned_users", std::to_string(unknown_user));
  }

  // phi4: retained queries to in-pool result domains
  if (!serp_rows.empty()) {
    std::map<std::pair<std::string, std::string>, std::int64_t> weights;
    for (const auto& row : serp_rows) {
      if (!retained_queries.count(row.query)) continue;
      if (!domain_nodes.count(row.result_domain)) continue;
      weights[{row.query, row.result_domain}] += 1;
    }
    for (const auto& [key, w] : weights) builder.add_edge(key.first, key.second, EdgeType::Phi4, w);
    note("phi4_edges", std::to_string(weights.size()));
  }

  HeteroGraph g = builder.build();

  // split labeled domains
  std::vector<LabeledId> labeled_nodes;
  for (std::uint32_t node : g.nodes_of(NodeType::Domain)) {
    const auto& rec = g.domain(node);
    if (rec.label) labeled_nodes.push_back({rec.id, *rec.label});
  }
  Splits splits = stratified_split(labeled_nodes, cfg_.split_ratios,
                                   Rng::derive(seed_, "split-master"));
  // rebuild with split tags attached (records are immutable once built)
  {
    GraphBuilder tagged;
    std::map<std::string, SplitTag> tag;
    for (const auto& id : splits.train) tag[id] = SplitTag::Train;
    for (const auto& id : splits.val) tag[id] = SplitTag::Val;
    for (const auto& id : splits.test) tag[id] = SplitTag::Test;
    for (std::uint32_t node = 0; node < g.node_count(); ++node) {
      switch (g.type_of(node)) {
        case NodeType::Domain: {
          DomainRecord rec = g.domain(node);
          auto it = tag.find(rec.id);
          rec.split = it != tag.end() ? it->second : SplitTag::Unlabeled;
          tagged.add_domain(std::move(rec));
          break;
        }
        case NodeType::User: tagged.add_user(g.user(node)); break;
        case NodeType::Dredge: tagged.add_dredge(g.dredge(node)); break;
      }
    }
    for (const Edge& e : g.edges())
      tagged.add_edge(g.id_of(e.src), g.id_of(e.dst), e.type, e.weight);
    g = tagged.build();
  }

  note("domains", std::to_string(g.node_count(NodeType::Domain)));
  note("users", std::to_string(g.node_count(NodeType::User)));
  note("dredge_words", std::to_string(g.node_count(NodeType::Dredge)));
  note("labeled_domains", std::to_string(labeled_nodes.size()));
  note("split_train", std::to_string(splits.train.size()));
  note("split_val", std::to_string(splits.val.size()));
  note("split_test", std::to_string(splits.test.size()));
  note("phi1_self_loops_kept", std::to_string(g.self_loop_count()));

  if (g.edge_count(EdgeType::Phi1) > 0) {
    try {
      note("assortativity_phi1_full",
           format_double(label_assortativity(g, EdgeType::Phi1, AssortativityMode::Full)));
      note("assortativity_phi1_labeled_induced",
           format_double(
               label_assortativity(g, EdgeType::Phi1, AssortativityMode::LabeledInduced)));
    } catch (const DataError& e) {
      note("assortativity_phi1", std::string("undefined: ") + e.what());
    }
  }

  SnapshotMeta meta;
  meta.binarize_threshold = cfg_.binarize_threshold;
  meta.boundary_reliable = cfg_.boundary_reliable;
  meta.seed = seed_;
  meta.variant = std::string(to_string(cfg_.variant));
  save_snapshot(g, run_dir_ / kGraphDir, meta);
  log(std::move(log_entry));
}

// ---------------------------------------------------------------------------
// embed
// ---------------------------------------------------------------------------

void PipelineRun::stage_embed() {
  if (!needs_embeddings_artifact()) return;
  auto snapshot = load_graph();
  const HeteroGraph& g = snapshot.graph;

  WalkConfig wcfg = cfg_.embed.walks;
  wcfg.seed = Rng::derive(seed_, "walks");
  SkipgramConfig scfg = cfg_.embed.skipgram;
  scfg.seed = Rng::derive(seed_, "skipgram");

  EmbeddingTable table;
  if (cfg_.embed.source == "users_graph") {
    // walk only the user-mention relation
    std::vector<std::vector<std::uint32_t>> adj(g.node_count());
    for (const Edge& e : g.edges()) {
      if (e.type != EdgeType::Phi2) continue;
      adj[e.src].push_back(e.dst);
      adj[e.dst].push_back(e.src);
    }
    for (auto& nbrs : adj) {
      std::sort(nbrs.begin(), nbrs.end());
      nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    }
    WalkCorpus corpus = generate_walks(adj, wcfg);
    SkipgramResult sg = train_skipgram(corpus, g.node_count(), scfg);
    table.dim = static_cast<std::size_t>(scfg.dim);
    for (std::size_t v = 0; v < g.node_count(); ++v)
      table.ids.push_back(g.id_of(static_cast<std::uint32_t>(v)));
    table.vectors = std::move(sg.vectors);
    table.epoch_mean_loss = std::move(sg.epoch_mean_loss);
  } else {
    table = compute_positional_features(g, wcfg, scfg);
  }

  save_vectors(run_dir_ / kEmbeddingsFile, table.to_vector_table());
  StageLogEntry entry{"embed", {}};
  entry.facts.push_back({"nodes", std::to_string(table.ids.size())});
  entry.facts.push_back({"dim", std::to_string(table.dim)});
  entry.facts.push_back({"source", cfg_.embed.source});
  for (std::size_t e = 0; e < table.epoch_mean_loss.size(); ++e)
    entry.facts.push_back(
        {"epoch_" + std::to_string(e + 1) + "_loss", format_double(table.epoch_mean_loss[e])});
  log(std::move(entry));
}

// ---------------------------------------------------------------------------
// train / predict helpers
// ---------------------------------------------------------------------------

namespace {

struct ModelBundle {
  ModelGraph mg;
  std::unique_ptr<SageModel> model;
  EmbeddingTable positional;  // kept alive for the FeatureSpec
  VectorTable user_text, dredge_text;
};

}  // namespace

// builds the model-facing view plus an uninitialized model of the right shape
static ModelBundle make_model_bundle(const RunConfig& cfg, std::uint64_t seed,
                                     const std::filesystem::path& run_dir, const HeteroGraph& g) {
  ModelBundle bundle;
  FeatureSpec spec;
  spec.domains = cfg.f_domains;
  spec.users = cfg.f_users;
  spec.dredge = cfg.f_dredge;
  bool positional_needed = spec.domains == FeatureSource::Positional ||
                           (g.node_count(NodeType::User) > 0 &&
                            spec.users == FeatureSource::Positional) ||
                           (g.node_count(NodeType::Dredge) > 0 &&
                            spec.dredge == FeatureSource::Positional);
  if (positional_needed) {
    auto path = run_dir / kEmbeddingsFile;
    if (!std::filesystem::exists(path))
      throw DataError("positional features need " + path.string() + "; run the embed stage first");
    bundle.positional = embedding_from_vector_table(load_vectors(path));
    spec.positional = &bundle.positional;
  }
  // text vectors were baked into the snapshot records at build time; sidecar
  // tables are only needed when the snapshot lacks them

  if (variant_is_heterogeneous(cfg.variant)) {
    bundle.mg = build_hetero_model_graph(g, spec, cfg.add_reverse, cfg.train.weighted_mean);
    bundle.model = std::make_unique<HeteroSageModel>(bundle.mg, cfg.train.hidden_dim,
                                                     cfg.train.dropout, seed);
  } else {
    bundle.mg = build_homo_model_graph(g, spec, /*add_reverse=*/false, cfg.train.weighted_mean);
    bundle.model = std::make_unique<HomoSageModel>(
        static_cast<int>(bundle.mg.types[0].features.cols()), cfg.train.hidden_dim,
        cfg.train.dropout, seed);
  }
  return bundle;
}

void PipelineRun::stage_train() {
  auto snapshot = load_graph();
  const HeteroGraph& g = snapshot.graph;

  std::uint64_t model_seed = Rng::derive(seed_, "model");
  ModelBundle bundle = make_model_bundle(cfg_, model_seed, run_dir_, g);
  Splits splits = splits_from_snapshot(g);
  if (splits.train.empty() || splits.val.empty())
    throw DataError("snapshot has no train/val split tags; rebuild the graph");
  apply_split(bundle.mg, g, splits);

  TrainConfig tcfg = cfg_.train;
  tcfg.seed = model_seed;

  TrainHistory history;
  if (tcfg.curriculum) {
    std::vector<TrainExample> examples;
    for (const auto& id : splits.train) {
      auto node = g.find(id);
      const auto& rec = g.domain(*node);
      if (!rec.reliability_score)
        throw DataError("curriculum training needs a continuous score for '" + id + "'");
      examples.push_back({id, *rec.reliability_score, *rec.label});
    }
    CurriculumSchedule schedule = build_quintile_batches(examples);
    history = babysteps_train(*bundle.model, bundle.mg, g, schedule, tcfg);
  } else {
    history = train(*bundle.model, bundle.mg, tcfg);
  }

  json extra;
  extra["config"] = config_echo(cfg_, seed_);
  json epochs = json::array();
  for (const auto& rec : history.epochs)
    epochs.push_back({{"epoch", rec.epoch},
                      {"stage", rec.stage},
                      {"train_loss", rec.train_loss},
                      {"val_loss", rec.val_loss},
                      {"val_accuracy", rec.val_accuracy},
                      {"lr", rec.lr}});
  json stages = json::array();
  for (const auto& s : history.stages)
    stages.push_back({{"stage", s.stage},
                      {"active_batches", s.active_batches},
                      {"epochs_run", s.epochs_run},
                      {"best_val_loss", s.best_val_loss}});
  extra["history"] = {{"epochs", epochs},
                      {"stages", stages},
                      {"best_epoch", history.best_epoch},
                      {"best_val_loss", history.best_val_loss}};
  save_checkpoint(run_dir_ / kCheckpointFile, make_checkpoint(*bundle.model, extra.dump()));

  StageLogEntry entry{"train", {}};
  entry.facts.push_back({"model", bundle.model->kind()});
  entry.facts.push_back({"epochs_run", std::to_string(history.epochs.size())});
  entry.facts.push_back({"best_epoch", std::to_string(history.best_epoch)});
  entry.facts.push_back({"best_val_loss", format_double(history.best_val_loss)});
  for (const auto& s : history.stages) {
    std::string batches;
    for (int b : s.active_batches) batches += (batches.empty() ? "d" : ",d") + std::to_string(b);
    entry.facts.push_back({"stage_" + std::to_string(s.stage),
                           batches + " epochs=" + std::to_string(s.epochs_run) +
                               " best_val=" + format_double(s.best_val_loss)});
  }
  log(std::move(entry));
}

void PipelineRun::stage_predict() {
  auto snapshot = load_graph();
  const HeteroGraph& g = snapshot.graph;
  Checkpoint ckpt = load_checkpoint(run_dir_ / kCheckpointFile);

  RunConfig cfg = cfg_;
  cfg.train.hidden_dim = ckpt.hidden_dim;
  cfg.train.dropout = ckpt.dropout;
  ModelBundle bundle = make_model_bundle(cfg, ckpt.seed, run_dir_, g);
  apply_checkpoint(*bundle.model, ckpt);

  Prediction pred = predict(*bundle.model, bundle.mg, g);

  Table t;
  t.header = {"domain", "label", "split", "p_reliable", "p_unreliable"};
  for (std::size_t i = 0; i < pred.ids.size(); ++i) {
    const auto& rec = g.domain(*g.find(pred.ids[i]));
    t.rows.push_back({pred.ids[i],
                      rec.label ? std::string(to_string(*rec.label)) : "",
                      rec.split ? std::string(to_string(*rec.split)) : "",
                      format_double(pred.probabilities(static_cast<Eigen::Index>(i), 0)),
                      format_double(pred.probabilities(static_cast<Eigen::Index>(i), 1))});
  }
  write_table(run_dir_ / kPredictionsFile, t);

  StageLogEntry entry{"predict", {}};
  entry.facts.push_back({"domains", std::to_string(pred.ids.size())});
  log(std::move(entry));
}

// ---------------------------------------------------------------------------
// discover
// ---------------------------------------------------------------------------

void PipelineRun::stage_discover() {
  auto predictions = load_predictions(run_dir_ / kPredictionsFile);
  std::map<std::string, double> confidence;
  std::set<std::string> labeled;
  for (const auto& row : predictions) {
    confidence[row.domain] = row.p_unreliable;
    if (row.label) labeled.insert(row.domain);
  }

  DiscoveryRanking ranking;
  std::vector<std::string> dropped;
  if (cfg_.discovery.variant == "gnn") {
    std::vector<RankingEntry> scored;
    for (const auto& row : predictions) {
      if (row.label) continue;  // discovery ranks unlabeled domains only
      if (row.p_unreliable >= cfg_.discovery.threshold)
        scored.push_back({row.domain, row.p_unreliable});
    }
    ranking = DiscoveryRanking::from_scored(std::move(scored), "gnn");
  } else {
    auto serp_rows = load_serp(cfg_.inputs.serp);
    auto dredge_words = retain_ranking_queries(serp_rows);
    std::set<std::string> retained;
    for (const auto& rec : dredge_words) retained.insert(rec.phrase);
    if (cfg_.discovery.variant == "dredge_lower") {
      // bounded by dredge words actually observed in the social stream
      auto texts = load_dredge_texts(cfg_.inputs.dredge_texts);
      std::vector<std::string> phrases(retained.begin(), retained.end());
      auto matches = filter_dredge_mentions(texts, phrases);
      std::set<std::string> observed;
      for (const auto& m : matches) observed.insert(m.phrase);
      retained = std::move(observed);
    }
    auto candidates =
        build_serp_candidates(serp_rows, retained, labeled, cfg_.discovery.min_occurrence);
    auto scorer = [&confidence, &labeled](const std::string& domain) -> std::optional<double> {
      if (labeled.count(domain)) return std::nullopt;
      auto it = confidence.find(domain);
      if (it == confidence.end()) return std::nullopt;  // not in the graph, no attributes
      return it->second;
    };
    auto result = dredge_discovery(candidates, scorer, cfg_.discovery.threshold, "dredge-serp");
    ranking = std::move(result.ranking);
    dropped = std::move(result.dropped);
  }

  Table t;
  t.header = {"rank", "domain", "confidence"};
  for (std::size_t i = 0; i < ranking.entries.size(); ++i)
    t.rows.push_back({std::to_string(i + 1), ranking.entries[i].domain,
                      format_double(ranking.entries[i].confidence)});
  write_table(run_dir_ / kRankingFile, t);

  StageLogEntry entry{"discover", {}};
  entry.facts.push_back({"provenance", ranking.provenance});
  entry.facts.push_back({"threshold", format_double(cfg_.discovery.threshold)});
  entry.facts.push_back({"ranked", std::to_string(ranking.entries.size())});
  entry.facts.push_back({"dropped_unscorable", std::to_string(dropped.size())});
  log(std::move(entry));
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

void PipelineRun::stage_evaluate() {
  auto predictions = load_predictions(run_dir_ / kPredictionsFile);

  json metrics;
  metrics["variant"] = std::string(to_string(cfg_.variant));
  metrics["seed"] = seed_;
  // social-media-only runs are evaluated on mentioned domains only and are
  // not comparable with webgraph-wide models
  metrics["non_comparable"] = cfg_.variant == GraphVariant::HUsers;

  // classification on the held-out test split
  std::vector<BinaryLabel> pred_labels, true_labels;
  for (const auto& row : predictions) {
    if (!row.label || row.split != SplitTag::Test) continue;
    pred_labels.push_back(row.p_unreliable > row.p_reliable ? BinaryLabel::Unreliable
                                                            : BinaryLabel::Reliable);
    true_labels.push_back(*row.label);
  }
  if (pred_labels.empty()) throw DataError("no test-split rows in predictions");
  auto cls = accuracy_f1(pred_labels, true_labels);
  metrics["classification"] = {{"test_accuracy", cls.accuracy},
                               {"test_f1", cls.f1},
                               {"n_test", cls.count},
                               {"tp", cls.tp},
                               {"fp", cls.fp},
                               {"tn", cls.tn},
                               {"fn", cls.fn}};

  // ranked discovery metrics
  json discovery = json::object();
  auto ranking_path = run_dir_ / kRankingFile;
  if (std::filesystem::exists(ranking_path)) {
    Table rt = read_table(ranking_path);
    std::size_t c_d = rt.column("domain"), c_c = rt.column("confidence");
    DiscoveryRanking ranking;
    ranking.provenance = cfg_.discovery.variant == "gnn" ? "gnn" : "dredge-serp";
    for (std::size_t r = 0; r < rt.rows.size(); ++r)
      ranking.entries.push_back(
          {rt.rows[r][c_d], parse_double(rt.rows[r][c_c], ranking_path, r + 2)});

    discovery["provenance"] = ranking.provenance;
    discovery["threshold"] = cfg_.discovery.threshold;
    discovery["size"] = ranking.entries.size();

    json p_at = json::object();
    if (!cfg_.inputs.judgments.empty() && std::filesystem::exists(cfg_.inputs.judgments)) {
      auto judgment_rows = load_judgments(cfg_.inputs.judgments);
      std::map<std::string, BinaryLabel> judgments;
      for (const auto& row : judgment_rows) {
        auto it = judgments.find(row.domain);
        if (it != judgments.end() && it->second != row.verdict)
          throw DataError("conflicting judgments for '" + row.domain +
                          "'; provide a resolved judgment file");
        judgments[row.domain] = row.verdict;
      }
      for (int k : {5, 10, 20}) {
        try {
          p_at[std::to_string(k)] = precision_at_k(ranking, judgments, k);
        } catch (const DataError& e) {
          // absent metrics are explicit nulls, never silent zeros
          p_at[std::to_string(k)] = nullptr;
          discovery["precision_at_" + std::to_string(k) + "_note"] = e.what();
        }
      }
    } else {
      for (int k : {5, 10, 20}) p_at[std::to_string(k)] = nullptr;
      discovery["judgments"] = "not provided";
    }
    discovery["precision_at"] = p_at;

    bool have_lists = !cfg_.inputs.seed_list.empty() &&
                      std::filesystem::exists(cfg_.inputs.seed_list) &&
                      !cfg_.inputs.eval_list.empty() &&
                      std::filesystem::exists(cfg_.inputs.eval_list);
    if (have_lists) {
      auto seed_list = load_domain_list(cfg_.inputs.seed_list);
      auto eval_list = load_domain_list(cfg_.inputs.eval_list);
      std::set<std::string> discovered;
      for (const auto& e : ranking.entries)
        if (!seed_list.count(e.domain)) discovered.insert(e.domain);
      auto pm = partial_metrics(discovered, seed_list, eval_list);
      discovery["partial"] = {
          {"precision", pm.precision ? json(*pm.precision) : json(nullptr)},
          {"recall", pm.recall},
          {"pf1", pm.pf1},
          {"degenerate", pm.degenerate}};

      // Appendix-C style sensitivity sweep over all unlabeled predictions
      std::vector<RankingEntry> scored;
      for (const auto& row : predictions)
        if (!row.label) scored.push_back({row.domain, row.p_unreliable});
      auto curve = threshold_sweep(scored, seed_list, eval_list, cfg_.sweep_grid);
      Table sweep_table;
      sweep_table.header = {"threshold", "discovered", "precision", "recall", "pf1"};
      json sweep_json = json::array();
      for (const auto& point : curve) {
        sweep_table.rows.push_back(
            {format_double(point.threshold), std::to_string(point.discovered_count),
             point.metrics.precision ? format_double(*point.metrics.precision) : "",
             format_double(point.metrics.recall), format_double(point.metrics.pf1)});
        sweep_json.push_back(
            {{"threshold", point.threshold},
             {"discovered", point.discovered_count},
             {"precision", point.metrics.precision ? json(*point.metrics.precision) : json(nullptr)},
             {"recall", point.metrics.recall},
             {"pf1", point.metrics.pf1}});
      }
      write_table(run_dir_ / kSweepFile, sweep_table);
      metrics["sweep"] = sweep_json;
      metrics["sweep_highlight_threshold"] = cfg_.discovery.threshold;
    } else {
      discovery["partial"] = nullptr;
      metrics["sweep"] = nullptr;
    }
    metrics["discovery"] = discovery;
  } else {
    metrics["discovery"] = nullptr;
    metrics["sweep"] = nullptr;
  }

  // digests of the inputs these metrics were computed from
  json digests = json::object();
  digests["predictions"] = sha256_file_hex(run_dir_ / kPredictionsFile);
  if (std::filesystem::exists(ranking_path))
    digests["ranking"] = sha256_file_hex(ranking_path);
  if (!cfg_.inputs.judgments.empty() && std::filesystem::exists(cfg_.inputs.judgments))
    digests["judgments"] = sha256_file_hex(cfg_.inputs.judgments);
  if (!cfg_.inputs.seed_list.empty() && std::filesystem::exists(cfg_.inputs.seed_list))
    digests["seed_list"] = sha256_file_hex(cfg_.inputs.seed_list);
  if (!cfg_.inputs.eval_list.empty() && std::filesystem::exists(cfg_.inputs.eval_list))
    digests["eval_list"] = sha256_file_hex(cfg_.inputs.eval_list);
  metrics["input_digests"] = digests;

  write_json_file(run_dir_ / kMetricsFile, metrics);

  StageLogEntry entry{"evaluate", {}};
  entry.facts.push_back({"test_accuracy", format_double(cls.accuracy)});
  entry.facts.push_back({"test_f1", format_double(cls.f1)});
  log(std::move(entry));
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

void PipelineRun::write_report() {
  json report;
  report["config"] = config_echo(cfg_, seed_);
  report["environment"] = env_fingerprint();

  json stages = json::array();
  for (const auto& entry : logs_) {
    json facts = json::object();
    for (const auto& [k, v] : entry.facts) facts[k] = v;
    stages.push_back({{"stage", entry.stage}, {"facts", facts}});
  }
  report["stages"] = stages;

  if (std::filesystem::exists(run_dir_ / kMetricsFile))
    report["metrics"] = read_json_file(run_dir_ / kMetricsFile);

  // digest manifest: every artifact in the run directory is reachable here
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(run_dir_)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().filename() == kReportFile) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  json artifacts = json::object();
  for (const auto& file : files)
    artifacts[std::filesystem::relative(file, run_dir_).generic_string()] = sha256_file_hex(file);
  report["artifacts"] = artifacts;

  write_json_file(run_dir_ / kReportFile, report);
}

std::filesystem::path PipelineRun::run_all() {
  struct StageDef {
    const char* name;
    void (PipelineRun::*fn)();
  };
  const StageDef defs[] = {
      {"build-graph", &PipelineRun::stage_build_graph},
      {"embed", &PipelineRun::stage_embed},
      {"train", &PipelineRun::stage_train},
      {"predict", &PipelineRun::stage_predict},
      {"discover", &PipelineRun::stage_discover},
      {"evaluate", &PipelineRun::stage_evaluate},
  };
  // a stage failure names the stage; partial artifacts stay on disk
  for (const auto& def : defs) {
    auto prefix = [&def](const char* what) {
      return "stage " + std::string(def.name) + ": " + what;
    };
    try {
      (this->*(def.fn))();
    } catch (const ConfigError& e) {
      throw ConfigError(prefix(e.what()));
    } catch (const TrainingError& e) {
      throw TrainingError(prefix(e.what()));
    } catch (const ShapeError& e) {
      throw ShapeError(prefix(e.what()));
    } catch (const SchemaError& e) {
      throw SchemaError(prefix(e.what()));
    } catch (const DataError& e) {
      throw DataError(prefix(e.what()));
    }
  }
  write_report();
  return run_dir_ / kReportFile;
}

// ---------------------------------------------------------------------------
// batch runs
// ---------------------------------------------------------------------------

namespace {

struct Accumulator {
  std::vector<double> values;
  void add(double v) { values.push_back(v); }
  json summary() const {
    if (values.empty()) return nullptr;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    double stdev = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
    return json{{"mean", mean}, {"std", stdev}, {"n", values.size()}};
  }
};

}  // namespace

std::filesystem::path run_pipeline(const RunConfig& cfg) {
  auto errors = validate_config(cfg);
  if (!errors.empty()) {
    std::string message = "invalid configuration:";
    for (const auto& e : errors) message += "\n  - " + e;
    throw ConfigError(message);
  }

  if (cfg.seeds.empty()) {
    PipelineRun run(cfg, cfg.seed, cfg.out_dir);
    return run.run_all();
  }

  // batch mode: one independent sub-run per seed, then aggregate
  std::map<std::string, Accumulator> acc;
  json per_seed = json::array();
  for (std::uint64_t seed : cfg.seeds) {
    RunConfig sub = cfg;
    sub.seed = seed;
    sub.seeds.clear();
    PipelineRun run(sub, seed, cfg.out_dir / ("seed_" + std::to_string(seed)));
    run.run_all();
    json metrics = read_json_file(run.run_dir() / kMetricsFile);
    json row;
    row["seed"] = seed;
    row["metrics_digest"] = sha256_file_hex(run.run_dir() / kMetricsFile);
    row["dir"] = std::filesystem::relative(run.run_dir(), cfg.out_dir).generic_string();
    per_seed.push_back(row);

    acc["test_accuracy"].add(metrics.at("classification").at("test_accuracy").get<double>());
    acc["test_f1"].add(metrics.at("classification").at("test_f1").get<double>());
    if (metrics.contains("discovery") && metrics.at("discovery").is_object()) {
      const auto& d = metrics.at("discovery");
      if (d.contains("partial") && d.at("partial").is_object()) {
        const auto& p = d.at("partial");
        if (p.at("precision").is_number()) acc["partial_precision"].add(p.at("precision").get<double>());
        acc["partial_recall"].add(p.at("recall").get<double>());
        acc["partial_pf1"].add(p.at("pf1").get<double>());
      }
      for (int k : {5, 10, 20}) {
        const auto& pa = d.at("precision_at").at(std::to_string(k));
        if (pa.is_number()) acc["precision_at_" + std::to_string(k)].add(pa.get<double>());
      }
    }
  }

  json report;
  report["config"] = config_echo(cfg, cfg.seed);
  report["environment"] = env_fingerprint();
  report["seeds"] = cfg.seeds;
  report["runs"] = per_seed;
  json aggregate = json::object();
  for (const auto& [name, a] : acc) aggregate[name] = a.summary();
  report["aggregate"] = aggregate;
  write_json_file(cfg.out_dir / kReportFile, report);
  return cfg.out_dir / kReportFile;
}

std::string summarize_run(const std::filesystem::path& run_dir) {
  auto report_path = run_dir / kReportFile;
  if (!std::filesystem::exists(report_path))
    throw DataError("no report.json under " + run_dir.string());
  json report = read_json_file(report_path);
  std::string out;
  out += "run: " + run_dir.string() + "\n";
  if (report.contains("config"))
    out += "variant: " + report["config"].value("variant", std::string("?")) + "\n";

  if (report.contains("aggregate")) {
    out += "batch aggregate over " + std::to_string(report["seeds"].size()) + " seeds:\n";
    for (const auto& [name, stats] : report["aggregate"].items()) {
      if (!stats.is_object()) continue;
      char buf[160];
      std::snprintf(buf, sizeof(buf), "  %-20s %.4f +/- %.4f (n=%zu)\n", name.c_str(),
                    stats["mean"].get<double>(), stats["std"].get<double>(),
                    stats["n"].get<std::size_t>());
      out += buf;
    }
    return out;
  }

  if (report.contains("metrics")) {
    const auto& m = report["metrics"];
    const auto& c = m["classification"];
    char buf[160];
    std::snprintf(buf, sizeof(buf), "test accuracy %.4f  f1 %.4f  (n=%zu)\n",
                  c["test_accuracy"].get<double>(), c["test_f1"].get<double>(),
                  c["n_test"].get<std::size_t>());
    out += buf;
    if (m.value("non_comparable", false))
      out += "note: social-media-only evaluation, not comparable with webgraph models\n";
    if (m.contains("discovery") && m["discovery"].is_object()) {
      const auto& d = m["discovery"];
      out += "discovery (" + d.value("provenance", std::string("?")) + "): " +
             std::to_string(d.value("size", std::size_t{0})) + " ranked\n";
      if (d.contains("precision_at")) {
        for (int k : {5, 10, 20}) {
          const auto& v = d["precision_at"][std::to_string(k)];
          out += "  P@" + std::to_string(k) + " = " + (v.is_null() ? "-" : format_double(v.get<double>())) + "\n";
        }
      }
      if (d.contains("partial") && d["partial"].is_object()) {
        const auto& p = d["partial"];
        out += "  partial precision " +
               (p["precision"].is_null() ? std::string("-")
                                         : format_double(p["precision"].get<double>())) +
               ", recall " + format_double(p["recall"].get<double>()) + ", pf1 " +
               format_double(p["pf1"].get<double>()) + "\n";
      }
    }
  }
  if (report.contains("stages")) {
    out += "stages:\n";
    for (const auto& s : report["stages"])
      out += "  " + s["stage"].get<std::string>() + "\n";
  }
  return out;
}

}  // namespace credgraph
