#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "credgraph/curriculum.hpp"
#include "credgraph/embed.hpp"
#include "credgraph/evalkit.hpp"
#include "credgraph/gnn.hpp"
#include "credgraph/graph.hpp"
#include "credgraph/ingest.hpp"
#include "credgraph/pipeline.hpp"

namespace py = pybind11;
using namespace credgraph;

namespace {

BinaryLabel label_from_string(const std::string& s) {
  if (s == "reliable") return BinaryLabel::Reliable;
  if (s == "unreliable") return BinaryLabel::Unreliable;
  throw ConfigError("label must be 'reliable' or 'unreliable', got '" + s + "'");
}

std::set<std::string> to_set(const std::vector<std::string>& v) {
  return std::set<std::string>(v.begin(), v.end());
}

py::dict partial_to_dict(const PartialMetrics& m) {
  py::dict d;
  d["precision"] = m.precision ? py::object(py::float_(*m.precision)) : py::none();
  d["recall"] = m.recall;
  d["pf1"] = m.pf1;
  d["degenerate"] = m.degenerate;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "website credibility graphs, curriculum-scheduled SAGE training, and "
            "unreliable-domain discovery";

  py::register_exception<Error>(m, "CredgraphError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  // ---------------------------------------------------------------- graph
  py::class_<HeteroGraph>(m, "HeteroGraph")
      .def("node_count", [](const HeteroGraph& g) { return g.node_count(); })
      .def("node_count_of",
           [](const HeteroGraph& g, const std::string& t) {
             return g.node_count(node_type_from_string(t));
           })
      .def("edge_count", [](const HeteroGraph& g) { return g.edge_count(); })
      .def("edge_count_of",
           [](const HeteroGraph& g, const std::string& t) {
             return g.edge_count(edge_type_from_string(t));
           })
      .def("contains", &HeteroGraph::contains)
      .def("self_loop_count", &HeteroGraph::self_loop_count)
      .def("node_ids",
           [](const HeteroGraph& g, const std::string& t) {
             std::vector<std::string> out;
             for (auto node : g.nodes_of(node_type_from_string(t)))
               out.push_back(g.id_of(node));
             return out;
           })
      .def("edges",
           [](const HeteroGraph& g) {
             std::vector<py::tuple> out;
             for (const Edge& e : g.edges())
               out.push_back(py::make_tuple(g.id_of(e.src), g.id_of(e.dst),
                                            std::string(to_string(e.type)), e.weight));
             return out;
           })
      .def("domain_label",
           [](const HeteroGraph& g, const std::string& id) -> py::object {
             auto node = g.find(id);
             if (!node) throw DataError("unknown node: " + id);
             const auto& rec = g.domain(*node);
             if (!rec.label) return py::none();
             return py::str(std::string(to_string(*rec.label)));
           });

  py::class_<GraphBuilder>(m, "GraphBuilder")
      .def(py::init<>())
      .def(
          "add_domain",
          [](GraphBuilder& b, const std::string& id, const std::vector<double>& attributes,
             py::object score, double threshold) {
            DomainRecord rec;
            rec.id = id;
            rec.attributes = attributes;
            if (!score.is_none()) {
              rec.reliability_score = score.cast<double>();
              rec.label = binarize_label(*rec.reliability_score, threshold);
            }
            b.add_domain(std::move(rec));
          },
          py::arg("id"), py::arg("attributes") = std::vector<double>{},
          py::arg("score") = py::none(), py::arg("threshold") = kDefaultBinarizeThreshold)
      .def(
          "add_user",
          [](GraphBuilder& b, const std::string& id, const std::vector<double>& features) {
            b.add_user({id, features});
          },
          py::arg("id"), py::arg("features") = std::vector<double>{})
      .def(
          "add_dredge",
          [](GraphBuilder& b, const std::string& phrase, const std::vector<double>& embedding,
             const std::vector<std::string>& targets) {
            DredgeWordRecord rec;
            rec.phrase = phrase;
            rec.embedding = embedding;
            rec.target_domains = targets;
            b.add_dredge(std::move(rec));
          },
          py::arg("phrase"), py::arg("embedding"), py::arg("targets"))
      .def(
          "add_edge",
          [](GraphBuilder& b, const std::string& src, const std::string& dst,
             const std::string& type, std::int64_t weight) {
            b.add_edge(src, dst, edge_type_from_string(type), weight);
          },
          py::arg("src"), py::arg("dst"), py::arg("type"), py::arg("weight") = 1)
      .def("build", &GraphBuilder::build);

  m.def("binarize_label",
        [](double score, double threshold, bool boundary_reliable) {
          return std::string(to_string(binarize_label(score, threshold, boundary_reliable)));
        },
        py::arg("score"), py::arg("threshold") = kDefaultBinarizeThreshold,
        py::arg("boundary_reliable") = true);

  m.def("graph_union", &graph_union);

  m.def(
      "stratified_split",
      [](const std::vector<std::pair<std::string, std::string>>& labeled,
         std::array<double, 3> ratios, std::uint64_t seed) {
        std::vector<LabeledId> items;
        for (const auto& [id, label] : labeled) items.push_back({id, label_from_string(label)});
        Splits s = stratified_split(items, ratios, seed);
        py::dict d;
        d["train"] = s.train;
        d["val"] = s.val;
        d["test"] = s.test;
        return d;
      },
      py::arg("labeled"), py::arg("ratios") = std::array<double, 3>{0.8, 0.1, 0.1},
      py::arg("seed") = 0);

  m.def(
      "label_assortativity",
      [](const HeteroGraph& g, const std::string& edge_type, const std::string& mode) {
        AssortativityMode am;
        if (mode == "full")
          am = AssortativityMode::Full;
        else if (mode == "labeled_induced")
          am = AssortativityMode::LabeledInduced;
        else
          throw ConfigError("mode must be 'full' or 'labeled_induced'");
        return label_assortativity(g, edge_type_from_string(edge_type), am);
      },
      py::arg("graph"), py::arg("edge_type") = "phi1", py::arg("mode") = "full");

  m.def(
      "save_snapshot",
      [](const HeteroGraph& g, const std::filesystem::path& dir, double threshold,
         std::uint64_t seed, const std::string& variant) {
        SnapshotMeta meta;
        meta.binarize_threshold = threshold;
        meta.seed = seed;
        meta.variant = variant;
        save_snapshot(g, dir, meta);
      },
      py::arg("graph"), py::arg("dir"), py::arg("threshold") = kDefaultBinarizeThreshold,
      py::arg("seed") = 0, py::arg("variant") = "");
  m.def("load_snapshot",
        [](const std::filesystem::path& dir) { return load_snapshot(dir).graph; });

  // ---------------------------------------------------------------- ingest
  m.def("normalize_domain", &normalize_domain);
  m.def(
      "filter_dredge_mentions",
      [](const std::vector<std::tuple<std::string, std::string, std::string>>& texts,
         const std::vector<std::string>& phrases) {
        std::vector<DredgeTextRow> rows;
        for (const auto& [user, tweet, text] : texts) rows.push_back({user, tweet, text});
        std::vector<std::pair<std::size_t, std::string>> out;
        for (const auto& match : filter_dredge_mentions(rows, phrases))
          out.push_back({match.text_index, match.phrase});
        return out;
      },
      py::arg("texts"), py::arg("phrases"));

  // ---------------------------------------------------------------- embed
  m.def(
      "generate_walks",
      [](const HeteroGraph& g, int walk_length, int walks_per_node, double p, double q,
         std::uint64_t seed) {
        WalkConfig cfg;
        cfg.walk_length = walk_length;
        cfg.walks_per_node = walks_per_node;
        cfg.p = p;
        cfg.q = q;
        cfg.seed = seed;
        WalkCorpus corpus = generate_walks(g, cfg);
        std::vector<std::vector<std::string>> out;
        out.reserve(corpus.walks.size());
        for (const auto& walk : corpus.walks) {
          std::vector<std::string> ids;
          ids.reserve(walk.size());
          for (auto node : walk) ids.push_back(g.id_of(node));
          out.push_back(std::move(ids));
        }
        return out;
      },
      py::arg("graph"), py::arg("walk_length") = 20, py::arg("walks_per_node") = 10,
      py::arg("p") = 1.0, py::arg("q") = 1.0, py::arg("seed") = 0);

  m.def(
      "positional_features",
      [](const HeteroGraph& g, int dim, int walk_length, int walks_per_node, int context,
         int negatives, int epochs, double lr, std::uint64_t seed) {
        WalkConfig wcfg;
        wcfg.walk_length = walk_length;
        wcfg.walks_per_node = walks_per_node;
        wcfg.seed = Rng::derive(seed, "walks");
        SkipgramConfig scfg;
        scfg.dim = dim;
        scfg.context = context;
        scfg.negatives = negatives;
        scfg.epochs = epochs;
        scfg.lr = lr;
        scfg.seed = Rng::derive(seed, "skipgram");
        EmbeddingTable table = compute_positional_features(g, wcfg, scfg);
        return py::make_tuple(table.ids, table.vectors, table.epoch_mean_loss);
      },
      py::arg("graph"), py::arg("dim") = 23, py::arg("walk_length") = 20,
      py::arg("walks_per_node") = 10, py::arg("context") = 10, py::arg("negatives") = 5,
      py::arg("epochs") = 5, py::arg("lr") = 0.025, py::arg("seed") = 0);

  // ---------------------------------------------------------------- evalkit
  m.def(
      "accuracy_f1",
      [](const std::vector<std::string>& predictions, const std::vector<std::string>& truth) {
        std::vector<BinaryLabel> p, t;
        for (const auto& s : predictions) p.push_back(label_from_string(s));
        for (const auto& s : truth) t.push_back(label_from_string(s));
        auto metrics = accuracy_f1(p, t);
        py::dict d;
        d["accuracy"] = metrics.accuracy;
        d["f1"] = metrics.f1;
        d["n"] = metrics.count;
        return d;
      },
      py::arg("predictions"), py::arg("truth"));

  m.def(
      "precision_at_k",
      [](const std::vector<std::pair<std::string, double>>& ranking,
         const std::map<std::string, std::string>& judgments, int k) {
        std::vector<RankingEntry> scored;
        for (const auto& [domain, conf] : ranking) scored.push_back({domain, conf});
        std::map<std::string, BinaryLabel> j;
        for (const auto& [domain, verdict] : judgments) j[domain] = label_from_string(verdict);
        return precision_at_k(DiscoveryRanking::from_scored(std::move(scored), "gnn"), j, k);
      },
      py::arg("ranking"), py::arg("judgments"), py::arg("k"));

  m.def(
      "partial_metrics",
      [](const std::vector<std::string>& discovered, const std::vector<std::string>& seed_list,
         const std::vector<std::string>& eval_list) {
        return partial_to_dict(
            partial_metrics(to_set(discovered), to_set(seed_list), to_set(eval_list)));
      },
      py::arg("discovered"), py::arg("seed_list"), py::arg("eval_list"));

  m.def(
      "threshold_sweep",
      [](const std::vector<std::pair<std::string, double>>& scored,
         const std::vector<std::string>& seed_list, const std::vector<std::string>& eval_list,
         const std::vector<double>& grid) {
        std::vector<RankingEntry> entries;
        for (const auto& [domain, conf] : scored) entries.push_back({domain, conf});
        py::list out;
        for (const auto& point : threshold_sweep(entries, to_set(seed_list), to_set(eval_list), grid)) {
          py::dict d = partial_to_dict(point.metrics);
          d["threshold"] = point.threshold;
          d["discovered"] = point.discovered_count;
          out.append(d);
        }
        return out;
      },
      py::arg("scored"), py::arg("seed_list"), py::arg("eval_list"), py::arg("grid"));

  // ---------------------------------------------------------------- curriculum
  m.def(
      "quintile_batches",
      [](const std::vector<std::tuple<std::string, double, std::string>>& train) {
        std::vector<TrainExample> examples;
        for (const auto& [id, score, label] : train)
          examples.push_back({id, score, label_from_string(label)});
        auto schedule = build_quintile_batches(examples);
        std::vector<std::vector<std::string>> out(schedule.batches.begin(),
                                                  schedule.batches.end());
        return out;
      },
      py::arg("train"));

  // ---------------------------------------------------------------- pipeline
  m.def(
      "validate_config",
      [](const std::string& config_json, const std::filesystem::path& base_dir) {
        return validate_config(parse_run_config(config_json, base_dir));
      },
      py::arg("config_json"), py::arg("base_dir") = std::filesystem::path("."));

  m.def(
      "run_pipeline",
      [](const std::string& config_json, const std::filesystem::path& base_dir) {
        auto cfg = parse_run_config(config_json, base_dir);
        return run_pipeline(cfg);
      },
      py::arg("config_json"), py::arg("base_dir") = std::filesystem::path("."),
      py::call_guard<py::gil_scoped_release>());

  m.def("summarize_run", &summarize_run, py::arg("run_dir"));

  m.attr("__version__") = "0.1.0";
  m.attr("DEFAULT_BINARIZE_THRESHOLD") = kDefaultBinarizeThreshold;
}
