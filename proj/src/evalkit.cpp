#include "credgraph/evalkit.hpp"

#include <algorithm>

namespace credgraph {

ClassificationMetrics accuracy_f1(const std::vector<BinaryLabel>& predictions,
                                  const std::vector<BinaryLabel>& truth) {
  if (predictions.empty()) throw DataError("accuracy_f1: empty input");
  if (predictions.size() != truth.size())
    throw ShapeError("accuracy_f1: predictions and labels are not aligned");
  ClassificationMetrics m;
  m.count = predictions.size();
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    bool pred_pos = predictions[i] == BinaryLabel::Unreliable;
    bool true_pos = truth[i] == BinaryLabel::Unreliable;
    if (pred_pos && true_pos)
      ++m.tp;
    else if (pred_pos && !true_pos)
      ++m.fp;
    else if (!pred_pos && true_pos)
      ++m.fn;
    else
      ++m.tn;
  }
  m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(m.count);
  double denom = static_cast<double>(2 * m.tp + m.fp + m.fn);
  m.f1 = denom > 0.0 ? 2.0 * static_cast<double>(m.tp) / denom : 0.0;
  return m;
}

DiscoveryRanking DiscoveryRanking::from_scored(std::vector<RankingEntry> scored,
                                               std::string provenance) {
  std::sort(scored.begin(), scored.end(), [](const RankingEntry& a, const RankingEntry& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.domain < b.domain;
  });
  for (std::size_t i = 1; i < scored.size(); ++i)
    if (scored[i].domain == scored[i - 1].domain &&
        scored[i].confidence == scored[i - 1].confidence)
      throw DataError("duplicate domain in ranking: " + scored[i].domain);
  DiscoveryRanking r;
  r.entries = std::move(scored);
  r.provenance = std::move(provenance);
  return r;
}

double precision_at_k(const DiscoveryRanking& ranking,
                      const std::map<std::string, BinaryLabel>& judgments, int k) {
  if (k < 1) throw ConfigError("precision_at_k: k must be >= 1");
  if (ranking.entries.size() < static_cast<std::size_t>(k))
    throw DataError("precision_at_k: ranking has only " +
                    std::to_string(ranking.entries.size()) + " entries, k = " + std::to_string(k));
  int unreliable = 0;
  for (int i = 0; i < k; ++i) {
    const auto& domain = ranking.entries[static_cast<std::size_t>(i)].domain;
    auto it = judgments.find(domain);
    if (it == judgments.end())
      throw DataError("precision_at_k: judgments do not cover top-" + std::to_string(k) +
                      " (missing '" + domain + "')");
    if (it->second == BinaryLabel::Unreliable) ++unreliable;
  }
  return static_cast<double>(unreliable) / static_cast<double>(k);
}

PartialMetrics partial_metrics(const std::set<std::string>& discovered,
                               const std::set<std::string>& seed_list,
                               const std::set<std::string>& eval_list) {
  if (eval_list.empty()) throw DataError("partial_metrics: empty evaluation list");
  for (const auto& d : discovered)
    if (seed_list.count(d))
      throw DataError("partial_metrics: discovered set contains seed-list domain '" + d + "'");

  std::size_t hits = 0;
  for (const auto& d : discovered)
    if (eval_list.count(d)) ++hits;

  PartialMetrics m;
  m.recall = static_cast<double>(hits) / static_cast<double>(eval_list.size());
  if (discovered.empty()) {
    m.precision = std::nullopt;
    m.pf1 = 0.0;
    m.degenerate = true;
    return m;
  }
  m.precision = static_cast<double>(hits) / static_cast<double>(discovered.size());
  double p = *m.precision, r = m.recall;
  if (p + r == 0.0) {
    m.pf1 = 0.0;
    m.degenerate = true;
  } else {
    m.pf1 = 2.0 * p * r / (p + r);
  }
  return m;
}

std::vector<SweepPoint> threshold_sweep(const std::vector<RankingEntry>& scored,
                                        const std::set<std::string>& seed_list,
                                        const std::set<std::string>& eval_list,
                                        const std::vector<double>& grid) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0.0 || grid[i] > 1.0) throw ConfigError("sweep grid values must lie in [0,1]");
    if (i > 0 && grid[i] <= grid[i - 1]) throw ConfigError("sweep grid must be ascending");
  }
  std::vector<RankingEntry> pool;
  for (const auto& entry : scored)
    if (!seed_list.count(entry.domain)) pool.push_back(entry);

  std::vector<SweepPoint> curve;
  curve.reserve(grid.size());
  for (double t : grid) {
    std::set<std::string> discovered;
    for (const auto& entry : pool)
      if (entry.confidence >= t) discovered.insert(entry.domain);
    SweepPoint point;
    point.threshold = t;
    point.discovered_count = discovered.size();
    point.metrics = partial_metrics(discovered, seed_list, eval_list);
    curve.push_back(std::move(point));
  }
  return curve;
}

DredgeDiscoveryResult dredge_discovery(const std::vector<SerpCandidate>& candidates,
                                       const DomainScorer& scorer, double threshold,
                                       std::string provenance) {
  DredgeDiscoveryResult result;
  std::vector<RankingEntry> scored;
  for (const auto& candidate : candidates) {
    std::optional<double> confidence = scorer(candidate.domain);
    if (!confidence) {
      result.dropped.push_back(candidate.domain);
      continue;
    }
    if (*confidence >= threshold) scored.push_back({candidate.domain, *confidence});
  }
  result.ranking = DiscoveryRanking::from_scored(std::move(scored), std::move(provenance));
  return result;
}

}  // namespace credgraph
