#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "credgraph/graph.hpp"
#include "credgraph/ingest.hpp"

namespace credgraph {

// ---------------------------------------------------------------------------
// Classification metrics
// ---------------------------------------------------------------------------

struct ClassificationMetrics {
  double accuracy = 0.0;
  double f1 = 0.0;  // unreliable is the positive class
  std::size_t count = 0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

ClassificationMetrics accuracy_f1(const std::vector<BinaryLabel>& predictions,
                                  const std::vector<BinaryLabel>& truth);

// ---------------------------------------------------------------------------
// Ranked discovery
// ---------------------------------------------------------------------------

struct RankingEntry {
  std::string domain;
  double confidence = 0.0;  // probability of the unreliable class
};

/// Unlabeled domains ordered by (confidence desc, domain asc); ties always
/// break on the domain id so rankings are total orders.
struct DiscoveryRanking {
  std::vector<RankingEntry> entries;
  std::string provenance;  // "gnn" | "dredge-serp"

  static DiscoveryRanking from_scored(std::vector<RankingEntry> scored, std::string provenance);
};

/// Fraction of the top k judged unreliable. Every domain in the top k must
/// be judged; a shorter ranking or missing judgment is a coverage error,
/// never a silent truncation.
double precision_at_k(const DiscoveryRanking& ranking,
                      const std::map<std::string, BinaryLabel>& judgments, int k);

struct PartialMetrics {
  std::optional<double> precision;  // unset when the discovered set is empty
  double recall = 0.0;
  double pf1 = 0.0;
  bool degenerate = false;  // pf1 forced to 0 by the p+r = 0 convention
};

/// Discovery metrics against a seed list and an external evaluation list:
/// p = |D cap E| / |D|, r = |D cap E| / |E|, pf1 = 2pr/(p+r). The discovered
/// set must already exclude seed-list members.
PartialMetrics partial_metrics(const std::set<std::string>& discovered,
                               const std::set<std::string>& seed_list,
                               const std::set<std::string>& eval_list);

struct SweepPoint {
  double threshold = 0.0;
  std::size_t discovered_count = 0;
  PartialMetrics metrics;
};

/// Partial metrics of {domains with confidence >= t} for each grid point
/// (ascending grid in [0,1]). Seed-list members are removed from the scored
/// pool before thresholding.
std::vector<SweepPoint> threshold_sweep(const std::vector<RankingEntry>& scored,
                                        const std::set<std::string>& seed_list,
                                        const std::set<std::string>& eval_list,
                                        const std::vector<double>& grid);

/// Confidence source for candidate domains; nullopt when the scorer has no
/// attributes/prediction for the candidate.
using DomainScorer = std::function<std::optional<double>(const std::string&)>;

struct DredgeDiscoveryResult {
  DiscoveryRanking ranking;
  std::vector<std::string> dropped;  // candidates the scorer could not score
};

/// Scores SERP candidates, drops unscorable ones (logged, not guessed),
/// filters by the confidence threshold and ranks the rest.
DredgeDiscoveryResult dredge_discovery(const std::vector<SerpCandidate>& candidates,
                                       const DomainScorer& scorer, double threshold,
                                       std::string provenance = "dredge-serp");

}  // namespace credgraph
