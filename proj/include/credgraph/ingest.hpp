#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "credgraph/graph.hpp"

namespace credgraph {

// ---------------------------------------------------------------------------
// Raw export readers and the cleaning/filtering rules that turn them into
// graph-store inputs. Input file formats are documented in docs/formats.md.
// ---------------------------------------------------------------------------

/// Lowercases, strips URL scheme / leading "www." / any path suffix, and
/// trims whitespace. All domain ids in the store are normalized this way.
std::string normalize_domain(std::string_view raw);

struct BacklinkRow {
  std::string source;
  std::string target;
  std::int64_t link_count;
};

struct LabelRow {
  std::string domain;
  double pc_score;
};

/// One observation of a user posting a tweet that mentions a domain.
struct SocialMention {
  std::string user;
  std::string tweet_id;
  std::string domain;
  std::int64_t count;  // observations of this tweet (original + reposts), >= 1
};

struct SerpResult {
  std::string query;
  std::string target_domain;  // the domain the query was harvested for
  int rank;                   // 1..10
  std::string result_domain;
};

/// Raw tweet text rows scanned for dredge-word usage; the text itself is
/// never persisted, only the retained (phrase, user) tuples.
struct DredgeTextRow {
  std::string user;
  std::string tweet_id;
  std::string text;
};

struct VectorTable {
  std::size_t dim = 0;
  std::vector<std::string> ids;               // file order
  std::map<std::string, std::vector<double>> by_id;
};

struct Judgment {
  std::string domain;
  BinaryLabel verdict;
  std::string annotator;
  std::string note;
};

/// Attribute table rows, log-normalized as ln(1+x) on load.
std::vector<DomainRecord> load_attributes(const std::filesystem::path& path);
std::vector<BacklinkRow> load_backlinks(const std::filesystem::path& path);
std::vector<LabelRow> load_labels(const std::filesystem::path& path);
std::vector<SocialMention> load_mentions(const std::filesystem::path& path);
std::vector<SerpResult> load_serp(const std::filesystem::path& path);
std::vector<DredgeTextRow> load_dredge_texts(const std::filesystem::path& path);
VectorTable load_vectors(const std::filesystem::path& path);
void save_vectors(const std::filesystem::path& path, const VectorTable& table);
/// Plain newline-separated domain list ('#' comments allowed).
std::set<std::string> load_domain_list(const std::filesystem::path& path);
std::vector<Judgment> load_judgments(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Twitter stream cleaning (iterated to a fixed point)
// ---------------------------------------------------------------------------

struct CleaningParams {
  int min_user_tweets = 10;        // drop users with fewer observed tweets
  int min_tweet_observations = 3;  // drop tweets observed fewer times
  int min_domain_users = 2;        // drop domains linked by a single user
  int min_user_domains = 2;        // drop users linking a single domain
};

/// Applies the four cleaning rules in order and iterates until no row
/// changes: (a) users with < min_user_tweets distinct tweets, (b) tweets
/// whose total observation count < min_tweet_observations, (c) domains
/// linked to by a single user, (d) users that only linked a single domain.
std::vector<SocialMention> filter_social_stream(std::vector<SocialMention> mentions,
                                                const CleaningParams& params = {});

// ---------------------------------------------------------------------------
// Dredge words
// ---------------------------------------------------------------------------

struct DredgeMatch {
  std::size_t text_index;   // row in the scanned stream
  std::string phrase;
};

/// A phrase occurrence counts only when it begins the text, follows a
/// whitespace character, or follows '#'. Matching is case-insensitive over
/// ASCII; phrases must already be lowercase.
std::vector<DredgeMatch> filter_dredge_mentions(const std::vector<DredgeTextRow>& texts,
                                                const std::vector<std::string>& phrases);

/// Keeps exactly the queries whose harvested target ranks in the top 10 of
/// their own SERP; one record per retained query, carrying every target the
/// query ranked for.
std::vector<DredgeWordRecord> retain_ranking_queries(const std::vector<SerpResult>& rows);

struct SerpCandidate {
  std::string domain;
  std::int64_t occurrences;
};

/// Unique result domains outside the labeled set with their SERP occurrence
/// counts, restricted to retained queries; sorted by (occurrences desc,
/// domain asc). min_occurrence filters rare candidates.
std::vector<SerpCandidate> build_serp_candidates(const std::vector<SerpResult>& rows,
                                                 const std::set<std::string>& retained_queries,
                                                 const std::set<std::string>& labeled_domains,
                                                 std::int64_t min_occurrence = 1);

}  // namespace credgraph
