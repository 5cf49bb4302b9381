#include "credgraph/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "credgraph/table.hpp"

namespace credgraph {

std::string normalize_domain(std::string_view raw) {
  std::size_t begin = 0, end = raw.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(raw[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(raw[end - 1]))) --end;
  std::string s(raw.substr(begin, end - begin));
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (std::string_view scheme : {"https://", "http://"})
    if (s.rfind(scheme, 0) == 0) s.erase(0, scheme.size());
  if (s.rfind("www.", 0) == 0) s.erase(0, 4);
  if (auto slash = s.find('/'); slash != std::string::npos) s.erase(slash);
  while (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

// ---------------------------------------------------------------------------
// Loaders
// ---------------------------------------------------------------------------

std::vector<DomainRecord> load_attributes(const std::filesystem::path& path) {
  Table t = read_table(path);
  if (t.header.size() != 1 + kAttributeCount)
    throw SchemaError(path.string() + ": expected 1 id column + " +
                      std::to_string(kAttributeCount) + " attribute columns, got " +
                      std::to_string(t.header.size()));
  std::vector<DomainRecord> out;
  out.reserve(t.rows.size());
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row.size() != t.header.size())
      throw SchemaError(path.string() + " row " + std::to_string(r + 2) + ": wrong column count");
    DomainRecord rec;
    rec.id = normalize_domain(row[0]);
    if (rec.id.empty())
      throw DataError(path.string() + " row " + std::to_string(r + 2) + ": empty domain");
    if (!seen.insert(rec.id).second)
      throw DataError(path.string() + " row " + std::to_string(r + 2) + ": duplicate domain '" +
                      rec.id + "'");
    rec.attributes.resize(kAttributeCount);
    for (int i = 0; i < kAttributeCount; ++i) {
      double raw = parse_double(row[1 + i], path, r + 2);
      if (raw < 0.0)
        throw DataError(path.string() + " row " + std::to_string(r + 2) +
                        ": negative raw attribute " + row[1 + i]);
      rec.attributes[i] = std::log1p(raw);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<BacklinkRow> load_backlinks(const std::filesystem::path& path) {
  Table t = read_table(path);
  std::size_t c_src = t.column("source"), c_dst = t.column("target"), c_n = t.column("link_count");
  std::vector<BacklinkRow> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    BacklinkRow b{normalize_domain(row[c_src]), normalize_domain(row[c_dst]),
                  parse_int(row[c_n], path, r + 2)};
    if (b.link_count <= 0)
      throw DataError(path.string() + " row " + std::to_string(r + 2) + ": link_count must be >= 1");
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<LabelRow> load_labels(const std::filesystem::path& path) {
  Table t = read_table(path);
  std::size_t c_d = t.column("domain"), c_s = t.column("pc_score");
  std::vector<LabelRow> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    double score = parse_double(row[c_s], path, r + 2);
    if (score < 0.0 || score > 1.0)
      throw DataError(path.string() + " row " + std::to_string(r + 2) +
                      ": pc_score out of [0,1]: " + row[c_s]);
    out.push_back({normalize_domain(row[c_d]), score});
  }
  return out;
}

std::vector<SocialMention> load_mentions(const std::filesystem::path& path) {
  Table t = read_table(path);
  std::size_t c_u = t.column("user"), c_t = t.column("tweet_id");
  std::size_t c_d = t.column("domain"), c_n = t.column("count");
  std::vector<SocialMention> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    SocialMention m{row[c_u], row[c_t], normalize_domain(row[c_d]),
                    parse_int(row[c_n], path, r + 2)};
    if (m.count < 1)
      throw DataError(path.string() + " row " + std::to_string(r + 2) + ": count must be >= 1");
    if (m.domain.empty())
      throw DataError(path.string() + " row " + std::to_string(r + 2) + ": mention without domain");
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<SerpResult> load_serp(const std::filesystem::path& path) {
  Table t = read_table(path);
  std::size_t c_q = t.column("query"), c_t = t.column("target_domain");
  std::size_t c_r = t.column("rank"), c_d = t.column("result_domain");
  std::vector<SerpResult> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    SerpResult s;
    s.query = row[c_q];
    for (char& c : s.query) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    s.target_domain = normalize_domain(row[c_t]);
    s.rank = static_cast<int>(parse_int(row[c_r], path, r + 2));
    s.result_domain = normalize_domain(row[c_d]);
    if (s.rank < 1 || s.rank > 10)
      throw DataError(path.string() + " row " + std::to_string(r + 2) +
                      ": rank outside 1..10: " + row[c_r]);
    if (s.query.empty())
      throw DataError(path.string() + " row " + std::to_string(r + 2) + ": empty query");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<DredgeTextRow> load_dredge_texts(const std::filesystem::path& path) {
  Table t = read_table(path);
  std::size_t c_u = t.column("user"), c_t = t.column("tweet_id"), c_x = t.column("text");
  std::vector<DredgeTextRow> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) out.push_back({row[c_u], row[c_t], row[c_x]});
  return out;
}

VectorTable load_vectors(const std::filesystem::path& path) {
  Table t = read_table(path);
  std::size_t c_id = t.column("id"), c_dim = t.column("dim");
  VectorTable out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    auto dim = static_cast<std::size_t>(parse_int(row[c_dim], path, r + 2));
    if (out.dim == 0) out.dim = dim;
    if (dim != out.dim || dim == 0)
      throw SchemaError(path.string() + " row " + std::to_string(r + 2) +
                        ": inconsistent vector dimension");
    if (row.size() != 2 + dim)
      throw SchemaError(path.string() + " row " + std::to_string(r + 2) + ": wrong value count");
    std::vector<double> v(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = parse_double(row[2 + i], path, r + 2);
    if (!out.by_id.emplace(row[c_id], std::move(v)).second)
      throw DataError(path.string() + " row " + std::to_string(r + 2) + ": duplicate id '" +
                      row[c_id] + "'");
    out.ids.push_back(row[c_id]);
  }
  return out;
}

void save_vectors(const std::filesystem::path& path, const VectorTable& table) {
  Table t;
  t.header = {"id", "dim", "values"};
  for (const auto& id : table.ids) {
    const auto& v = table.by_id.at(id);
    std::vector<std::string> row = {id, std::to_string(v.size())};
    for (double x : v) row.push_back(format_double(x));
    t.rows.push_back(std::move(row));
  }
  write_table(path, t);
}

std::set<std::string> load_domain_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::string d = normalize_domain(line);
    if (!d.empty()) out.insert(d);
  }
  return out;
}

std::vector<Judgment> load_judgments(const std::filesystem::path& path) {
  Table t = read_table(path);
  std::size_t c_d = t.column("domain"), c_v = t.column("verdict");
  std::size_t c_a = t.column("annotator"), c_n = t.column("note");
  std::vector<Judgment> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    Judgment j;
    j.domain = normalize_domain(row[c_d]);
    if (row[c_v] == "reliable")
      j.verdict = BinaryLabel::Reliable;
    else if (row[c_v] == "unreliable")
      j.verdict = BinaryLabel::Unreliable;
    else
      throw DataError(path.string() + " row " + std::to_string(r + 2) + ": verdict must be reliable|unreliable");
    j.annotator = row[c_a];
    j.note = row[c_n];
    out.push_back(std::move(j));
  }
  return out;
}

// ---------------------------------------------------------------------------
// filter_social_stream
// ---------------------------------------------------------------------------

std::vector<SocialMention> filter_social_stream(std::vector<SocialMention> mentions,
                                                const CleaningParams& params) {
  bool changed = true;
  while (changed) {
    changed = false;

    // (a) users with fewer than min_user_tweets distinct observed tweets
    {
      std::unordered_map<std::string, std::unordered_set<std::string>> tweets_of;
      for (const auto& m : mentions) tweets_of[m.user].insert(m.tweet_id);
      auto keep = [&](const SocialMention& m) {
        return tweets_of[m.user].size() >= static_cast<std::size_t>(params.min_user_tweets);
      };
      auto it = std::stable_partition(mentions.begin(), mentions.end(), keep);
      if (it != mentions.end()) changed = true;
      mentions.erase(it, mentions.end());
    }

    // (b) tweets observed fewer than min_tweet_observations times; rows of
    // the same tweet carry its total count, so take the max over rows
    {
      std::unordered_map<std::string, std::int64_t> obs;
      for (const auto& m : mentions) {
        auto& o = obs[m.tweet_id];
        o = std::max(o, m.count);
      }
      auto keep = [&](const SocialMention& m) {
        return obs[m.tweet_id] >= params.min_tweet_observations;
      };
      auto it = std::stable_partition(mentions.begin(), mentions.end(), keep);
      if (it != mentions.end()) changed = true;
      mentions.erase(it, mentions.end());
    }

    // (c) domains linked to by fewer than min_domain_users distinct users
    {
      std::unordered_map<std::string, std::unordered_set<std::string>> users_of;
      for (const auto& m : mentions) users_of[m.domain].insert(m.user);
      auto keep = [&](const SocialMention& m) {
        return users_of[m.domain].size() >= static_cast<std::size_t>(params.min_domain_users);
      };
      auto it = std::stable_partition(mentions.begin(), mentions.end(), keep);
      if (it != mentions.end()) changed = true;
      mentions.erase(it, mentions.end());
    }

    // (d) users that linked fewer than min_user_domains distinct domains
    {
      std::unordered_map<std::string, std::unordered_set<std::string>> domains_of;
      for (const auto& m : mentions) domains_of[m.user].insert(m.domain);
      auto keep = [&](const SocialMention& m) {
        return domains_of[m.user].size() >= static_cast<std::size_t>(params.min_user_domains);
      };
      auto it = std::stable_partition(mentions.begin(), mentions.end(), keep);
      if (it != mentions.end()) changed = true;
      mentions.erase(it, mentions.end());
    }
  }
  return mentions;
}

// ---------------------------------------------------------------------------
// Dredge word filtering
// ---------------------------------------------------------------------------

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool boundary_before(const std::string& text, std::size_t pos) {
  if (pos == 0) return true;
  char prev = text[pos - 1];
  return prev == '#' || std::isspace(static_cast<unsigned char>(prev));
}

}  // namespace

std::vector<DredgeMatch> filter_dredge_mentions(const std::vector<DredgeTextRow>& texts,
                                                const std::vector<std::string>& phrases) {
  for (const auto& p : phrases)
    if (p != ascii_lower(p)) throw DataError("dredge phrases must be lowercase: '" + p + "'");
  std::vector<DredgeMatch> out;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    std::string lower = ascii_lower(texts[i].text);
    for (const auto& phrase : phrases) {
      if (phrase.empty()) continue;
      std::size_t pos = lower.find(phrase);
      bool matched = false;
      while (pos != std::string::npos && !matched) {
        matched = boundary_before(lower, pos);
        if (!matched) pos = lower.find(phrase, pos + 1);
      }
      if (matched) out.push_back({i, phrase});
    }
  }
  return out;
}

std::vector<DredgeWordRecord> retain_ranking_queries(const std::vector<SerpResult>& rows) {
  // per query, the harvested targets that actually rank in its top 10
  std::map<std::string, std::set<std::string>> ranking_targets;
  for (const auto& row : rows) {
    if (row.rank < 1 || row.rank > 10)
      throw DataError("SERP rank outside 1..10 for query '" + row.query + "'");
    if (row.result_domain == row.target_domain)
      ranking_targets[row.query].insert(row.target_domain);
  }
  std::vector<DredgeWordRecord> out;
  out.reserve(ranking_targets.size());
  for (auto& [query, targets] : ranking_targets) {
    DredgeWordRecord rec;
    rec.phrase = query;
    rec.target_domains.assign(targets.begin(), targets.end());
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<SerpCandidate> build_serp_candidates(const std::vector<SerpResult>& rows,
                                                 const std::set<std::string>& retained_queries,
                                                 const std::set<std::string>& labeled_domains,
                                                 std::int64_t min_occurrence) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& row : rows) {
    if (!retained_queries.count(row.query)) continue;
    if (labeled_domains.count(row.result_domain)) continue;
    ++counts[row.result_domain];
  }
  std::vector<SerpCandidate> out;
  for (const auto& [domain, n] : counts)
    if (n >= min_occurrence) out.push_back({domain, n});
  std::sort(out.begin(), out.end(), [](const SerpCandidate& a, const SerpCandidate& b) {
    if (a.occurrences != b.occurrences) return a.occurrences > b.occurrences;
    return a.domain < b.domain;
  });
  return out;
}

}  // namespace credgraph
