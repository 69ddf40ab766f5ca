#include "audit/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace audit {

std::string to_string(IdfMode mode) {
  return mode == IdfMode::smoothed_default ? "smoothed_default" : "paper_literal";
}

IdfMode idf_mode_from_string(const std::string& s) {
  if (s == "smoothed_default") return IdfMode::smoothed_default;
  if (s == "paper_literal") return IdfMode::paper_literal;
  throw std::invalid_argument("invalid idf_mode: '" + s + "'");
}

static FrequencyTable counts_of(const std::vector<std::string>& tokens) {
  FrequencyTable t;
  for (const auto& tok : tokens) t[tok]++;
  return t;
}

TfidfResult tfidf_pair(const DocumentPair& pair, IdfMode mode) {
  if (pair.expected_tokens.empty() || pair.actual_tokens.empty()) {
    throw std::invalid_argument("tfidf_pair requires two non-empty documents");
  }
  const double n_docs = 2.0;
  auto fe = counts_of(pair.expected_tokens);
  auto fa = counts_of(pair.actual_tokens);
  const double len_e = static_cast<double>(pair.expected_tokens.size());
  const double len_a = static_cast<double>(pair.actual_tokens.size());

  TfidfResult result;
  std::set<std::string> vocab;
  for (const auto& [t, _] : fe) vocab.insert(t);
  for (const auto& [t, _] : fa) vocab.insert(t);

  for (const auto& term : vocab) {
    double df = (fe.count(term) ? 1.0 : 0.0) + (fa.count(term) ? 1.0 : 0.0);
    double idf;
    if (mode == IdfMode::smoothed_default) {
      idf = std::log((1.0 + n_docs) / (1.0 + df)) + 1.0;
    } else {
      idf = std::log(n_docs / (1.0 + df));
    }
    double tf_e = fe.count(term) ? fe[term] / len_e : 0.0;
    double tf_a = fa.count(term) ? fa[term] / len_a : 0.0;
    double we = tf_e * idf;
    double wa = tf_a * idf;
    result.expected[term] = we;
    result.actual[term] = wa;
    if (we < 0.0 || wa < 0.0) result.has_negative_weight = true;
  }
  return result;
}

std::optional<double> cosine(const WeightVector& v1, const WeightVector& v2) {
  double dot = 0.0, n1 = 0.0, n2 = 0.0;
  for (const auto& [term, w] : v1) {
    n1 += w * w;
    if (auto it = v2.find(term); it != v2.end()) dot += w * it->second;
  }
  for (const auto& [term, w] : v2) n2 += w * w;
  if (n1 == 0.0 || n2 == 0.0) return std::nullopt;
  return dot / (std::sqrt(n1) * std::sqrt(n2));
}

static double median_sorted(const std::vector<double>& s) {
  std::size_t n = s.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

SimilarityTable similarity_table(const std::vector<ScoredPair>& pairs, IdfMode mode) {
  if (pairs.empty()) throw std::invalid_argument("similarity_table requires pairs");
  SimilarityTable table;
  for (const auto& sp : pairs) {
    SimilarityRecord rec;
    rec.topic_id = sp.topic_id;
    rec.group = sp.group;
    rec.frame = sp.frame;
    if (!sp.pair.expected_tokens.empty() && !sp.pair.actual_tokens.empty()) {
      auto vecs = tfidf_pair(sp.pair, mode);
      rec.score = cosine(vecs.expected, vecs.actual);
    }
    table.per_topic.push_back(std::move(rec));
  }
  std::map<int, std::vector<double>> by_group;
  for (const auto& rec : table.per_topic) {
    if (rec.score) by_group[rec.group].push_back(*rec.score);
  }
  for (auto& [group, scores] : by_group) {
    std::sort(scores.begin(), scores.end());
    GroupSimilaritySummary s;
    s.group = group;
    s.n = scores.size();
    s.min = scores.front();
    s.max = scores.back();
    s.range = s.max - s.min;
    s.median = median_sorted(scores);
    s.scores = scores;
    table.per_group[group] = std::move(s);
  }
  return table;
}

std::set<std::string> missing_words(const DocumentPair& pair, const StopwordList& stopwords) {
  std::set<std::string> actual(pair.actual_tokens.begin(), pair.actual_tokens.end());
  std::set<std::string> missing;
  for (const auto& t : pair.expected_tokens) {
    if (!actual.count(t) && !stopwords.contains(t)) missing.insert(t);
  }
  return missing;
}

std::vector<MissingWordRow> aggregate_missing(
    const std::vector<std::set<std::string>>& per_topic_missing, std::size_t top_k) {
  std::map<std::string, long> counts;
  for (const auto& s : per_topic_missing) {
    for (const auto& w : s) counts[w]++;
  }
  std::vector<MissingWordRow> rows;
  rows.reserve(counts.size());
  for (const auto& [word, n] : counts) rows.push_back({word, n});
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.topic_count != b.topic_count) return a.topic_count > b.topic_count;
    return a.word < b.word;  // stable order for identical counts
  });
  if (top_k > 0 && rows.size() > top_k) rows.resize(top_k);
  return rows;
}

FrequencyTable token_frequencies(const std::vector<std::string>& tokens,
                                 const StopwordList& stopwords) {
  FrequencyTable t;
  for (const auto& tok : tokens) {
    if (!stopwords.contains(tok)) t[tok]++;
  }
  return t;
}

std::vector<AsymmetryRecord> asymmetry(
    const std::vector<std::pair<FrequencyTable, FrequencyTable>>& per_topic) {
  // per_topic entries are (expected_freqs, actual_freqs)
  std::map<std::string, AsymmetryRecord> by_word;
  for (const auto& [expected, actual] : per_topic) {
    std::set<std::string> words;
    for (const auto& [w, _] : expected) words.insert(w);
    for (const auto& [w, _] : actual) words.insert(w);
    for (const auto& w : words) {
      long fe = 0, fa = 0;
      if (auto it = expected.find(w); it != expected.end()) fe = it->second;
      if (auto it = actual.find(w); it != actual.end()) fa = it->second;
      if (fe == 0 && fa == 0) continue;
      auto& rec = by_word[w];
      rec.word = w;
      if (fe > fa) rec.less_frequent_in_actual++;        // |S2|
      else if (fa > fe) rec.less_frequent_in_expected++; // |S1|
      // ties count toward neither set
    }
  }
  std::vector<AsymmetryRecord> out;
  out.reserve(by_word.size());
  for (auto& [_, rec] : by_word) {
    if (rec.less_frequent_in_actual > 0) {
      rec.ratio_expected_over_actual =
          static_cast<double>(rec.less_frequent_in_expected) /
          static_cast<double>(rec.less_frequent_in_actual);
    }
    if (rec.less_frequent_in_expected > 0) {
      rec.ratio_actual_over_expected =
          static_cast<double>(rec.less_frequent_in_actual) /
          static_cast<double>(rec.less_frequent_in_expected);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<AsymmetryRecord> filter_asymmetry(const std::vector<AsymmetryRecord>& records,
                                              AsymmetryDirection direction,
                                              double threshold) {
  std::vector<AsymmetryRecord> out;
  for (const auto& rec : records) {
    const auto& ratio = direction == AsymmetryDirection::expected_over_actual
                            ? rec.ratio_expected_over_actual
                            : rec.ratio_actual_over_expected;
    if (ratio && *ratio <= threshold) out.push_back(rec);
  }
  std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
    double ra = direction == AsymmetryDirection::expected_over_actual
                    ? *a.ratio_expected_over_actual
                    : *a.ratio_actual_over_expected;
    double rb = direction == AsymmetryDirection::expected_over_actual
                    ? *b.ratio_expected_over_actual
                    : *b.ratio_actual_over_expected;
    if (ra != rb) return ra < rb;
    return a.word < b.word;
  });
  return out;
}

}  // namespace audit
