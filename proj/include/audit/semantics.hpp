#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "audit/corpus.hpp"
#include "audit/textproc.hpp"

namespace audit {

// Two-document TF-IDF. N = 2 always: the expected response and the actual
// response for one topic.
struct DocumentPair {
  std::vector<std::string> expected_tokens;
  std::vector<std::string> actual_tokens;
};

using WeightVector = std::map<std::string, double>;

// smoothed_default: ln((1+N)/(1+df)) + 1, strictly positive for present
// terms. paper_literal: log(N/(1+df)), which with N=2 weights shared terms
// negatively and terms unique to one document at zero; kept for fidelity
// experiments and flagged when any weight is negative.
enum class IdfMode { smoothed_default, paper_literal };

std::string to_string(IdfMode mode);
IdfMode idf_mode_from_string(const std::string& s);

struct TfidfResult {
  WeightVector expected;
  WeightVector actual;
  bool has_negative_weight = false;
};

TfidfResult tfidf_pair(const DocumentPair& pair, IdfMode mode);  // throws on empty doc

// dot/(|v1||v2|). nullopt when both vectors are zero.
std::optional<double> cosine(const WeightVector& v1, const WeightVector& v2);

struct SimilarityRecord {
  std::string topic_id;
  int group = kBaselineGroup;
  Frame frame = Frame::thematic;
  std::optional<double> score;
};

struct GroupSimilaritySummary {
  int group = kBaselineGroup;
  std::size_t n = 0;
  double min = 0;
  double median = 0;
  double max = 0;
  double range = 0;
  std::vector<double> scores;  // sorted
};

struct SimilarityTable {
  std::vector<SimilarityRecord> per_topic;
  std::map<int, GroupSimilaritySummary> per_group;
};

struct ScoredPair {
  std::string topic_id;
  int group;
  Frame frame;
  DocumentPair pair;
};

SimilarityTable similarity_table(const std::vector<ScoredPair>& pairs, IdfMode mode);

// Tokens present in expected, absent from actual, minus stopwords.
std::set<std::string> missing_words(const DocumentPair& pair, const StopwordList& stopwords);

struct MissingWordRow {
  std::string word;
  long topic_count = 0;  // number of topics whose missing set contains the word
};

// Document-count aggregation per frame, descending, top_k rows (0 = all).
std::vector<MissingWordRow> aggregate_missing(
    const std::vector<std::set<std::string>>& per_topic_missing, std::size_t top_k = 0);

struct AsymmetryRecord {
  std::string word;
  long less_frequent_in_actual = 0;    // |S2|: topics with freq_expected > freq_actual
  long less_frequent_in_expected = 0;  // |S1|: topics with freq_actual > freq_expected
  std::optional<double> ratio_expected_over_actual;  // |S1| / |S2|
  std::optional<double> ratio_actual_over_expected;  // |S2| / |S1|
};

enum class AsymmetryDirection { expected_over_actual, actual_over_expected };

using FrequencyTable = std::map<std::string, long>;

FrequencyTable token_frequencies(const std::vector<std::string>& tokens,
                                 const StopwordList& stopwords);

// Per-word asymmetry over per-topic (expected, actual) frequency tables.
// Ties count toward neither side; words absent from every table are omitted.
std::vector<AsymmetryRecord> asymmetry(
    const std::vector<std::pair<FrequencyTable, FrequencyTable>>& per_topic);

// Rows where the requested direction's ratio is defined and <= threshold.
std::vector<AsymmetryRecord> filter_asymmetry(const std::vector<AsymmetryRecord>& records,
                                              AsymmetryDirection direction,
                                              double threshold = 0.5);

}  // namespace audit
