#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "audit/client.hpp"
#include "audit/corpus.hpp"
#include "audit/textproc.hpp"

namespace audit {

enum class LabelKind { type1_api, type1_empty, type2, uncensored, undefined };

std::string to_string(LabelKind k);
LabelKind label_kind_from_string(const std::string& s);

struct CensorshipLabel {
  LabelKind kind = LabelKind::undefined;
  long cot_hits = 0;
  long answer_hits = 0;
  long topic_token_count = 0;
};

struct RelevanceRecord {
  std::string topic_id;
  std::optional<double> score;  // answer_hits / cot_hits * 100; absent when cot_hits = 0
  long cot_hits = 0;
  long answer_hits = 0;
  std::vector<std::string> topic_tokens;  // distinct, stopword-filtered
};

// Hard-refusal pass: api_error, or a reply with empty/whitespace-only
// answer and absent/empty CoT. Returns nullopt when soft analysis applies.
std::optional<CensorshipLabel> classify_hard(const Exchange& exchange);

// Distinct-token membership counting per the relevance-score definition.
RelevanceRecord relevance(const Topic& topic, const std::string& cot,
                          const std::string& answer, const Tokenizer& tokenizer,
                          const StopwordList& stopwords);

// Total classification. Transport errors (no reply at all) come out
// `undefined`, as do non-empty replies whose CoT carries no topic token.
CensorshipLabel classify(const Exchange& exchange,
                         const std::optional<RelevanceRecord>& record);

struct LabeledTopic {
  std::string topic_id;
  CensorshipLabel label;
  std::optional<RelevanceRecord> relevance;
};

// Label every exchange of a completed run.
std::vector<LabeledTopic> label_run(const Corpus& corpus,
                                    const std::vector<Exchange>& exchanges,
                                    const Tokenizer& tokenizer,
                                    const StopwordList& stopwords);

enum class RateGrouping { frame, group };

struct RateCell {
  std::string key;  // frame name or group label
  long n = 0;
  long type1 = 0;
  long type2 = 0;
  long non_empty = 0;  // type2-rate denominator
  double type1_rate = 0;
  double type2_rate = 0;
};

// Per-cell censorship rates. type1_rate is over all topics in the cell;
// type2_rate is over the cell's non-empty replies (undefined excluded).
std::vector<RateCell> censorship_rates(const Corpus& corpus,
                                       const std::vector<LabeledTopic>& labels,
                                       RateGrouping grouping);

}  // namespace audit
