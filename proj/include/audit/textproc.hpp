#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace audit {

// Decodes a UTF-8 string into codepoint-aligned substrings. Invalid bytes
// are passed through as single-byte units.
std::vector<std::string> utf8_units(std::string_view text);

enum class SegmentStrategy { dictionary_longest_match, whitespace };

// Deterministic tokenizer. dictionary_longest_match is greedy left-to-right
// over a user-supplied word list; codepoints not covered by any dictionary
// word become single-character tokens. whitespace splits on ASCII whitespace
// and case-folds ASCII letters.
class Tokenizer {
 public:
  static Tokenizer dictionary(std::unordered_set<std::string> words);
  static Tokenizer whitespace(bool fold_ascii_case = true);
  static Tokenizer from_dictionary_file(const std::filesystem::path& path);

  std::vector<std::string> segment(std::string_view text) const;

  SegmentStrategy strategy() const { return strategy_; }
  const std::unordered_set<std::string>& dictionary_words() const { return dict_; }

 private:
  Tokenizer() = default;
  SegmentStrategy strategy_ = SegmentStrategy::whitespace;
  std::unordered_set<std::string> dict_;
  std::size_t max_word_units_ = 1;
  bool fold_case_ = true;
};

class StopwordList {
 public:
  StopwordList() = default;
  explicit StopwordList(std::unordered_set<std::string> words) : words_(std::move(words)) {}
  static StopwordList from_file(const std::filesystem::path& path);

  bool contains(std::string_view token) const {
    return words_.count(std::string(token)) > 0;
  }
  std::size_t size() const { return words_.size(); }
  const std::unordered_set<std::string>& words() const { return words_; }

  // Stable content hash, stamped into reports so results are attributable
  // to the exact list used.
  std::uint64_t content_hash() const;

 private:
  std::unordered_set<std::string> words_;
};

// Order-preserving stopword filter.
std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens,
                                          const StopwordList& stopwords);

// FNV-1a, used for stamping file/config identities into reports.
std::uint64_t fnv1a64(std::string_view data);

}  // namespace audit
