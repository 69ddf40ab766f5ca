#include "audit/textproc.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

namespace audit {

std::vector<std::string> utf8_units(std::string_view text) {
  std::vector<std::string> units;
  std::size_t i = 0;
  while (i < text.size()) {
    unsigned char b = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if ((b & 0x80) == 0x00) len = 1;
    else if ((b & 0xE0) == 0xC0) len = 2;
    else if ((b & 0xF0) == 0xE0) len = 3;
    else if ((b & 0xF8) == 0xF0) len = 4;
    if (i + len > text.size()) len = 1;
    // continuation bytes must match, otherwise treat lead byte as a unit
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    units.emplace_back(text.substr(i, len));
    i += len;
  }
  return units;
}

Tokenizer Tokenizer::dictionary(std::unordered_set<std::string> words) {
  if (words.empty()) {
    throw std::invalid_argument("dictionary tokenizer requires a non-empty word list");
  }
  Tokenizer t;
  t.strategy_ = SegmentStrategy::dictionary_longest_match;
  t.dict_ = std::move(words);
  t.max_word_units_ = 1;
  for (const auto& w : t.dict_) {
    t.max_word_units_ = std::max(t.max_word_units_, utf8_units(w).size());
  }
  return t;
}

Tokenizer Tokenizer::whitespace(bool fold_ascii_case) {
  Tokenizer t;
  t.strategy_ = SegmentStrategy::whitespace;
  t.fold_case_ = fold_ascii_case;
  return t;
}

Tokenizer Tokenizer::from_dictionary_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dictionary file: " + path.string());
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (!line.empty()) words.insert(line);
  }
  return dictionary(std::move(words));
}

static std::string fold_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<std::string> Tokenizer::segment(std::string_view text) const {
  std::vector<std::string> tokens;
  if (text.empty()) return tokens;

  if (strategy_ == SegmentStrategy::whitespace) {
    std::string cur;
    for (char c : text) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!cur.empty()) {
          tokens.push_back(fold_case_ ? fold_ascii(cur) : cur);
          cur.clear();
        }
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) tokens.push_back(fold_case_ ? fold_ascii(cur) : cur);
    return tokens;
  }

  // Greedy longest match over codepoint units. ASCII whitespace acts as a
  // separator and is dropped, so concatenation of tokens reproduces the
  // non-separator content.
  auto units = utf8_units(text);
  std::size_t i = 0;
  while (i < units.size()) {
    if (units[i].size() == 1 &&
        std::isspace(static_cast<unsigned char>(units[i][0]))) {
      ++i;
      continue;
    }
    std::size_t best = 0;
    std::string best_word;
    std::string candidate;
    std::size_t limit = std::min(max_word_units_, units.size() - i);
    for (std::size_t len = 1; len <= limit; ++len) {
      candidate += units[i + len - 1];
      if (dict_.count(candidate)) {
        best = len;
        best_word = candidate;
      }
    }
    if (best == 0) {
      tokens.push_back(units[i]);
      i += 1;
    } else {
      tokens.push_back(best_word);
      i += best;
    }
  }
  return tokens;
}

StopwordList StopwordList::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stopword file: " + path.string());
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (!line.empty()) words.insert(line);
  }
  return StopwordList(std::move(words));
}

std::uint64_t StopwordList::content_hash() const {
  std::vector<std::string> sorted(words_.begin(), words_.end());
  std::sort(sorted.begin(), sorted.end());
  std::string joined;
  for (const auto& w : sorted) {
    joined += w;
    joined += '\n';
  }
  return fnv1a64(joined);
}

std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens,
                                          const StopwordList& stopwords) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (!stopwords.contains(t)) out.push_back(t);
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace audit
