#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace testutil {

inline std::filesystem::path data_dir() {
  if (const char* d = std::getenv("AUDIT_DATA_DIR")) return d;
  return "data";
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("audit_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Minimal XML well-formedness check: declaration optional, tags balanced,
// attributes quoted. Enough to catch broken SVG emission.
inline bool xml_well_formed(const std::string& doc) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  bool seen_element = false;
  while (i < doc.size()) {
    if (doc[i] != '<') {
      ++i;
      continue;
    }
    auto end = doc.find('>', i);
    if (end == std::string::npos) return false;
    std::string tag = doc.substr(i + 1, end - i - 1);
    i = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;  // declaration / comment
    bool closing = tag[0] == '/';
    bool self_closing = tag.back() == '/';
    std::string name = tag.substr(closing ? 1 : 0);
    if (self_closing) name.pop_back();
    auto sp = name.find_first_of(" \t\n");
    if (sp != std::string::npos) name = name.substr(0, sp);
    if (name.empty()) return false;
    // attribute quotes must be balanced
    long quotes = 0;
    for (char c : tag) {
      if (c == '"') ++quotes;
    }
    if (quotes % 2 != 0) return false;
    if (closing) {
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
    } else if (!self_closing) {
      stack.push_back(name);
      seen_element = true;
    }
  }
  return stack.empty() && seen_element;
}

}  // namespace testutil
