#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace audit {

enum class Frame { episodic, thematic };
enum class Sensitivity { sensitive, baseline };

std::string to_string(Frame f);
std::string to_string(Sensitivity s);
Frame frame_from_string(const std::string& s);
Sensitivity sensitivity_from_string(const std::string& s);

// Group label: 1..12 for sensitive topics, kBaselineGroup for baseline.
inline constexpr int kBaselineGroup = 0;

struct Topic {
  std::string id;
  std::string text;
  Frame frame = Frame::thematic;
  int group = kBaselineGroup;
  Sensitivity sensitivity = Sensitivity::sensitive;
  std::optional<long> censored_article_count;  // Appendix-style ordering key

  bool operator==(const Topic&) const = default;
};

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Topic> topics);  // throws on duplicate id / invalid metadata

  const std::vector<Topic>& topics() const { return topics_; }
  std::size_t size() const { return topics_.size(); }
  const Topic* find(const std::string& id) const;

  std::uint64_t content_hash() const;

 private:
  std::vector<Topic> topics_;
};

enum class CorpusFormat { csv, json };

// Parse errors carry a line/record locus. Duplicate ids and invalid
// frame/group/sensitivity values are rejected.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);
void export_corpus(const Corpus& corpus, const std::filesystem::path& path,
                   CorpusFormat format);

struct PromptTemplateSet {
  std::string sensitive_template;  // must contain exactly one [topic]
  std::string baseline_template;   // must contain exactly one [topic]
  std::string language_tag = "zh";
};

void validate_templates(const PromptTemplateSet& templates);  // throws on violation
std::string render_prompt(const Topic& topic, const PromptTemplateSet& templates);

// Expected census keyed by (sensitivity, frame, group). Baseline cells use
// group = kBaselineGroup.
struct ManifestCell {
  Sensitivity sensitivity;
  Frame frame;
  int group;
  auto operator<=>(const ManifestCell&) const = default;
};

struct CorpusManifest {
  std::map<ManifestCell, long> expected_counts;

  static CorpusManifest from_file(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

struct CellResult {
  ManifestCell cell;
  long expected = 0;
  long observed = 0;
  bool pass = false;
};

struct ValidationReport {
  std::vector<CellResult> cells;
  bool overall_pass = false;
  long failing_cells() const;
};

// Mismatches are reported, never thrown.
ValidationReport validate_corpus(const Corpus& corpus, const CorpusManifest& manifest);

}  // namespace audit
