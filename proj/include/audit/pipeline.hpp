#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "audit/client.hpp"
#include "audit/corpus.hpp"
#include "audit/detector.hpp"
#include "audit/expected_response.hpp"
#include "audit/mock_endpoint.hpp"
#include "audit/report.hpp"
#include "audit/semantics.hpp"
#include "audit/stats.hpp"
#include "audit/textproc.hpp"

namespace audit {

struct AuditConfig {
  std::filesystem::path corpus_path;
  CorpusFormat corpus_format = CorpusFormat::csv;
  std::optional<std::filesystem::path> manifest_path;
  PromptTemplateSet templates;
  EndpointConfig reasoning_endpoint;
  EndpointConfig base_endpoint;
  std::optional<std::filesystem::path> dictionary_path;  // absent: whitespace tokenizer
  std::optional<std::filesystem::path> stopword_path;
  IdfMode idf_mode = IdfMode::smoothed_default;
  std::size_t exact_test_cutoff = 400;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 1;
  std::uint64_t config_hash = 0;  // hash of the config file bytes

  // JSON config with ${ENV_VAR} interpolation in string values.
  static AuditConfig from_file(const std::filesystem::path& path);
};

Tokenizer make_tokenizer(const AuditConfig& config);
StopwordList make_stopwords(const AuditConfig& config);

// Everything the analyze stage produces, in memory.
struct AnalysisResult {
  std::vector<LabeledTopic> labels;
  std::vector<ExpectedPair> pairs;
  SimilarityTable similarity;
  std::vector<MissingWordRow> missing_thematic;
  std::vector<MissingWordRow> missing_episodic;
  std::vector<AsymmetryRecord> asymmetry_records;
  bool idf_negative_weights_seen = false;
};

AnalysisResult analyze_run(const Corpus& corpus, const std::vector<Exchange>& stage_one,
                           const std::vector<ExpectedPair>& pairs,
                           const Tokenizer& tokenizer, const StopwordList& stopwords,
                           IdfMode idf_mode);

BaselineInputs collect_baseline_inputs(const Corpus& corpus, const AnalysisResult& analysis);

Report assemble_report(const Corpus& corpus, const AnalysisResult& analysis,
                       const std::vector<ComparisonRow>& tests, const ReportMeta& meta);

// Writes report.json, CSV tables, and the SVG figures.
void emit_report_artifacts(const Report& report, const Corpus& corpus,
                           const AnalysisResult& analysis,
                           const std::filesystem::path& out_dir, std::uint64_t seed);

struct CalibrationResult {
  std::size_t total = 0;
  std::size_t agreed = 0;
  std::vector<std::string> mismatched_topic_ids;
  double agreement() const {
    return total == 0 ? 0.0 : static_cast<double>(agreed) / static_cast<double>(total);
  }
};

// End-to-end planted-rate recovery: synthesize a corpus of n topics, plant
// behaviors at the given rates, serve them from the mock, run the audit
// and detector, and compare assigned labels against the planted ground
// truth.
CalibrationResult calibrate(std::size_t n, const PlantRates& rates, std::uint64_t seed,
                            const std::filesystem::path& work_dir,
                            double transient_fault_rate = 0.0, int max_retries = 3);

// Synthetic corpus used by calibrate and the harness tests: whitespace-
// separated Latin token topics, unique per index.
Corpus synthetic_corpus(std::size_t n, std::uint64_t seed);
PromptTemplateSet default_templates();

}  // namespace audit
