#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "audit/corpus.hpp"
#include "audit/detector.hpp"
#include "audit/semantics.hpp"
#include "audit/stats.hpp"

namespace audit {

// Raincloud ingredients for one condition: raw points, box stats, KDE.
struct DistributionSummary {
  std::vector<double> points;  // sorted
  double median = 0;
  double q1 = 0;
  double q3 = 0;
  double whisker_low = 0;   // lowest point >= q1 - 1.5*IQR
  double whisker_high = 0;  // highest point <= q3 + 1.5*IQR
  std::vector<double> kde_x;
  std::vector<double> kde_density;  // Gaussian kernel, Silverman bandwidth

  static DistributionSummary from_points(std::vector<double> points);
  double kde_integral() const;  // trapezoid over the sampled support
};

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReportMeta {
  std::uint64_t corpus_hash = 0;
  std::uint64_t stopword_hash = 0;
  std::uint64_t config_hash = 0;
  std::string idf_mode;
  std::uint64_t seed = 0;
  bool idf_negative_weights_seen = false;
};

struct Report {
  ReportMeta meta;
  std::map<std::string, long> label_counts;  // by label kind, partitioning the corpus
  std::vector<RateCell> rates_by_frame;
  std::vector<RateCell> rates_by_group;
  std::map<std::string, DistributionSummary> relevance_distributions;  // by condition
  std::map<std::string, DistributionSummary> similarity_distributions; // by group label
  std::vector<MissingWordRow> missing_thematic;
  std::vector<MissingWordRow> missing_episodic;
  std::vector<AsymmetryRecord> asymmetry_expected_over_actual;  // ratio <= 0.5 rows
  std::vector<AsymmetryRecord> asymmetry_actual_over_expected;
  std::vector<ComparisonRow> tests;

  std::string to_canonical_json() const;  // sorted keys, stable float formatting
};

struct ReportInputs {
  const Corpus* corpus = nullptr;
  std::vector<LabeledTopic> labels;
  SimilarityTable similarity;
  std::vector<MissingWordRow> missing_thematic;
  std::vector<MissingWordRow> missing_episodic;
  std::vector<AsymmetryRecord> asymmetry_records;
  std::vector<ComparisonRow> tests;
  ReportMeta meta;
};

// Assembles and reconciles the report; throws ReportError when a stage is
// missing or the label categories fail to partition the corpus.
Report build_report(const ReportInputs& inputs);

void save_report(const Report& report, const std::filesystem::path& out_dir);

// --- plots (native deterministic SVG) ----------------------------------

void plot_raincloud(const std::map<std::string, DistributionSummary>& by_condition,
                    const std::filesystem::path& out_path, std::uint64_t seed,
                    const std::string& title);

void plot_bars(const std::vector<RateCell>& rates, const std::filesystem::path& out_path,
               const std::string& title);

struct TopicHitRow {
  std::string topic_id;
  long cot_hits = 0;
  long answer_hits = 0;
  long order_key = 0;  // descending sort key (censored_article_count)
};

void plot_topic_hits(std::vector<TopicHitRow> rows, std::size_t top_k,
                     const std::filesystem::path& out_path, const std::string& title);

}  // namespace audit
