#pragma once

#include <map>
#include <string>
#include <vector>

#include "audit/corpus.hpp"

namespace audit {

enum class MwuMethod { exact_enumeration, normal_approx_tie_corrected };
enum class SignificanceMark { none, star, double_star };

std::string to_string(MwuMethod m);
std::string to_string(SignificanceMark m);

struct TestResult {
  double u = 0;            // U statistic of the first sample
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  double p_two_sided = 1.0;
  MwuMethod method = MwuMethod::exact_enumeration;
  SignificanceMark mark = SignificanceMark::none;
};

// Two-sided Mann-Whitney U. Midranks for ties; exact two-sided p by full
// enumeration of labelings when n1*n2 <= exact_cutoff, otherwise normal
// approximation with tie-corrected variance and continuity correction.
TestResult mann_whitney(const std::vector<double>& sample_a,
                        const std::vector<double>& sample_b,
                        std::size_t exact_cutoff = 400);

SignificanceMark mark_for(double p);

struct ComparisonRow {
  std::string comparison;
  TestResult result;
};

struct BaselineInputs {
  // Relevance scores by frame condition.
  std::vector<double> thematic_baseline;
  std::vector<double> thematic_sensitive;
  std::vector<double> episodic_baseline;
  std::vector<double> episodic_sensitive;
  // Similarity scores per topical group plus the baseline group.
  std::map<int, std::vector<double>> similarity_by_group;  // key kBaselineGroup = baseline
};

// One row per frame-condition pair (relevance) and one per sensitive group
// vs baseline (similarity). Groups or conditions with an empty side are
// skipped.
std::vector<ComparisonRow> baseline_comparisons(const BaselineInputs& inputs,
                                                std::size_t exact_cutoff = 400);

}  // namespace audit
