#include "audit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>

namespace audit {

std::string to_string(MwuMethod m) {
  return m == MwuMethod::exact_enumeration ? "exact_enumeration"
                                           : "normal_approx_tie_corrected";
}

std::string to_string(SignificanceMark m) {
  switch (m) {
    case SignificanceMark::none: return "";
    case SignificanceMark::star: return "*";
    case SignificanceMark::double_star: return "**";
  }
  return "";
}

SignificanceMark mark_for(double p) {
  if (p < 0.01) return SignificanceMark::double_star;
  if (p < 0.05) return SignificanceMark::star;
  return SignificanceMark::none;
}

namespace {

// Midranks of the pooled sample, doubled so they stay integral under ties.
std::vector<long> doubled_midranks(std::vector<double> pooled) {
  std::vector<std::size_t> order(pooled.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  std::vector<long> rank2(pooled.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    // positions i..j share midrank (i+1 + j+1)/2; doubled: (i+j+2)
    long r2 = static_cast<long>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
    i = j + 1;
  }
  return rank2;
}

double normal_sf_two_sided(double z_abs) {
  // 2 * P(Z > |z|) = erfc(|z| / sqrt(2))
  return std::erfc(z_abs / std::sqrt(2.0));
}

// Exact two-sided p by counting all C(n, n1) labelings of the pooled values
// with a subset-sum DP over doubled midranks.
double exact_p(const std::vector<long>& rank2, std::size_t n1, double u_obs) {
  const std::size_t n = rank2.size();
  long total2 = 0;
  for (long r : rank2) total2 += r;
  // count[k][s] = #subsets of size k with doubled rank sum s
  std::vector<std::vector<double>> count(n1 + 1,
                                         std::vector<double>(total2 + 1, 0.0));
  count[0][0] = 1.0;
  for (std::size_t idx = 0; idx < n; ++idx) {
    long r = rank2[idx];
    for (std::size_t k = std::min(idx + 1, n1); k >= 1; --k) {
      for (long s = total2; s >= r; --s) {
        if (count[k - 1][s - r] > 0) count[k][s] += count[k - 1][s - r];
      }
    }
  }
  const double mean_u = static_cast<double>(n1) * (n - n1) / 2.0;
  const double dev_obs = std::fabs(u_obs - mean_u);
  double extreme = 0.0, all = 0.0;
  const double offset = static_cast<double>(n1) * (n1 + 1) / 2.0;
  for (long s = 0; s <= total2; ++s) {
    double c = count[n1][s];
    if (c == 0.0) continue;
    all += c;
    double u = s / 2.0 - offset;
    if (std::fabs(u - mean_u) >= dev_obs - 1e-9) extreme += c;
  }
  return extreme / all;
}

double approx_p(const std::vector<long>& rank2, std::size_t n1, double u_obs) {
  const std::size_t n = rank2.size();
  const std::size_t n2 = n - n1;
  const double mean_u = static_cast<double>(n1) * n2 / 2.0;
  // tie correction: group sizes from doubled midranks
  std::vector<long> sorted = rank2;
  std::sort(sorted.begin(), sorted.end());
  double tie_sum = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    double t = static_cast<double>(j - i + 1);
    tie_sum += t * t * t - t;
    i = j + 1;
  }
  const double nn = static_cast<double>(n);
  double var = (static_cast<double>(n1) * n2 / 12.0) *
               ((nn + 1.0) - tie_sum / (nn * (nn - 1.0)));
  if (var <= 0.0) return 1.0;
  // Continuity correction: half the spacing of the achievable U values. With
  // no ties that is the classic 0.5; heavy ties coarsen the lattice (spacing
  // is gcd of midrank differences), and using the true half-step keeps the
  // approximation sane for near-degenerate pools.
  long gap = 0;
  for (long r : rank2) gap = std::gcd(gap, std::labs(r - rank2.front()));
  const double cc = gap > 0 ? static_cast<double>(gap) / 4.0 : 0.5;
  double dev = std::fabs(u_obs - mean_u) - cc;
  if (dev < 0.0) dev = 0.0;
  double p = normal_sf_two_sided(dev / std::sqrt(var));
  return std::min(p, 1.0);
}

}  // namespace

TestResult mann_whitney(const std::vector<double>& sample_a,
                        const std::vector<double>& sample_b,
                        std::size_t exact_cutoff) {
  if (sample_a.empty() || sample_b.empty()) {
    throw std::invalid_argument("mann_whitney requires two non-empty samples");
  }
  const std::size_t n1 = sample_a.size();
  const std::size_t n2 = sample_b.size();
  std::vector<double> pooled = sample_a;
  pooled.insert(pooled.end(), sample_b.begin(), sample_b.end());
  auto rank2 = doubled_midranks(pooled);

  double rank_sum_a2 = 0;
  for (std::size_t i = 0; i < n1; ++i) rank_sum_a2 += static_cast<double>(rank2[i]);
  const double u =
      rank_sum_a2 / 2.0 - static_cast<double>(n1) * (n1 + 1) / 2.0;

  TestResult result;
  result.u = u;
  result.n1 = n1;
  result.n2 = n2;
  if (n1 * n2 <= exact_cutoff) {
    result.method = MwuMethod::exact_enumeration;
    result.p_two_sided = exact_p(rank2, n1, u);
  } else {
    result.method = MwuMethod::normal_approx_tie_corrected;
    result.p_two_sided = approx_p(rank2, n1, u);
  }
  result.mark = mark_for(result.p_two_sided);
  return result;
}

std::vector<ComparisonRow> baseline_comparisons(const BaselineInputs& inputs,
                                                std::size_t exact_cutoff) {
  std::vector<ComparisonRow> rows;
  auto add = [&](const std::string& name, const std::vector<double>& a,
                 const std::vector<double>& b) {
    if (a.empty() || b.empty()) return;
    rows.push_back({name, mann_whitney(a, b, exact_cutoff)});
  };
  add("relevance/thematic_baseline_vs_thematic", inputs.thematic_baseline,
      inputs.thematic_sensitive);
  add("relevance/episodic_baseline_vs_episodic", inputs.episodic_baseline,
      inputs.episodic_sensitive);

  auto baseline_it = inputs.similarity_by_group.find(kBaselineGroup);
  if (baseline_it != inputs.similarity_by_group.end() && !baseline_it->second.empty()) {
    for (const auto& [group, scores] : inputs.similarity_by_group) {
      if (group == kBaselineGroup) continue;
      add("similarity/group" + std::to_string(group) + "_vs_baseline", scores,
          baseline_it->second);
    }
  }
  return rows;
}

}  // namespace audit
