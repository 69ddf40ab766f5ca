#include "audit/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace audit {

using nlohmann::json;

// --- distribution summaries ---------------------------------------------

static double quantile_sorted(const std::vector<double>& s, double q) {
  if (s.empty()) return 0.0;
  if (s.size() == 1) return s[0];
  double pos = q * static_cast<double>(s.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, s.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return s[lo] * (1.0 - frac) + s[hi] * frac;
}

DistributionSummary DistributionSummary::from_points(std::vector<double> points) {
  DistributionSummary d;
  std::sort(points.begin(), points.end());
  d.points = std::move(points);
  if (d.points.empty()) return d;

  d.median = quantile_sorted(d.points, 0.5);
  d.q1 = quantile_sorted(d.points, 0.25);
  d.q3 = quantile_sorted(d.points, 0.75);
  double iqr = d.q3 - d.q1;
  double lo_fence = d.q1 - 1.5 * iqr;
  double hi_fence = d.q3 + 1.5 * iqr;
  d.whisker_low = d.points.front();
  d.whisker_high = d.points.back();
  for (double p : d.points) {
    if (p >= lo_fence) {
      d.whisker_low = p;
      break;
    }
  }
  for (auto it = d.points.rbegin(); it != d.points.rend(); ++it) {
    if (*it <= hi_fence) {
      d.whisker_high = *it;
      break;
    }
  }

  // Gaussian KDE, Silverman's rule
  const std::size_t n = d.points.size();
  double mean = 0;
  for (double p : d.points) mean += p;
  mean /= static_cast<double>(n);
  double var = 0;
  for (double p : d.points) var += (p - mean) * (p - mean);
  double sd = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;
  double spread = std::min(sd, iqr / 1.34);
  if (spread <= 0.0) spread = sd > 0.0 ? sd : 1.0;
  double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  if (h <= 0.0) h = 1.0;

  const int grid = 256;
  double lo = d.points.front() - 4.0 * h;
  double hi = d.points.back() + 4.0 * h;
  const double inv = 1.0 / (static_cast<double>(n) * h * std::sqrt(2.0 * M_PI));
  for (int i = 0; i < grid; ++i) {
    double x = lo + (hi - lo) * static_cast<double>(i) / (grid - 1);
    double dens = 0;
    for (double p : d.points) {
      double z = (x - p) / h;
      dens += std::exp(-0.5 * z * z);
    }
    d.kde_x.push_back(x);
    d.kde_density.push_back(dens * inv);
  }
  return d;
}

double DistributionSummary::kde_integral() const {
  double total = 0;
  for (std::size_t i = 1; i < kde_x.size(); ++i) {
    total += 0.5 * (kde_density[i - 1] + kde_density[i]) * (kde_x[i] - kde_x[i - 1]);
  }
  return total;
}

// --- report assembly ----------------------------------------------------

static std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

static json summary_to_json(const DistributionSummary& d) {
  json j;
  j["n"] = d.points.size();
  j["median"] = fmt(d.median);
  j["q1"] = fmt(d.q1);
  j["q3"] = fmt(d.q3);
  j["whisker_low"] = fmt(d.whisker_low);
  j["whisker_high"] = fmt(d.whisker_high);
  json pts = json::array();
  for (double p : d.points) pts.push_back(fmt(p));
  j["points"] = std::move(pts);
  return j;
}

std::string Report::to_canonical_json() const {
  // nlohmann object keys are kept sorted; doubles go through fixed
  // formatting so the serialization is byte-stable
  json j;
  j["meta"] = {{"corpus_hash", meta.corpus_hash},
               {"stopword_hash", meta.stopword_hash},
               {"config_hash", meta.config_hash},
               {"idf_mode", meta.idf_mode},
               {"seed", meta.seed},
               {"idf_negative_weights_seen", meta.idf_negative_weights_seen}};
  j["label_counts"] = label_counts;

  auto rates_to_json = [](const std::vector<RateCell>& cells) {
    json arr = json::array();
    for (const auto& c : cells) {
      arr.push_back({{"key", c.key},
                     {"n", c.n},
                     {"type1", c.type1},
                     {"type2", c.type2},
                     {"non_empty", c.non_empty},
                     {"type1_rate", fmt(c.type1_rate)},
                     {"type2_rate", fmt(c.type2_rate)}});
    }
    return arr;
  };
  j["rates_by_frame"] = rates_to_json(rates_by_frame);
  j["rates_by_group"] = rates_to_json(rates_by_group);

  json rel = json::object();
  for (const auto& [cond, d] : relevance_distributions) rel[cond] = summary_to_json(d);
  j["relevance_distributions"] = std::move(rel);
  json sim = json::object();
  for (const auto& [grp, d] : similarity_distributions) sim[grp] = summary_to_json(d);
  j["similarity_distributions"] = std::move(sim);

  auto missing_to_json = [](const std::vector<MissingWordRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows) arr.push_back({{"word", r.word}, {"count", r.topic_count}});
    return arr;
  };
  j["missing_thematic"] = missing_to_json(missing_thematic);
  j["missing_episodic"] = missing_to_json(missing_episodic);

  auto asym_to_json = [](const std::vector<AsymmetryRecord>& rows) {
    json arr = json::array();
    for (const auto& r : rows) {
      json row = {{"word", r.word},
                  {"less_frequent_in_actual", r.less_frequent_in_actual},
                  {"less_frequent_in_expected", r.less_frequent_in_expected}};
      if (r.ratio_expected_over_actual) {
        row["ratio_expected_over_actual"] = fmt(*r.ratio_expected_over_actual);
      }
      if (r.ratio_actual_over_expected) {
        row["ratio_actual_over_expected"] = fmt(*r.ratio_actual_over_expected);
      }
      arr.push_back(std::move(row));
    }
    return arr;
  };
  j["asymmetry_expected_over_actual"] = asym_to_json(asymmetry_expected_over_actual);
  j["asymmetry_actual_over_expected"] = asym_to_json(asymmetry_actual_over_expected);

  json tests_json = json::array();
  for (const auto& row : tests) {
    tests_json.push_back({{"comparison", row.comparison},
                          {"n1", row.result.n1},
                          {"n2", row.result.n2},
                          {"U", fmt(row.result.u)},
                          {"p", fmt(row.result.p_two_sided)},
                          {"method", to_string(row.result.method)},
                          {"mark", to_string(row.result.mark)}});
  }
  j["tests"] = std::move(tests_json);
  return j.dump(2);
}

Report build_report(const ReportInputs& inputs) {
  if (inputs.corpus == nullptr) throw ReportError("report: corpus missing");
  if (inputs.labels.empty()) throw ReportError("report: no labels (run analyze first)");
  if (inputs.labels.size() != inputs.corpus->size()) {
    throw ReportError("report: label count does not match corpus size");
  }

  Report report;
  report.meta = inputs.meta;

  std::map<std::string, const LabeledTopic*> by_topic;
  for (const auto& l : inputs.labels) {
    if (!by_topic.emplace(l.topic_id, &l).second) {
      throw ReportError("report: topic '" + l.topic_id + "' labeled twice");
    }
  }
  for (const auto& kind : {LabelKind::type1_api, LabelKind::type1_empty, LabelKind::type2,
                           LabelKind::uncensored, LabelKind::undefined}) {
    report.label_counts[to_string(kind)] = 0;
  }
  for (const auto& topic : inputs.corpus->topics()) {
    auto it = by_topic.find(topic.id);
    if (it == by_topic.end()) {
      throw ReportError("report: topic '" + topic.id + "' has no label");
    }
    report.label_counts[to_string(it->second->label.kind)]++;
  }
  long total = 0;
  for (const auto& [_, n] : report.label_counts) total += n;
  if (total != static_cast<long>(inputs.corpus->size())) {
    throw ReportError("report: label categories do not partition the corpus");
  }

  report.rates_by_frame = censorship_rates(*inputs.corpus, inputs.labels, RateGrouping::frame);
  report.rates_by_group = censorship_rates(*inputs.corpus, inputs.labels, RateGrouping::group);

  // relevance distributions per (sensitivity, frame) condition
  std::map<std::string, std::vector<double>> rel_points;
  for (const auto& topic : inputs.corpus->topics()) {
    const LabeledTopic& lt = *by_topic.at(topic.id);
    if (!lt.relevance || !lt.relevance->score) continue;
    std::string cond = to_string(topic.sensitivity) + "/" + to_string(topic.frame);
    rel_points[cond].push_back(*lt.relevance->score);
  }
  for (auto& [cond, pts] : rel_points) {
    report.relevance_distributions[cond] = DistributionSummary::from_points(std::move(pts));
  }

  for (const auto& [group, summary] : inputs.similarity.per_group) {
    std::string key = group == kBaselineGroup ? std::string("baseline")
                                              : "group" + std::to_string(group);
    report.similarity_distributions[key] =
        DistributionSummary::from_points(summary.scores);
  }

  report.missing_thematic = inputs.missing_thematic;
  report.missing_episodic = inputs.missing_episodic;
  report.asymmetry_expected_over_actual =
      filter_asymmetry(inputs.asymmetry_records, AsymmetryDirection::expected_over_actual);
  report.asymmetry_actual_over_expected =
      filter_asymmetry(inputs.asymmetry_records, AsymmetryDirection::actual_over_expected);
  report.tests = inputs.tests;
  return report;
}

static void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ReportError("cannot write " + path.string());
  out << content;
}

void save_report(const Report& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_file(out_dir / "report.json", report.to_canonical_json() + "\n");

  auto rates_csv = [](const std::vector<RateCell>& cells) {
    std::ostringstream os;
    os << "key,n,type1,type2,non_empty,type1_rate,type2_rate\n";
    for (const auto& c : cells) {
      os << c.key << ',' << c.n << ',' << c.type1 << ',' << c.type2 << ','
         << c.non_empty << ',' << fmt(c.type1_rate) << ',' << fmt(c.type2_rate) << '\n';
    }
    return os.str();
  };
  write_file(out_dir / "rates_by_frame.csv", rates_csv(report.rates_by_frame));
  write_file(out_dir / "rates_by_group.csv", rates_csv(report.rates_by_group));

  auto missing_csv = [](const std::vector<MissingWordRow>& rows) {
    std::ostringstream os;
    os << "word,topic_count\n";
    for (const auto& r : rows) os << r.word << ',' << r.topic_count << '\n';
    return os.str();
  };
  write_file(out_dir / "missing_thematic.csv", missing_csv(report.missing_thematic));
  write_file(out_dir / "missing_episodic.csv", missing_csv(report.missing_episodic));

  auto asym_csv = [](const std::vector<AsymmetryRecord>& rows) {
    std::ostringstream os;
    os << "word,less_frequent_in_actual,less_frequent_in_expected,"
          "ratio_expected_over_actual,ratio_actual_over_expected\n";
    for (const auto& r : rows) {
      os << r.word << ',' << r.less_frequent_in_actual << ','
         << r.less_frequent_in_expected << ','
         << (r.ratio_expected_over_actual ? fmt(*r.ratio_expected_over_actual) : "")
         << ','
         << (r.ratio_actual_over_expected ? fmt(*r.ratio_actual_over_expected) : "")
         << '\n';
    }
    return os.str();
  };
  write_file(out_dir / "asymmetry_expected_over_actual.csv",
             asym_csv(report.asymmetry_expected_over_actual));
  write_file(out_dir / "asymmetry_actual_over_expected.csv",
             asym_csv(report.asymmetry_actual_over_expected));

  std::ostringstream tests_os;
  tests_os << "comparison,n1,n2,U,p,method,mark\n";
  for (const auto& row : report.tests) {
    tests_os << row.comparison << ',' << row.result.n1 << ',' << row.result.n2 << ','
             << fmt(row.result.u) << ',' << fmt(row.result.p_two_sided) << ','
             << to_string(row.result.method) << ',' << to_string(row.result.mark) << '\n';
  }
  write_file(out_dir / "tests.csv", tests_os.str());
}

// --- SVG plotting -------------------------------------------------------

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string f3(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

struct SvgDoc {
  std::ostringstream body;
  double width, height;
  SvgDoc(double w, double h) : width(w), height(h) {
    body << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f3(w)
         << "\" height=\"" << f3(h) << "\" viewBox=\"0 0 " << f3(w) << " " << f3(h)
         << "\">\n";
  }
  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& stroke = "none") {
    body << "<rect x=\"" << f3(x) << "\" y=\"" << f3(y) << "\" width=\"" << f3(w)
         << "\" height=\"" << f3(h) << "\" fill=\"" << fill << "\" stroke=\"" << stroke
         << "\"/>\n";
  }
  void line(double x1, double y1, double x2, double y2, const std::string& stroke) {
    body << "<line x1=\"" << f3(x1) << "\" y1=\"" << f3(y1) << "\" x2=\"" << f3(x2)
         << "\" y2=\"" << f3(y2) << "\" stroke=\"" << stroke << "\"/>\n";
  }
  void circle(double cx, double cy, double r, const std::string& fill) {
    body << "<circle cx=\"" << f3(cx) << "\" cy=\"" << f3(cy) << "\" r=\"" << f3(r)
         << "\" fill=\"" << fill << "\"/>\n";
  }
  void path(const std::string& d, const std::string& fill, const std::string& stroke) {
    body << "<path d=\"" << d << "\" fill=\"" << fill << "\" stroke=\"" << stroke
         << "\"/>\n";
  }
  void text(double x, double y, const std::string& s, int size = 12,
            const std::string& anchor = "start") {
    body << "<text x=\"" << f3(x) << "\" y=\"" << f3(y) << "\" font-size=\"" << size
         << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">"
         << xml_escape(s) << "</text>\n";
  }
  void save(const std::filesystem::path& path) {
    body << "</svg>\n";
    write_file(path, body.str());
  }
};

}  // namespace

void plot_raincloud(const std::map<std::string, DistributionSummary>& by_condition,
                    const std::filesystem::path& out_path, std::uint64_t seed,
                    const std::string& title) {
  const double row_h = 110, margin_l = 170, margin_r = 30, margin_t = 40, margin_b = 30;
  const double plot_w = 640;
  double height = margin_t + row_h * static_cast<double>(by_condition.size()) + margin_b;
  SvgDoc svg(margin_l + plot_w + margin_r, height);
  svg.text(margin_l, 24, title, 14);

  double lo = 0, hi = 1;
  bool first = true;
  for (const auto& [_, d] : by_condition) {
    if (d.points.empty()) continue;
    if (first) {
      lo = d.points.front();
      hi = d.points.back();
      first = false;
    } else {
      lo = std::min(lo, d.points.front());
      hi = std::max(hi, d.points.back());
    }
  }
  if (hi <= lo) hi = lo + 1;
  auto x_of = [&](double v) { return margin_l + (v - lo) / (hi - lo) * plot_w; };

  double y = margin_t;
  std::mt19937_64 rng(seed);
  for (const auto& [condition, d] : by_condition) {
    double base = y + row_h * 0.55;  // cloud sits above, strip below
    svg.text(margin_l - 10, base, condition, 12, "end");
    if (!d.points.empty()) {
      // cloud: KDE polygon above the baseline
      double max_dens = 0;
      for (double dens : d.kde_density) max_dens = std::max(max_dens, dens);
      if (max_dens > 0) {
        std::string path = "M" + f3(x_of(d.kde_x.front())) + "," + f3(base);
        for (std::size_t i = 0; i < d.kde_x.size(); ++i) {
          double yy = base - d.kde_density[i] / max_dens * row_h * 0.4;
          path += " L" + f3(x_of(d.kde_x[i])) + "," + f3(yy);
        }
        path += " L" + f3(x_of(d.kde_x.back())) + "," + f3(base) + " Z";
        svg.path(path, "#9ecae1", "#3182bd");
      }
      // box
      double by0 = base + 6, bh = 14;
      svg.line(x_of(d.whisker_low), by0 + bh / 2, x_of(d.q1), by0 + bh / 2, "#636363");
      svg.line(x_of(d.q3), by0 + bh / 2, x_of(d.whisker_high), by0 + bh / 2, "#636363");
      svg.rect(x_of(d.q1), by0, std::max(0.5, x_of(d.q3) - x_of(d.q1)), bh, "#deebf7",
               "#3182bd");
      svg.line(x_of(d.median), by0, x_of(d.median), by0 + bh, "#08519c");
      // strip of jittered points
      std::uniform_real_distribution<double> jitter(0.0, 12.0);
      for (double p : d.points) {
        svg.circle(x_of(p), by0 + bh + 6 + jitter(rng), 1.8, "#3182bd");
      }
    }
    y += row_h;
  }
  // axis
  svg.line(margin_l, height - margin_b, margin_l + plot_w, height - margin_b, "#000000");
  svg.text(margin_l, height - margin_b + 16, f3(lo), 10);
  svg.text(margin_l + plot_w, height - margin_b + 16, f3(hi), 10, "end");
  svg.save(out_path);
}

void plot_bars(const std::vector<RateCell>& rates, const std::filesystem::path& out_path,
               const std::string& title) {
  if (rates.empty()) throw ReportError("plot_bars: empty rate table");
  const double margin_l = 60, margin_t = 50, margin_b = 70, bar_w = 22, gap = 26;
  const double plot_h = 240;
  double width = margin_l + static_cast<double>(rates.size()) * (2 * bar_w + gap) + 40;
  SvgDoc svg(width, margin_t + plot_h + margin_b);
  svg.text(margin_l, 24, title, 14);

  double max_rate = 0;
  for (const auto& c : rates) max_rate = std::max({max_rate, c.type1_rate, c.type2_rate});
  if (max_rate <= 0) max_rate = 1.0;

  double x = margin_l;
  double base = margin_t + plot_h;
  for (const auto& c : rates) {
    double h1 = c.type1_rate / max_rate * plot_h;
    double h2 = c.type2_rate / max_rate * plot_h;
    svg.rect(x, base - h1, bar_w, h1, "#de2d26");
    svg.rect(x + bar_w + 2, base - h2, bar_w, h2, "#3182bd");
    svg.text(x + bar_w, base + 14, c.key, 9, "middle");
    x += 2 * bar_w + gap;
  }
  svg.line(margin_l - 6, base, x, base, "#000000");
  svg.text(margin_l - 8, margin_t + 4, f3(max_rate), 10, "end");
  svg.text(margin_l, base + 34, "type1 (red) / type2 (blue), rate scale 0.." + f3(max_rate), 10);
  svg.save(out_path);
}

void plot_topic_hits(std::vector<TopicHitRow> rows, std::size_t top_k,
                     const std::filesystem::path& out_path, const std::string& title) {
  if (rows.empty()) throw ReportError("plot_topic_hits: empty input");
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.order_key != b.order_key) return a.order_key > b.order_key;
    return a.topic_id < b.topic_id;
  });
  if (top_k > 0 && rows.size() > top_k) rows.resize(top_k);  // clamp when top_k > size

  const double margin_l = 150, margin_t = 40, row_h = 16, plot_w = 500;
  double height = margin_t + row_h * static_cast<double>(rows.size()) + 30;
  SvgDoc svg(margin_l + plot_w + 40, height);
  svg.text(margin_l, 24, title, 14);

  long max_hits = 1;
  for (const auto& r : rows) max_hits = std::max({max_hits, r.cot_hits, r.answer_hits});
  double y = margin_t;
  for (const auto& r : rows) {
    double w_cot = static_cast<double>(r.cot_hits) / max_hits * plot_w;
    double w_ans = static_cast<double>(r.answer_hits) / max_hits * plot_w;
    svg.text(margin_l - 8, y + 11, r.topic_id, 9, "end");
    svg.rect(margin_l, y + 2, w_cot, 5, "#3182bd");
    svg.rect(margin_l, y + 8, w_ans, 5, "#de2d26");
    y += row_h;
  }
  svg.text(margin_l, y + 18, "cot hits (blue) vs answer hits (red)", 10);
  svg.save(out_path);
}

}  // namespace audit
