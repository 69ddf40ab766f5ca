// Acceptance harness: one self-contained check per criterion, one verdict
// line each. Exit status is the number of failed criteria.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "audit/pipeline.hpp"
#include "test_util.hpp"

using namespace audit;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

void require(Outcome& o, bool cond, const std::string& on_fail) {
  if (!cond && o.pass) {
    o.pass = false;
    o.detail = on_fail;
  }
}

std::filesystem::path scratch(const std::string& name) {
  return testutil::temp_dir("acceptance_" + name);
}

// ---- 1: end-to-end calibration against the planted mock -----------------

Outcome criterion_calibration() {
  Outcome o;
  auto start = std::chrono::steady_clock::now();
  auto result = calibrate(500, PlantRates{0.02, 0.02, 0.10}, 7, scratch("calibrate"));
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  require(o, result.total == 500, "expected 500 labeled topics");
  std::ostringstream mism;
  for (const auto& id : result.mismatched_topic_ids) mism << ' ' << id;
  require(o, result.agreed == result.total,
          "label/ground-truth mismatches:" + mism.str());
  require(o, secs < 60.0, "took " + std::to_string(secs) + "s, budget 60s");
  if (o.pass) {
    std::ostringstream d;
    d << result.agreed << "/" << result.total << " labels agree in "
      << std::fixed << std::setprecision(2) << secs << "s";
    o.detail = d.str();
  }
  return o;
}

// ---- 2: relevance-score oracle ------------------------------------------

Outcome criterion_relevance_oracle() {
  Outcome o;
  static const std::vector<std::string> vocab = {"ant", "bee", "cat", "dog",
                                                 "elk", "fox", "gnu"};
  auto tok = Tokenizer::whitespace();
  StopwordList stops({"gnu"});
  std::mt19937_64 rng(53);
  auto draw = [&](std::size_t lo, std::size_t hi) {
    std::vector<std::string> out;
    std::size_t len = lo + rng() % (hi - lo + 1);
    for (std::size_t i = 0; i < len; ++i) out.push_back(vocab[rng() % vocab.size()]);
    return out;
  };
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& t : v) s += (s.empty() ? "" : " ") + t;
    return s;
  };

  for (int trial = 0; trial < 1000 && o.pass; ++trial) {
    auto topic_tokens = draw(1, 4);
    auto cot_tokens = draw(0, 12);
    auto ans_tokens = draw(0, 12);

    // independent counter, straight from the definition
    std::set<std::string> distinct;
    for (const auto& t : topic_tokens) {
      if (t != "gnu") distinct.insert(t);
    }
    std::set<std::string> cot_set(cot_tokens.begin(), cot_tokens.end());
    std::set<std::string> ans_set(ans_tokens.begin(), ans_tokens.end());
    long want_cot = 0, want_ans = 0;
    for (const auto& t : distinct) {
      want_cot += cot_set.count(t) ? 1 : 0;
      want_ans += ans_set.count(t) ? 1 : 0;
    }

    Topic topic{"t", join(topic_tokens), Frame::thematic, 1, Sensitivity::sensitive, {}};
    auto rec = relevance(topic, join(cot_tokens), join(ans_tokens), tok, stops);
    require(o, rec.cot_hits == want_cot && rec.answer_hits == want_ans,
            "hit counts diverge from the membership counter at trial " +
                std::to_string(trial));
    bool want_score = want_cot > 0;
    require(o, rec.score.has_value() == want_score, "score definedness mismatch");
    if (want_score) {
      double want = 100.0 * static_cast<double>(want_ans) / static_cast<double>(want_cot);
      require(o, std::fabs(*rec.score - want) < 1e-12, "score value mismatch");
    }

    Exchange ex;
    ex.topic_id = "t";
    ex.prompt = "p";
    ex.cot = join(cot_tokens);
    ex.answer = join(ans_tokens);
    if (!classify_hard(ex)) {
      auto label = classify(ex, rec);
      bool want_type2 = want_cot >= 1 && want_ans == 0;
      require(o, (label.kind == LabelKind::type2) == want_type2,
              "type-2 flag diverges at trial " + std::to_string(trial));
    }
  }
  if (o.pass) o.detail = "1000 randomized constructions match exactly";
  return o;
}

// ---- 3: published rate arithmetic ---------------------------------------

Outcome criterion_rates() {
  Outcome o;
  auto tok = Tokenizer::whitespace();
  StopwordList stops;

  {  // 12 hard refusals among 646 sensitive topics
    std::vector<Topic> topics;
    std::vector<Exchange> exchanges;
    for (int i = 0; i < 646; ++i) {
      std::string id = "s" + std::to_string(i);
      std::string word = "tok" + std::to_string(i);
      topics.push_back({id, word, Frame::thematic, 1, Sensitivity::sensitive, {}});
      Exchange e;
      e.topic_id = id;
      e.prompt = "p";
      if (i < 12) {
        e.api_error = ApiError{400, "invalid_request_error", "Content Exists Risk"};
      } else {
        e.cot = word;
        e.answer = word;
      }
      exchanges.push_back(e);
    }
    Corpus corpus(std::move(topics));
    auto rates = censorship_rates(corpus, label_run(corpus, exchanges, tok, stops),
                                  RateGrouping::frame);
    double pct = rates.at(0).type1_rate * 100.0;
    require(o, std::fabs(pct - 1.86) < 0.005,
            "type-1 rate " + std::to_string(pct) + "% != 1.86%");
  }
  {  // 72 divergent answers among 646 non-empty replies
    std::vector<Topic> topics;
    std::vector<Exchange> exchanges;
    for (int i = 0; i < 646; ++i) {
      std::string id = "s" + std::to_string(i);
      std::string word = "tok" + std::to_string(i);
      topics.push_back({id, word, Frame::thematic, 1, Sensitivity::sensitive, {}});
      Exchange e;
      e.topic_id = id;
      e.prompt = "p";
      e.cot = word;
      e.answer = i < 72 ? "elsewhere" : word;
      exchanges.push_back(e);
    }
    Corpus corpus(std::move(topics));
    auto rates = censorship_rates(corpus, label_run(corpus, exchanges, tok, stops),
                                  RateGrouping::frame);
    require(o, rates.at(0).non_empty == 646, "non-empty denominator is not 646");
    double pct = rates.at(0).type2_rate * 100.0;
    require(o, std::fabs(pct - 11.1) <= 0.05,
            "type-2 rate " + std::to_string(pct) + "% outside 11.1 +/- 0.05");
  }
  if (o.pass) o.detail = "12/646 -> 1.86%, 72/646 non-empty -> 11.1%";
  return o;
}

// ---- 4: tf-idf cosine oracle --------------------------------------------

namespace tfidf_oracle {

std::map<std::string, double> weights(const std::vector<std::string>& doc,
                                      const std::vector<std::string>& other) {
  std::map<std::string, long> f, f_other;
  for (const auto& t : doc) f[t]++;
  for (const auto& t : other) f_other[t]++;
  std::map<std::string, double> w;
  auto add = [&](const std::string& t) {
    double df = (f.count(t) ? 1 : 0) + (f_other.count(t) ? 1 : 0);
    double idf = std::log(3.0 / (1.0 + df)) + 1.0;
    double tf = f.count(t) ? static_cast<double>(f.at(t)) / doc.size() : 0.0;
    w[t] = tf * idf;
  };
  for (const auto& [t, _] : f) add(t);
  for (const auto& [t, _] : f_other) add(t);
  return w;
}

double cosine(const std::map<std::string, double>& a,
              const std::map<std::string, double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (const auto& [t, w] : a) {
    na += w * w;
    if (b.count(t)) dot += w * b.at(t);
  }
  for (const auto& [t, w] : b) nb += w * w;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace tfidf_oracle

Outcome criterion_tfidf() {
  Outcome o;
  static const std::vector<std::string> vocab = {"a", "b", "c", "d", "e", "f"};
  std::mt19937_64 rng(59);
  auto draw = [&]() {
    std::vector<std::string> doc;
    std::size_t len = 1 + rng() % 12;
    for (std::size_t i = 0; i < len; ++i) doc.push_back(vocab[rng() % vocab.size()]);
    return doc;
  };
  double worst = 0;
  for (int trial = 0; trial < 500; ++trial) {
    DocumentPair pair{draw(), draw()};
    auto r = tfidf_pair(pair, IdfMode::smoothed_default);
    auto got = cosine(r.expected, r.actual);
    if (!got) {
      require(o, false, "cosine undefined on non-empty docs");
      break;
    }
    auto we = tfidf_oracle::weights(pair.expected_tokens, pair.actual_tokens);
    auto wa = tfidf_oracle::weights(pair.actual_tokens, pair.expected_tokens);
    worst = std::max(worst, std::fabs(*got - tfidf_oracle::cosine(we, wa)));
  }
  require(o, worst <= 1e-9,
          "worst cosine deviation " + std::to_string(worst) + " > 1e-9");

  {
    DocumentPair same{{"x", "y", "x"}, {"x", "y", "x"}};
    auto r = tfidf_pair(same, IdfMode::smoothed_default);
    auto c = cosine(r.expected, r.actual);
    require(o, c && std::fabs(*c - 1.0) <= 1e-9, "identical docs not at cosine 1");
  }
  {
    DocumentPair disjoint{{"x", "y"}, {"p", "q"}};
    auto r = tfidf_pair(disjoint, IdfMode::smoothed_default);
    auto c = cosine(r.expected, r.actual);
    require(o, c && *c == 0.0, "disjoint docs not at cosine 0 exactly");
  }
  {
    DocumentPair shared{{"x"}, {"x"}};
    auto r = tfidf_pair(shared, IdfMode::paper_literal);
    require(o, std::fabs(r.expected.at("x") - std::log(2.0 / 3.0)) <= 1e-12,
            "literal idf for df=2 is not log(2/3)");
    require(o, r.has_negative_weight, "negative literal weight not flagged");
  }
  if (o.pass) o.detail = "500 random pairs within 1e-9; edge cases exact";
  return o;
}

// ---- 5: asymmetry ratios and threshold ----------------------------------

Outcome criterion_asymmetry() {
  Outcome o;
  // per-topic (expected, actual) counts encoding the two published rows:
  //   官方: 18 topics expected-heavier, 3 actual-heavier
  //   创新: 17 topics expected-heavier, 49 actual-heavier
  std::vector<std::pair<FrequencyTable, FrequencyTable>> per_topic;
  for (int i = 0; i < 66; ++i) {
    FrequencyTable fe, fa;
    if (i < 18) {
      fe["官方"] = 3;
      fa["官方"] = 1;
    } else if (i < 21) {
      fe["官方"] = 1;
      fa["官方"] = 2;
    }
    if (i < 17) {
      fe["创新"] = 4;
      fa["创新"] = 2;
    } else {
      fe["创新"] = 1;
      fa["创新"] = 5;
    }
    per_topic.emplace_back(std::move(fe), std::move(fa));
  }
  auto records = asymmetry(per_topic);

  const AsymmetryRecord* official = nullptr;
  const AsymmetryRecord* innovation = nullptr;
  for (const auto& r : records) {
    if (r.word == "官方") official = &r;
    if (r.word == "创新") innovation = &r;
  }
  require(o, official && innovation, "fixture words missing from the table");
  if (!o.pass) return o;
  require(o, official->less_frequent_in_actual == 18 &&
                 official->less_frequent_in_expected == 3,
          "官方 counts wrong");
  require(o, innovation->less_frequent_in_actual == 17 &&
                 innovation->less_frequent_in_expected == 49,
          "创新 counts wrong");
  require(o, official->ratio_expected_over_actual &&
                 std::fabs(*official->ratio_expected_over_actual - 0.167) <= 0.0005,
          "官方 ratio not 0.167");
  require(o, innovation->ratio_actual_over_expected &&
                 std::fabs(*innovation->ratio_actual_over_expected - 0.347) <= 0.0005,
          "创新 ratio not 0.347");

  auto suppressed = filter_asymmetry(records, AsymmetryDirection::expected_over_actual);
  auto amplified = filter_asymmetry(records, AsymmetryDirection::actual_over_expected);
  require(o, suppressed.size() == 1 && suppressed[0].word == "官方",
          "0.5 threshold selects the wrong suppressed rows");
  require(o, amplified.size() == 1 && amplified[0].word == "创新",
          "0.5 threshold selects the wrong amplified rows");
  if (o.pass) o.detail = "ratios 0.167 / 0.347; threshold picks exactly those rows";
  return o;
}

// ---- 6: Mann-Whitney ------------------------------------------------------

Outcome criterion_mwu() {
  Outcome o;
  auto hand = mann_whitney({1, 2, 3}, {4, 5, 6});
  require(o, hand.method == MwuMethod::exact_enumeration, "hand case not exact");
  require(o, std::fabs(hand.p_two_sided - 0.1) <= 1e-12, "hand-derived p != 0.1");

  std::mt19937_64 rng(31);
  double worst = 0;
  bool identity_ok = true;
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n1 = 1 + rng() % 8, n2 = 1 + rng() % 8;
    std::vector<double> a, b;
    for (std::size_t i = 0; i < n1; ++i) a.push_back(static_cast<double>(rng() % 4));
    for (std::size_t i = 0; i < n2; ++i) b.push_back(static_cast<double>(rng() % 4));
    auto exact = mann_whitney(a, b, 400);
    auto approx = mann_whitney(a, b, 0);
    worst = std::max(worst, std::fabs(exact.p_two_sided - approx.p_two_sided));
    auto swapped = mann_whitney(b, a, 400);
    if (std::fabs(exact.u + swapped.u - static_cast<double>(n1 * n2)) > 1e-9) {
      identity_ok = false;
    }
  }
  require(o, identity_ok, "U_a + U_b != n1*n2 on some sample");
  require(o, worst <= 0.015,
          "worst |exact - approx| = " + std::to_string(worst) +
              " > 0.015 over 200 tie-bearing samples (no normal-family "
              "approximation can track the discrete tails at these sizes)");
  if (o.pass) o.detail = "hand p = 0.1; approx within 0.015; rank-sum identity holds";
  return o;
}

// ---- 7: resumability against the mock request log -----------------------

Outcome criterion_resume() {
  Outcome o;
  const std::size_t n = 60, k = 23;
  Corpus corpus = synthetic_corpus(n, 19);
  auto templates = default_templates();
  BehaviorScript script = generate_script(corpus, PlantRates{0.05, 0.05, 0.2}, 19);
  MockServer server(script, templates, "127.0.0.1", 0);
  EndpointConfig cfg;
  cfg.base_url = server.base_url();
  cfg.model_name = "mock";
  cfg.requests_per_second = 10000;
  cfg.backoff_base = std::chrono::milliseconds(1);
  cfg.jitter_seed = 4;

  auto dir = scratch("resume");
  {
    // a run killed after k topics: only the first k reach the ledger
    RunLedger ledger(dir / "run.jsonl");
    std::vector<std::pair<std::string, std::string>> first_k;
    for (std::size_t i = 0; i < k; ++i) {
      first_k.emplace_back(corpus.topics()[i].id,
                           render_prompt(corpus.topics()[i], templates));
    }
    run_batch(first_k, cfg, ledger);
  }
  long before = server.total_requests();
  require(o, before == static_cast<long>(k), "first phase issued a wrong count");

  {
    RunLedger ledger(dir / "run.jsonl");
    auto progress = run_audit(corpus, templates, cfg, ledger);
    require(o, progress.skipped == k, "completed topics were not skipped");
    require(o, progress.completed == n - k, "re-run completed a wrong count");
  }
  long delta = server.total_requests() - before;
  require(o, delta == static_cast<long>(n - k),
          "mock log saw " + std::to_string(delta) + " new requests, want " +
              std::to_string(n - k));
  for (const auto& [text, count] : server.request_log()) {
    require(o, count == 1, "topic '" + text + "' was requested " +
                               std::to_string(count) + " times");
  }
  if (o.pass) {
    o.detail = "kill after " + std::to_string(k) + "/" + std::to_string(n) +
               ": exactly " + std::to_string(n - k) + " new requests";
  }
  return o;
}

// ---- 8: report integrity --------------------------------------------------

Outcome criterion_report() {
  Outcome o;
  Corpus corpus = synthetic_corpus(50, 23);
  auto templates = default_templates();
  BehaviorScript script = generate_script(corpus, PlantRates{0.06, 0.04, 0.2}, 23);
  MockServer server(script, templates, "127.0.0.1", 0);
  EndpointConfig cfg;
  cfg.base_url = server.base_url();
  cfg.model_name = "mock";
  cfg.requests_per_second = 10000;
  cfg.backoff_base = std::chrono::milliseconds(1);
  cfg.jitter_seed = 6;

  auto dir = scratch("report");
  RunLedger ledger(dir / "run.jsonl");
  run_audit(corpus, templates, cfg, ledger);
  RunLedger expected(dir / "expected.jsonl");
  auto pairs = reconstruct(ledger, cfg, expected);
  server.stop();

  auto tokenizer = Tokenizer::whitespace();
  StopwordList stopwords;
  auto analysis = analyze_run(corpus, ledger.records(), pairs, tokenizer, stopwords,
                              IdfMode::smoothed_default);
  auto tests = baseline_comparisons(collect_baseline_inputs(corpus, analysis));
  ReportMeta meta;
  meta.seed = 23;
  meta.idf_mode = "smoothed_default";
  auto report = assemble_report(corpus, analysis, tests, meta);

  long total = 0;
  for (const auto& [_, count] : report.label_counts) total += count;
  require(o, total == static_cast<long>(corpus.size()),
          "label categories do not partition the corpus");

  auto out1 = dir / "out1";
  auto out2 = dir / "out2";
  emit_report_artifacts(report, corpus, analysis, out1, 23);
  emit_report_artifacts(report, corpus, analysis, out2, 23);
  require(o, testutil::read_file(out1 / "report.json") ==
                 testutil::read_file(out2 / "report.json"),
          "report.json is not byte-stable");
  std::size_t svgs = 0;
  for (const auto& entry : std::filesystem::directory_iterator(out1)) {
    if (entry.path().extension() != ".svg") continue;
    ++svgs;
    auto name = entry.path().filename();
    auto body = testutil::read_file(entry.path());
    require(o, testutil::xml_well_formed(body),
            name.string() + " is not well-formed XML");
    require(o, body == testutil::read_file(out2 / name),
            name.string() + " differs between identical runs");
  }
  require(o, svgs >= 1, "no SVG artifacts emitted");
  if (o.pass) {
    o.detail = "partition holds; report.json and " + std::to_string(svgs) +
               " SVGs byte-identical across runs";
  }
  return o;
}

// ---- 9: corpus manifest fixture -------------------------------------------

Outcome criterion_manifest() {
  Outcome o;
  Corpus corpus = load_corpus(testutil::data_dir() / "fixtures" / "table1_corpus.csv",
                              CorpusFormat::csv);
  CorpusManifest manifest = CorpusManifest::from_file(
      testutil::data_dir() / "fixtures" / "table1_manifest.json");

  auto full = validate_corpus(corpus, manifest);
  require(o, full.overall_pass, "bundled fixture fails manifest validation");

  std::vector<Topic> topics = corpus.topics();
  auto it = std::find_if(topics.begin(), topics.end(),
                         [](const Topic& t) { return t.group == 10; });
  require(o, it != topics.end(), "fixture has no group-10 topic");
  if (!o.pass) return o;
  topics.erase(it);
  auto dropped = validate_corpus(Corpus(std::move(topics)), manifest);
  require(o, !dropped.overall_pass, "validation passes with a topic missing");
  require(o, dropped.failing_cells() == 1,
          std::to_string(dropped.failing_cells()) + " failing cells, want exactly 1");
  for (const auto& cell : dropped.cells) {
    if (!cell.pass) {
      require(o, cell.cell.group == 10 && cell.expected == 22 && cell.observed == 21,
              "wrong failing cell");
    }
  }
  if (o.pass) o.detail = "full census passes; one dropped topic fails one cell";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"planted-rate calibration recovers every label", criterion_calibration},
      {"relevance score matches the brute-force counter", criterion_relevance_oracle},
      {"published censorship-rate arithmetic", criterion_rates},
      {"tf-idf cosine matches the brute-force oracle", criterion_tfidf},
      {"asymmetry ratios and 0.5 threshold", criterion_asymmetry},
      {"Mann-Whitney exact and approximate agreement", criterion_mwu},
      {"interrupted runs resume with exactly the missing requests", criterion_resume},
      {"report partition, byte stability, and XML validity", criterion_report},
      {"corpus census manifest validation", criterion_manifest},
  };

  int failures = 0;
  int idx = 0;
  for (const auto& c : criteria) {
    ++idx;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] criterion %d: %s — %s\n", o.pass ? "PASS" : "FAIL", idx,
                c.name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  std::printf("%d/%d acceptance criteria passed\n",
              static_cast<int>(std::size(criteria)) - failures,
              static_cast<int>(std::size(criteria)));
  return failures;
}
