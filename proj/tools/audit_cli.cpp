#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "audit/pipeline.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace audit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitStageFailure = 2;
constexpr int kExitEndpointUnreachable = 3;

int fail(const std::string& stage, const std::string& message, int code) {
  json err = {{"error", {{"stage", stage}, {"message", message}, {"exit_code", code}}}};
  std::cerr << err.dump() << "\n";
  return code;
}

struct Common {
  std::string config_path;
  std::string output_dir_override;
  std::uint64_t seed_override = 0;
  bool has_seed_override = false;

  AuditConfig load() const {
    AuditConfig c = AuditConfig::from_file(config_path);
    if (!output_dir_override.empty()) c.output_dir = output_dir_override;
    if (has_seed_override) c.seed = seed_override;
    return c;
  }
};

std::vector<Exchange> require_ledger(const fs::path& path, const std::string& stage) {
  if (!fs::exists(path)) {
    throw std::runtime_error("missing ledger " + path.string() +
                             " (run the earlier stage first)");
  }
  RunLedger ledger(path);
  return ledger.records();
}

ReportMeta make_meta(const AuditConfig& config, const Corpus& corpus,
                     const StopwordList& stopwords) {
  ReportMeta meta;
  meta.corpus_hash = corpus.content_hash();
  meta.stopword_hash = stopwords.content_hash();
  meta.config_hash = config.config_hash;
  meta.idf_mode = to_string(config.idf_mode);
  meta.seed = config.seed;
  return meta;
}

AnalysisResult run_analysis(const AuditConfig& config, const Corpus& corpus) {
  auto stage_one = require_ledger(config.output_dir / "audit.jsonl", "analyze");
  std::vector<ExpectedPair> pairs;
  if (fs::exists(config.output_dir / "expected.jsonl")) {
    RunLedger one(config.output_dir / "audit.jsonl");
    RunLedger two(config.output_dir / "expected.jsonl");
    pairs = join_pairs(one, two);
  }
  return analyze_run(corpus, stage_one, pairs, make_tokenizer(config),
                     make_stopwords(config), config.idf_mode);
}

void write_labels_csv(const AnalysisResult& analysis, const fs::path& path) {
  std::ostringstream os;
  os << "topic_id,label,cot_hits,answer_hits,topic_token_count,relevance_score\n";
  for (const auto& lt : analysis.labels) {
    os << lt.topic_id << ',' << to_string(lt.label.kind) << ',' << lt.label.cot_hits
       << ',' << lt.label.answer_hits << ',' << lt.label.topic_token_count << ',';
    if (lt.relevance && lt.relevance->score) {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "%.9g", *lt.relevance->score);
      os << buf;
    }
    os << '\n';
  }
  std::ofstream out(path, std::ios::binary);
  out << os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reasoning-model censorship audit toolkit"};
  app.require_subcommand(1);

  Common common;

  auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
    auto* opt = cmd->add_option("--config", common.config_path, "JSON config file");
    if (needs_config) opt->required();
    cmd->add_option("--output-dir", common.output_dir_override,
                    "override the configured output directory");
    cmd->add_option("--seed", common.seed_override, "override the configured seed")
        ->each([&](const std::string&) { common.has_seed_override = true; });
  };

  auto* validate_cmd = app.add_subcommand("validate", "check the corpus against its manifest");
  add_common(validate_cmd);

  auto* audit_cmd = app.add_subcommand("audit", "run stage one against the reasoning endpoint");
  add_common(audit_cmd);

  auto* expected_cmd =
      app.add_subcommand("expected", "replay captured CoTs into the base endpoint");
  add_common(expected_cmd);

  auto* analyze_cmd = app.add_subcommand("analyze", "label exchanges and compute metrics");
  add_common(analyze_cmd);

  auto* stats_cmd = app.add_subcommand("stats", "Mann-Whitney comparisons against baseline");
  add_common(stats_cmd);

  auto* report_cmd = app.add_subcommand("report", "assemble report.json, CSVs, and figures");
  add_common(report_cmd);

  auto* mock_cmd = app.add_subcommand("mock-serve", "serve a scripted mock endpoint");
  std::string script_path;
  std::string mock_host = "127.0.0.1";
  int mock_port = 8089;
  mock_cmd->add_option("--script", script_path, "behavior script JSON")->required();
  mock_cmd->add_option("--host", mock_host, "bind host");
  mock_cmd->add_option("--port", mock_port, "bind port");

  auto* calibrate_cmd =
      app.add_subcommand("calibrate", "planted-rate recovery against a generated mock");
  std::size_t cal_n = 500;
  std::string cal_rates = "0.02,0.02,0.10";
  std::uint64_t cal_seed = 7;
  std::string cal_dir = "calibration";
  calibrate_cmd->add_option("--n", cal_n, "synthetic corpus size");
  calibrate_cmd->add_option("--rates", cal_rates, "type1_api,type1_empty,type2 rates");
  calibrate_cmd->add_option("--seed", cal_seed, "script seed");
  calibrate_cmd->add_option("--work-dir", cal_dir, "scratch directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (validate_cmd->parsed()) {
      AuditConfig config = common.load();
      Corpus corpus = load_corpus(config.corpus_path, config.corpus_format);
      if (!config.manifest_path) {
        return fail("validate", "config has no manifest_path", kExitUsage);
      }
      CorpusManifest manifest = CorpusManifest::from_file(*config.manifest_path);
      ValidationReport report = validate_corpus(corpus, manifest);
      json out = {{"overall_pass", report.overall_pass},
                  {"failing_cells", report.failing_cells()}};
      json cells = json::array();
      for (const auto& c : report.cells) {
        cells.push_back({{"sensitivity", to_string(c.cell.sensitivity)},
                         {"frame", to_string(c.cell.frame)},
                         {"group", c.cell.group},
                         {"expected", c.expected},
                         {"observed", c.observed},
                         {"pass", c.pass}});
      }
      out["cells"] = std::move(cells);
      std::cout << out.dump(2) << "\n";
      return report.overall_pass ? kExitOk : kExitStageFailure;
    }

    if (audit_cmd->parsed()) {
      AuditConfig config = common.load();
      Corpus corpus = load_corpus(config.corpus_path, config.corpus_format);
      fs::create_directories(config.output_dir);
      RunLedger ledger(config.output_dir / "audit.jsonl");
      AuditProgress progress =
          run_audit(corpus, config.templates, config.reasoning_endpoint, ledger);
      std::size_t transport_failures = 0;
      for (const auto& ex : ledger.records()) {
        if (ex.transport_error) ++transport_failures;
      }
      json out = {{"total", progress.total},
                  {"completed", progress.completed},
                  {"skipped", progress.skipped},
                  {"transport_failures", transport_failures}};
      std::cout << out.dump(2) << "\n";
      if (progress.completed > 0 && transport_failures == ledger.size()) {
        return fail("audit", "every request failed at transport level; endpoint unreachable",
                    kExitEndpointUnreachable);
      }
      return kExitOk;
    }

    if (expected_cmd->parsed()) {
      AuditConfig config = common.load();
      require_ledger(config.output_dir / "audit.jsonl", "expected");
      RunLedger stage_one(config.output_dir / "audit.jsonl");
      RunLedger stage_two(config.output_dir / "expected.jsonl");
      auto pairs = reconstruct(stage_one, config.base_endpoint, stage_two);
      json out = {{"eligible_pairs", pairs.size()},
                  {"ledger", (config.output_dir / "expected.jsonl").string()}};
      std::cout << out.dump(2) << "\n";
      return kExitOk;
    }

    if (analyze_cmd->parsed()) {
      AuditConfig config = common.load();
      Corpus corpus = load_corpus(config.corpus_path, config.corpus_format);
      AnalysisResult analysis = run_analysis(config, corpus);
      write_labels_csv(analysis, config.output_dir / "labels.csv");
      std::map<std::string, long> counts;
      for (const auto& lt : analysis.labels) counts[to_string(lt.label.kind)]++;
      json out = {{"labels", counts}, {"pairs", analysis.pairs.size()}};
      std::cout << out.dump(2) << "\n";
      return kExitOk;
    }

    if (stats_cmd->parsed()) {
      AuditConfig config = common.load();
      Corpus corpus = load_corpus(config.corpus_path, config.corpus_format);
      AnalysisResult analysis = run_analysis(config, corpus);
      auto rows = baseline_comparisons(collect_baseline_inputs(corpus, analysis),
                                       config.exact_test_cutoff);
      std::ostringstream os;
      os << "comparison,n1,n2,U,p,method,mark\n";
      for (const auto& row : rows) {
        os << row.comparison << ',' << row.result.n1 << ',' << row.result.n2 << ','
           << row.result.u << ',' << row.result.p_two_sided << ','
           << to_string(row.result.method) << ',' << to_string(row.result.mark) << '\n';
      }
      fs::create_directories(config.output_dir);
      std::ofstream out(config.output_dir / "tests.csv", std::ios::binary);
      out << os.str();
      std::cout << os.str();
      return kExitOk;
    }

    if (report_cmd->parsed()) {
      AuditConfig config = common.load();
      Corpus corpus = load_corpus(config.corpus_path, config.corpus_format);
      AnalysisResult analysis = run_analysis(config, corpus);
      auto tests = baseline_comparisons(collect_baseline_inputs(corpus, analysis),
                                        config.exact_test_cutoff);
      ReportMeta meta = make_meta(config, corpus, make_stopwords(config));
      Report report = assemble_report(corpus, analysis, tests, meta);
      emit_report_artifacts(report, corpus, analysis, config.output_dir, config.seed);
      json out = {{"report", (config.output_dir / "report.json").string()},
                  {"label_counts", report.label_counts}};
      std::cout << out.dump(2) << "\n";
      return kExitOk;
    }

    if (mock_cmd->parsed()) {
      BehaviorScript script = BehaviorScript::load(script_path);
      MockServer server(script, default_templates(), mock_host, mock_port);
      std::cout << json{{"listening", server.base_url()}}.dump() << "\n" << std::flush;
      // serve until interrupted
      static volatile std::sig_atomic_t stop_requested = 0;
      std::signal(SIGINT, [](int) { stop_requested = 1; });
      std::signal(SIGTERM, [](int) { stop_requested = 1; });
      while (!stop_requested) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
      }
      server.stop();
      return kExitOk;
    }

    if (calibrate_cmd->parsed()) {
      PlantRates rates;
      std::istringstream ss(cal_rates);
      std::string part;
      std::vector<double> vals;
      while (std::getline(ss, part, ',')) vals.push_back(std::stod(part));
      if (vals.size() != 3) {
        return fail("calibrate", "--rates needs three comma-separated values", kExitUsage);
      }
      rates.type1_api = vals[0];
      rates.type1_empty = vals[1];
      rates.type2 = vals[2];
      CalibrationResult result = calibrate(cal_n, rates, cal_seed, cal_dir);
      json out = {{"total", result.total},
                  {"agreed", result.agreed},
                  {"agreement", result.agreement()},
                  {"mismatched", result.mismatched_topic_ids}};
      std::cout << out.dump(2) << "\n";
      return result.agreed == result.total ? kExitOk : kExitStageFailure;
    }
  } catch (const CorpusError& e) {
    return fail(app.get_subcommands().front()->get_name(), e.what(), kExitUsage);
  } catch (const ReportError& e) {
    return fail(app.get_subcommands().front()->get_name(), e.what(), kExitStageFailure);
  } catch (const std::exception& e) {
    return fail(app.get_subcommands().front()->get_name(), e.what(), kExitStageFailure);
  }
  return kExitUsage;
}
