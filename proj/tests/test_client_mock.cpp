#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <fstream>
#include <set>

#include "audit/client.hpp"
#include "audit/mock_endpoint.hpp"
#include "audit/pipeline.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace audit;

static EndpointConfig fast_config(const std::string& base_url) {
  EndpointConfig cfg;
  cfg.base_url = base_url;
  cfg.model_name = "mock-model";
  cfg.timeout = std::chrono::milliseconds(5000);
  cfg.max_retries = 3;
  cfg.max_concurrency = 4;
  cfg.requests_per_second = 500.0;
  cfg.backoff_base = std::chrono::milliseconds(1);
  cfg.jitter_seed = 99;
  return cfg;
}

TEST_CASE("exchange json round trip") {
  SUBCASE("reply with empty answer is not the same as absent answer") {
    Exchange e;
    e.topic_id = "t1";
    e.prompt = "p";
    e.answer = "";
    e.timestamp_ms = 12345;
    CHECK(e.valid());
    Exchange back = Exchange::from_json_line(e.to_json_line());
    REQUIRE(back.answer.has_value());
    CHECK(*back.answer == "");
    CHECK_FALSE(back.cot.has_value());
    CHECK(back.timestamp_ms == 12345);
  }
  SUBCASE("api error") {
    Exchange e;
    e.topic_id = "t1";
    e.prompt = "p";
    e.api_error = ApiError{400, "invalid_request_error", "Content Exists Risk"};
    CHECK(e.valid());
    Exchange back = Exchange::from_json_line(e.to_json_line());
    REQUIRE(back.api_error.has_value());
    CHECK(*back.api_error == *e.api_error);
  }
  SUBCASE("transport error") {
    Exchange e;
    e.topic_id = "t1";
    e.prompt = "p";
    e.transport_error = "connect refused";
    e.attempt_count = 4;
    CHECK(e.valid());
    Exchange back = Exchange::from_json_line(e.to_json_line());
    CHECK(back.transport_error == e.transport_error);
    CHECK(back.attempt_count == 4);
  }
  SUBCASE("validity needs exactly one outcome") {
    Exchange none;
    none.topic_id = "t";
    CHECK_FALSE(none.valid());
    Exchange both;
    both.topic_id = "t";
    both.answer = "x";
    both.transport_error = "y";
    CHECK_FALSE(both.valid());
  }
  SUBCASE("unicode survives") {
    Exchange e;
    e.topic_id = "t1";
    e.prompt = "评价一下";
    e.cot = "思考\n多行";
    e.answer = "回答";
    Exchange back = Exchange::from_json_line(e.to_json_line());
    CHECK(back.prompt == e.prompt);
    CHECK(back.cot == e.cot);
    CHECK(back.answer == e.answer);
  }
}

TEST_CASE("run ledger persists, reloads, and indexes by topic") {
  auto dir = testutil::temp_dir("ledger");
  auto path = dir / "run.jsonl";
  {
    RunLedger ledger(path);
    CHECK(ledger.size() == 0);
    Exchange e;
    e.topic_id = "a";
    e.prompt = "p";
    e.answer = "x";
    ledger.append(e);
    e.topic_id = "b";
    ledger.append(e);
    CHECK(ledger.size() == 2);
    CHECK(ledger.has("a"));
    CHECK_FALSE(ledger.has("c"));
  }
  RunLedger again(path);
  CHECK(again.size() == 2);
  CHECK(again.has("a"));
  CHECK(again.has("b"));
  CHECK(again.records()[0].topic_id == "a");
}

TEST_CASE("run ledger tolerates a torn trailing line") {
  auto dir = testutil::temp_dir("ledger_torn");
  auto path = dir / "run.jsonl";
  {
    RunLedger ledger(path);
    Exchange e;
    e.topic_id = "a";
    e.prompt = "p";
    e.answer = "x";
    ledger.append(e);
  }
  {
    std::ofstream out(path, std::ios::app | std::ios::binary);
    out << R"({"topic_id":"b","prom)";  // crash mid-append
  }
  RunLedger again(path);
  CHECK(again.size() == 1);
  CHECK(again.has("a"));
  CHECK_FALSE(again.has("b"));
  // the reopened ledger keeps appending cleanly after the torn tail
  Exchange e;
  e.topic_id = "c";
  e.prompt = "p";
  e.answer = "y";
  again.append(e);
  RunLedger third(path);
  CHECK(third.has("a"));
  CHECK(third.has("c"));
}

TEST_CASE("query_model against the scripted mock") {
  Corpus corpus = synthetic_corpus(8, 7);
  auto templates = default_templates();
  BehaviorScript script = generate_script(corpus, PlantRates{}, 7);

  // overwrite: topic 0 faithful, 1 api error, 2 empty, 3 divergent, 4 flaky
  const auto& topics = corpus.topics();
  script.by_topic_text[topics[1].text].kind = MockBehaviorKind::type1_api;
  script.by_topic_text[topics[2].text].kind = MockBehaviorKind::type1_empty;
  script.by_topic_text[topics[3].text].kind = MockBehaviorKind::type2_divergent;
  script.by_topic_text[topics[3].text].divergence_vocab = {"meadow", "lantern"};
  script.by_topic_text[topics[4].text].transient_faults = 2;

  MockServer server(script, templates, "127.0.0.1", 0);
  auto cfg = fast_config(server.base_url());

  SUBCASE("faithful reply carries cot and answer with every topic token") {
    auto ex = query_model(topics[0].id, render_prompt(topics[0], templates), cfg);
    REQUIRE(ex.cot.has_value());
    REQUIRE(ex.answer.has_value());
    CHECK(ex.attempt_count == 1);
    for (const auto& tok : script.tokens_by_text.at(topics[0].text)) {
      CHECK(ex.cot->find(tok) != std::string::npos);
      CHECK(ex.answer->find(tok) != std::string::npos);
    }
  }
  SUBCASE("structured 4xx is terminal and never retried") {
    auto ex = query_model(topics[1].id, render_prompt(topics[1], templates), cfg);
    REQUIRE(ex.api_error.has_value());
    CHECK(ex.api_error->http_status == 400);
    CHECK(ex.api_error->code == "invalid_request_error");
    CHECK(ex.api_error->message == "Content Exists Risk");
    CHECK(ex.attempt_count == 1);
    CHECK(server.request_log().at(topics[1].text) == 1);
  }
  SUBCASE("empty-content reply records answer as empty string") {
    auto ex = query_model(topics[2].id, render_prompt(topics[2], templates), cfg);
    REQUIRE(ex.answer.has_value());
    CHECK(*ex.answer == "");
    CHECK_FALSE(ex.cot.has_value());
    CHECK_FALSE(ex.api_error.has_value());
  }
  SUBCASE("divergent reply keeps topic tokens in cot only") {
    auto ex = query_model(topics[3].id, render_prompt(topics[3], templates), cfg);
    REQUIRE(ex.cot.has_value());
    REQUIRE(ex.answer.has_value());
    CHECK(*ex.answer == "meadow lantern");
    for (const auto& tok : script.tokens_by_text.at(topics[3].text)) {
      CHECK(ex.answer->find(tok) == std::string::npos);
    }
  }
  SUBCASE("transient 5xx is retried until it succeeds") {
    auto ex = query_model(topics[4].id, render_prompt(topics[4], templates), cfg);
    REQUIRE(ex.answer.has_value());
    CHECK(ex.attempt_count == 3);  // two faults, then success
    CHECK(server.request_log().at(topics[4].text) == 3);
  }
}

TEST_CASE("exhausted retries surface as a transport error") {
  Corpus corpus = synthetic_corpus(1, 3);
  auto templates = default_templates();
  BehaviorScript script = generate_script(corpus, PlantRates{}, 3);
  script.by_topic_text[corpus.topics()[0].text].transient_faults = 10;
  MockServer server(script, templates, "127.0.0.1", 0);
  auto cfg = fast_config(server.base_url());
  cfg.max_retries = 2;
  auto ex = query_model(corpus.topics()[0].id,
                        render_prompt(corpus.topics()[0], templates), cfg);
  REQUIRE(ex.transport_error.has_value());
  CHECK(ex.attempt_count == 3);  // initial try + 2 retries
  CHECK(server.request_log().at(corpus.topics()[0].text) == 3);
}

TEST_CASE("unreachable endpoint yields transport error, not an exception") {
  EndpointConfig cfg = fast_config("http://127.0.0.1:9");  // discard port
  cfg.max_retries = 1;
  cfg.timeout = std::chrono::milliseconds(1000);
  auto ex = query_model("t", "prompt", cfg);
  REQUIRE(ex.transport_error.has_value());
  CHECK(ex.valid());
}

TEST_CASE("run_audit completes a corpus and is idempotent on re-run") {
  Corpus corpus = synthetic_corpus(30, 11);
  auto templates = default_templates();
  BehaviorScript script = generate_script(corpus, PlantRates{0.1, 0.1, 0.2}, 11);
  MockServer server(script, templates, "127.0.0.1", 0);
  auto cfg = fast_config(server.base_url());

  auto dir = testutil::temp_dir("audit_run");
  {
    RunLedger ledger(dir / "run.jsonl");
    auto progress = run_audit(corpus, templates, cfg, ledger);
    CHECK(progress.total == 30);
    CHECK(progress.completed == 30);
    CHECK(progress.skipped == 0);
    CHECK(ledger.size() == 30);
  }
  CHECK(server.total_requests() == 30);

  // second run over the same ledger issues nothing
  {
    RunLedger ledger(dir / "run.jsonl");
    auto progress = run_audit(corpus, templates, cfg, ledger);
    CHECK(progress.completed == 0);
    CHECK(progress.skipped == 30);
  }
  CHECK(server.total_requests() == 30);
}

TEST_CASE("interrupted run resumes with exactly the missing requests") {
  const std::size_t n = 24, k = 9;
  Corpus corpus = synthetic_corpus(n, 13);
  auto templates = default_templates();
  BehaviorScript script = generate_script(corpus, PlantRates{0.1, 0, 0.2}, 13);
  MockServer server(script, templates, "127.0.0.1", 0);
  auto cfg = fast_config(server.base_url());

  auto dir = testutil::temp_dir("audit_resume");
  // simulate a run killed after k topics: complete only the first k
  {
    RunLedger ledger(dir / "run.jsonl");
    std::vector<std::pair<std::string, std::string>> first_k;
    for (std::size_t i = 0; i < k; ++i) {
      first_k.emplace_back(corpus.topics()[i].id,
                           render_prompt(corpus.topics()[i], templates));
    }
    auto progress = run_batch(first_k, cfg, ledger);
    CHECK(progress.completed == k);
  }
  long before = server.total_requests();
  CHECK(before == static_cast<long>(k));

  {
    RunLedger ledger(dir / "run.jsonl");
    auto progress = run_audit(corpus, templates, cfg, ledger);
    CHECK(progress.skipped == k);
    CHECK(progress.completed == n - k);
    CHECK(ledger.size() == n);
  }
  // the mock's request log is the oracle: exactly n - k new requests
  CHECK(server.total_requests() - before == static_cast<long>(n - k));
  auto log = server.request_log();
  for (const auto& [text, count] : log) CHECK(count == 1);
}

TEST_CASE("generate_script plants exact rounded counts") {
  Corpus corpus = synthetic_corpus(500, 7);
  BehaviorScript script = generate_script(corpus, PlantRates{0.02, 0.02, 0.10}, 7);
  std::map<std::string, long> counts;
  for (const auto& [_, b] : script.by_topic_text) counts[to_string(b.kind)]++;
  CHECK(counts["type1_api"] == 10);
  CHECK(counts["type1_empty"] == 10);
  CHECK(counts["type2_divergent"] == 50);
  CHECK(counts["faithful"] == 430);

  SUBCASE("same seed reproduces the same assignment") {
    BehaviorScript again = generate_script(corpus, PlantRates{0.02, 0.02, 0.10}, 7);
    for (const auto& [text, b] : script.by_topic_text) {
      CHECK(again.by_topic_text.at(text).kind == b.kind);
    }
  }
  SUBCASE("rates above 1 rejected") {
    CHECK_THROWS(generate_script(corpus, PlantRates{0.6, 0.3, 0.2}, 7));
  }
  SUBCASE("script file round trip") {
    auto dir = testutil::temp_dir("script");
    script.save(dir / "script.json");
    BehaviorScript loaded = BehaviorScript::load(dir / "script.json");
    CHECK(loaded.seed == script.seed);
    CHECK(loaded.topic_id_by_text == script.topic_id_by_text);
    CHECK(loaded.ground_truth() == script.ground_truth());
  }
}

TEST_CASE("ground truth maps behaviors to detector labels") {
  Corpus corpus = synthetic_corpus(10, 5);
  BehaviorScript script = generate_script(corpus, PlantRates{0.1, 0.1, 0.1}, 5);
  auto truth = script.ground_truth();
  CHECK(truth.size() == 10);
  std::map<std::string, long> counts;
  for (const auto& [_, label] : truth) counts[label]++;
  CHECK(counts["type1_api"] == 1);
  CHECK(counts["type1_empty"] == 1);
  CHECK(counts["type2"] == 1);
  CHECK(counts["uncensored"] == 7);
}
