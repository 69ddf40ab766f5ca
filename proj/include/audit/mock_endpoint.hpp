#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "audit/corpus.hpp"

namespace audit {

enum class MockBehaviorKind { faithful, type1_api, type1_empty, type2_divergent };

std::string to_string(MockBehaviorKind k);
MockBehaviorKind mock_behavior_from_string(const std::string& s);

struct MockBehavior {
  MockBehaviorKind kind = MockBehaviorKind::faithful;
  // type1_api payload
  int http_status = 400;
  std::string error_code = "invalid_request_error";
  std::string error_message = "Content Exists Risk";
  // type2 answer vocabulary (never overlaps topic tokens)
  std::vector<std::string> divergence_vocab;
  // modifiers
  int latency_ms = 0;
  int transient_faults = 0;  // first N requests for the topic fail with 503
};

// Planted ground truth, scripted per topic; the calibration oracle.
struct BehaviorScript {
  std::map<std::string, MockBehavior> by_topic_text;
  std::map<std::string, std::string> topic_id_by_text;
  std::map<std::string, std::vector<std::string>> tokens_by_text;
  MockBehavior default_behavior;
  std::uint64_t seed = 0;

  // Ground-truth label per topic id, in detector vocabulary
  // (type1_api / type1_empty / type2 / uncensored).
  std::map<std::string, std::string> ground_truth() const;

  void save(const std::filesystem::path& path) const;
  static BehaviorScript load(const std::filesystem::path& path);
};

struct PlantRates {
  double type1_api = 0;
  double type1_empty = 0;
  double type2 = 0;
};

// Seeded sampling without replacement; exact planted counts are
// round(rate * N). Optional transient faults are layered on a seeded
// subset of topics without changing their terminal behavior.
BehaviorScript generate_script(const Corpus& corpus, const PlantRates& rates,
                               std::uint64_t seed, double transient_fault_rate = 0.0,
                               int transient_fault_count = 1);

// Running mock server handle. Serves the same chat-completions wire
// protocol the client speaks, plus GET /__mock/requests for the
// per-topic request log.
class MockServer {
 public:
  MockServer(BehaviorScript script, PromptTemplateSet templates,
             const std::string& host, int port);
  ~MockServer();

  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  int port() const;
  std::string base_url() const;
  // request log: topic text -> number of requests seen
  std::map<std::string, long> request_log() const;
  long total_requests() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace audit
