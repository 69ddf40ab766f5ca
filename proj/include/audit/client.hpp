#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "audit/corpus.hpp"

namespace audit {

struct EndpointConfig {
  std::string base_url;                 // e.g. http://127.0.0.1:8089
  std::string model_name;
  std::string api_key_env = "AUDIT_API_KEY";
  double temperature = 1.3;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;
  int max_concurrency = 4;
  double requests_per_second = 8.0;
  // retry backoff: base * factor^attempt with full jitter
  std::chrono::milliseconds backoff_base{500};
  double backoff_factor = 2.0;
  std::uint64_t jitter_seed = 0;  // 0 = nondeterministic
};

struct ApiError {
  int http_status = 0;
  std::string code;
  std::string message;
  bool operator==(const ApiError&) const = default;
};

// One raw model interaction. Exactly one of {reply (cot and/or answer),
// api_error, transport_error} is populated; answer == "" is a recorded
// empty reply, distinct from an absent answer.
struct Exchange {
  std::string topic_id;
  std::string prompt;
  std::optional<std::string> cot;
  std::optional<std::string> answer;
  std::optional<ApiError> api_error;
  std::optional<std::string> transport_error;
  std::int64_t timestamp_ms = 0;
  int attempt_count = 1;

  bool is_reply() const { return cot.has_value() || answer.has_value(); }
  bool valid() const {
    int populated = (is_reply() ? 1 : 0) + (api_error ? 1 : 0) +
                    (transport_error ? 1 : 0);
    return populated == 1;
  }

  std::string to_json_line() const;
  static Exchange from_json_line(const std::string& line);
};

// Append-only JSONL run ledger; fsync per append; replay-safe.
class RunLedger {
 public:
  explicit RunLedger(std::filesystem::path path);
  ~RunLedger();

  RunLedger(const RunLedger&) = delete;
  RunLedger& operator=(const RunLedger&) = delete;

  void append(const Exchange& exchange);  // serialized; throws on I/O failure
  bool has(const std::string& topic_id) const;
  std::vector<Exchange> records() const;
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  void load_existing();
  std::filesystem::path path_;
  int fd_ = -1;
  mutable std::mutex mu_;
  std::vector<Exchange> records_;
  std::map<std::string, std::size_t> by_topic_;
};

// All outcomes are materialized as Exchange variants; nothing escapes.
Exchange query_model(const std::string& topic_id, const std::string& prompt,
                     const EndpointConfig& config);

struct AuditProgress {
  std::size_t completed = 0;
  std::size_t skipped = 0;
  std::size_t total = 0;
};

// Issues one request per topic without a terminal ledger record, under the
// configured concurrency bound and token-bucket rate limit. Completed
// topics are skipped, so re-running is idempotent.
AuditProgress run_audit(const Corpus& corpus, const PromptTemplateSet& templates,
                        const EndpointConfig& config, RunLedger& ledger);

// Shared worker-pool driver for any (id, prompt) batch; run_audit and the
// CoT-replay stage both sit on top of this.
AuditProgress run_batch(const std::vector<std::pair<std::string, std::string>>& requests,
                        const EndpointConfig& config, RunLedger& ledger);

}  // namespace audit
