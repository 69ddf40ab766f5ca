#include "audit/client.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace audit {

using nlohmann::json;

std::string Exchange::to_json_line() const {
  json j;
  j["topic_id"] = topic_id;
  j["prompt"] = prompt;
  if (cot) j["cot"] = *cot;
  if (answer) j["answer"] = *answer;
  if (api_error) {
    j["api_error"] = {{"http_status", api_error->http_status},
                      {"code", api_error->code},
                      {"message", api_error->message}};
  }
  if (transport_error) j["transport_error"] = *transport_error;
  j["timestamp_ms"] = timestamp_ms;
  j["attempt_count"] = attempt_count;
  return j.dump();
}

Exchange Exchange::from_json_line(const std::string& line) {
  json j = json::parse(line);
  Exchange e;
  e.topic_id = j.at("topic_id").get<std::string>();
  e.prompt = j.at("prompt").get<std::string>();
  if (j.contains("cot")) e.cot = j["cot"].get<std::string>();
  if (j.contains("answer")) e.answer = j["answer"].get<std::string>();
  if (j.contains("api_error")) {
    ApiError err;
    err.http_status = j["api_error"].at("http_status").get<int>();
    err.code = j["api_error"].at("code").get<std::string>();
    err.message = j["api_error"].at("message").get<std::string>();
    e.api_error = err;
  }
  if (j.contains("transport_error")) e.transport_error = j["transport_error"].get<std::string>();
  e.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
  e.attempt_count = j.value("attempt_count", 1);
  return e;
}

RunLedger::RunLedger(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) {
    std::filesystem::create_directories(path_.parent_path());
  }
  load_existing();
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd_ < 0) throw std::runtime_error("cannot open ledger for append: " + path_.string());
}

RunLedger::~RunLedger() {
  if (fd_ >= 0) ::close(fd_);
}

void RunLedger::load_existing() {
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;
  std::stringstream ss;
  ss << in.rdbuf();
  std::string all = ss.str();

  std::size_t pos = 0, good_end = 0;
  while (pos < all.size()) {
    std::size_t nl = all.find('\n', pos);
    std::size_t end = nl == std::string::npos ? all.size() : nl;
    std::string line = all.substr(pos, end - pos);
    std::size_t next = nl == std::string::npos ? all.size() : nl + 1;
    if (!line.empty()) {
      try {
        Exchange e = Exchange::from_json_line(line);
        by_topic_[e.topic_id] = records_.size();
        records_.push_back(std::move(e));
      } catch (const std::exception&) {
        // a torn trailing line from a crash mid-append; anything before it
        // is intact because appends are line-atomic
        break;
      }
    }
    good_end = next;
    pos = next;
  }
  if (good_end < all.size()) {
    // drop the torn tail so the next append starts on a fresh line
    std::filesystem::resize_file(path_, good_end);
  }
}

void RunLedger::append(const Exchange& exchange) {
  std::lock_guard<std::mutex> lock(mu_);
  std::string line = exchange.to_json_line();
  line.push_back('\n');
  ssize_t written = ::write(fd_, line.data(), line.size());
  if (written != static_cast<ssize_t>(line.size())) {
    throw std::runtime_error("ledger append failed: " + path_.string());
  }
  if (::fsync(fd_) != 0) {
    throw std::runtime_error("ledger fsync failed: " + path_.string());
  }
  by_topic_[exchange.topic_id] = records_.size();
  records_.push_back(exchange);
}

bool RunLedger::has(const std::string& topic_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  return by_topic_.count(topic_id) > 0;
}

std::vector<Exchange> RunLedger::records() const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_;
}

std::size_t RunLedger::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_.size();
}

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

struct ParsedUrl {
  std::string host_port;  // scheme://host:port for httplib::Client
  std::string path_prefix;
};

ParsedUrl split_url(const std::string& base_url) {
  // httplib::Client takes scheme://host:port; any path suffix becomes a
  // request prefix.
  auto scheme_end = base_url.find("://");
  std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = base_url.find('/', host_start);
  ParsedUrl u;
  if (path_start == std::string::npos) {
    u.host_port = base_url;
  } else {
    u.host_port = base_url.substr(0, path_start);
    u.path_prefix = base_url.substr(path_start);
    while (!u.path_prefix.empty() && u.path_prefix.back() == '/') u.path_prefix.pop_back();
  }
  return u;
}

// Simple token bucket; capacity one second's worth of tokens.
class RateLimiter {
 public:
  explicit RateLimiter(double per_second)
      : rate_(per_second), capacity_(std::max(1.0, per_second)), tokens_(capacity_),
        last_(std::chrono::steady_clock::now()) {}

  void acquire() {
    std::unique_lock<std::mutex> lock(mu_);
    for (;;) {
      refill();
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      double deficit = 1.0 - tokens_;
      auto wait = std::chrono::duration<double>(deficit / rate_);
      cv_.wait_for(lock, wait);
    }
  }

 private:
  void refill() {
    auto now = std::chrono::steady_clock::now();
    double elapsed = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    tokens_ = std::min(capacity_, tokens_ + elapsed * rate_);
  }

  double rate_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mu_;
  std::condition_variable cv_;
};

std::optional<ApiError> parse_api_error(int status, const std::string& body) {
  try {
    json j = json::parse(body);
    if (!j.contains("error")) return std::nullopt;
    ApiError err;
    err.http_status = status;
    err.message = j["error"].value("message", "");
    err.code = j["error"].value("code", j["error"].value("type", ""));
    return err;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

}  // namespace

Exchange query_model(const std::string& topic_id, const std::string& prompt,
                     const EndpointConfig& config) {
  Exchange ex;
  ex.topic_id = topic_id;
  ex.prompt = prompt;

  ParsedUrl url = split_url(config.base_url);
  json body = {{"model", config.model_name},
               {"temperature", config.temperature},
               {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
  std::string payload = body.dump();

  std::mt19937_64 jitter_rng(config.jitter_seed != 0 ? config.jitter_seed
                                                     : std::random_device{}());
  std::string last_transport_error;
  int attempts = 0;
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    ++attempts;
    if (attempt > 0) {
      double cap = static_cast<double>(config.backoff_base.count()) *
                   std::pow(config.backoff_factor, attempt - 1);
      std::uniform_real_distribution<double> dist(0.0, cap);
      auto sleep_ms = std::chrono::milliseconds(static_cast<long>(dist(jitter_rng)));
      std::this_thread::sleep_for(sleep_ms);
    }

    httplib::Client cli(url.host_port);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
    cli.set_connection_timeout(secs.count() > 0 ? secs.count() : 1, 0);
    cli.set_read_timeout(secs.count() > 0 ? secs.count() : 1, 0);
    if (const char* key = std::getenv(config.api_key_env.c_str());
        key != nullptr && *key != '\0') {
      cli.set_bearer_token_auth(key);
    }

    auto res = cli.Post(url.path_prefix + "/chat/completions", payload, "application/json");
    ex.timestamp_ms = now_ms();
    ex.attempt_count = attempts;

    if (!res) {
      last_transport_error = "connection failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) {
      try {
        json j = json::parse(res->body);
        const json& msg = j.at("choices").at(0).at("message");
        if (msg.contains("reasoning_content") && !msg["reasoning_content"].is_null()) {
          ex.cot = msg["reasoning_content"].get<std::string>();
        }
        if (msg.contains("content") && !msg["content"].is_null()) {
          ex.answer = msg["content"].get<std::string>();
        } else {
          ex.answer = "";
        }
        return ex;
      } catch (const json::exception& e) {
        last_transport_error = std::string("malformed response body: ") + e.what();
        continue;
      }
    }
    if (res->status >= 400 && res->status < 500) {
      // structured refusals are terminal, never retried
      if (auto err = parse_api_error(res->status, res->body)) {
        ex.api_error = err;
        return ex;
      }
      ex.api_error = ApiError{res->status, "http_error", res->body};
      return ex;
    }
    last_transport_error = "http status " + std::to_string(res->status);
  }

  ex.transport_error = last_transport_error.empty() ? "unknown transport failure"
                                                    : last_transport_error;
  ex.timestamp_ms = now_ms();
  ex.attempt_count = attempts;
  return ex;
}

AuditProgress run_batch(const std::vector<std::pair<std::string, std::string>>& requests,
                        const EndpointConfig& config, RunLedger& ledger) {
  AuditProgress progress;
  progress.total = requests.size();

  std::vector<std::pair<std::string, std::string>> pending;
  for (const auto& req : requests) {
    if (ledger.has(req.first)) {
      ++progress.skipped;
    } else {
      pending.push_back(req);
    }
  }

  RateLimiter limiter(config.requests_per_second);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> completed{0};
  std::exception_ptr ledger_failure;
  std::mutex failure_mu;

  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) return;
      limiter.acquire();
      Exchange ex = query_model(pending[i].first, pending[i].second, config);
      try {
        ledger.append(ex);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!ledger_failure) ledger_failure = std::current_exception();
        return;
      }
      completed.fetch_add(1);
    }
  };

  std::size_t n_workers =
      std::min<std::size_t>(std::max(1, config.max_concurrency), pending.size());
  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (std::size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  if (ledger_failure) std::rethrow_exception(ledger_failure);
  progress.completed = completed.load();
  return progress;
}

AuditProgress run_audit(const Corpus& corpus, const PromptTemplateSet& templates,
                        const EndpointConfig& config, RunLedger& ledger) {
  validate_templates(templates);
  std::vector<std::pair<std::string, std::string>> requests;
  requests.reserve(corpus.size());
  for (const auto& topic : corpus.topics()) {
    requests.emplace_back(topic.id, render_prompt(topic, templates));
  }
  return run_batch(requests, config, ledger);
}

}  // namespace audit
