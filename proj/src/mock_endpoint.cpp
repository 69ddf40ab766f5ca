#include "audit/mock_endpoint.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "audit/textproc.hpp"
#include "httplib.h"
#include "json.hpp"

namespace audit {

using nlohmann::json;

std::string to_string(MockBehaviorKind k) {
  switch (k) {
    case MockBehaviorKind::faithful: return "faithful";
    case MockBehaviorKind::type1_api: return "type1_api";
    case MockBehaviorKind::type1_empty: return "type1_empty";
    case MockBehaviorKind::type2_divergent: return "type2_divergent";
  }
  return "faithful";
}

MockBehaviorKind mock_behavior_from_string(const std::string& s) {
  if (s == "faithful") return MockBehaviorKind::faithful;
  if (s == "type1_api") return MockBehaviorKind::type1_api;
  if (s == "type1_empty") return MockBehaviorKind::type1_empty;
  if (s == "type2_divergent") return MockBehaviorKind::type2_divergent;
  throw std::invalid_argument("invalid mock behavior: '" + s + "'");
}

std::map<std::string, std::string> BehaviorScript::ground_truth() const {
  std::map<std::string, std::string> labels;
  for (const auto& [text, behavior] : by_topic_text) {
    std::string label;
    switch (behavior.kind) {
      case MockBehaviorKind::faithful: label = "uncensored"; break;
      case MockBehaviorKind::type1_api: label = "type1_api"; break;
      case MockBehaviorKind::type1_empty: label = "type1_empty"; break;
      case MockBehaviorKind::type2_divergent: label = "type2"; break;
    }
    labels[topic_id_by_text.at(text)] = label;
  }
  return labels;
}

static json behavior_to_json(const MockBehavior& b) {
  json j;
  j["kind"] = to_string(b.kind);
  j["http_status"] = b.http_status;
  j["error_code"] = b.error_code;
  j["error_message"] = b.error_message;
  j["divergence_vocab"] = b.divergence_vocab;
  j["latency_ms"] = b.latency_ms;
  j["transient_faults"] = b.transient_faults;
  return j;
}

static MockBehavior behavior_from_json(const json& j) {
  MockBehavior b;
  b.kind = mock_behavior_from_string(j.at("kind").get<std::string>());
  b.http_status = j.value("http_status", 400);
  b.error_code = j.value("error_code", std::string("invalid_request_error"));
  b.error_message = j.value("error_message", std::string("Content Exists Risk"));
  if (j.contains("divergence_vocab")) {
    b.divergence_vocab = j["divergence_vocab"].get<std::vector<std::string>>();
  }
  b.latency_ms = j.value("latency_ms", 0);
  b.transient_faults = j.value("transient_faults", 0);
  return b;
}

void BehaviorScript::save(const std::filesystem::path& path) const {
  json doc;
  doc["seed"] = seed;
  doc["default"] = behavior_to_json(default_behavior);
  json topics = json::object();
  for (const auto& [text, behavior] : by_topic_text) {
    json t = behavior_to_json(behavior);
    t["topic_id"] = topic_id_by_text.at(text);
    t["tokens"] = tokens_by_text.at(text);
    topics[text] = std::move(t);
  }
  doc["topics"] = std::move(topics);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write script file: " + path.string());
  out << doc.dump(2) << '\n';
}

BehaviorScript BehaviorScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open script file: " + path.string());
  json doc;
  in >> doc;
  BehaviorScript s;
  s.seed = doc.value("seed", std::uint64_t{0});
  if (doc.contains("default")) s.default_behavior = behavior_from_json(doc["default"]);
  for (auto& [text, t] : doc.at("topics").items()) {
    s.by_topic_text[text] = behavior_from_json(t);
    s.topic_id_by_text[text] = t.at("topic_id").get<std::string>();
    s.tokens_by_text[text] = t.at("tokens").get<std::vector<std::string>>();
  }
  return s;
}

static std::vector<std::string> topic_tokens_of(const Topic& topic) {
  // mock-side token view: whitespace split when possible, otherwise
  // codepoints, so faithful responses can embed every token
  auto ws = Tokenizer::whitespace(false).segment(topic.text);
  if (ws.size() > 1 || (ws.size() == 1 && ws[0] != topic.text)) return ws;
  auto units = utf8_units(topic.text);
  if (units.size() > 1) return units;
  return {topic.text};
}

BehaviorScript generate_script(const Corpus& corpus, const PlantRates& rates,
                               std::uint64_t seed, double transient_fault_rate,
                               int transient_fault_count) {
  if (rates.type1_api < 0 || rates.type1_empty < 0 || rates.type2 < 0) {
    throw std::invalid_argument("plant rates must be nonnegative");
  }
  if (rates.type1_api + rates.type1_empty + rates.type2 > 1.0 + 1e-12) {
    throw std::invalid_argument("plant rates must sum to at most 1");
  }
  const std::size_t n = corpus.size();
  auto planted = [&](double r) {
    return static_cast<std::size_t>(std::llround(r * static_cast<double>(n)));
  };
  std::size_t n_api = planted(rates.type1_api);
  std::size_t n_empty = planted(rates.type1_empty);
  std::size_t n_type2 = planted(rates.type2);
  if (n_api + n_empty + n_type2 > n) {
    throw std::invalid_argument("planted counts exceed corpus size");
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  static const std::vector<std::string> kDivergenceVocab = {
      "meadow", "lantern", "pebble", "orchard", "willow", "harbor"};

  BehaviorScript script;
  script.seed = seed;
  script.default_behavior.kind = MockBehaviorKind::faithful;

  for (std::size_t pos = 0; pos < n; ++pos) {
    const Topic& topic = corpus.topics()[order[pos]];
    MockBehavior b;
    if (pos < n_api) {
      b.kind = MockBehaviorKind::type1_api;
    } else if (pos < n_api + n_empty) {
      b.kind = MockBehaviorKind::type1_empty;
    } else if (pos < n_api + n_empty + n_type2) {
      b.kind = MockBehaviorKind::type2_divergent;
      b.divergence_vocab = kDivergenceVocab;
    } else {
      b.kind = MockBehaviorKind::faithful;
    }
    script.by_topic_text[topic.text] = b;
    script.topic_id_by_text[topic.text] = topic.id;
    script.tokens_by_text[topic.text] = topic_tokens_of(topic);
  }

  if (transient_fault_rate > 0.0) {
    std::size_t n_fault = planted(transient_fault_rate);
    std::vector<std::size_t> fault_order(n);
    for (std::size_t i = 0; i < n; ++i) fault_order[i] = i;
    std::shuffle(fault_order.begin(), fault_order.end(), rng);
    for (std::size_t i = 0; i < n_fault && i < n; ++i) {
      const Topic& topic = corpus.topics()[fault_order[i]];
      script.by_topic_text[topic.text].transient_faults = transient_fault_count;
    }
  }
  return script;
}

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// Topic tokens separated by seed-derived filler, so every topic token is
// present exactly and relevance in calibration comes out at 100.
std::string weave_filler(const std::vector<std::string>& tokens, std::uint64_t seed,
                         std::string_view salt) {
  std::mt19937_64 rng(seed ^ fnv1a64(salt));
  static const std::vector<std::string> kFiller = {"granite", "copper", "sierra",
                                                   "delta",   "umber",  "mosaic"};
  std::vector<std::string> parts;
  for (const auto& t : tokens) {
    parts.push_back(kFiller[rng() % kFiller.size()]);
    parts.push_back(t);
  }
  parts.push_back(kFiller[rng() % kFiller.size()]);
  return join(parts, " ");
}

json chat_response(const std::string& model, const std::optional<std::string>& reasoning,
                   const std::string& content) {
  json msg;
  msg["role"] = "assistant";
  if (reasoning) msg["reasoning_content"] = *reasoning;
  msg["content"] = content;
  return json{{"id", "mock-cmpl"},
              {"object", "chat.completion"},
              {"model", model},
              {"choices", json::array({{{"index", 0},
                                        {"message", msg},
                                        {"finish_reason", "stop"}}})}};
}

}  // namespace

struct MockServer::Impl {
  BehaviorScript script;
  PromptTemplateSet templates;
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::string host;

  mutable std::mutex mu;
  std::map<std::string, long> requests_by_topic;
  std::map<std::string, int> faults_served;
  long total = 0;

  // Recover the topic by stripping the template's fixed prefix/suffix.
  std::optional<std::string> extract_topic(const std::string& content) const {
    for (const std::string* tmpl :
         {&templates.sensitive_template, &templates.baseline_template}) {
      auto pos = tmpl->find("[topic]");
      if (pos == std::string::npos) continue;
      std::string prefix = tmpl->substr(0, pos);
      std::string suffix = tmpl->substr(pos + 7);
      if (content.size() < prefix.size() + suffix.size()) continue;
      if (content.compare(0, prefix.size(), prefix) != 0) continue;
      if (!suffix.empty() &&
          content.compare(content.size() - suffix.size(), suffix.size(), suffix) != 0) {
        continue;
      }
      std::string topic =
          content.substr(prefix.size(), content.size() - prefix.size() - suffix.size());
      if (script.by_topic_text.count(topic)) return topic;
    }
    return std::nullopt;
  }

  void handle(const httplib::Request& req, httplib::Response& res) {
    {
      std::lock_guard<std::mutex> lock(mu);
      total++;
    }
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      res.status = 400;
      res.set_content(R"({"error":{"message":"malformed json","type":"invalid_request_error","code":"invalid_request_error"}})",
                      "application/json");
      return;
    }
    std::string content;
    std::string model = body.value("model", "mock");
    try {
      content = body.at("messages").at(0).at("content").get<std::string>();
    } catch (const json::exception&) {
      res.status = 400;
      res.set_content(R"({"error":{"message":"missing messages","type":"invalid_request_error","code":"invalid_request_error"}})",
                      "application/json");
      return;
    }

    auto topic = extract_topic(content);
    if (!topic) {
      // replay traffic (a raw CoT) or an unknown prompt: echo the content
      // back as the answer, which makes expected == replayed text
      res.status = 200;
      res.set_content(chat_response(model, std::nullopt, content).dump(),
                      "application/json");
      return;
    }

    const MockBehavior& b = script.by_topic_text.at(*topic);
    bool fault_now = false;
    {
      std::lock_guard<std::mutex> lock(mu);
      requests_by_topic[*topic]++;
      if (faults_served[*topic] < b.transient_faults) {
        faults_served[*topic]++;
        fault_now = true;
      }
    }
    if (b.latency_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(b.latency_ms));
    }
    if (fault_now) {
      res.status = 503;
      res.set_content("transient fault", "text/plain");
      return;
    }

    const auto& tokens = script.tokens_by_text.at(*topic);
    switch (b.kind) {
      case MockBehaviorKind::faithful: {
        std::string cot = weave_filler(tokens, script.seed, *topic + "/cot");
        std::string answer = weave_filler(tokens, script.seed, *topic + "/answer");
        res.status = 200;
        res.set_content(chat_response(model, cot, answer).dump(), "application/json");
        break;
      }
      case MockBehaviorKind::type2_divergent: {
        std::string cot = weave_filler(tokens, script.seed, *topic + "/cot");
        std::string answer = join(b.divergence_vocab, " ");
        res.status = 200;
        res.set_content(chat_response(model, cot, answer).dump(), "application/json");
        break;
      }
      case MockBehaviorKind::type1_empty: {
        res.status = 200;
        res.set_content(chat_response(model, std::nullopt, "").dump(),
                        "application/json");
        break;
      }
      case MockBehaviorKind::type1_api: {
        res.status = b.http_status;
        json err = {{"error",
                     {{"message", b.error_message},
                      {"type", b.error_code},
                      {"param", nullptr},
                      {"code", b.error_code}}}};
        res.set_content(err.dump(), "application/json");
        break;
      }
    }
  }
};

MockServer::MockServer(BehaviorScript script, PromptTemplateSet templates,
                       const std::string& host, int port)
    : impl_(std::make_unique<Impl>()) {
  impl_->script = std::move(script);
  impl_->templates = std::move(templates);
  impl_->host = host;

  impl_->server.Post("/chat/completions",
                     [impl = impl_.get()](const httplib::Request& req,
                                          httplib::Response& res) { impl->handle(req, res); });
  impl_->server.Post("/v1/chat/completions",
                     [impl = impl_.get()](const httplib::Request& req,
                                          httplib::Response& res) { impl->handle(req, res); });
  impl_->server.Get("/__mock/requests", [impl = impl_.get()](const httplib::Request&,
                                                             httplib::Response& res) {
    std::lock_guard<std::mutex> lock(impl->mu);
    json j;
    j["total"] = impl->total;
    j["by_topic"] = impl->requests_by_topic;
    res.set_content(j.dump(), "application/json");
  });

  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
    if (impl_->port <= 0) throw std::runtime_error("mock server: cannot bind any port");
  } else {
    if (!impl_->server.bind_to_port(host, port)) {
      throw std::runtime_error("mock server: cannot bind port " + std::to_string(port));
    }
    impl_->port = port;
  }
  impl_->thread = std::thread([impl = impl_.get()]() { impl->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MockServer::~MockServer() { stop(); }

void MockServer::stop() {
  if (impl_ && impl_->server.is_running()) {
    impl_->server.stop();
  }
  if (impl_ && impl_->thread.joinable()) {
    impl_->thread.join();
  }
}

int MockServer::port() const { return impl_->port; }

std::string MockServer::base_url() const {
  return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

std::map<std::string, long> MockServer::request_log() const {
  std::lock_guard<std::mutex> lock(impl_->mu);
  return impl_->requests_by_topic;
}

long MockServer::total_requests() const {
  std::lock_guard<std::mutex> lock(impl_->mu);
  return impl_->total;
}

}  // namespace audit
