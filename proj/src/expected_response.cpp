#include "audit/expected_response.hpp"

#include <unordered_map>

namespace audit {

std::optional<std::string> extract_cot(const Exchange& exchange) {
  if (!exchange.cot || exchange.cot->empty()) return std::nullopt;
  return exchange.cot;
}

std::string build_replay_request(const std::string& cot) { return cot; }

static bool eligible(const Exchange& ex) {
  return extract_cot(ex).has_value() && ex.answer && !ex.answer->empty();
}

std::vector<ExpectedPair> reconstruct(const RunLedger& stage_one,
                                      const EndpointConfig& base_config,
                                      RunLedger& expected_ledger) {
  std::vector<std::pair<std::string, std::string>> requests;
  for (const auto& ex : stage_one.records()) {
    if (eligible(ex)) {
      requests.emplace_back(ex.topic_id, build_replay_request(*extract_cot(ex)));
    }
  }
  run_batch(requests, base_config, expected_ledger);
  return join_pairs(stage_one, expected_ledger);
}

std::vector<ExpectedPair> join_pairs(const RunLedger& stage_one,
                                     const RunLedger& expected_ledger) {
  std::unordered_map<std::string, Exchange> replays;
  for (const auto& ex : expected_ledger.records()) replays[ex.topic_id] = ex;

  std::vector<ExpectedPair> pairs;
  for (const auto& ex : stage_one.records()) {
    if (!eligible(ex)) continue;
    auto it = replays.find(ex.topic_id);
    if (it == replays.end()) continue;
    const Exchange& replay = it->second;
    if (!replay.answer) continue;  // replay failed; topic drops out of the pair set
    ExpectedPair pair;
    pair.topic_id = ex.topic_id;
    pair.cot = *ex.cot;
    pair.expected = *replay.answer;
    pair.actual = *ex.answer;
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace audit
