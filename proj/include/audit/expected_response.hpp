#pragma once

#include <optional>
#include <string>
#include <vector>

#include "audit/client.hpp"

namespace audit {

struct ExpectedPair {
  std::string topic_id;
  std::string cot;
  std::string expected;  // base-model output for the replayed CoT
  std::string actual;    // the original answer
};

// Reasoning text, verbatim, when present and non-empty.
std::optional<std::string> extract_cot(const Exchange& exchange);

// Replay prompt content is the CoT byte-for-byte: no wrapper, no system
// message.
std::string build_replay_request(const std::string& cot);

// Eligible: CoT present and original answer non-empty. Issues replay
// requests through the shared batch driver into `expected_ledger`
// (resumable), then joins replies with the original answers.
std::vector<ExpectedPair> reconstruct(const RunLedger& stage_one,
                                      const EndpointConfig& base_config,
                                      RunLedger& expected_ledger);

// Join-only variant for ledgers that are already complete.
std::vector<ExpectedPair> join_pairs(const RunLedger& stage_one,
                                     const RunLedger& expected_ledger);

}  // namespace audit
