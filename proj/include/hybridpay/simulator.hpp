#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hybridpay/channel.hpp"
#include "hybridpay/extrail.hpp"
#include "hybridpay/rebalance.hpp"
#include "hybridpay/scenario.hpp"
#include "hybridpay/trace.hpp"

namespace hybridpay::sim {

/// Value of one participant in channel units times the equivalence rate plus
/// fiat held at either bank.
struct Holdings {
    std::uint64_t channel = 0;
    std::uint64_t fiat = 0;

    std::uint64_t total(std::uint64_t rate) const { return channel * rate + fiat; }
};

struct RunResult {
    ScenarioConfig config;
    Trace trace;
    std::shared_ptr<KeyDirectory> directory;

    std::optional<rebalance::RebalanceSession> session;
    /// Latest state the participants hold (possibly not both-signed).
    channel::ChannelState channel;
    std::optional<channel::Payout> payout;
    std::shared_ptr<extrail::BankLedger> payerBank;
    std::shared_ptr<extrail::BankLedger> payeeBank;

    /// Everything each participant received from banks.
    std::vector<SignedMessage> payerEvidence;
    std::vector<SignedMessage> payeeEvidence;
    std::optional<extrail::DisputeCase> dispute;
    std::optional<extrail::Verdict> verdict;

    std::map<std::string, Holdings> start;
    std::map<std::string, Holdings> finish;
    std::uint64_t terminationBound = 0;
    std::uint64_t finalTick = 0;
    /// Trace audit findings followed by safety-oracle findings.
    std::vector<Violation> violations;

    /// Channel-side outcome, or "NONE" when no session got under way.
    std::string outcome() const;
};

/// Deterministic run. The seed only feeds key derivation; traces and
/// outcomes do not depend on it.
RunResult simulate(const ScenarioConfig& config, std::uint64_t seed = 0);

/// Honest participants end no worse than they started, net of the collateral
/// the protocol lets them lose.
std::vector<Violation> check_safety(const RunResult& result);

nlohmann::json report_json(const RunResult& result);
std::string report_table(const RunResult& result);

} // namespace hybridpay::sim
