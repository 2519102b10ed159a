#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hybridpay/extrail.hpp"
#include "hybridpay/message.hpp"

namespace hybridpay::sim {

/// Per-participant deviation policy. Empty means honest.
struct ParticipantStrategy {
    std::set<MessageKind> drop;
    std::map<MessageKind, std::uint64_t> delay;
    std::set<MessageKind> forge;
    bool staleClose = false;
    bool withholdCosign = false;
    bool reverseTransfer = false;

    bool honest() const;
    bool operator==(const ParticipantStrategy&) const = default;
};

/// Named strategies used by fault grids.
std::optional<ParticipantStrategy> strategy_preset(std::string_view name);

struct BankConfig {
    std::uint64_t equity = 1000;
    std::map<std::string, std::uint64_t> accounts;
    extrail::BankConduct conduct;
};

struct SessionConfig {
    std::uint64_t amount = 10;
    std::uint64_t collateralPayer = 0;
    std::uint64_t collateralPayee = 0;
    Alternative alternative = Alternative::Alt1Design2;
    bool receiptStage = false;
    TransferMode mode = TransferMode::Push;
    SessionDeadlines deadlines;
    /// Absent means both banks.
    std::optional<std::vector<std::string>> registeredSources;
    DispositionPolicy policy;
    std::uint64_t irreversibleAfter = 8;
    std::string method = "bank-transfer";
};

struct Interaction {
    std::uint64_t payer = 0;
    std::uint64_t payee = 0;
};

struct ScenarioConfig {
    std::string name = "scenario";
    std::string signatureScheme = "ed25519";
    std::uint64_t equivalenceRate = 1;

    std::string payer = "Alice";
    std::string payee = "Ingrid";
    std::string payerBank = "B_A";
    std::string payeeBank = "B_I";
    std::string regulator = "Regulator";

    std::string channelId = "chan-AI";
    std::uint64_t depositPayer = 20;
    std::uint64_t depositPayee = 10;
    std::uint64_t disputeWindow = 10;
    std::vector<Interaction> interactions;

    std::optional<SessionConfig> session;

    BankConfig payerBankConfig;
    BankConfig payeeBankConfig;

    ParticipantStrategy payerStrategy;
    ParticipantStrategy payeeStrategy;
};

/// Validates and converts; unknown fields and out-of-range values raise
/// Errc::InvalidScenario.
ScenarioConfig parse_scenario(const nlohmann::json& doc);
ScenarioConfig load_scenario(const std::string& path);
nlohmann::json to_json(const ScenarioConfig& config);

std::optional<PartyId> party_by_name(const ScenarioConfig& config, std::string_view name);

} // namespace hybridpay::sim
