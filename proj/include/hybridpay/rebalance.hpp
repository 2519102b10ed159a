#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hybridpay/channel.hpp"
#include "hybridpay/extrail.hpp"
#include "hybridpay/message.hpp"

namespace hybridpay::rebalance {

enum class Phase : std::uint8_t {
    Proposed,
    AcceptedLocked,
    TransferTriggered,
    AwaitingReceipt,
    Settled,
    SettledWithCompensation,
    Reverted,
    Disputed,
};

std::string_view to_string(Phase phase);
std::optional<Phase> phase_from_string(std::string_view name);
bool is_terminal(Phase phase);
/// Normative phase graph; a self-edge is always allowed (no transition).
bool edge_allowed(Phase from, Phase to);

struct SessionParams {
    std::string sessionId;
    PartyId payerBank;
    PartyId payeeBank;
    Value amount = Value::channel(0);
    Value collateralPayer = Value::channel(0);
    Value collateralPayee = Value::channel(0);
    Alternative alternative = Alternative::Alt1Design2;
    /// Alternative 2 only: m_A1I1BA1BI1 moves to a Cert2-released stage
    /// instead of releasing directly.
    bool receiptStage = false;
    TransferMode mode = TransferMode::Push;
    SessionDeadlines deadlines;
    DispositionPolicy policy;
    /// Fiat minor units per channel unit, from the participants' contract.
    std::uint64_t fiatRate = 1;
    Duration irreversibleAfter{8};
    std::string method = "bank-transfer";
};

struct RebalanceSession {
    std::string sessionId;
    std::string channelId;
    RebalanceTerms terms;
    bool payerIsA = true;
    Duration irreversibleAfter{8};
    std::vector<PartyId> registeredSources;
    Phase phase = Phase::Proposed;
    /// Channel-side outcome; survives a later move to DISPUTED.
    std::optional<Phase> resolution;
    std::optional<LogicalTime> deadline;
    std::optional<Digest> acceptedDigest;
    std::vector<SignedMessage> transcript;

    const PartyId& payer() const { return terms.payer; }
    const PartyId& payee() const { return terms.payee; }
    Value amount() const { return terms.amount; }
};

struct Initiated {
    SignedMessage mA1;
    RebalanceSession session;
};

/// Payer proposes an external re-balance of `params.amount` towards herself.
Initiated initiate(const channel::ChannelState& channel, const SessionParams& params, const KeyPair& payer,
                   LogicalTime now);

struct Step {
    RebalanceSession session;
    channel::ChannelState channel;
};

SignedMessage propose_registration(const RebalanceSession& session, std::vector<PartyId> sources,
                                   const KeyPair& proposer);

/// Records the certificate sources both participants signed off. Locks that
/// already exist pick up the new sources (an unsigned seq + 1 state).
Step register_sources(const RebalanceSession& session, const channel::ChannelState& channel,
                      const SignedMessage& registration, const KeyDirectory& directory);

struct Accepted {
    SignedMessage mA1I1;
    RebalanceSession session;
    channel::ChannelState channel;
};

/// Payee countersigns m_A1 and locks amount + C_I of hers and C_A of the payer's.
Accepted accept(const RebalanceSession& session, const SignedMessage& mA1, const channel::ChannelState& channel,
                const KeyPair& payee, LogicalTime now, const KeyDirectory& directory);

/// The locks `accept` creates, for a session whose deadline starts at `now`.
std::vector<channel::Lock> build_locks(const RebalanceSession& session, LogicalTime now);

/// Builds the external transfer order. The bank, not this layer, checks the
/// authorisation, so a forged m_A1I1 yields an order the bank will ignore.
extrail::TransferOrder submit_to_bank(const RebalanceSession& session, const SignedMessage& mA1I1, LogicalTime now);

/// Handles Cert1, Cert2, m_A1I1BA1 (timer reset) and m_A1I1BA1BI1.
Step accept_certificate(const RebalanceSession& session, const channel::ChannelState& channel,
                        const SignedMessage& certificate, LogicalTime now, const KeyDirectory& directory);

Step on_timeout(const RebalanceSession& session, const channel::ChannelState& channel, LogicalTime now,
                const KeyDirectory& directory);

struct Raised {
    RebalanceSession session;
    extrail::DisputeCase dispute;
};

/// Packs the verifying certificate chain for the regulator.
Raised raise_dispute(const RebalanceSession& session, std::span<const SignedMessage> evidence,
                     const PartyId& claimant, const KeyDirectory& directory);

SignedMessage dispute_message(const extrail::DisputeCase& dispute, const std::string& channelId,
                              const KeyPair& claimant);

/// Bank-issued messages that belong to this session and verify.
bool references_session(const RebalanceSession& session, const SignedMessage& message);

/// The transcript holds a verifying m_A1I1 and a verifying settling message
/// from a registered source.
bool settlement_authorised(const RebalanceSession& session, const KeyDirectory& directory);

} // namespace hybridpay::rebalance
