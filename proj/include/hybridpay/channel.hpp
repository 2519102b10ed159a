#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hybridpay/message.hpp"

namespace hybridpay::channel {

/// Credit split of a lock's amount between the two participants.
struct Disposition {
    Value toA = Value::channel(0);
    Value toI = Value::channel(0);

    Value total() const { return toA + toI; }
    bool operator==(const Disposition&) const = default;
};

struct LockCondition {
    enum class Type : std::uint8_t { Never = 0, CertificateFrom = 1, CounterpartySigned = 2 };

    Type type = Type::Never;
    /// Accepted issuers (certificates) or final signers (countersigned chains).
    std::vector<PartyId> senders;
    MessageKind kind = MessageKind::CERT1;

    static LockCondition never() { return {}; }
    static LockCondition certificate_from(std::vector<PartyId> senders, MessageKind kind);
    static LockCondition counterparty_signed(std::vector<PartyId> senders, MessageKind kind);

    bool operator==(const LockCondition&) const = default;
};

/// One locking stage: the release condition and both dispositions, plus the
/// optional timer-reset and stage-advance triggers.
struct LockStage {
    LockCondition release;
    Disposition onRelease;
    Disposition onTimeout;
    Duration window;
    LockCondition reset;
    LockCondition advance;

    bool operator==(const LockStage&) const = default;
};

struct Lock {
    std::string id;
    std::string session;
    PartyId owner;
    Value amount = Value::channel(0);
    LogicalTime deadline;
    std::vector<LockStage> stages;
    std::size_t stage = 0;

    const LockStage& current() const { return stages.at(stage); }
    bool operator==(const Lock&) const = default;
};

struct ChannelState {
    std::string channelId;
    PartyId partyA;
    PartyId partyI;
    Value capacity = Value::channel(0);
    std::uint64_t seq = 0;
    Value balanceA = Value::channel(0);
    Value balanceI = Value::channel(0);
    std::vector<Lock> locks;
    std::optional<std::string> activeSession;
    std::vector<Signature> signatures;

    Value locked() const;
    const Lock* find_lock(std::string_view id) const;
    bool operator==(const ChannelState&) const = default;
};

/// Encoding of everything but the signatures; this is what participants sign.
Bytes encode_state(const ChannelState& state);
ChannelState decode_state(ByteView bytes);

bool conserves(const ChannelState& state);
/// Throws ConservationViolation or a lock-shape error if the state is malformed.
void check_state(const ChannelState& state);

/// The CHANNEL_UPDATE envelope carrying `state`, signed in `state.signatures` order.
SignedMessage as_update(const ChannelState& state, const PartyId& proposer);

/// Both participants signed and the signatures verify.
bool final_capable(const ChannelState& state, const KeyDirectory& directory);

/// Adds `key`'s signature to `state`; the first signer becomes the proposer.
ChannelState countersign(const ChannelState& state, const KeyPair& key);

struct Proposal {
    std::uint64_t seq = 0;
    Value balanceA = Value::channel(0);
    Value balanceI = Value::channel(0);
    std::vector<Lock> locks;
};

class LedgerAnchor;

struct OpenedChannel;

OpenedChannel open_channel(std::string channelId, const KeyPair& keyA, const KeyPair& keyI, Value depositA,
                           Value depositI, Duration disputeWindow);

SignedMessage propose_update(const ChannelState& state, const Proposal& proposal, const KeyPair& proposer);

/// Countersigns a half-signed update; returns the new both-signed state.
ChannelState accept_update(const ChannelState& state, const SignedMessage& update, const KeyPair& acceptor,
                           const KeyDirectory& directory);

struct TimeoutFired {};
using LockTrigger = std::variant<SignedMessage, TimeoutFired>;

/// True iff `message` satisfies `condition` for a lock of `session`.
bool satisfies(const LockCondition& condition, const std::string& session, const SignedMessage& message,
               const KeyDirectory& directory);

/// Result of evaluating one trigger against one lock.
struct LockOutcome {
    enum class Kind { Released, TimedOut, Advanced, Reset, NoMatch };
    Kind kind = Kind::NoMatch;
    Disposition credited;
    Lock lock;
};

LockOutcome evaluate_lock(const Lock& lock, const LockTrigger& trigger, LogicalTime now,
                          const KeyDirectory& directory);

/// Fires one lock transition. The result has seq + 1 and no signatures until ratified.
ChannelState apply_lock_transition(const ChannelState& state, std::string_view lockId, const LockTrigger& trigger,
                                   LogicalTime now, const KeyDirectory& directory);

struct Payout {
    Value toA = Value::channel(0);
    Value toI = Value::channel(0);
    std::uint64_t seq = 0;

    bool operator==(const Payout&) const = default;
};

enum class AnchorStatus : std::uint8_t { Open, Disputed, Closed };
std::string_view to_string(AnchorStatus status);

/// On-ledger record of a channel: deposits and the dispute/close procedure.
class LedgerAnchor {
public:
    LedgerAnchor(std::string channelId, PartyId partyA, PartyId partyI, Value depositA, Value depositI,
                 Duration disputeWindow);

    /// Submits a both-signed state. The first submission starts the dispute
    /// window; later ones supersede only with a higher seq. A submission at
    /// exactly the window end is still accepted.
    void submit(const ChannelState& state, LogicalTime now, const KeyDirectory& directory);

    /// Evidence (certificates, countersigned chains) for resolving locks of the
    /// submitted state. Evaluated against lock deadlines at submission time.
    void submit_evidence(const SignedMessage& message, LogicalTime now, const KeyDirectory& directory);

    /// Earliest tick at which close() may run: the window end, pushed back by
    /// any lock whose deadline has not passed yet.
    std::optional<LogicalTime> settlement_tick(const KeyDirectory& directory) const;

    Payout close(LogicalTime now, const KeyDirectory& directory);

    AnchorStatus status() const { return status_; }
    std::uint64_t latest_seen_seq() const { return latestSeenSeq_; }
    std::optional<LogicalTime> window_end() const { return windowEnd_; }
    const std::optional<Payout>& payout() const { return payout_; }
    const std::optional<ChannelState>& best() const { return best_; }
    Value total_deposits() const { return depositA_ + depositI_; }
    Duration dispute_window() const { return disputeWindow_; }
    const std::string& channel_id() const { return channelId_; }

private:
    struct Evidence {
        LogicalTime at;
        SignedMessage message;
    };

    /// Resolves every lock of the best state given the recorded evidence.
    Payout resolve(const KeyDirectory& directory, LogicalTime& settleAt) const;

    std::string channelId_;
    PartyId partyA_;
    PartyId partyI_;
    Value depositA_;
    Value depositI_;
    Duration disputeWindow_;
    AnchorStatus status_ = AnchorStatus::Open;
    std::uint64_t latestSeenSeq_ = 0;
    std::optional<LogicalTime> windowEnd_;
    std::optional<ChannelState> best_;
    std::vector<Evidence> evidence_;
    std::optional<Payout> payout_;
};

struct OpenedChannel {
    ChannelState state;
    LedgerAnchor anchor;
};

struct Submission {
    LogicalTime at;
    ChannelState state;
};

/// Runs a whole dispute: every submission in order, then close at settlement.
Payout dispute_and_close(LedgerAnchor& anchor, std::span<const Submission> submissions,
                         const KeyDirectory& directory);

} // namespace hybridpay::channel
