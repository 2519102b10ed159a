#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hybridpay/crypto.hpp"
#include "hybridpay/value.hpp"

namespace hybridpay {

enum class MessageKind : std::uint8_t {
    M_A1 = 1,
    M_A1I1 = 2,
    M_A1I1BA1 = 3,
    M_A1I1BA1BI1 = 4,
    CERT1 = 5,
    CERT2 = 6,
    CHANNEL_UPDATE = 7,
    DISPUTE = 8,
    VERDICT = 9,
    REGISTRATION = 10,
};

std::string_view to_string(MessageKind kind);
std::optional<MessageKind> message_kind_from_string(std::string_view name);

enum class Alternative : std::uint8_t { Alt1Design1 = 0, Alt1Design2 = 1, Alt2 = 2 };
enum class TransferMode : std::uint8_t { Push = 0, RequestToPay = 1 };
enum class Beneficiary : std::uint8_t { Payer = 0, Payee = 1 };

std::string_view to_string(Alternative alt);
std::optional<Alternative> alternative_from_string(std::string_view name);
std::string_view to_string(TransferMode mode);

struct SessionDeadlines {
    Duration initiationTimeout{20};
    Duration actualTransfer{5};
    Duration transferMax{15};

    bool operator==(const SessionDeadlines&) const = default;
};

/// Who receives a collateral on the failure paths. Defaults follow the
/// punishment/compensation rules of the re-balancing protocol.
struct DispositionPolicy {
    Beneficiary payerCollateralOnTimeout = Beneficiary::Payee;
    Beneficiary payeeCollateralOnCompensation = Beneficiary::Payer;

    bool operator==(const DispositionPolicy&) const = default;
};

/// Body of M_A1 and of every message countersigning it.
struct RebalanceTerms {
    PartyId payer;
    PartyId payee;
    PartyId payerBank;
    PartyId payeeBank;
    Value amount;
    Value fiatAmount;
    Value collateralPayer;
    Value collateralPayee;
    Alternative alternative = Alternative::Alt1Design1;
    bool receiptStage = false;
    TransferMode mode = TransferMode::Push;
    std::uint64_t baseSeq = 0;
    LogicalTime proposedAt;
    LogicalTime orderExpiry;
    SessionDeadlines deadlines;
    DispositionPolicy policy;
    std::string method;

    bool operator==(const RebalanceTerms&) const = default;
};

enum class Assertion : std::uint8_t { TransferTriggered = 0, ReceiptConfirmed = 1 };

struct CertificateBody {
    PartyId issuer;
    Digest reference{};
    Assertion assertion = Assertion::TransferTriggered;
    std::string orderId;
    Value fiatAmount;

    bool operator==(const CertificateBody&) const = default;
};

struct RegistrationBody {
    PartyId proposer;
    PartyId counterparty;
    std::vector<PartyId> sources;

    bool operator==(const RegistrationBody&) const = default;
};

struct StateBody {
    PartyId proposer;
    PartyId counterparty;
    Bytes encodedState;

    bool operator==(const StateBody&) const = default;
};

struct DisputeBody {
    PartyId claimant;
    Digest reference{};
    std::vector<Digest> evidence;

    bool operator==(const DisputeBody&) const = default;
};

struct VerdictBody {
    PartyId regulator;
    Digest reference{};
    std::optional<PartyId> culprit;
    Value remedy;
    std::string rationale;

    bool operator==(const VerdictBody&) const = default;
};

using Body = std::variant<RebalanceTerms, CertificateBody, RegistrationBody, StateBody, DisputeBody, VerdictBody>;

struct Signature {
    PartyId signer;
    Bytes bytes;

    bool operator==(const Signature&) const = default;
};

struct SignedMessage {
    MessageKind kind = MessageKind::M_A1;
    std::string session;
    std::string channel;
    Body body;
    std::vector<Signature> signatures;

    bool operator==(const SignedMessage&) const = default;
};

/// Signer sequence the message's kind demands, resolved from its body.
std::vector<PartyId> required_signers(const SignedMessage& message);

/// Kind the message had when its `index`-th signature was made. Countersign
/// chains (M_A1 -> M_A1I1 -> M_A1I1BA1 -> M_A1I1BA1BI1) change kind per stage.
MessageKind stage_kind(MessageKind kind, std::size_t index);
std::optional<MessageKind> successor(MessageKind kind);

Bytes canonical_serialize(const SignedMessage& message);
SignedMessage deserialize(ByteView bytes);

/// Bytes covered by signature `index`: the message as it stood at that stage.
Bytes signing_payload(const SignedMessage& message, std::size_t index);

/// The message as it was before signature `count` was appended.
SignedMessage truncate(const SignedMessage& message, std::size_t count);

Digest message_digest(const SignedMessage& message);
/// Digest over header and body only; independent of keys and signatures.
Digest content_digest(const SignedMessage& message);

/// Appends the caller's signature. Promotes a complete chain message to the
/// next kind when the caller is that kind's next signer.
SignedMessage sign(const KeyPair& key, const SignedMessage& message);

/// True iff every required signature is present, in order, and verifies.
bool verify(const SignedMessage& message, const KeyDirectory& directory);
/// True iff the signatures present so far are the right prefix and verify.
bool verify_partial(const SignedMessage& message, const KeyDirectory& directory);

template <class T>
const T* body_as(const SignedMessage& message)
{
    return std::get_if<T>(&message.body);
}

} // namespace hybridpay
