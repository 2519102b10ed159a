#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hybridpay {

enum class Errc {
    // core
    WrongSigner,
    BadSignature,
    Malformed,
    NegativeValue,
    ValueOverflow,
    UnitMismatch,
    // channel
    InvalidParty,
    ZeroDeposit,
    ConservationViolation,
    StaleSeq,
    SessionActive,
    UnknownLock,
    ConditionNotMet,
    AlreadyClosed,
    WindowExpired,
    DisputeWindowOpen,
    // rebalance
    AmountExceedsBalance,
    SessionAlreadyActive,
    InsufficientBalance,
    NotCountersigned,
    InvalidRole,
    UnregisteredIssuer,
    WrongSession,
    PhaseError,
    NoDeadlinePending,
    InsufficientEvidence,
    // extrail
    InsufficientFiat,
    UnknownCustomer,
    Inadmissible,
    // sim
    InvalidScenario,
    GridTooLarge,
};

std::string_view to_string(Errc code);

class ProtocolError : public std::runtime_error {
public:
    ProtocolError(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw ProtocolError(code, what); }

} // namespace hybridpay
