#include "hybridpay/value.hpp"

#include <limits>

namespace hybridpay {

std::string_view to_string(Errc code)
{
    switch (code) {
    case Errc::WrongSigner: return "WrongSigner";
    case Errc::BadSignature: return "BadSignature";
    case Errc::Malformed: return "Malformed";
    case Errc::NegativeValue: return "NegativeValue";
    case Errc::ValueOverflow: return "ValueOverflow";
    case Errc::UnitMismatch: return "UnitMismatch";
    case Errc::InvalidParty: return "InvalidParty";
    case Errc::ZeroDeposit: return "ZeroDeposit";
    case Errc::ConservationViolation: return "ConservationViolation";
    case Errc::StaleSeq: return "StaleSeq";
    case Errc::SessionActive: return "SessionActive";
    case Errc::UnknownLock: return "UnknownLock";
    case Errc::ConditionNotMet: return "ConditionNotMet";
    case Errc::AlreadyClosed: return "AlreadyClosed";
    case Errc::WindowExpired: return "WindowExpired";
    case Errc::DisputeWindowOpen: return "DisputeWindowOpen";
    case Errc::AmountExceedsBalance: return "AmountExceedsBalance";
    case Errc::SessionAlreadyActive: return "SessionAlreadyActive";
    case Errc::InsufficientBalance: return "InsufficientBalance";
    case Errc::NotCountersigned: return "NotCountersigned";
    case Errc::InvalidRole: return "InvalidRole";
    case Errc::UnregisteredIssuer: return "UnregisteredIssuer";
    case Errc::WrongSession: return "WrongSession";
    case Errc::PhaseError: return "PhaseError";
    case Errc::NoDeadlinePending: return "NoDeadlinePending";
    case Errc::InsufficientEvidence: return "InsufficientEvidence";
    case Errc::InsufficientFiat: return "InsufficientFiat";
    case Errc::UnknownCustomer: return "UnknownCustomer";
    case Errc::Inadmissible: return "Inadmissible";
    case Errc::InvalidScenario: return "InvalidScenario";
    case Errc::GridTooLarge: return "GridTooLarge";
    }
    return "Unknown";
}

Value Value::operator+(const Value& other) const
{
    if (unit_ != other.unit_)
        fail(Errc::UnitMismatch, "adding values of different units");
    if (amount_ > std::numeric_limits<std::uint64_t>::max() - other.amount_)
        fail(Errc::ValueOverflow, "value addition overflows");
    return {amount_ + other.amount_, unit_};
}

Value Value::operator-(const Value& other) const
{
    if (unit_ != other.unit_)
        fail(Errc::UnitMismatch, "subtracting values of different units");
    if (other.amount_ > amount_)
        fail(Errc::NegativeValue, to_string(*this) + " - " + to_string(other));
    return {amount_ - other.amount_, unit_};
}

Value Value::convert(std::uint64_t rate, Unit target) const
{
    if (rate != 0 && amount_ > std::numeric_limits<std::uint64_t>::max() / rate)
        fail(Errc::ValueOverflow, "value conversion overflows");
    return {amount_ * rate, target};
}

std::strong_ordering Value::operator<=>(const Value& other) const
{
    if (unit_ != other.unit_)
        fail(Errc::UnitMismatch, "comparing values of different units");
    return amount_ <=> other.amount_;
}

std::string to_string(const Value& v)
{
    return std::to_string(v.amount()) + (v.unit() == Unit::Channel ? "ch" : "fiat");
}

LogicalTime LogicalTime::operator+(Duration d) const
{
    if (tick > std::numeric_limits<std::uint64_t>::max() - d.ticks)
        fail(Errc::ValueOverflow, "logical time overflows");
    return {tick + d.ticks};
}

std::string_view to_string(Role role)
{
    switch (role) {
    case Role::Participant: return "channel-participant";
    case Role::Bank: return "bank";
    case Role::Regulator: return "regulator";
    case Role::Ledger: return "ledger";
    }
    return "unknown";
}

} // namespace hybridpay
