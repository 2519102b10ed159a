#pragma once

#include <compare>
#include <cstdint>
#include <string>

#include "hybridpay/error.hpp"

namespace hybridpay {

enum class Unit : std::uint8_t { Channel = 0, Fiat = 1 };

/// Non-negative amount in minor units, tagged with the unit it is denominated in.
/// Arithmetic refuses to mix units, to go below zero, or to wrap.
class Value {
public:
    constexpr Value() = default;
    constexpr Value(std::uint64_t amount, Unit unit) : amount_(amount), unit_(unit) {}

    static constexpr Value channel(std::uint64_t amount) { return {amount, Unit::Channel}; }
    static constexpr Value fiat(std::uint64_t amount) { return {amount, Unit::Fiat}; }

    constexpr std::uint64_t amount() const { return amount_; }
    constexpr Unit unit() const { return unit_; }
    constexpr bool zero() const { return amount_ == 0; }

    Value operator+(const Value& other) const;
    Value operator-(const Value& other) const;
    Value& operator+=(const Value& other) { return *this = *this + other; }
    Value& operator-=(const Value& other) { return *this = *this - other; }

    /// Scales by an integer conversion rate into another unit.
    Value convert(std::uint64_t rate, Unit target) const;

    bool operator==(const Value& other) const = default;
    std::strong_ordering operator<=>(const Value& other) const;

private:
    std::uint64_t amount_ = 0;
    Unit unit_ = Unit::Channel;
};

std::string to_string(const Value& v);

struct Duration {
    std::uint64_t ticks = 0;
    auto operator<=>(const Duration&) const = default;
};

/// Simulation clock reading. Only ever moves forward within a run.
struct LogicalTime {
    std::uint64_t tick = 0;

    LogicalTime operator+(Duration d) const;
    auto operator<=>(const LogicalTime&) const = default;
};

enum class Role : std::uint8_t { Participant = 0, Bank = 1, Regulator = 2, Ledger = 3 };

std::string_view to_string(Role role);

struct PartyId {
    std::string name;
    Role role = Role::Participant;

    auto operator<=>(const PartyId&) const = default;
};

} // namespace hybridpay
