#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "hybridpay/crypto.hpp"
#include "hybridpay/value.hpp"

namespace hybridpay {

/// Canonical big-endian, length-prefixed encoder. Layout is documented in
/// docs/serialization.md and must not change without bumping the version byte.
class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void boolean(bool v) { u8(v ? 1 : 0); }
    void bytes(ByteView v);
    void str(std::string_view v);
    void digest(const Digest& d) { out_.insert(out_.end(), d.begin(), d.end()); }
    void value(const Value& v);
    void time(LogicalTime t) { u64(t.tick); }
    void duration(Duration d) { u64(d.ticks); }
    void party(const PartyId& p);

    const Bytes& data() const& { return out_; }
    Bytes take() && { return std::move(out_); }

private:
    Bytes out_;
};

/// Strict decoder; every malformed input raises Errc::Malformed.
class Reader {
public:
    explicit Reader(ByteView in) : in_(in) {}

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    bool boolean();
    Bytes bytes();
    std::string str();
    Digest digest();
    Value value();
    LogicalTime time() { return {u64()}; }
    Duration duration() { return {u64()}; }
    PartyId party();

    bool done() const { return pos_ == in_.size(); }
    void expect_done() const;

private:
    ByteView take(std::size_t n);

    ByteView in_;
    std::size_t pos_ = 0;
};

} // namespace hybridpay
