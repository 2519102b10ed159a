#include "hybridpay/codec.hpp"

#include <limits>

namespace hybridpay {

void Writer::u32(std::uint32_t v)
{
    for (int shift = 24; shift >= 0; shift -= 8)
        out_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void Writer::u64(std::uint64_t v)
{
    for (int shift = 56; shift >= 0; shift -= 8)
        out_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void Writer::bytes(ByteView v)
{
    if (v.size() > std::numeric_limits<std::uint32_t>::max())
        fail(Errc::Malformed, "byte string too long to encode");
    u32(static_cast<std::uint32_t>(v.size()));
    out_.insert(out_.end(), v.begin(), v.end());
}

void Writer::str(std::string_view v)
{
    bytes(ByteView(reinterpret_cast<const std::uint8_t*>(v.data()), v.size()));
}

void Writer::value(const Value& v)
{
    u8(static_cast<std::uint8_t>(v.unit()));
    u64(v.amount());
}

void Writer::party(const PartyId& p)
{
    str(p.name);
    u8(static_cast<std::uint8_t>(p.role));
}

ByteView Reader::take(std::size_t n)
{
    if (in_.size() - pos_ < n)
        fail(Errc::Malformed, "truncated input");
    auto view = in_.subspan(pos_, n);
    pos_ += n;
    return view;
}

std::uint8_t Reader::u8() { return take(1)[0]; }

std::uint32_t Reader::u32()
{
    std::uint32_t v = 0;
    for (auto b : take(4))
        v = v << 8 | b;
    return v;
}

std::uint64_t Reader::u64()
{
    std::uint64_t v = 0;
    for (auto b : take(8))
        v = v << 8 | b;
    return v;
}

bool Reader::boolean()
{
    auto v = u8();
    if (v > 1)
        fail(Errc::Malformed, "boolean out of range");
    return v == 1;
}

Bytes Reader::bytes()
{
    auto n = u32();
    auto view = take(n);
    return Bytes(view.begin(), view.end());
}

std::string Reader::str()
{
    auto n = u32();
    auto view = take(n);
    return std::string(view.begin(), view.end());
}

Digest Reader::digest()
{
    Digest d{};
    auto view = take(d.size());
    std::copy(view.begin(), view.end(), d.begin());
    return d;
}

Value Reader::value()
{
    auto unit = u8();
    if (unit > 1)
        fail(Errc::Malformed, "unknown value unit");
    return {u64(), static_cast<Unit>(unit)};
}

PartyId Reader::party()
{
    auto name = str();
    auto role = u8();
    if (role > 3)
        fail(Errc::Malformed, "unknown party role");
    return {std::move(name), static_cast<Role>(role)};
}

void Reader::expect_done() const
{
    if (!done())
        fail(Errc::Malformed, "trailing bytes after message");
}

} // namespace hybridpay
