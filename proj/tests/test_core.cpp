#include <doctest.h>

#include <limits>

#include "hybridpay/codec.hpp"
#include "hybridpay/crypto.hpp"
#include "hybridpay/error.hpp"
#include "hybridpay/value.hpp"
#include "support.hpp"

using namespace hybridpay;

namespace {

Errc code_of(auto&& fn)
{
    try {
        fn();
    } catch (const ProtocolError& e) {
        return e.code();
    }
    FAIL("expected a ProtocolError");
    return Errc::Malformed;
}

} // namespace

TEST_SUITE("core")
{
    TEST_CASE("value arithmetic is checked")
    {
        CHECK(Value::channel(3) + Value::channel(4) == Value::channel(7));
        CHECK(Value::fiat(9) - Value::fiat(9) == Value::fiat(0));
        CHECK(code_of([] { (void)(Value::channel(1) - Value::channel(2)); }) == Errc::NegativeValue);
        CHECK(code_of([] { (void)(Value::channel(1) + Value::fiat(1)); }) == Errc::UnitMismatch);
        CHECK(code_of([] {
                  (void)(Value::channel(std::numeric_limits<std::uint64_t>::max()) + Value::channel(1));
              }) == Errc::ValueOverflow);
        CHECK(code_of([] { (void)(Value::channel(1) < Value::fiat(2)); }) == Errc::UnitMismatch);
        CHECK(Value::channel(10).convert(100, Unit::Fiat) == Value::fiat(1000));
        CHECK(code_of([] {
                  (void)Value::channel(std::numeric_limits<std::uint64_t>::max()).convert(2, Unit::Fiat);
              }) == Errc::ValueOverflow);
    }

    TEST_CASE("logical time only adds durations")
    {
        CHECK((LogicalTime{5} + Duration{3}).tick == 8);
        CHECK(LogicalTime{2} < LogicalTime{3});
    }

    TEST_CASE("sha256 matches published vectors")
    {
        CHECK(to_hex(sha256(std::string_view("abc"))) ==
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        CHECK(to_hex(sha256(std::string_view(""))) ==
              "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    TEST_CASE("hex round trip and rejection")
    {
        Bytes b{0x00, 0x7f, 0xff};
        CHECK(to_hex(b) == "007fff");
        CHECK(from_hex("007fff") == b);
        CHECK_FALSE(from_hex("0g").has_value());
        CHECK_FALSE(from_hex("abc").has_value());
    }

    TEST_CASE("signature schemes sign, verify and reject tampering")
    {
        for (const char* name : {"ed25519", "hmac-sha256"}) {
            CAPTURE(name);
            testing::World w(name);
            Bytes msg{1, 2, 3};
            auto sig = w.scheme->sign(w.alice, msg);
            CHECK(w.dir.verify(testing::kAlice, msg, sig));
            CHECK_FALSE(w.dir.verify(testing::kIngrid, msg, sig));
            Bytes other{1, 2, 4};
            CHECK_FALSE(w.dir.verify(testing::kAlice, other, sig));
            sig[0] ^= 1;
            CHECK_FALSE(w.dir.verify(testing::kAlice, msg, sig));
        }
        CHECK(code_of([] { (void)make_scheme("rsa"); }) == Errc::InvalidScenario);
    }

    TEST_CASE("keys are a pure function of scheme, owner and seed")
    {
        auto s = make_scheme("ed25519");
        auto a = generate_key(s, testing::kAlice, 1);
        auto b = generate_key(s, testing::kAlice, 1);
        auto c = generate_key(s, testing::kAlice, 2);
        auto d = generate_key(s, testing::kIngrid, 1);
        CHECK(a.publicKey == b.publicKey);
        CHECK(a.publicKey != c.publicKey);
        CHECK(a.publicKey != d.publicKey);
        CHECK(a.publicKey.size() == 32);
    }

    TEST_CASE("unknown signer never verifies")
    {
        testing::World w;
        PartyId mallory{"Mallory", Role::Participant};
        auto key = generate_key(w.scheme, mallory, 1);
        Bytes msg{9};
        CHECK_FALSE(w.dir.verify(mallory, msg, w.scheme->sign(key, msg)));
    }

    TEST_CASE("codec writes big-endian length-prefixed fields")
    {
        Writer w;
        w.u8(0xab);
        w.u32(0x01020304);
        w.u64(5);
        w.str("hi");
        w.value(Value::fiat(258));
        w.party(PartyId{"B", Role::Bank});
        const Bytes expected{0xab, 1, 2, 3, 4, 0, 0, 0, 0, 0, 0, 0, 5, 0, 0, 0, 2, 'h', 'i',
                             1,    0, 0, 0, 0, 0, 0, 1, 2, 0, 0, 0, 1, 'B', 1};
        CHECK(w.data() == expected);

        Reader r(w.data());
        CHECK(r.u8() == 0xab);
        CHECK(r.u32() == 0x01020304);
        CHECK(r.u64() == 5);
        CHECK(r.str() == "hi");
        CHECK(r.value() == Value::fiat(258));
        CHECK(r.party() == PartyId{"B", Role::Bank});
        CHECK(r.done());
    }

    TEST_CASE("reader is strict")
    {
        Bytes shortLen{0, 0, 0, 5, 'a'};
        Reader r1(shortLen);
        CHECK(code_of([&] { (void)r1.str(); }) == Errc::Malformed);

        Bytes badBool{2};
        Reader r2(badBool);
        CHECK(code_of([&] { (void)r2.boolean(); }) == Errc::Malformed);

        Bytes badUnit{7, 0, 0, 0, 0, 0, 0, 0, 1};
        Reader r3(badUnit);
        CHECK(code_of([&] { (void)r3.value(); }) == Errc::Malformed);

        Bytes extra{1, 2};
        Reader r4(extra);
        (void)r4.u8();
        CHECK(code_of([&] { r4.expect_done(); }) == Errc::Malformed);
    }
}
