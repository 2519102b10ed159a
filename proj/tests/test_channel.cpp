#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "hybridpay/channel.hpp"
#include "hybridpay/error.hpp"
#include "support.hpp"

using namespace hybridpay;
using namespace hybridpay::channel;
using namespace testing;

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

OpenedChannel open20_10(const World& w, std::uint64_t window = 10)
{
    return open_channel("c1", w.alice, w.ingrid, Value::channel(20), Value::channel(10), Duration{window});
}

ChannelState update(const World& w, const ChannelState& s, std::uint64_t a, std::uint64_t i)
{
    auto u = propose_update(s, Proposal{s.seq + 1, Value::channel(a), Value::channel(i), {}}, w.alice);
    return accept_update(s, u, w.ingrid, w.dir);
}

SignedMessage cert(const World& w, MessageKind kind, const std::string& session, const KeyPair& issuer)
{
    SignedMessage m;
    m.kind = kind;
    m.session = session;
    m.channel = "c1";
    m.body = CertificateBody{issuer.owner, Digest{}, Assertion::TransferTriggered, "o", Value::fiat(5)};
    return sign(issuer, m);
}

// Ingrid locks 5 until B_A certifies; release pays Alice, timeout refunds Ingrid.
Lock sample_lock(LogicalTime deadline)
{
    Lock l;
    l.id = "s1/payee";
    l.session = "s1";
    l.owner = kIngrid;
    l.amount = Value::channel(5);
    l.deadline = deadline;
    LockStage st;
    st.release = LockCondition::certificate_from({kBankA}, MessageKind::CERT1);
    st.onRelease = {Value::channel(5), Value::channel(0)};
    st.onTimeout = {Value::channel(0), Value::channel(5)};
    st.window = Duration{10};
    l.stages.push_back(st);
    return l;
}

ChannelState locked_state(const World& w, const ChannelState& s, LogicalTime deadline)
{
    auto u = propose_update(s, Proposal{s.seq + 1, s.balanceA, s.balanceI - Value::channel(5), {sample_lock(deadline)}},
                            w.alice);
    return accept_update(s, u, w.ingrid, w.dir);
}

} // namespace

TEST_SUITE("channel")
{
    TEST_CASE("open produces a both-signed seq 0 state")
    {
        World w;
        auto o = open20_10(w);
        CHECK(o.state.seq == 0);
        CHECK(o.state.capacity == Value::channel(30));
        CHECK(o.state.balanceA == Value::channel(20));
        CHECK(final_capable(o.state, w.dir));
        CHECK(o.anchor.status() == AnchorStatus::Open);
        CHECK(o.anchor.total_deposits() == Value::channel(30));
    }

    TEST_CASE("open rejects bad parties and deposits")
    {
        World w;
        CHECK(code_of([&] {
                  (void)open_channel("c", w.alice, w.alice, Value::channel(1), Value::channel(1), Duration{1});
              }) == Errc::InvalidParty);
        CHECK(code_of([&] {
                  (void)open_channel("c", w.alice, w.bankA, Value::channel(1), Value::channel(1), Duration{1});
              }) == Errc::InvalidParty);
        CHECK(code_of([&] {
                  (void)open_channel("c", w.alice, w.ingrid, Value::channel(0), Value::channel(1), Duration{1});
              }) == Errc::ZeroDeposit);
        CHECK(code_of([&] {
                  (void)open_channel("c", w.alice, w.ingrid, Value::fiat(1), Value::channel(1), Duration{1});
              }) == Errc::UnitMismatch);
    }

    TEST_CASE("ordinary update")
    {
        World w;
        auto s = update(w, open20_10(w).state, 10, 20);
        CHECK(s.seq == 1);
        CHECK(s.balanceA == Value::channel(10));
        CHECK(s.balanceI == Value::channel(20));
        CHECK(final_capable(s, w.dir));
    }

    TEST_CASE("update errors")
    {
        World w;
        auto s = open20_10(w).state;
        CHECK(code_of([&] {
                  (void)propose_update(s, Proposal{2, Value::channel(10), Value::channel(20), {}}, w.alice);
              }) == Errc::StaleSeq);
        CHECK(code_of([&] {
                  (void)propose_update(s, Proposal{1, Value::channel(10), Value::channel(21), {}}, w.alice);
              }) == Errc::ConservationViolation);
        CHECK(code_of([&] {
                  (void)propose_update(s, Proposal{1, Value::channel(10), Value::channel(20), {}}, w.bankA);
              }) == Errc::InvalidParty);

        auto u = propose_update(s, Proposal{1, Value::channel(10), Value::channel(20), {}}, w.alice);
        CHECK(code_of([&] { (void)accept_update(s, u, w.alice, w.dir); }) == Errc::InvalidParty);
        auto tampered = u;
        std::get<StateBody>(tampered.body).encodedState.back() ^= 1;
        CHECK(code_of([&] { (void)accept_update(s, tampered, w.ingrid, w.dir); }) == Errc::BadSignature);

        auto next = accept_update(s, u, w.ingrid, w.dir);
        CHECK(code_of([&] { (void)accept_update(next, u, w.ingrid, w.dir); }) == Errc::StaleSeq);

        auto busy = next;
        busy.activeSession = "s1";
        CHECK(code_of([&] {
                  (void)propose_update(busy, Proposal{2, Value::channel(10), Value::channel(20), {}}, w.alice);
              }) == Errc::SessionActive);
    }

    TEST_CASE("state encoding round-trips with locks")
    {
        World w;
        auto s = locked_state(w, open20_10(w).state, LogicalTime{9});
        s.activeSession = "s1";
        auto back = decode_state(encode_state(s));
        back.signatures = s.signatures;
        CHECK(back == s);
        auto bytes = encode_state(s);
        bytes.push_back(0);
        CHECK(code_of([&] { (void)decode_state(bytes); }) == Errc::Malformed);
    }

    TEST_CASE("lock release before the deadline, timeout at the deadline")
    {
        World w;
        auto s = locked_state(w, open20_10(w).state, LogicalTime{10});
        auto c1 = cert(w, MessageKind::CERT1, "s1", w.bankA);

        auto released = apply_lock_transition(s, "s1/payee", c1, LogicalTime{9}, w.dir);
        CHECK(released.locks.empty());
        CHECK(released.balanceA == Value::channel(25));
        CHECK(released.balanceI == Value::channel(5));
        CHECK(released.seq == s.seq + 1);
        CHECK(released.signatures.empty());

        // At the deadline a message no longer counts.
        CHECK(code_of([&] { (void)apply_lock_transition(s, "s1/payee", c1, LogicalTime{10}, w.dir); }) ==
              Errc::ConditionNotMet);
        CHECK(code_of([&] { (void)apply_lock_transition(s, "s1/payee", TimeoutFired{}, LogicalTime{9}, w.dir); }) ==
              Errc::ConditionNotMet);
        auto timedOut = apply_lock_transition(s, "s1/payee", TimeoutFired{}, LogicalTime{10}, w.dir);
        CHECK(timedOut.balanceA == Value::channel(20));
        CHECK(timedOut.balanceI == Value::channel(10));
        CHECK(code_of([&] { (void)apply_lock_transition(s, "nope", TimeoutFired{}, LogicalTime{10}, w.dir); }) ==
              Errc::UnknownLock);
    }

    TEST_CASE("only the registered issuer releases a lock")
    {
        World w;
        auto lock = sample_lock(LogicalTime{10});
        auto wrongIssuer = cert(w, MessageKind::CERT1, "s1", w.bankI);
        auto wrongKind = cert(w, MessageKind::CERT2, "s1", w.bankA);
        auto wrongSession = cert(w, MessageKind::CERT1, "s2", w.bankA);
        auto forged = cert(w, MessageKind::CERT1, "s1", w.bankA);
        std::get<CertificateBody>(forged.body).fiatAmount = Value::fiat(6);
        for (const auto* m : {&wrongIssuer, &wrongKind, &wrongSession, &forged})
            CHECK(evaluate_lock(lock, *m, LogicalTime{1}, w.dir).kind == LockOutcome::Kind::NoMatch);
    }

    TEST_CASE("stage advance and timer reset")
    {
        World w;
        Lock l = sample_lock(LogicalTime{10});
        l.stages[0].release = LockCondition::never();
        l.stages[0].advance = LockCondition::certificate_from({kBankA}, MessageKind::CERT1);
        l.stages[0].reset = LockCondition::certificate_from({kBankA}, MessageKind::CERT2);
        LockStage second = l.stages[0];
        second.release = LockCondition::certificate_from({kBankI}, MessageKind::CERT2);
        second.advance = LockCondition::never();
        second.reset = LockCondition::never();
        second.window = Duration{15};
        l.stages.push_back(second);

        auto reset = evaluate_lock(l, cert(w, MessageKind::CERT2, "s1", w.bankA), LogicalTime{4}, w.dir);
        CHECK(reset.kind == LockOutcome::Kind::Reset);
        CHECK(reset.lock.deadline == LogicalTime{14});

        auto adv = evaluate_lock(l, cert(w, MessageKind::CERT1, "s1", w.bankA), LogicalTime{5}, w.dir);
        CHECK(adv.kind == LockOutcome::Kind::Advanced);
        CHECK(adv.lock.stage == 1);
        CHECK(adv.lock.deadline == LogicalTime{20});

        auto rel = evaluate_lock(adv.lock, cert(w, MessageKind::CERT2, "s1", w.bankI), LogicalTime{19}, w.dir);
        CHECK(rel.kind == LockOutcome::Kind::Released);
    }

    TEST_CASE("random update walks conserve value")
    {
        World w("hmac-sha256");
        std::mt19937_64 rng(12345);
        for (int run = 0; run < 20; ++run) {
            const std::uint64_t a0 = 1 + rng() % 50;
            const std::uint64_t i0 = 1 + rng() % 50;
            auto s = open_channel("c1", w.alice, w.ingrid, Value::channel(a0), Value::channel(i0), Duration{5}).state;
            for (int step = 0; step < 25; ++step) {
                const std::uint64_t a = rng() % (a0 + i0 + 1);
                const std::uint64_t bogus = rng() % 4 == 0 ? 1 : 0;
                Proposal p{s.seq + 1, Value::channel(a), Value::channel(a0 + i0 - a + bogus), {}};
                if (bogus) {
                    CHECK(code_of([&] { (void)propose_update(s, p, w.alice); }) == Errc::ConservationViolation);
                    continue;
                }
                s = accept_update(s, propose_update(s, p, w.alice), w.ingrid, w.dir);
                CHECK(conserves(s));
                CHECK(s.balanceA + s.balanceI == s.capacity);
            }
        }
    }

    TEST_CASE("anchor: first submission opens the window, highest seq wins")
    {
        World w;
        auto o = open20_10(w, 10);
        auto s1 = update(w, o.state, 10, 20);
        auto s2 = update(w, s1, 15, 15);

        o.anchor.submit(s1, LogicalTime{3}, w.dir);
        CHECK(o.anchor.status() == AnchorStatus::Disputed);
        CHECK(o.anchor.window_end() == LogicalTime{13});
        o.anchor.submit(o.state, LogicalTime{4}, w.dir);
        CHECK(o.anchor.latest_seen_seq() == 1);
        o.anchor.submit(s2, LogicalTime{13}, w.dir); // window end is inclusive
        CHECK(o.anchor.latest_seen_seq() == 2);
        CHECK(code_of([&] { o.anchor.submit(s2, LogicalTime{14}, w.dir); }) == Errc::WindowExpired);
        CHECK(code_of([&] { (void)o.anchor.close(LogicalTime{12}, w.dir); }) == Errc::DisputeWindowOpen);
        auto p = o.anchor.close(LogicalTime{13}, w.dir);
        CHECK(p == Payout{Value::channel(15), Value::channel(15), 2});
        CHECK(o.anchor.status() == AnchorStatus::Closed);
        CHECK(code_of([&] { o.anchor.submit(s2, LogicalTime{15}, w.dir); }) == Errc::AlreadyClosed);
    }

    TEST_CASE("anchor refuses unsigned, half-signed and foreign states")
    {
        World w;
        auto o = open20_10(w);
        auto u = propose_update(o.state, Proposal{1, Value::channel(10), Value::channel(20), {}}, w.alice);
        auto half = decode_state(std::get<StateBody>(u.body).encodedState);
        half.signatures = u.signatures;
        CHECK(code_of([&] { o.anchor.submit(half, LogicalTime{1}, w.dir); }) == Errc::BadSignature);
        auto unsigned_ = half;
        unsigned_.signatures.clear();
        CHECK(code_of([&] { o.anchor.submit(unsigned_, LogicalTime{1}, w.dir); }) == Errc::BadSignature);

        auto other = open_channel("c2", w.alice, w.ingrid, Value::channel(20), Value::channel(10), Duration{10});
        CHECK(code_of([&] { o.anchor.submit(other.state, LogicalTime{1}, w.dir); }) == Errc::InvalidParty);
        CHECK(code_of([&] { (void)o.anchor.close(LogicalTime{100}, w.dir); }) == Errc::DisputeWindowOpen);
    }

    TEST_CASE("anchor resolves locks from evidence or by timeout")
    {
        World w;
        {
            auto o = open20_10(w, 5);
            auto s = locked_state(w, o.state, LogicalTime{30});
            o.anchor.submit(s, LogicalTime{2}, w.dir);
            o.anchor.submit_evidence(cert(w, MessageKind::CERT1, "s1", w.bankA), LogicalTime{3}, w.dir);
            CHECK(o.anchor.settlement_tick(w.dir) == LogicalTime{7});
            auto p = o.anchor.close(LogicalTime{7}, w.dir);
            CHECK(p.toA == Value::channel(25));
            CHECK(p.toI == Value::channel(5));
        }
        {
            auto o = open20_10(w, 5);
            auto s = locked_state(w, o.state, LogicalTime{30});
            o.anchor.submit(s, LogicalTime{2}, w.dir);
            // Without evidence the lock can only time out, so settlement waits for its deadline.
            CHECK(o.anchor.settlement_tick(w.dir) == LogicalTime{30});
            CHECK(code_of([&] { (void)o.anchor.close(LogicalTime{7}, w.dir); }) == Errc::DisputeWindowOpen);
            auto p = o.anchor.close(LogicalTime{30}, w.dir);
            CHECK(p.toA == Value::channel(20));
            CHECK(p.toI == Value::channel(10));
        }
        {
            auto o = open20_10(w, 5);
            auto s = locked_state(w, o.state, LogicalTime{4});
            o.anchor.submit(s, LogicalTime{2}, w.dir);
            // Evidence arriving after the deadline does not count.
            o.anchor.submit_evidence(cert(w, MessageKind::CERT1, "s1", w.bankA), LogicalTime{5}, w.dir);
            auto p = o.anchor.close(LogicalTime{7}, w.dir);
            CHECK(p.toI == Value::channel(10));
        }
    }
}
