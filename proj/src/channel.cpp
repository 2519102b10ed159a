#include "hybridpay/channel.hpp"

#include <algorithm>

#include "hybridpay/codec.hpp"

namespace hybridpay::channel {

namespace {

void write_condition(Writer& w, const LockCondition& c)
{
    w.u8(static_cast<std::uint8_t>(c.type));
    w.u32(static_cast<std::uint32_t>(c.senders.size()));
    for (const auto& s : c.senders)
        w.party(s);
    w.u8(static_cast<std::uint8_t>(c.kind));
}

LockCondition read_condition(Reader& r)
{
    LockCondition c;
    auto type = r.u8();
    if (type > 2)
        fail(Errc::Malformed, "unknown lock condition type");
    c.type = static_cast<LockCondition::Type>(type);
    auto n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i)
        c.senders.push_back(r.party());
    c.kind = static_cast<MessageKind>(r.u8());
    if (to_string(c.kind) == "UNKNOWN")
        fail(Errc::Malformed, "unknown message kind in lock condition");
    return c;
}

void write_disposition(Writer& w, const Disposition& d)
{
    w.value(d.toA);
    w.value(d.toI);
}

Disposition read_disposition(Reader& r)
{
    Disposition d;
    d.toA = r.value();
    d.toI = r.value();
    return d;
}

bool is_participant(const ChannelState& state, const PartyId& p)
{
    return p == state.partyA || p == state.partyI;
}

const PartyId& other_party(const ChannelState& state, const PartyId& p)
{
    return p == state.partyA ? state.partyI : state.partyA;
}

void credit(ChannelState& state, const Disposition& d)
{
    state.balanceA += d.toA;
    state.balanceI += d.toI;
}

std::vector<PartyId> sorted(std::vector<PartyId> parties)
{
    std::sort(parties.begin(), parties.end());
    parties.erase(std::unique(parties.begin(), parties.end()), parties.end());
    return parties;
}

} // namespace

LockCondition LockCondition::certificate_from(std::vector<PartyId> senders, MessageKind kind)
{
    return {Type::CertificateFrom, sorted(std::move(senders)), kind};
}

LockCondition LockCondition::counterparty_signed(std::vector<PartyId> senders, MessageKind kind)
{
    return {Type::CounterpartySigned, sorted(std::move(senders)), kind};
}

Value ChannelState::locked() const
{
    Value total = Value::channel(0);
    for (const auto& lock : locks)
        total += lock.amount;
    return total;
}

const Lock* ChannelState::find_lock(std::string_view id) const
{
    auto it = std::find_if(locks.begin(), locks.end(), [&](const Lock& l) { return l.id == id; });
    return it == locks.end() ? nullptr : &*it;
}

Bytes encode_state(const ChannelState& s)
{
    Writer w;
    w.str(s.channelId);
    w.party(s.partyA);
    w.party(s.partyI);
    w.value(s.capacity);
    w.u64(s.seq);
    w.value(s.balanceA);
    w.value(s.balanceI);
    w.boolean(s.activeSession.has_value());
    if (s.activeSession)
        w.str(*s.activeSession);
    w.u32(static_cast<std::uint32_t>(s.locks.size()));
    for (const auto& lock : s.locks) {
        w.str(lock.id);
        w.str(lock.session);
        w.party(lock.owner);
        w.value(lock.amount);
        w.time(lock.deadline);
        w.u32(static_cast<std::uint32_t>(lock.stage));
        w.u32(static_cast<std::uint32_t>(lock.stages.size()));
        for (const auto& st : lock.stages) {
            write_condition(w, st.release);
            write_disposition(w, st.onRelease);
            write_disposition(w, st.onTimeout);
            w.duration(st.window);
            write_condition(w, st.reset);
            write_condition(w, st.advance);
        }
    }
    return std::move(w).take();
}

ChannelState decode_state(ByteView bytes)
{
    Reader r(bytes);
    ChannelState s;
    s.channelId = r.str();
    s.partyA = r.party();
    s.partyI = r.party();
    s.capacity = r.value();
    s.seq = r.u64();
    s.balanceA = r.value();
    s.balanceI = r.value();
    if (r.boolean())
        s.activeSession = r.str();
    auto nlocks = r.u32();
    for (std::uint32_t i = 0; i < nlocks; ++i) {
        Lock lock;
        lock.id = r.str();
        lock.session = r.str();
        lock.owner = r.party();
        lock.amount = r.value();
        lock.deadline = r.time();
        lock.stage = r.u32();
        auto nstages = r.u32();
        for (std::uint32_t j = 0; j < nstages; ++j) {
            LockStage st;
            st.release = read_condition(r);
            st.onRelease = read_disposition(r);
            st.onTimeout = read_disposition(r);
            st.window = r.duration();
            st.reset = read_condition(r);
            st.advance = read_condition(r);
            lock.stages.push_back(std::move(st));
        }
        s.locks.push_back(std::move(lock));
    }
    r.expect_done();
    return s;
}

bool conserves(const ChannelState& s)
{
    try {
        check_state(s);
        return true;
    } catch (const ProtocolError&) {
        return false;
    }
}

void check_state(const ChannelState& s)
{
    for (const auto* v : {&s.capacity, &s.balanceA, &s.balanceI})
        if (v->unit() != Unit::Channel)
            fail(Errc::UnitMismatch, "channel state holds a non-channel value");
    if (s.balanceA + s.balanceI + s.locked() != s.capacity)
        fail(Errc::ConservationViolation, "balances " + to_string(s.balanceA) + " + " + to_string(s.balanceI) +
                                              " + locked " + to_string(s.locked()) + " != capacity " +
                                              to_string(s.capacity));
    for (const auto& lock : s.locks) {
        if (lock.amount.zero())
            fail(Errc::ConservationViolation, "lock " + lock.id + " has zero amount");
        if (lock.stage >= lock.stages.size())
            fail(Errc::ConservationViolation, "lock " + lock.id + " has no current stage");
        for (const auto& st : lock.stages)
            if (st.onRelease.total() != lock.amount || st.onTimeout.total() != lock.amount)
                fail(Errc::ConservationViolation, "lock " + lock.id + " dispositions do not credit its amount");
    }
}

SignedMessage as_update(const ChannelState& state, const PartyId& proposer)
{
    SignedMessage m;
    m.kind = MessageKind::CHANNEL_UPDATE;
    m.session = state.activeSession.value_or("");
    m.channel = state.channelId;
    m.body = StateBody{proposer, other_party(state, proposer), encode_state(state)};
    m.signatures = state.signatures;
    return m;
}

bool final_capable(const ChannelState& state, const KeyDirectory& directory)
{
    if (state.signatures.size() != 2 || !is_participant(state, state.signatures[0].signer))
        return false;
    return verify(as_update(state, state.signatures[0].signer), directory);
}

ChannelState countersign(const ChannelState& state, const KeyPair& key)
{
    if (!is_participant(state, key.owner))
        fail(Errc::InvalidParty, key.owner.name + " is not a channel participant");
    check_state(state);
    const PartyId& proposer = state.signatures.empty() ? key.owner : state.signatures[0].signer;
    auto signed_msg = sign(key, as_update(state, proposer));
    ChannelState out = state;
    out.signatures = std::move(signed_msg.signatures);
    return out;
}

OpenedChannel open_channel(std::string channelId, const KeyPair& keyA, const KeyPair& keyI, Value depositA,
                           Value depositI, Duration disputeWindow)
{
    const auto& a = keyA.owner;
    const auto& i = keyI.owner;
    if (a.name == i.name || a.role != Role::Participant || i.role != Role::Participant)
        fail(Errc::InvalidParty, "a channel needs two distinct channel participants");
    if (depositA.unit() != Unit::Channel || depositI.unit() != Unit::Channel)
        fail(Errc::UnitMismatch, "deposits must be in channel units");
    if (depositA.zero() || depositI.zero())
        fail(Errc::ZeroDeposit, "both deposits must be positive");

    ChannelState s;
    s.channelId = channelId;
    s.partyA = a;
    s.partyI = i;
    s.capacity = depositA + depositI;
    s.balanceA = depositA;
    s.balanceI = depositI;
    s = countersign(countersign(s, keyA), keyI);
    return {std::move(s), LedgerAnchor(std::move(channelId), a, i, depositA, depositI, disputeWindow)};
}

SignedMessage propose_update(const ChannelState& state, const Proposal& proposal, const KeyPair& proposer)
{
    if (!is_participant(state, proposer.owner))
        fail(Errc::InvalidParty, proposer.owner.name + " is not a channel participant");
    if (state.activeSession)
        fail(Errc::SessionActive, "ordinary updates are paused while session " + *state.activeSession + " runs");
    if (proposal.seq != state.seq + 1)
        fail(Errc::StaleSeq, "proposed seq " + std::to_string(proposal.seq) + " after " + std::to_string(state.seq));

    ChannelState next = state;
    next.seq = proposal.seq;
    next.balanceA = proposal.balanceA;
    next.balanceI = proposal.balanceI;
    next.locks = proposal.locks;
    next.signatures.clear();
    check_state(next);
    return sign(proposer, as_update(next, proposer.owner));
}

ChannelState accept_update(const ChannelState& state, const SignedMessage& update, const KeyPair& acceptor,
                           const KeyDirectory& directory)
{
    const auto* body = body_as<StateBody>(update);
    if (update.kind != MessageKind::CHANNEL_UPDATE || !body || update.signatures.size() != 1 ||
        !verify_partial(update, directory))
        fail(Errc::BadSignature, "update is not a correctly half-signed CHANNEL_UPDATE");
    if (body->counterparty != acceptor.owner)
        fail(Errc::InvalidParty, acceptor.owner.name + " is not the update's counterparty");

    ChannelState next;
    try {
        next = decode_state(body->encodedState);
    } catch (const ProtocolError&) {
        fail(Errc::BadSignature, "update carries an undecodable state");
    }
    if (next.channelId != state.channelId || next.partyA != state.partyA || next.partyI != state.partyI ||
        next.capacity != state.capacity)
        fail(Errc::ConservationViolation, "update changes the channel's identity or capacity");
    check_state(next);
    if (next.seq != state.seq + 1)
        fail(Errc::StaleSeq, "update seq " + std::to_string(next.seq) + " does not follow " + std::to_string(state.seq));

    next.signatures = update.signatures;
    auto countersigned = sign(acceptor, as_update(next, body->proposer));
    next.signatures = std::move(countersigned.signatures);
    return next;
}

bool satisfies(const LockCondition& condition, const std::string& session, const SignedMessage& message,
               const KeyDirectory& directory)
{
    if (condition.type == LockCondition::Type::Never || message.kind != condition.kind || message.session != session)
        return false;
    if (!verify(message, directory))
        return false;
    const PartyId& sender = message.signatures.back().signer;
    if (condition.type == LockCondition::Type::CertificateFrom) {
        const auto* cert = body_as<CertificateBody>(message);
        if (!cert || cert->issuer != sender)
            return false;
    }
    return std::binary_search(condition.senders.begin(), condition.senders.end(), sender);
}

LockOutcome evaluate_lock(const Lock& lock, const LockTrigger& trigger, LogicalTime now,
                          const KeyDirectory& directory)
{
    LockOutcome out;
    out.lock = lock;
    const auto& stage = lock.current();
    if (std::holds_alternative<TimeoutFired>(trigger)) {
        if (now >= lock.deadline) {
            out.kind = LockOutcome::Kind::TimedOut;
            out.credited = stage.onTimeout;
        }
        return out;
    }
    // Messages only count before the deadline; at or after it only the timeout applies.
    if (now >= lock.deadline)
        return out;
    const auto& message = std::get<SignedMessage>(trigger);
    if (satisfies(stage.release, lock.session, message, directory)) {
        out.kind = LockOutcome::Kind::Released;
        out.credited = stage.onRelease;
    } else if (lock.stage + 1 < lock.stages.size() && satisfies(stage.advance, lock.session, message, directory)) {
        out.kind = LockOutcome::Kind::Advanced;
        out.lock.stage += 1;
        out.lock.deadline = now + out.lock.current().window;
    } else if (satisfies(stage.reset, lock.session, message, directory)) {
        out.kind = LockOutcome::Kind::Reset;
        out.lock.deadline = now + stage.window;
    }
    return out;
}

ChannelState apply_lock_transition(const ChannelState& state, std::string_view lockId, const LockTrigger& trigger,
                                   LogicalTime now, const KeyDirectory& directory)
{
    auto it = std::find_if(state.locks.begin(), state.locks.end(), [&](const Lock& l) { return l.id == lockId; });
    if (it == state.locks.end())
        fail(Errc::UnknownLock, "no lock '" + std::string(lockId) + "'");
    auto outcome = evaluate_lock(*it, trigger, now, directory);

    ChannelState next = state;
    auto pos = next.locks.begin() + (it - state.locks.begin());
    switch (outcome.kind) {
    case LockOutcome::Kind::NoMatch:
        fail(Errc::ConditionNotMet, "trigger does not satisfy lock '" + std::string(lockId) + "'");
    case LockOutcome::Kind::Released:
    case LockOutcome::Kind::TimedOut: {
        std::string session = pos->session;
        next.locks.erase(pos);
        credit(next, outcome.credited);
        bool sessionLocksLeft = std::any_of(next.locks.begin(), next.locks.end(),
                                            [&](const Lock& l) { return l.session == session; });
        if (!sessionLocksLeft && next.activeSession == session)
            next.activeSession.reset();
        break;
    }
    case LockOutcome::Kind::Advanced:
    case LockOutcome::Kind::Reset:
        *pos = outcome.lock;
        break;
    }
    next.seq += 1;
    next.signatures.clear();
    check_state(next);
    return next;
}

std::string_view to_string(AnchorStatus status)
{
    switch (status) {
    case AnchorStatus::Open: return "open";
    case AnchorStatus::Disputed: return "disputed";
    case AnchorStatus::Closed: return "closed";
    }
    return "unknown";
}

LedgerAnchor::LedgerAnchor(std::string channelId, PartyId partyA, PartyId partyI, Value depositA, Value depositI,
                           Duration disputeWindow)
    : channelId_(std::move(channelId)), partyA_(std::move(partyA)), partyI_(std::move(partyI)), depositA_(depositA),
      depositI_(depositI), disputeWindow_(disputeWindow)
{
}

void LedgerAnchor::submit(const ChannelState& state, LogicalTime now, const KeyDirectory& directory)
{
    if (status_ == AnchorStatus::Closed)
        fail(Errc::AlreadyClosed, "channel " + channelId_ + " is closed");
    if (state.channelId != channelId_ || state.partyA != partyA_ || state.partyI != partyI_)
        fail(Errc::InvalidParty, "state belongs to a different channel");
    if (!final_capable(state, directory))
        fail(Errc::BadSignature, "submitted state is not signed by both participants");
    check_state(state);
    if (state.capacity != total_deposits())
        fail(Errc::ConservationViolation, "state capacity differs from the anchored deposits");

    if (status_ == AnchorStatus::Open) {
        status_ = AnchorStatus::Disputed;
        windowEnd_ = now + disputeWindow_;
        best_ = state;
        latestSeenSeq_ = state.seq;
        return;
    }
    if (now > *windowEnd_)
        fail(Errc::WindowExpired, "dispute window ended at tick " + std::to_string(windowEnd_->tick));
    if (state.seq > latestSeenSeq_) {
        best_ = state;
        latestSeenSeq_ = state.seq;
    }
}

void LedgerAnchor::submit_evidence(const SignedMessage& message, LogicalTime now, const KeyDirectory& directory)
{
    if (status_ == AnchorStatus::Closed)
        fail(Errc::AlreadyClosed, "channel " + channelId_ + " is closed");
    if (!verify(message, directory))
        fail(Errc::BadSignature, "evidence does not verify");
    evidence_.push_back({now, message});
}

Payout LedgerAnchor::resolve(const KeyDirectory& directory, LogicalTime& settleAt) const
{
    Payout payout{best_->balanceA, best_->balanceI, best_->seq};
    for (const auto& lock : best_->locks) {
        Lock current = lock;
        bool resolved = false;
        for (const auto& e : evidence_) {
            auto outcome = evaluate_lock(current, e.message, e.at, directory);
            if (outcome.kind == LockOutcome::Kind::Released) {
                payout.toA += outcome.credited.toA;
                payout.toI += outcome.credited.toI;
                resolved = true;
                break;
            }
            if (outcome.kind != LockOutcome::Kind::NoMatch)
                current = outcome.lock;
        }
        if (!resolved) {
            const auto& d = current.current().onTimeout;
            payout.toA += d.toA;
            payout.toI += d.toI;
            settleAt = std::max(settleAt, current.deadline);
        }
    }
    return payout;
}

std::optional<LogicalTime> LedgerAnchor::settlement_tick(const KeyDirectory& directory) const
{
    if (status_ != AnchorStatus::Disputed)
        return std::nullopt;
    LogicalTime at = *windowEnd_;
    resolve(directory, at);
    return at;
}

Payout LedgerAnchor::close(LogicalTime now, const KeyDirectory& directory)
{
    if (status_ == AnchorStatus::Closed)
        fail(Errc::AlreadyClosed, "channel " + channelId_ + " is already closed");
    if (status_ == AnchorStatus::Open)
        fail(Errc::DisputeWindowOpen, "no state has been submitted");
    LogicalTime at = *windowEnd_;
    auto payout = resolve(directory, at);
    if (now < at)
        fail(Errc::DisputeWindowOpen, "close before settlement tick " + std::to_string(at.tick));
    if (payout.toA + payout.toI != total_deposits())
        fail(Errc::ConservationViolation, "payout does not distribute the deposits");
    status_ = AnchorStatus::Closed;
    payout_ = payout;
    return payout;
}

Payout dispute_and_close(LedgerAnchor& anchor, std::span<const Submission> submissions,
                         const KeyDirectory& directory)
{
    for (const auto& s : submissions)
        anchor.submit(s.state, s.at, directory);
    auto at = anchor.settlement_tick(directory);
    if (!at)
        fail(Errc::DisputeWindowOpen, "nothing submitted");
    return anchor.close(*at, directory);
}

} // namespace hybridpay::channel
