#include "hybridpay/rebalance.hpp"

#include <algorithm>

namespace hybridpay::rebalance {

using channel::ChannelState;
using channel::Disposition;
using channel::Lock;
using channel::LockCondition;
using channel::LockStage;

namespace {

Value balance_of(const ChannelState& ch, const PartyId& p)
{
    return p == ch.partyA ? ch.balanceA : ch.balanceI;
}

void debit(ChannelState& ch, const PartyId& p, Value amount)
{
    if (p == ch.partyA)
        ch.balanceA -= amount;
    else
        ch.balanceI -= amount;
}

/// Disposition expressed in payer/payee terms.
Disposition split(const RebalanceSession& s, Value toPayer, Value toPayee)
{
    return s.payerIsA ? Disposition{toPayer, toPayee} : Disposition{toPayee, toPayer};
}

bool is_settling(MessageKind kind)
{
    return kind == MessageKind::CERT1 || kind == MessageKind::CERT2 || kind == MessageKind::M_A1I1BA1BI1;
}

const PartyId& issuer_of(const SignedMessage& m)
{
    if (const auto* cert = body_as<CertificateBody>(m))
        return cert->issuer;
    return m.signatures.back().signer;
}

bool registered(const RebalanceSession& s, const PartyId& p)
{
    return std::find(s.registeredSources.begin(), s.registeredSources.end(), p) != s.registeredSources.end();
}

LockCondition with_senders(LockCondition c, const std::vector<PartyId>& senders)
{
    if (c.type == LockCondition::Type::Never)
        return c;
    return c.type == LockCondition::Type::CertificateFrom ? LockCondition::certificate_from(senders, c.kind)
                                                          : LockCondition::counterparty_signed(senders, c.kind);
}

/// Applies one trigger to every lock of the session.
ChannelState apply_to_session_locks(const RebalanceSession& s, const ChannelState& ch,
                                    const channel::LockTrigger& trigger, LogicalTime now, const KeyDirectory& dir)
{
    std::vector<std::string> ids;
    for (const auto& lock : ch.locks)
        if (lock.session == s.sessionId)
            ids.push_back(lock.id);
    ChannelState out = ch;
    for (const auto& id : ids)
        out = channel::apply_lock_transition(out, id, trigger, now, dir);
    return out;
}

void finish(RebalanceSession& s, Phase phase)
{
    s.phase = phase;
    if (is_terminal(phase)) {
        s.resolution = phase;
        s.deadline.reset();
    }
}

} // namespace

std::string_view to_string(Phase phase)
{
    switch (phase) {
    case Phase::Proposed: return "PROPOSED";
    case Phase::AcceptedLocked: return "ACCEPTED_LOCKED";
    case Phase::TransferTriggered: return "TRANSFER_TRIGGERED";
    case Phase::AwaitingReceipt: return "AWAITING_RECEIPT";
    case Phase::Settled: return "SETTLED";
    case Phase::SettledWithCompensation: return "SETTLED_WITH_COMPENSATION";
    case Phase::Reverted: return "REVERTED";
    case Phase::Disputed: return "DISPUTED";
    }
    return "UNKNOWN";
}

std::optional<Phase> phase_from_string(std::string_view name)
{
    for (int i = 0; i <= static_cast<int>(Phase::Disputed); ++i)
        if (to_string(static_cast<Phase>(i)) == name)
            return static_cast<Phase>(i);
    return std::nullopt;
}

bool is_terminal(Phase phase)
{
    return phase == Phase::Settled || phase == Phase::SettledWithCompensation || phase == Phase::Reverted ||
           phase == Phase::Disputed;
}

bool edge_allowed(Phase from, Phase to)
{
    if (from == to || to == Phase::Disputed)
        return true;
    switch (from) {
    case Phase::Proposed: return to == Phase::AcceptedLocked || to == Phase::Reverted;
    case Phase::AcceptedLocked:
        return to == Phase::Settled || to == Phase::AwaitingReceipt || to == Phase::TransferTriggered ||
               to == Phase::Reverted;
    case Phase::TransferTriggered:
        return to == Phase::Settled || to == Phase::AwaitingReceipt || to == Phase::Reverted;
    case Phase::AwaitingReceipt: return to == Phase::Settled || to == Phase::SettledWithCompensation;
    default: return false;
    }
}

Initiated initiate(const ChannelState& ch, const SessionParams& params, const KeyPair& payer, LogicalTime now)
{
    if (payer.owner != ch.partyA && payer.owner != ch.partyI)
        fail(Errc::InvalidParty, payer.owner.name + " is not a participant of " + ch.channelId);
    if (ch.activeSession)
        fail(Errc::SessionAlreadyActive, "channel already runs session " + *ch.activeSession);
    const PartyId& payee = payer.owner == ch.partyA ? ch.partyI : ch.partyA;
    if (params.amount.zero())
        fail(Errc::AmountExceedsBalance, "re-balance amount must be positive");
    if (params.amount > balance_of(ch, payee))
        fail(Errc::AmountExceedsBalance, "amount " + to_string(params.amount) + " exceeds " + payee.name +
                                             "'s balance " + to_string(balance_of(ch, payee)));

    RebalanceSession s;
    s.sessionId = params.sessionId;
    s.channelId = ch.channelId;
    s.payerIsA = payer.owner == ch.partyA;
    s.irreversibleAfter = params.irreversibleAfter;
    auto& t = s.terms;
    t.payer = payer.owner;
    t.payee = payee;
    t.payerBank = params.payerBank;
    t.payeeBank = params.payeeBank;
    t.amount = params.amount;
    t.fiatAmount = params.amount.convert(params.fiatRate, Unit::Fiat);
    t.collateralPayer = params.collateralPayer;
    t.collateralPayee = params.collateralPayee;
    t.alternative = params.alternative;
    t.receiptStage = params.receiptStage;
    t.mode = params.mode;
    t.baseSeq = ch.seq;
    t.proposedAt = now;
    t.orderExpiry = now + params.deadlines.initiationTimeout;
    t.deadlines = params.deadlines;
    t.policy = params.policy;
    t.method = params.method;

    SignedMessage m;
    m.kind = MessageKind::M_A1;
    m.session = s.sessionId;
    m.channel = ch.channelId;
    m.body = t;
    m = sign(payer, m);

    s.phase = Phase::Proposed;
    s.deadline = t.orderExpiry;
    s.transcript.push_back(m);
    return {std::move(m), std::move(s)};
}

SignedMessage propose_registration(const RebalanceSession& session, std::vector<PartyId> sources,
                                   const KeyPair& proposer)
{
    const PartyId& other = proposer.owner == session.payer() ? session.payee() : session.payer();
    SignedMessage m;
    m.kind = MessageKind::REGISTRATION;
    m.session = session.sessionId;
    m.channel = session.channelId;
    m.body = RegistrationBody{proposer.owner, other, std::move(sources)};
    return sign(proposer, m);
}

Step register_sources(const RebalanceSession& session, const ChannelState& ch, const SignedMessage& registration,
                      const KeyDirectory& directory)
{
    const auto* body = body_as<RegistrationBody>(registration);
    if (registration.kind != MessageKind::REGISTRATION || !body || registration.session != session.sessionId)
        fail(Errc::WrongSession, "not a registration for session " + session.sessionId);
    if (!verify(registration, directory))
        fail(Errc::NotCountersigned, "registration is not signed by both participants");
    std::vector<PartyId> parties{body->proposer, body->counterparty};
    std::sort(parties.begin(), parties.end());
    std::vector<PartyId> expected{session.payer(), session.payee()};
    std::sort(expected.begin(), expected.end());
    if (parties != expected)
        fail(Errc::NotCountersigned, "registration must be signed by the session's participants");
    for (const auto& src : body->sources)
        if (src.role != Role::Bank)
            fail(Errc::InvalidRole, src.name + " is a " + std::string(to_string(src.role)) + ", not a bank");
    if (is_terminal(session.phase))
        fail(Errc::PhaseError, "session already finished");

    Step out{session, ch};
    auto sources = body->sources;
    std::sort(sources.begin(), sources.end());
    sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
    out.session.registeredSources = sources;
    out.session.transcript.push_back(registration);

    bool touched = false;
    for (auto& lock : out.channel.locks) {
        if (lock.session != session.sessionId)
            continue;
        for (auto& st : lock.stages) {
            st.release = with_senders(st.release, sources);
            st.reset = with_senders(st.reset, sources);
            st.advance = with_senders(st.advance, sources);
        }
        touched = true;
    }
    if (touched) {
        out.channel.seq += 1;
        out.channel.signatures.clear();
    }
    return out;
}

std::vector<Lock> build_locks(const RebalanceSession& s, LogicalTime now)
{
    const auto& t = s.terms;
    const auto& src = s.registeredSources;
    const Value zero = Value::channel(0);
    const Value x = t.amount;
    const Value ci = t.collateralPayee;
    const Value ca = t.collateralPayer;

    const auto cert1 = LockCondition::certificate_from(src, MessageKind::CERT1);
    const auto cert2 = LockCondition::certificate_from(src, MessageKind::CERT2);
    const auto relayed = LockCondition::counterparty_signed(src, MessageKind::M_A1I1BA1);
    const auto agreed = LockCondition::counterparty_signed(src, MessageKind::M_A1I1BA1BI1);
    const auto never = LockCondition::never();

    // payee lock: amount + C_I
    const bool ciToPayer = t.policy.payeeCollateralOnCompensation == Beneficiary::Payer;
    const auto payeeSettle = split(s, x, ci);
    const auto payeeRevert = split(s, zero, x + ci);
    const auto payeeCompensate = ciToPayer ? split(s, x + ci, zero) : split(s, x, ci);
    // payer lock: C_A
    const bool caToPayee = t.policy.payerCollateralOnTimeout == Beneficiary::Payee;
    const auto payerBack = split(s, ca, zero);
    const auto payerForfeit = caToPayee ? split(s, zero, ca) : payerBack;

    auto stages = [&](const Disposition& settle, const Disposition& revert, const Disposition& compensate) {
        const auto& d = t.deadlines;
        std::vector<LockStage> out;
        switch (t.alternative) {
        case Alternative::Alt1Design1:
            out.push_back({cert1, settle, revert, d.initiationTimeout, never, never});
            break;
        case Alternative::Alt1Design2:
            out.push_back({never, settle, revert, d.initiationTimeout, never, cert1});
            out.push_back({cert2, settle, compensate, d.transferMax, never, never});
            break;
        case Alternative::Alt2:
            if (t.receiptStage) {
                out.push_back({never, settle, revert, d.initiationTimeout, relayed, agreed});
                out.push_back({cert2, settle, compensate, d.transferMax, never, never});
            } else {
                out.push_back({agreed, settle, revert, d.initiationTimeout, relayed, never});
            }
            break;
        }
        return out;
    };

    std::vector<Lock> locks;
    Lock payeeLock;
    payeeLock.id = s.sessionId + "/payee";
    payeeLock.session = s.sessionId;
    payeeLock.owner = t.payee;
    payeeLock.amount = x + ci;
    payeeLock.deadline = now + t.deadlines.initiationTimeout;
    payeeLock.stages = stages(payeeSettle, payeeRevert, payeeCompensate);
    locks.push_back(std::move(payeeLock));
    if (!ca.zero()) {
        Lock payerLock;
        payerLock.id = s.sessionId + "/payer";
        payerLock.session = s.sessionId;
        payerLock.owner = t.payer;
        payerLock.amount = ca;
        payerLock.deadline = now + t.deadlines.initiationTimeout;
        payerLock.stages = stages(payerBack, payerForfeit, payerBack);
        locks.push_back(std::move(payerLock));
    }
    return locks;
}

Accepted accept(const RebalanceSession& session, const SignedMessage& mA1, const ChannelState& ch,
                const KeyPair& payee, LogicalTime now, const KeyDirectory& directory)
{
    if (session.phase != Phase::Proposed)
        fail(Errc::PhaseError, "session is " + std::string(to_string(session.phase)));
    const auto* terms = body_as<RebalanceTerms>(mA1);
    if (mA1.kind != MessageKind::M_A1 || !terms || !verify(mA1, directory))
        fail(Errc::BadSignature, "m_A1 does not verify");
    if (mA1.session != session.sessionId || *terms != session.terms)
        fail(Errc::WrongSession, "m_A1 does not match the session terms");
    if (payee.owner != session.payee())
        fail(Errc::WrongSigner, payee.owner.name + " is not the session's payee");
    if (ch.activeSession)
        fail(Errc::SessionAlreadyActive, "channel already runs session " + *ch.activeSession);
    if (ch.seq != terms->baseSeq)
        fail(Errc::StaleSeq, "m_A1 was proposed against seq " + std::to_string(terms->baseSeq));
    if (session.deadline && now >= *session.deadline)
        fail(Errc::PhaseError, "proposal lapsed");
    if (balance_of(ch, session.payee()) < terms->amount + terms->collateralPayee)
        fail(Errc::InsufficientBalance, session.payee().name + " cannot lock amount + C_I");
    if (balance_of(ch, session.payer()) < terms->collateralPayer)
        fail(Errc::InsufficientBalance, session.payer().name + " cannot lock C_A");

    Accepted out{sign(payee, mA1), session, ch};
    auto& s = out.session;
    auto& c = out.channel;
    debit(c, s.payee(), terms->amount + terms->collateralPayee);
    debit(c, s.payer(), terms->collateralPayer);
    for (auto& lock : build_locks(s, now))
        c.locks.push_back(std::move(lock));
    c.activeSession = s.sessionId;
    c.seq += 1;
    c.signatures.clear();
    channel::check_state(c);

    s.phase = Phase::AcceptedLocked;
    s.deadline = now + terms->deadlines.initiationTimeout;
    s.acceptedDigest = content_digest(out.mA1I1);
    s.transcript.push_back(out.mA1I1);
    return out;
}

extrail::TransferOrder submit_to_bank(const RebalanceSession& session, const SignedMessage& mA1I1, LogicalTime now)
{
    if (session.phase != Phase::AcceptedLocked)
        fail(Errc::PhaseError, "orders are submitted only while ACCEPTED_LOCKED");
    extrail::TransferOrder order;
    order.orderId = session.sessionId + "/transfer";
    order.from = session.payer();
    order.to = session.payee();
    order.fromBank = session.terms.payerBank;
    order.toBank = session.terms.payeeBank;
    order.amount = session.terms.fiatAmount;
    order.sessionRef = session.sessionId;
    order.triggeredAt = now;
    order.irreversibleAfter = session.irreversibleAfter;
    order.mode = session.terms.mode;
    order.authorization = mA1I1;
    order.registeredSources = session.registeredSources;
    return order;
}

bool references_session(const RebalanceSession& session, const SignedMessage& m)
{
    if (m.session != session.sessionId || !session.acceptedDigest)
        return false;
    if (const auto* cert = body_as<CertificateBody>(m))
        return cert->reference == *session.acceptedDigest;
    if (m.kind == MessageKind::M_A1I1BA1 || m.kind == MessageKind::M_A1I1BA1BI1)
        return content_digest(truncate(m, 2)) == *session.acceptedDigest;
    return false;
}

Step accept_certificate(const RebalanceSession& session, const ChannelState& ch, const SignedMessage& cert,
                        LogicalTime now, const KeyDirectory& directory)
{
    const auto kind = cert.kind;
    if (kind != MessageKind::CERT1 && kind != MessageKind::CERT2 && kind != MessageKind::M_A1I1BA1 &&
        kind != MessageKind::M_A1I1BA1BI1)
        fail(Errc::PhaseError, std::string(to_string(kind)) + " is not a certificate");
    if (!verify(cert, directory))
        fail(Errc::BadSignature, std::string(to_string(kind)) + " does not verify");
    if (!references_session(session, cert))
        fail(Errc::WrongSession, std::string(to_string(kind)) + " belongs to another session");
    if (!registered(session, issuer_of(cert)))
        fail(Errc::UnregisteredIssuer, issuer_of(cert).name + " is not a registered source");

    const auto alt = session.terms.alternative;
    const auto phase = session.phase;
    const bool locked = phase == Phase::AcceptedLocked || phase == Phase::TransferTriggered;
    std::optional<Phase> next;
    switch (kind) {
    case MessageKind::CERT1:
        if (phase == Phase::AcceptedLocked && alt == Alternative::Alt1Design1)
            next = Phase::Settled;
        else if (phase == Phase::AcceptedLocked && alt == Alternative::Alt1Design2)
            next = Phase::AwaitingReceipt;
        break;
    case MessageKind::CERT2:
        if (phase == Phase::AwaitingReceipt)
            next = Phase::Settled;
        break;
    case MessageKind::M_A1I1BA1:
        if (locked && alt == Alternative::Alt2)
            next = Phase::TransferTriggered;
        break;
    case MessageKind::M_A1I1BA1BI1:
        if (locked && alt == Alternative::Alt2)
            next = session.terms.receiptStage ? Phase::AwaitingReceipt : Phase::Settled;
        break;
    default: break;
    }
    if (!next)
        fail(Errc::PhaseError, std::string(to_string(kind)) + " does not apply in phase " +
                                   std::string(to_string(phase)));
    if (session.deadline && now >= *session.deadline)
        fail(Errc::PhaseError, "session deadline passed; only the timeout applies");

    Step out{session, apply_to_session_locks(session, ch, cert, now, directory)};
    auto& s = out.session;
    s.transcript.push_back(cert);
    finish(s, *next);
    if (*next == Phase::AwaitingReceipt)
        s.deadline = now + s.terms.deadlines.transferMax;
    else if (*next == Phase::TransferTriggered)
        s.deadline = now + s.terms.deadlines.initiationTimeout;
    return out;
}

Step on_timeout(const RebalanceSession& session, const ChannelState& ch, LogicalTime now,
                const KeyDirectory& directory)
{
    if (!session.deadline || now < *session.deadline)
        fail(Errc::NoDeadlinePending, "no session deadline has elapsed");
    Phase next;
    switch (session.phase) {
    case Phase::Proposed:
    case Phase::AcceptedLocked:
    case Phase::TransferTriggered: next = Phase::Reverted; break;
    case Phase::AwaitingReceipt: next = Phase::SettledWithCompensation; break;
    default: fail(Errc::NoDeadlinePending, "session already finished");
    }
    Step out{session, apply_to_session_locks(session, ch, channel::TimeoutFired{}, now, directory)};
    finish(out.session, next);
    return out;
}

Raised raise_dispute(const RebalanceSession& session, std::span<const SignedMessage> evidence,
                     const PartyId& claimant, const KeyDirectory& directory)
{
    extrail::DisputeCase dispute;
    dispute.claimant = claimant;
    dispute.sessionRef = session.sessionId;
    dispute.terms = session.terms;
    if (session.acceptedDigest)
        dispute.authorization = *session.acceptedDigest;
    for (const auto& m : evidence)
        if (is_settling(m.kind) && verify(m, directory) && references_session(session, m))
            dispute.certificates.push_back(m);
    if (dispute.certificates.empty())
        fail(Errc::InsufficientEvidence, "no verifying certificate for session " + session.sessionId);
    Raised out{session, std::move(dispute)};
    if (!out.session.resolution && is_terminal(session.phase))
        out.session.resolution = session.phase;
    out.session.phase = Phase::Disputed;
    return out;
}

SignedMessage dispute_message(const extrail::DisputeCase& dispute, const std::string& channelId,
                              const KeyPair& claimant)
{
    DisputeBody body;
    body.claimant = claimant.owner;
    body.reference = dispute.authorization;
    for (const auto& c : dispute.certificates)
        body.evidence.push_back(content_digest(c));
    SignedMessage m;
    m.kind = MessageKind::DISPUTE;
    m.session = dispute.sessionRef;
    m.channel = channelId;
    m.body = std::move(body);
    return sign(claimant, m);
}

bool settlement_authorised(const RebalanceSession& session, const KeyDirectory& directory)
{
    bool accepted = false;
    bool settling = false;
    for (const auto& m : session.transcript) {
        if (m.kind == MessageKind::M_A1I1 && verify(m, directory))
            accepted = true;
        if (is_settling(m.kind) && verify(m, directory) && references_session(session, m) &&
            registered(session, issuer_of(m)))
            settling = true;
    }
    return accepted && settling;
}

} // namespace hybridpay::rebalance
