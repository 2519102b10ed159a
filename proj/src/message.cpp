#include "hybridpay/message.hpp"

#include <algorithm>
#include <array>

#include "hybridpay/codec.hpp"

namespace hybridpay {

namespace {

constexpr std::uint8_t kFormatVersion = 1;

constexpr std::array kChain = {MessageKind::M_A1, MessageKind::M_A1I1, MessageKind::M_A1I1BA1,
                               MessageKind::M_A1I1BA1BI1};

bool is_chain(MessageKind kind)
{
    return std::find(kChain.begin(), kChain.end(), kind) != kChain.end();
}

std::size_t chain_length(MessageKind kind)
{
    return static_cast<std::size_t>(std::find(kChain.begin(), kChain.end(), kind) - kChain.begin()) + 1;
}

enum class BodyTag : std::uint8_t { Terms = 1, Certificate = 2, Registration = 3, State = 4, Dispute = 5, Verdict = 6 };

bool body_matches(const SignedMessage& m)
{
    switch (m.kind) {
    case MessageKind::M_A1:
    case MessageKind::M_A1I1:
    case MessageKind::M_A1I1BA1:
    case MessageKind::M_A1I1BA1BI1: return std::holds_alternative<RebalanceTerms>(m.body);
    case MessageKind::CERT1:
    case MessageKind::CERT2: return std::holds_alternative<CertificateBody>(m.body);
    case MessageKind::CHANNEL_UPDATE: return std::holds_alternative<StateBody>(m.body);
    case MessageKind::REGISTRATION: return std::holds_alternative<RegistrationBody>(m.body);
    case MessageKind::DISPUTE: return std::holds_alternative<DisputeBody>(m.body);
    case MessageKind::VERDICT: return std::holds_alternative<VerdictBody>(m.body);
    }
    return false;
}

void write_body(Writer& w, const Body& body)
{
    std::visit(
        [&w](const auto& b) {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, RebalanceTerms>) {
                w.u8(static_cast<std::uint8_t>(BodyTag::Terms));
                w.party(b.payer);
                w.party(b.payee);
                w.party(b.payerBank);
                w.party(b.payeeBank);
                w.value(b.amount);
                w.value(b.fiatAmount);
                w.value(b.collateralPayer);
                w.value(b.collateralPayee);
                w.u8(static_cast<std::uint8_t>(b.alternative));
                w.boolean(b.receiptStage);
                w.u8(static_cast<std::uint8_t>(b.mode));
                w.u64(b.baseSeq);
                w.time(b.proposedAt);
                w.time(b.orderExpiry);
                w.duration(b.deadlines.initiationTimeout);
                w.duration(b.deadlines.actualTransfer);
                w.duration(b.deadlines.transferMax);
                w.u8(static_cast<std::uint8_t>(b.policy.payerCollateralOnTimeout));
                w.u8(static_cast<std::uint8_t>(b.policy.payeeCollateralOnCompensation));
                w.str(b.method);
            } else if constexpr (std::is_same_v<T, CertificateBody>) {
                w.u8(static_cast<std::uint8_t>(BodyTag::Certificate));
                w.party(b.issuer);
                w.digest(b.reference);
                w.u8(static_cast<std::uint8_t>(b.assertion));
                w.str(b.orderId);
                w.value(b.fiatAmount);
            } else if constexpr (std::is_same_v<T, RegistrationBody>) {
                w.u8(static_cast<std::uint8_t>(BodyTag::Registration));
                w.party(b.proposer);
                w.party(b.counterparty);
                w.u32(static_cast<std::uint32_t>(b.sources.size()));
                for (const auto& s : b.sources)
                    w.party(s);
            } else if constexpr (std::is_same_v<T, StateBody>) {
                w.u8(static_cast<std::uint8_t>(BodyTag::State));
                w.party(b.proposer);
                w.party(b.counterparty);
                w.bytes(b.encodedState);
            } else if constexpr (std::is_same_v<T, DisputeBody>) {
                w.u8(static_cast<std::uint8_t>(BodyTag::Dispute));
                w.party(b.claimant);
                w.digest(b.reference);
                w.u32(static_cast<std::uint32_t>(b.evidence.size()));
                for (const auto& d : b.evidence)
                    w.digest(d);
            } else {
                w.u8(static_cast<std::uint8_t>(BodyTag::Verdict));
                w.party(b.regulator);
                w.digest(b.reference);
                w.boolean(b.culprit.has_value());
                if (b.culprit)
                    w.party(*b.culprit);
                w.value(b.remedy);
                w.str(b.rationale);
            }
        },
        body);
}

template <class E>
E read_enum(Reader& r, std::uint8_t max)
{
    auto v = r.u8();
    if (v > max)
        fail(Errc::Malformed, "enum value out of range");
    return static_cast<E>(v);
}

Body read_body(Reader& r)
{
    switch (static_cast<BodyTag>(r.u8())) {
    case BodyTag::Terms: {
        RebalanceTerms t;
        t.payer = r.party();
        t.payee = r.party();
        t.payerBank = r.party();
        t.payeeBank = r.party();
        t.amount = r.value();
        t.fiatAmount = r.value();
        t.collateralPayer = r.value();
        t.collateralPayee = r.value();
        t.alternative = read_enum<Alternative>(r, 2);
        t.receiptStage = r.boolean();
        t.mode = read_enum<TransferMode>(r, 1);
        t.baseSeq = r.u64();
        t.proposedAt = r.time();
        t.orderExpiry = r.time();
        t.deadlines.initiationTimeout = r.duration();
        t.deadlines.actualTransfer = r.duration();
        t.deadlines.transferMax = r.duration();
        t.policy.payerCollateralOnTimeout = read_enum<Beneficiary>(r, 1);
        t.policy.payeeCollateralOnCompensation = read_enum<Beneficiary>(r, 1);
        t.method = r.str();
        return t;
    }
    case BodyTag::Certificate: {
        CertificateBody c;
        c.issuer = r.party();
        c.reference = r.digest();
        c.assertion = read_enum<Assertion>(r, 1);
        c.orderId = r.str();
        c.fiatAmount = r.value();
        return c;
    }
    case BodyTag::Registration: {
        RegistrationBody g;
        g.proposer = r.party();
        g.counterparty = r.party();
        auto n = r.u32();
        for (std::uint32_t i = 0; i < n; ++i)
            g.sources.push_back(r.party());
        return g;
    }
    case BodyTag::State: {
        StateBody s;
        s.proposer = r.party();
        s.counterparty = r.party();
        s.encodedState = r.bytes();
        return s;
    }
    case BodyTag::Dispute: {
        DisputeBody d;
        d.claimant = r.party();
        d.reference = r.digest();
        auto n = r.u32();
        for (std::uint32_t i = 0; i < n; ++i)
            d.evidence.push_back(r.digest());
        return d;
    }
    case BodyTag::Verdict: {
        VerdictBody v;
        v.regulator = r.party();
        v.reference = r.digest();
        if (r.boolean())
            v.culprit = r.party();
        v.remedy = r.value();
        v.rationale = r.str();
        return v;
    }
    }
    fail(Errc::Malformed, "unknown body tag");
}

void write_header(Writer& w, MessageKind kind, const SignedMessage& m)
{
    w.u8(kFormatVersion);
    w.u8(static_cast<std::uint8_t>(kind));
    w.str(m.session);
    w.str(m.channel);
    write_body(w, m.body);
}

void write_signatures(Writer& w, const std::vector<Signature>& sigs, std::size_t count)
{
    w.u32(static_cast<std::uint32_t>(count));
    for (std::size_t i = 0; i < count; ++i) {
        w.party(sigs[i].signer);
        w.bytes(sigs[i].bytes);
    }
}

bool check_signatures(const SignedMessage& m, const KeyDirectory& dir, bool requireAll)
{
    if (!body_matches(m))
        return false;
    auto required = required_signers(m);
    if (m.signatures.size() > required.size())
        return false;
    if (requireAll && m.signatures.size() != required.size())
        return false;
    for (std::size_t i = 0; i < m.signatures.size(); ++i) {
        if (m.signatures[i].signer != required[i])
            return false;
        if (!dir.verify(m.signatures[i].signer, signing_payload(m, i), m.signatures[i].bytes))
            return false;
    }
    return true;
}

} // namespace

std::string_view to_string(MessageKind kind)
{
    switch (kind) {
    case MessageKind::M_A1: return "M_A1";
    case MessageKind::M_A1I1: return "M_A1I1";
    case MessageKind::M_A1I1BA1: return "M_A1I1BA1";
    case MessageKind::M_A1I1BA1BI1: return "M_A1I1BA1BI1";
    case MessageKind::CERT1: return "CERT1";
    case MessageKind::CERT2: return "CERT2";
    case MessageKind::CHANNEL_UPDATE: return "CHANNEL_UPDATE";
    case MessageKind::DISPUTE: return "DISPUTE";
    case MessageKind::VERDICT: return "VERDICT";
    case MessageKind::REGISTRATION: return "REGISTRATION";
    }
    return "UNKNOWN";
}

std::optional<MessageKind> message_kind_from_string(std::string_view name)
{
    for (std::uint8_t k = 1; k <= 10; ++k) {
        auto kind = static_cast<MessageKind>(k);
        if (to_string(kind) == name)
            return kind;
    }
    return std::nullopt;
}

std::string_view to_string(Alternative alt)
{
    switch (alt) {
    case Alternative::Alt1Design1: return "ALT1_DESIGN1";
    case Alternative::Alt1Design2: return "ALT1_DESIGN2";
    case Alternative::Alt2: return "ALT2";
    }
    return "UNKNOWN";
}

std::optional<Alternative> alternative_from_string(std::string_view name)
{
    for (auto alt : {Alternative::Alt1Design1, Alternative::Alt1Design2, Alternative::Alt2})
        if (to_string(alt) == name)
            return alt;
    return std::nullopt;
}

std::string_view to_string(TransferMode mode)
{
    return mode == TransferMode::Push ? "push" : "request-to-pay";
}

std::vector<PartyId> required_signers(const SignedMessage& m)
{
    if (is_chain(m.kind)) {
        const auto* t = body_as<RebalanceTerms>(m);
        if (!t)
            return {};
        std::vector<PartyId> all{t->payer, t->payee, t->payerBank, t->payeeBank};
        all.resize(chain_length(m.kind));
        return all;
    }
    if (const auto* c = body_as<CertificateBody>(m))
        return {c->issuer};
    if (const auto* g = body_as<RegistrationBody>(m))
        return {g->proposer, g->counterparty};
    if (const auto* s = body_as<StateBody>(m))
        return {s->proposer, s->counterparty};
    if (const auto* d = body_as<DisputeBody>(m))
        return {d->claimant};
    if (const auto* v = body_as<VerdictBody>(m))
        return {v->regulator};
    return {};
}

MessageKind stage_kind(MessageKind kind, std::size_t index)
{
    if (is_chain(kind) && index < chain_length(kind))
        return kChain[index];
    return kind;
}

std::optional<MessageKind> successor(MessageKind kind)
{
    if (!is_chain(kind))
        return std::nullopt;
    auto n = chain_length(kind);
    if (n >= kChain.size())
        return std::nullopt;
    return kChain[n];
}

Bytes canonical_serialize(const SignedMessage& m)
{
    Writer w;
    write_header(w, m.kind, m);
    write_signatures(w, m.signatures, m.signatures.size());
    return std::move(w).take();
}

SignedMessage deserialize(ByteView bytes)
{
    Reader r(bytes);
    if (r.u8() != kFormatVersion)
        fail(Errc::Malformed, "unsupported message format version");
    SignedMessage m;
    m.kind = static_cast<MessageKind>(r.u8());
    if (to_string(m.kind) == "UNKNOWN")
        fail(Errc::Malformed, "unknown message kind");
    m.session = r.str();
    m.channel = r.str();
    m.body = read_body(r);
    auto n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        Signature s;
        s.signer = r.party();
        s.bytes = r.bytes();
        m.signatures.push_back(std::move(s));
    }
    r.expect_done();
    return m;
}

Bytes signing_payload(const SignedMessage& m, std::size_t index)
{
    Writer w;
    write_header(w, stage_kind(m.kind, index), m);
    write_signatures(w, m.signatures, std::min(index, m.signatures.size()));
    return std::move(w).take();
}

SignedMessage truncate(const SignedMessage& m, std::size_t count)
{
    SignedMessage out = m;
    if (count < out.signatures.size())
        out.signatures.resize(count);
    out.kind = stage_kind(m.kind, count == 0 ? 0 : count - 1);
    return out;
}

Digest message_digest(const SignedMessage& m)
{
    return sha256(canonical_serialize(m));
}

Digest content_digest(const SignedMessage& m)
{
    Writer w;
    write_header(w, m.kind, m);
    return sha256(w.data());
}

SignedMessage sign(const KeyPair& key, const SignedMessage& message)
{
    if (!key.scheme)
        fail(Errc::Malformed, "keypair has no signature scheme");
    SignedMessage out = message;
    auto required = required_signers(out);
    if (required.empty())
        fail(Errc::Malformed, "message body does not match its kind");
    if (out.signatures.size() >= required.size()) {
        auto next = successor(out.kind);
        if (!next)
            fail(Errc::WrongSigner, std::string(to_string(out.kind)) + " is already fully signed");
        out.kind = *next;
        required = required_signers(out);
    }
    const auto& expected = required[out.signatures.size()];
    if (expected != key.owner)
        fail(Errc::WrongSigner, key.owner.name + " is not the next signer of " + std::string(to_string(out.kind)) +
                                    " (expected " + expected.name + ")");
    auto payload = signing_payload(out, out.signatures.size());
    out.signatures.push_back({key.owner, key.scheme->sign(key, payload)});
    return out;
}

bool verify(const SignedMessage& message, const KeyDirectory& directory)
{
    return check_signatures(message, directory, true);
}

bool verify_partial(const SignedMessage& message, const KeyDirectory& directory)
{
    return check_signatures(message, directory, false);
}

} // namespace hybridpay
