#include "hybridpay/extrail.hpp"

#include <algorithm>

namespace hybridpay::extrail {

namespace {

SignedMessage make_certificate(MessageKind kind, Assertion assertion, const TransferOrder& order,
                               const KeyPair& bankKey)
{
    SignedMessage cert;
    cert.kind = kind;
    cert.session = order.sessionRef;
    cert.channel = order.authorization.channel;
    cert.body = CertificateBody{bankKey.owner, content_digest(order.authorization), assertion, order.orderId,
                                order.amount};
    return sign(bankKey, cert);
}

const RebalanceTerms& terms_of(const TransferOrder& order)
{
    return std::get<RebalanceTerms>(order.authorization.body);
}

void check_funds(const BankLedger& bank, const TransferOrder& order)
{
    auto balance = bank.balance(order.from.name);
    if (!balance)
        fail(Errc::UnknownCustomer, order.from.name + " has no account at " + bank.bank().name);
    if (*balance < order.amount)
        fail(Errc::InsufficientFiat, order.from.name + " holds " + to_string(*balance) + ", order needs " +
                                         to_string(order.amount));
}

Delivery execute(BankLedger& bank, OrderRecord& rec, LogicalTime now)
{
    bank.debit(rec.order.from.name, rec.order.amount);
    bank.push_pending(rec.order);
    rec.confirmed = true;
    rec.debited = true;
    return {rec.order, now + kDeliveryLatency};
}

} // namespace

std::string_view to_string(BankBehavior behavior)
{
    switch (behavior) {
    case BankBehavior::Honest: return "HONEST";
    case BankBehavior::ConfirmNoExecute: return "CONFIRM_NO_EXECUTE";
    case BankBehavior::ReceiveNoCredit: return "RECEIVE_NO_CREDIT";
    case BankBehavior::Silent: return "SILENT";
    case BankBehavior::Slow: return "SLOW";
    }
    return "UNKNOWN";
}

std::optional<BankBehavior> bank_behavior_from_string(std::string_view name)
{
    for (auto b : {BankBehavior::Honest, BankBehavior::ConfirmNoExecute, BankBehavior::ReceiveNoCredit,
                   BankBehavior::Silent, BankBehavior::Slow})
        if (to_string(b) == name)
            return b;
    return std::nullopt;
}

std::string_view to_string(Rationale rationale)
{
    switch (rationale) {
    case Rationale::CompletedCorrectly: return "completed-correctly";
    case Rationale::ConfirmedNotExecuted: return "confirmed-not-executed";
    case Rationale::ReceivedNotCredited: return "received-not-credited";
    case Rationale::PayeeAccountClosed: return "payee-account-closed";
    case Rationale::NotExecuted: return "not-executed";
    }
    return "unknown";
}

BankLedger::BankLedger(PartyId bank, BankConduct conduct, Value equity)
    : bank_(std::move(bank)), conduct_(conduct), equity_(equity)
{
    if (bank_.role != Role::Bank)
        fail(Errc::InvalidRole, bank_.name + " is not a bank");
    if (equity_.unit() != Unit::Fiat)
        fail(Errc::UnitMismatch, "bank equity must be fiat");
}

void BankLedger::open_account(const std::string& customer, Value balance)
{
    if (balance.unit() != Unit::Fiat)
        fail(Errc::UnitMismatch, "accounts hold fiat");
    accounts_.insert_or_assign(customer, balance);
}

void BankLedger::close_account(const std::string& customer)
{
    auto it = accounts_.find(customer);
    if (it == accounts_.end())
        fail(Errc::UnknownCustomer, customer + " has no account at " + bank_.name);
    equity_ += it->second;
    accounts_.erase(it);
}

std::optional<Value> BankLedger::balance(const std::string& customer) const
{
    auto it = accounts_.find(customer);
    if (it == accounts_.end())
        return std::nullopt;
    return it->second;
}

Value BankLedger::in_flight() const
{
    Value total = Value::fiat(0);
    for (const auto& o : pending_)
        total += o.amount;
    return total;
}

Value BankLedger::total() const
{
    Value total = suspense_ + equity_ + in_flight();
    for (const auto& [_, v] : accounts_)
        total += v;
    return total;
}

const OrderRecord* BankLedger::record(const std::string& sessionRef) const
{
    auto it = records_.find(sessionRef);
    return it == records_.end() ? nullptr : &it->second;
}

OrderRecord* BankLedger::record(const std::string& sessionRef)
{
    auto it = records_.find(sessionRef);
    return it == records_.end() ? nullptr : &it->second;
}

OrderRecord& BankLedger::record_for(const TransferOrder& order, LogicalTime now)
{
    auto [it, inserted] = records_.try_emplace(order.sessionRef);
    if (inserted) {
        it->second.order = order;
        it->second.receivedAt = now;
    }
    return it->second;
}

void BankLedger::debit(const std::string& customer, Value amount)
{
    auto it = accounts_.find(customer);
    if (it == accounts_.end())
        fail(Errc::UnknownCustomer, customer + " has no account at " + bank_.name);
    if (it->second < amount)
        fail(Errc::InsufficientFiat, customer + " cannot cover " + to_string(amount));
    it->second -= amount;
}

void BankLedger::credit(const std::string& customer, Value amount)
{
    auto it = accounts_.find(customer);
    if (it == accounts_.end())
        fail(Errc::UnknownCustomer, customer + " has no account at " + bank_.name);
    it->second += amount;
}

std::optional<TransferOrder> BankLedger::pop_pending(const std::string& orderId)
{
    auto it = std::find_if(pending_.begin(), pending_.end(), [&](const auto& o) { return o.orderId == orderId; });
    if (it == pending_.end())
        return std::nullopt;
    TransferOrder out = std::move(*it);
    pending_.erase(it);
    return out;
}

bool order_authorised(const BankLedger& bank, const TransferOrder& order, const KeyDirectory& directory)
{
    const auto& auth = order.authorization;
    const auto* terms = body_as<RebalanceTerms>(auth);
    if (auth.kind != MessageKind::M_A1I1 || !terms || !verify(auth, directory))
        return false;
    if (terms->payerBank != bank.bank() || auth.session != order.sessionRef)
        return false;
    if (terms->payer != order.from || terms->payee != order.to || terms->fiatAmount != order.amount)
        return false;
    return std::find(order.registeredSources.begin(), order.registeredSources.end(), bank.bank()) !=
           order.registeredSources.end();
}

BankEffects process_order(BankLedger& bank, const TransferOrder& order, LogicalTime now, const KeyPair& bankKey,
                          const KeyDirectory& directory, bool deferred)
{
    BankEffects fx;
    if (!order_authorised(bank, order, directory)) {
        fx.ignored = true;
        fx.note = "unauthorised order";
        return fx;
    }
    if (terms_of(order).alternative == Alternative::Alt2) {
        fx.ignored = true;
        fx.note = "alternative 2 orders go through forward_alternative2";
        return fx;
    }
    if (now > terms_of(order).orderExpiry) {
        fx.ignored = true;
        fx.note = "order expired";
        return fx;
    }
    if (const auto* existing = bank.record(order.sessionRef); existing && existing->confirmed) {
        fx.ignored = true;
        fx.note = "duplicate order";
        return fx;
    }
    const auto behavior = bank.conduct().behavior;
    if (behavior == BankBehavior::Silent) {
        bank.record_for(order, now).note = "ignored";
        fx.ignored = true;
        fx.note = "silent bank";
        return fx;
    }
    if (behavior == BankBehavior::Slow && !deferred) {
        bank.record_for(order, now).note = "deferred";
        fx.retryAt = now + bank.conduct().slowDelay;
        return fx;
    }
    check_funds(bank, order);

    auto& rec = bank.record_for(order, now);
    fx.certificates.push_back(make_certificate(MessageKind::CERT1, Assertion::TransferTriggered, order, bankKey));
    if (behavior == BankBehavior::ConfirmNoExecute) {
        rec.confirmed = true;
        rec.note = "confirmed";
        return fx;
    }
    fx.delivery = execute(bank, rec, now);
    rec.note = "executed";
    return fx;
}

BankEffects receive_delivery(BankLedger& receiver, BankLedger& sender, const TransferOrder& order, LogicalTime now,
                             const KeyPair& bankKey, bool deferred)
{
    if (order.toBank != receiver.bank() || order.fromBank != sender.bank())
        fail(Errc::InvalidParty, "delivery is not addressed to " + receiver.bank().name);
    BankEffects fx;
    const auto behavior = receiver.conduct().behavior;

    if (deferred) {
        auto& rec = receiver.record_for(order, now);
        if (!rec.received || rec.credited)
            return fx;
        receiver.release_suspense(order.amount);
        receiver.credit(order.to.name, order.amount);
        rec.credited = true;
        rec.creditedAt = now;
        rec.note = "credited late";
        fx.certificates.push_back(make_certificate(MessageKind::CERT2, Assertion::ReceiptConfirmed, order, bankKey));
        return fx;
    }

    if (!receiver.balance(order.to.name))
        fail(Errc::UnknownCustomer, order.to.name + " has no account at " + receiver.bank().name);
    auto moved = sender.pop_pending(order.orderId);
    if (!moved)
        fail(Errc::InvalidParty, "no in-flight transfer " + order.orderId + " at " + sender.bank().name);
    if (auto* srec = sender.record(order.sessionRef))
        srec->delivered = true;

    auto& rec = receiver.record_for(order, now);
    rec.received = true;
    switch (behavior) {
    case BankBehavior::ReceiveNoCredit:
        receiver.book_suspense(order.amount);
        rec.note = "received, not credited";
        break;
    case BankBehavior::Slow:
        receiver.book_suspense(order.amount);
        rec.note = "received, credit deferred";
        fx.retryAt = now + receiver.conduct().slowDelay;
        break;
    default:
        receiver.credit(order.to.name, order.amount);
        rec.credited = true;
        rec.creditedAt = now;
        rec.note = "credited";
        fx.certificates.push_back(make_certificate(MessageKind::CERT2, Assertion::ReceiptConfirmed, order, bankKey));
        break;
    }
    return fx;
}

void reject_delivery(BankLedger& receiver, BankLedger& sender, const TransferOrder& order, LogicalTime now)
{
    auto moved = sender.pop_pending(order.orderId);
    if (!moved)
        fail(Errc::InvalidParty, "no in-flight transfer " + order.orderId + " at " + sender.bank().name);
    if (auto* srec = sender.record(order.sessionRef))
        srec->delivered = true;
    receiver.book_suspense(order.amount);
    auto& rec = receiver.record_for(order, now);
    rec.received = true;
    rec.rejected = true;
    rec.note = "payee account unknown";
}

RelayEffects forward_alternative2(BankLedger& payerBank, const TransferOrder& order, LogicalTime now,
                                  const KeyPair& bankKey, const KeyDirectory& directory, bool deferred)
{
    RelayEffects fx;
    if (!order_authorised(payerBank, order, directory) || terms_of(order).alternative != Alternative::Alt2)
        return fx;
    if (now > terms_of(order).orderExpiry)
        return fx;
    if (const auto* existing = payerBank.record(order.sessionRef); existing && existing->note == "forwarded")
        return fx;
    const auto behavior = payerBank.conduct().behavior;
    if (behavior == BankBehavior::Silent) {
        payerBank.record_for(order, now).note = "ignored";
        return fx;
    }
    if (behavior == BankBehavior::Slow && !deferred) {
        payerBank.record_for(order, now).note = "deferred";
        fx.retryAt = now + payerBank.conduct().slowDelay;
        return fx;
    }
    check_funds(payerBank, order);
    payerBank.record_for(order, now).note = "forwarded";
    fx.message = sign(bankKey, order.authorization);
    return fx;
}

RelayEffects relay_alternative2(const BankLedger& payerBank, BankLedger& payeeBank, const SignedMessage& mA1I1BA1,
                                LogicalTime now, const KeyPair& bankKey, const KeyDirectory& directory,
                                bool deferred)
{
    RelayEffects fx;
    const auto* terms = body_as<RebalanceTerms>(mA1I1BA1);
    if (mA1I1BA1.kind != MessageKind::M_A1I1BA1 || !terms || !verify(mA1I1BA1, directory))
        return fx;
    if (mA1I1BA1.signatures.back().signer != payerBank.bank() || terms->payeeBank != payeeBank.bank())
        return fx;
    const auto behavior = payeeBank.conduct().behavior;
    if (behavior == BankBehavior::Silent)
        return fx;
    if (behavior == BankBehavior::Slow && !deferred) {
        fx.retryAt = now + payeeBank.conduct().slowDelay;
        return fx;
    }
    fx.message = sign(bankKey, mA1I1BA1);
    return fx;
}

BankEffects execute_alternative2(BankLedger& payerBank, const SignedMessage& mA1I1BA1BI1, LogicalTime now,
                                 const KeyDirectory& directory)
{
    BankEffects fx;
    if (mA1I1BA1BI1.kind != MessageKind::M_A1I1BA1BI1 || !verify(mA1I1BA1BI1, directory)) {
        fx.ignored = true;
        fx.note = "invalid relay confirmation";
        return fx;
    }
    auto* existing = payerBank.record(mA1I1BA1BI1.session);
    if (!existing || existing->note != "forwarded" || existing->confirmed) {
        fx.ignored = true;
        fx.note = "no forwarded order awaiting confirmation";
        return fx;
    }
    auto& rec = *existing;
    if (payerBank.conduct().behavior == BankBehavior::ConfirmNoExecute) {
        rec.confirmed = true;
        return fx;
    }
    check_funds(payerBank, rec.order);
    fx.delivery = execute(payerBank, rec, now);
    return fx;
}

bool request_reversal(BankLedger& payerBank, BankLedger& payeeBank, const std::string& sessionRef,
                      LogicalTime now)
{
    auto* sent = payerBank.record(sessionRef);
    auto* got = payeeBank.record(sessionRef);
    if (!sent || !got || !sent->debited || !got->credited || sent->reversed)
        return false;
    const auto& order = sent->order;
    if (order.mode == TransferMode::RequestToPay)
        return false;
    if (now >= order.triggeredAt + order.irreversibleAfter)
        return false;
    auto held = payeeBank.balance(order.to.name);
    if (!held || *held < order.amount)
        return false;
    payeeBank.debit(order.to.name, order.amount);
    payerBank.credit(order.from.name, order.amount);
    sent->reversed = true;
    got->reversed = true;
    return true;
}

namespace {

bool references_session(const SignedMessage& m, const DisputeCase& dispute)
{
    if (m.session != dispute.sessionRef)
        return false;
    if (const auto* cert = body_as<CertificateBody>(m))
        return cert->reference == dispute.authorization;
    if (m.kind == MessageKind::M_A1I1BA1BI1)
        return content_digest(truncate(m, 2)) == dispute.authorization;
    return false;
}

} // namespace

Verdict adjudicate(const DisputeCase& dispute, const BankLedger& payerBank, const BankLedger& payeeBank,
                   const KeyDirectory& directory)
{
    bool admissible = false;
    bool confirmedByPayerBank = false;
    for (const auto& m : dispute.certificates) {
        if (!verify(m, directory) || !references_session(m, dispute))
            continue;
        if (m.kind == MessageKind::CERT1 || m.kind == MessageKind::CERT2 || m.kind == MessageKind::M_A1I1BA1BI1)
            admissible = true;
        if (m.kind == MessageKind::CERT1 && body_as<CertificateBody>(m)->issuer == payerBank.bank())
            confirmedByPayerBank = true;
        if (m.kind == MessageKind::M_A1I1BA1BI1)
            confirmedByPayerBank = true;
    }
    if (!admissible)
        fail(Errc::Inadmissible, "no verifying certificate for session " + dispute.sessionRef);

    Verdict v;
    v.beneficiary = dispute.terms.payee;
    const auto* sent = payerBank.record(dispute.sessionRef);
    const auto* got = payeeBank.record(dispute.sessionRef);
    const bool debited = sent && sent->debited;

    if (confirmedByPayerBank && !debited) {
        v.culprit = payerBank.bank();
        v.rationale = Rationale::ConfirmedNotExecuted;
        v.remedy = dispute.terms.fiatAmount;
    } else if (debited && got && got->rejected) {
        v.rationale = Rationale::PayeeAccountClosed;
    } else if (debited && got && got->received && !got->credited) {
        v.culprit = payeeBank.bank();
        v.rationale = Rationale::ReceivedNotCredited;
        v.remedy = dispute.terms.fiatAmount;
    } else if (debited) {
        v.rationale = Rationale::CompletedCorrectly;
    } else {
        v.rationale = Rationale::NotExecuted;
    }
    return v;
}

void apply_remedy(const Verdict& verdict, BankLedger& payerBank, BankLedger& payeeBank)
{
    if (!verdict.culprit || verdict.remedy.zero())
        return;
    BankLedger& culprit = *verdict.culprit == payerBank.bank() ? payerBank : payeeBank;
    culprit.draw_equity(verdict.remedy);
    payeeBank.credit(verdict.beneficiary.name, verdict.remedy);
}

} // namespace hybridpay::extrail
