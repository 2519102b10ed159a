#include "hybridpay/simulator.hpp"

#include <functional>
#include <queue>
#include <set>
#include <sstream>

namespace hybridpay::sim {

using nlohmann::json;
using channel::ChannelState;
using rebalance::Phase;

namespace {

enum class Who { Payer, Payee };

struct Cause {
    std::string type = "none";
    std::string kind;
    bool verified = false;
};

struct Record {
    std::string actor;
    std::string kind;
    std::optional<std::string> payload;
    Cause cause;
    std::vector<std::string> transcript;
    std::vector<std::string> notes;
    bool skip = false;
};

struct Event {
    LogicalTime at;
    std::uint64_t order = 0;
    std::function<void()> run;
};

struct Later {
    bool operator()(const Event& a, const Event& b) const
    {
        return a.at.tick != b.at.tick ? a.at.tick > b.at.tick : a.order > b.order;
    }
};

std::string hex(const Digest& d)
{
    return to_hex(d);
}

class Simulation {
public:
    Simulation(const ScenarioConfig& cfg, std::uint64_t seed)
        : cfg_(cfg),
          scheme_(make_scheme(cfg.signatureScheme)),
          payer_{cfg.payer, Role::Participant},
          payee_{cfg.payee, Role::Participant},
          payerBankId_{cfg.payerBank, Role::Bank},
          payeeBankId_{cfg.payeeBank, Role::Bank},
          regulatorId_{cfg.regulator, Role::Regulator},
          payerKey_(generate_key(scheme_, payer_, seed)),
          payeeKey_(generate_key(scheme_, payee_, seed)),
          payerBankKey_(generate_key(scheme_, payerBankId_, seed)),
          payeeBankKey_(generate_key(scheme_, payeeBankId_, seed)),
          regulatorKey_(generate_key(scheme_, regulatorId_, seed)),
          dir_(std::make_shared<KeyDirectory>(scheme_))
    {
        for (const auto* k : {&payerKey_, &payeeKey_, &payerBankKey_, &payeeBankKey_, &regulatorKey_})
            dir_->add(*k);
        payerBank_ = make_bank(payerBankId_, cfg.payerBankConfig);
        payeeBank_ = make_bank(payeeBankId_, cfg.payeeBankConfig);
    }

    RunResult run();

private:
    // --- plumbing -------------------------------------------------------
    void at(LogicalTime when, std::function<void()> fn)
    {
        queue_.push(Event{when, counter_++, std::move(fn)});
    }

    const ParticipantStrategy& strategy(Who who) const
    {
        return who == Who::Payer ? cfg_.payerStrategy : cfg_.payeeStrategy;
    }
    const PartyId& id(Who who) const { return who == Who::Payer ? payer_ : payee_; }
    const KeyPair& key(Who who) const { return who == Who::Payer ? payerKey_ : payeeKey_; }
    std::vector<SignedMessage>& held(Who who) { return who == Who::Payer ? payerHeld_ : payeeHeld_; }
    static Who other(Who who) { return who == Who::Payer ? Who::Payee : Who::Payer; }

    void begin(const std::string& actor, const std::string& kind)
    {
        cur_ = Record{};
        cur_.actor = actor;
        cur_.kind = kind;
    }
    void note(std::string text) { cur_.notes.push_back(std::move(text)); }
    void cause_message(const SignedMessage& m)
    {
        cur_.cause = {"message", std::string(to_string(m.kind)), verify(m, *dir_)};
        cur_.payload = hex(content_digest(m));
    }

    bool withholds(Who who, MessageKind kind) const { return strategy(who).drop.count(kind) > 0; }
    Duration latency(Who who, MessageKind kind) const
    {
        auto it = strategy(who).delay.find(kind);
        return Duration{1 + (it == strategy(who).delay.end() ? 0 : it->second)};
    }
    SignedMessage maybe_forge(Who who, SignedMessage m) const
    {
        if (!strategy(who).forge.count(m.kind))
            return m;
        if (auto* terms = std::get_if<RebalanceTerms>(&m.body)) {
            terms->amount += Value::channel(1);
            terms->fiatAmount += Value::fiat(cfg_.equivalenceRate);
        } else {
            m.session += "-forged";
        }
        return m;
    }

    std::shared_ptr<extrail::BankLedger> make_bank(const PartyId& bank, const BankConfig& bc)
    {
        auto ledger = std::make_shared<extrail::BankLedger>(bank, bc.conduct, Value::fiat(bc.equity));
        for (const auto& [name, v] : bc.accounts)
            ledger->open_account(name, Value::fiat(v));
        return ledger;
    }

    // --- accounting -----------------------------------------------------
    Value claim(Who who, const ChannelState& s) const
    {
        const bool isA = id(who) == s.partyA;
        Value v = isA ? s.balanceA : s.balanceI;
        for (const auto& l : s.locks)
            if (l.owner == id(who))
                v += l.amount;
        return v;
    }

    Holdings holdings(Who who) const
    {
        Holdings h;
        if (payout_)
            h.channel = (id(who) == channel_.partyA ? payout_->toA : payout_->toI).amount();
        else
            h.channel = claim(who, channel_).amount();
        for (const auto* bank : {payerBank_.get(), payeeBank_.get()})
            if (auto b = bank->balance(id(who).name))
                h.fiat += b->amount();
        return h;
    }

    // --- snapshot / trace -----------------------------------------------
    json bank_json(const extrail::BankLedger& b) const
    {
        json accounts = json::object();
        for (const auto& [name, v] : b.accounts())
            accounts[name] = v.amount();
        return {{"accounts", accounts},
                {"suspense", b.suspense().amount()},
                {"equity", b.equity().amount()},
                {"inFlight", b.in_flight().amount()}};
    }

    json snapshot() const
    {
        json ch;
        ch["id"] = channel_.channelId;
        ch["capacity"] = channel_.capacity.amount();
        ch["status"] = std::string(to_string(anchor_->status()));
        if (payout_) {
            ch["seq"] = payout_->seq;
            ch["balanceA"] = payout_->toA.amount();
            ch["balanceI"] = payout_->toI.amount();
            ch["locks"] = json::array();
            ch["signatures"] = 0;
            ch["activeSession"] = nullptr;
        } else {
            ch["seq"] = channel_.seq;
            ch["balanceA"] = channel_.balanceA.amount();
            ch["balanceI"] = channel_.balanceI.amount();
            json locks = json::array();
            for (const auto& l : channel_.locks)
                locks.push_back({{"id", l.id},
                                 {"owner", l.owner.name},
                                 {"amount", l.amount.amount()},
                                 {"deadline", l.deadline.tick},
                                 {"stage", l.stage}});
            ch["locks"] = locks;
            ch["signatures"] = channel_.signatures.size();
            ch["activeSession"] = channel_.activeSession ? json(*channel_.activeSession) : json(nullptr);
        }
        json snap;
        snap["channel"] = ch;
        snap["banks"] = {{payerBankId_.name, bank_json(*payerBank_)}, {payeeBankId_.name, bank_json(*payeeBank_)}};
        if (session_) {
            snap["session"] = {
                {"id", session_->sessionId},
                {"phase", std::string(to_string(session_->phase))},
                {"resolution",
                 session_->resolution ? json(std::string(to_string(*session_->resolution))) : json(nullptr)},
                {"deadline", session_->deadline ? json(session_->deadline->tick) : json(nullptr)},
                {"registeredSources",
                 [&] {
                     json a = json::array();
                     for (const auto& p : session_->registeredSources)
                         a.push_back(p.name);
                     return a;
                 }()},
            };
        } else {
            snap["session"] = nullptr;
        }
        return snap;
    }

    void emit(const Event& ev)
    {
        if (cur_.skip)
            return;
        json rec;
        rec["record"] = "event";
        rec["index"] = trace_.events.size();
        rec["tick"] = ev.at.tick;
        rec["seq"] = ev.order;
        rec["actor"] = cur_.actor;
        rec["kind"] = cur_.kind;
        rec["payload"] = cur_.payload ? json(*cur_.payload)
                                      : json(hex(sha256(cur_.actor + "/" + cur_.kind + "/" +
                                                        std::to_string(ev.at.tick))));
        rec["cause"] = {{"type", cur_.cause.type}, {"kind", cur_.cause.kind}, {"verified", cur_.cause.verified}};
        if (!cur_.transcript.empty())
            rec["transcript"] = cur_.transcript;
        if (!cur_.notes.empty())
            rec["notes"] = cur_.notes;
        rec["snapshot"] = snapshot();
        rec["digest"] = snapshot_digest(rec["snapshot"]);
        trace_.events.push_back(std::move(rec));
        lastTick_ = ev.at.tick;
    }

    // --- channel bookkeeping --------------------------------------------
    bool willing_to_sign(Who who, const ChannelState& next) const
    {
        if (!strategy(who).withholdCosign)
            return true;
        return claim(who, next) >= claim(who, lastSigned_);
    }

    /// Both participants countersign the derived state unless one withholds;
    /// then the other takes the latest both-signed state to the ledger.
    void ratify(const ChannelState& next)
    {
        channel_ = next;
        const bool payerSigns = willing_to_sign(Who::Payer, next);
        const bool payeeSigns = willing_to_sign(Who::Payee, next);
        if (payerSigns && payeeSigns) {
            channel_ = channel::countersign(channel::countersign(next, payerKey_), payeeKey_);
            lastSigned_ = channel_;
            signedHistory_.push_back(channel_);
            if (anchor_->status() == channel::AnchorStatus::Disputed)
                for (Who w : closers_)
                    submit_state(w, channel_);
            return;
        }
        const Who refuser = payerSigns ? Who::Payee : Who::Payer;
        note(id(refuser).name + " withholds countersignature on seq " + std::to_string(next.seq));
        start_close(other(refuser));
    }

    void submit_state(Who who, const ChannelState& state)
    {
        try {
            anchor_->submit(state, now_, *dir_);
            note(id(who).name + " submits seq " + std::to_string(state.seq) + " to the ledger");
        } catch (const ProtocolError& e) {
            note(id(who).name + " submission refused: " + e.what());
        }
    }

    void submit_evidence(Who who, const SignedMessage& m)
    {
        if (anchor_->status() != channel::AnchorStatus::Disputed)
            return;
        try {
            anchor_->submit_evidence(m, now_, *dir_);
            note(id(who).name + " submits " + std::string(to_string(m.kind)) + " as evidence");
        } catch (const ProtocolError& e) {
            note(id(who).name + " evidence refused: " + e.what());
        }
    }

    void start_close(Who who)
    {
        if (anchor_->status() == channel::AnchorStatus::Closed)
            return;
        if (closers_.insert(who).second) {
            submit_state(who, lastSigned_);
            for (const auto& m : held(who))
                submit_evidence(who, m);
        }
        schedule_settle();
    }

    void schedule_settle()
    {
        if (settleScheduled_ || !anchor_->window_end())
            return;
        settleScheduled_ = true;
        at(*anchor_->window_end(), [this] { on_settle(); });
    }

    void schedule_timer()
    {
        if (!session_ || !session_->deadline || rebalance::is_terminal(session_->phase))
            return;
        if (timers_.insert(session_->deadline->tick).second)
            at(*session_->deadline, [this] { on_timer(); });
    }

    void after_session_step()
    {
        schedule_timer();
        if (session_ && rebalance::is_terminal(session_->phase))
            schedule_post_session();
    }

    void schedule_post_session()
    {
        if (postScheduled_)
            return;
        postScheduled_ = true;
        for (Who w : {Who::Payer, Who::Payee})
            if (strategy(w).staleClose)
                at(now_ + Duration{1}, [this, w] { on_stale_close(w); });
    }

    // --- handlers -------------------------------------------------------
    void on_open();
    void on_interaction(std::size_t i);
    void on_initiate();
    void on_registration(const SignedMessage& reg);
    void on_proposal(const SignedMessage& mA1);
    void on_accepted(const SignedMessage& mA1I1);
    void on_order(const extrail::TransferOrder& order, bool deferred);
    void on_relay(const SignedMessage& ba1, bool deferred);
    void on_execute(const SignedMessage& bi1);
    void on_delivery(const extrail::TransferOrder& order, bool deferred);
    void on_certificate(Who to, const SignedMessage& cert);
    void on_timer();
    void on_settle();
    void on_stale_close(Who who);
    void on_counter(Who who);
    void on_reversal();
    void on_review();

    void send_order(Who from, const extrail::TransferOrder& order)
    {
        at(now_ + latency(from, MessageKind::M_A1I1), [this, order] { on_order(order, false); });
    }

    void distribute(const SignedMessage& m)
    {
        for (Who w : {Who::Payer, Who::Payee})
            at(now_ + Duration{1}, [this, w, m] { on_certificate(w, m); });
    }

    void handle_effects(const extrail::BankEffects& fx)
    {
        if (!fx.note.empty())
            note(fx.note);
        for (const auto& c : fx.certificates)
            distribute(c);
        if (fx.delivery) {
            auto order = fx.delivery->order;
            at(fx.delivery->arriveAt, [this, order] { on_delivery(order, false); });
            if (cfg_.payerStrategy.reverseTransfer) {
                auto when = order.triggeredAt + order.irreversibleAfter;
                LogicalTime last{when.tick > 0 ? when.tick - 1 : 0};
                at(last > now_ ? last : now_ + Duration{1}, [this] { on_reversal(); });
            }
        }
    }

    std::uint64_t termination_bound() const;

    ScenarioConfig cfg_;
    std::shared_ptr<const SignatureScheme> scheme_;
    PartyId payer_, payee_, payerBankId_, payeeBankId_, regulatorId_;
    KeyPair payerKey_, payeeKey_, payerBankKey_, payeeBankKey_, regulatorKey_;
    std::shared_ptr<KeyDirectory> dir_;
    std::shared_ptr<extrail::BankLedger> payerBank_, payeeBank_;

    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::uint64_t counter_ = 0;
    LogicalTime now_;
    std::uint64_t lastTick_ = 0;
    Record cur_;
    Trace trace_;

    ChannelState channel_;
    ChannelState lastSigned_;
    std::vector<ChannelState> signedHistory_;
    std::optional<channel::LedgerAnchor> anchor_;
    std::optional<channel::Payout> payout_;
    std::set<Who> closers_;
    bool settleScheduled_ = false;

    std::optional<rebalance::RebalanceSession> session_;
    std::vector<SignedMessage> payerHeld_, payeeHeld_;
    std::set<std::uint64_t> timers_;
    bool postScheduled_ = false;

    std::map<std::string, Holdings> start_;
    std::optional<extrail::DisputeCase> dispute_;
    std::optional<extrail::Verdict> verdict_;
};

void Simulation::on_open()
{
    begin("Ledger", "open");
    auto opened = channel::open_channel(cfg_.channelId, payerKey_, payeeKey_, Value::channel(cfg_.depositPayer),
                                        Value::channel(cfg_.depositPayee), Duration{cfg_.disputeWindow});
    channel_ = opened.state;
    lastSigned_ = channel_;
    signedHistory_.push_back(channel_);
    anchor_.emplace(std::move(opened.anchor));
    cause_message(channel::as_update(channel_, payer_));
    cur_.cause.type = "ledger";

    LogicalTime t = now_;
    for (std::size_t i = 0; i < cfg_.interactions.size(); ++i) {
        t = t + Duration{1};
        at(t, [this, i] { on_interaction(i); });
    }
    at(t + Duration{1}, [this] { on_initiate(); });
}

void Simulation::on_interaction(std::size_t i)
{
    begin(payer_.name, "CHANNEL_UPDATE");
    const auto& in = cfg_.interactions[i];
    channel::Proposal p{lastSigned_.seq + 1, Value::channel(in.payer), Value::channel(in.payee), {}};
    try {
        auto update = channel::propose_update(lastSigned_, p, payerKey_);
        auto next = channel::accept_update(lastSigned_, update, payeeKey_, *dir_);
        cause_message(channel::as_update(next, payer_));
        channel_ = next;
        lastSigned_ = next;
        signedHistory_.push_back(next);
    } catch (const ProtocolError& e) {
        note(std::string("update rejected: ") + e.what());
    }
}

void Simulation::on_initiate()
{
    begin(payer_.name, "M_A1");
    start_[payer_.name] = holdings(Who::Payer);
    start_[payee_.name] = holdings(Who::Payee);
    if (!cfg_.session) {
        cur_.skip = true;
        schedule_post_session();
        return;
    }
    const auto& sc = *cfg_.session;
    rebalance::SessionParams params;
    params.sessionId = cfg_.channelId + "/rebalance-1";
    params.payerBank = payerBankId_;
    params.payeeBank = payeeBankId_;
    params.amount = Value::channel(sc.amount);
    params.collateralPayer = Value::channel(sc.collateralPayer);
    params.collateralPayee = Value::channel(sc.collateralPayee);
    params.alternative = sc.alternative;
    params.receiptStage = sc.receiptStage;
    params.mode = sc.mode;
    params.deadlines = sc.deadlines;
    params.policy = sc.policy;
    params.fiatRate = cfg_.equivalenceRate;
    params.irreversibleAfter = Duration{sc.irreversibleAfter};
    params.method = sc.method;
    if (withholds(Who::Payer, MessageKind::M_A1)) {
        note("payer never sends m_A1");
        schedule_post_session();
        return;
    }
    try {
        auto init = rebalance::initiate(channel_, params, payerKey_, now_);
        session_ = init.session;
        cause_message(init.mA1);
        cur_.transcript.push_back("M_A1");

        std::vector<PartyId> sources;
        if (sc.registeredSources) {
            for (const auto& name : *sc.registeredSources)
                if (auto p = party_by_name(cfg_, name))
                    sources.push_back(*p);
        } else {
            sources = {payerBankId_, payeeBankId_};
        }
        auto reg = rebalance::propose_registration(*session_, sources, payerKey_);
        auto mA1 = maybe_forge(Who::Payer, init.mA1);
        at(now_ + latency(Who::Payer, MessageKind::REGISTRATION), [this, reg] { on_registration(reg); });
        at(now_ + latency(Who::Payer, MessageKind::M_A1), [this, mA1] { on_proposal(mA1); });
        schedule_timer();
    } catch (const ProtocolError& e) {
        note(std::string("initiation refused: ") + e.what());
        schedule_post_session();
    }
}

void Simulation::on_registration(const SignedMessage& reg)
{
    begin(payee_.name, "REGISTRATION");
    cur_.payload = hex(content_digest(reg));
    if (!session_ || withholds(Who::Payee, MessageKind::REGISTRATION)) {
        note("registration not countersigned");
        return;
    }
    try {
        auto both = sign(payeeKey_, reg);
        auto step = rebalance::register_sources(*session_, channel_, both, *dir_);
        cause_message(both);
        session_ = step.session;
        cur_.transcript.push_back("REGISTRATION");
        if (step.channel.seq != channel_.seq)
            ratify(step.channel);
        payerHeld_.push_back(both);
        payeeHeld_.push_back(both);
    } catch (const ProtocolError& e) {
        note(std::string("registration refused: ") + e.what());
    }
}

void Simulation::on_proposal(const SignedMessage& mA1)
{
    begin(payee_.name, "M_A1I1");
    cause_message(mA1);
    if (!session_)
        return;
    if (withholds(Who::Payee, MessageKind::M_A1I1)) {
        note("payee declines the proposal");
        return;
    }
    try {
        auto acc = rebalance::accept(*session_, mA1, channel_, payeeKey_, now_, *dir_);
        session_ = acc.session;
        cur_.transcript.push_back("M_A1I1");
        ratify(acc.channel);
        after_session_step();
        const auto mA1I1 = acc.mA1I1;
        if (session_->terms.mode == TransferMode::RequestToPay) {
            // Request-to-pay: the payee files the request at the payer's bank.
            auto order = rebalance::submit_to_bank(*session_, maybe_forge(Who::Payee, mA1I1), now_);
            send_order(Who::Payee, order);
        }
        at(now_ + latency(Who::Payee, MessageKind::M_A1I1), [this, mA1I1] { on_accepted(mA1I1); });
    } catch (const ProtocolError& e) {
        note(std::string("proposal rejected: ") + e.what());
    }
}

void Simulation::on_accepted(const SignedMessage& mA1I1)
{
    begin(payer_.name, "order");
    cause_message(mA1I1);
    cur_.cause.type = "none";
    payerHeld_.push_back(mA1I1);
    if (!session_ || session_->terms.mode != TransferMode::Push)
        return;
    if (withholds(Who::Payer, MessageKind::M_A1I1)) {
        note("payer never submits the order");
        return;
    }
    try {
        auto order = rebalance::submit_to_bank(*session_, mA1I1, now_);
        order.authorization = maybe_forge(Who::Payer, order.authorization);
        send_order(Who::Payer, order);
    } catch (const ProtocolError& e) {
        note(std::string("order not submitted: ") + e.what());
    }
}

void Simulation::on_order(const extrail::TransferOrder& order, bool deferred)
{
    begin(payerBankId_.name, deferred ? "order-deferred" : "order");
    cur_.payload = hex(content_digest(order.authorization));
    cur_.cause = {"message", std::string(to_string(order.authorization.kind)), verify(order.authorization, *dir_)};
    const auto alt = session_ ? session_->terms.alternative : Alternative::Alt1Design1;
    try {
        if (alt == Alternative::Alt2) {
            auto fx = extrail::forward_alternative2(*payerBank_, order, now_, payerBankKey_, *dir_, deferred);
            if (fx.message) {
                auto ba1 = *fx.message;
                distribute(ba1);
                at(now_ + Duration{1}, [this, ba1] { on_relay(ba1, false); });
            }
            if (fx.retryAt)
                at(*fx.retryAt, [this, order] { on_order(order, true); });
            if (!fx.message && !fx.retryAt)
                note("order not forwarded");
        } else {
            auto fx = extrail::process_order(*payerBank_, order, now_, payerBankKey_, *dir_, deferred);
            handle_effects(fx);
            if (fx.retryAt)
                at(*fx.retryAt, [this, order] { on_order(order, true); });
        }
    } catch (const ProtocolError& e) {
        note(std::string("order refused: ") + e.what());
    }
}

void Simulation::on_relay(const SignedMessage& ba1, bool deferred)
{
    begin(payeeBankId_.name, deferred ? "relay-deferred" : "relay");
    cause_message(ba1);
    auto fx = extrail::relay_alternative2(*payerBank_, *payeeBank_, ba1, now_, payeeBankKey_, *dir_, deferred);
    if (fx.message) {
        auto bi1 = *fx.message;
        distribute(bi1);
        at(now_ + Duration{1}, [this, bi1] { on_execute(bi1); });
    } else if (fx.retryAt) {
        at(*fx.retryAt, [this, ba1] { on_relay(ba1, true); });
    } else {
        note("relay withheld");
    }
}

void Simulation::on_execute(const SignedMessage& bi1)
{
    begin(payerBankId_.name, "execute");
    cause_message(bi1);
    try {
        handle_effects(extrail::execute_alternative2(*payerBank_, bi1, now_, *dir_));
    } catch (const ProtocolError& e) {
        note(std::string("execution refused: ") + e.what());
    }
}

void Simulation::on_delivery(const extrail::TransferOrder& order, bool deferred)
{
    begin(payeeBankId_.name, deferred ? "credit-deferred" : "delivery");
    cur_.payload = hex(content_digest(order.authorization));
    try {
        auto fx = extrail::receive_delivery(*payeeBank_, *payerBank_, order, now_, payeeBankKey_, deferred);
        handle_effects(fx);
        if (fx.retryAt)
            at(*fx.retryAt, [this, order] { on_delivery(order, true); });
    } catch (const ProtocolError& e) {
        if (e.code() == Errc::UnknownCustomer) {
            extrail::reject_delivery(*payeeBank_, *payerBank_, order, now_);
            note("payee account unavailable; funds held in suspense");
        } else {
            note(std::string("delivery refused: ") + e.what());
        }
    }
}

void Simulation::on_certificate(Who to, const SignedMessage& cert)
{
    begin(id(to).name, std::string(to_string(cert.kind)));
    cause_message(cert);
    held(to).push_back(cert);
    if (closers_.count(to))
        submit_evidence(to, cert);
    if (!session_ || rebalance::is_terminal(session_->phase))
        return;
    if (std::find(session_->transcript.begin(), session_->transcript.end(), cert) != session_->transcript.end()) {
        note("already applied");
        return;
    }
    try {
        auto step = rebalance::accept_certificate(*session_, channel_, cert, now_, *dir_);
        session_ = step.session;
        cur_.transcript.push_back(std::string(to_string(cert.kind)));
        ratify(step.channel);
        after_session_step();
    } catch (const ProtocolError& e) {
        note(std::string("not applied: ") + e.what());
    }
}

void Simulation::on_timer()
{
    begin("clock", "timeout");
    cur_.cause = {"timeout", "", false};
    if (!session_ || !session_->deadline || now_ < *session_->deadline ||
        rebalance::is_terminal(session_->phase)) {
        cur_.skip = true;
        return;
    }
    auto step = rebalance::on_timeout(*session_, channel_, now_, *dir_);
    session_ = step.session;
    if (step.channel != channel_)
        ratify(step.channel);
    after_session_step();
}

void Simulation::on_settle()
{
    begin("Ledger", "close");
    cur_.cause = {"ledger", "", true};
    settleScheduled_ = false;
    if (anchor_->status() != channel::AnchorStatus::Disputed) {
        cur_.skip = true;
        return;
    }
    auto when = anchor_->settlement_tick(*dir_);
    if (when && *when > now_) {
        settleScheduled_ = true;
        at(*when, [this] { on_settle(); });
        cur_.skip = true;
        return;
    }
    payout_ = anchor_->close(now_, *dir_);
    note("paid out seq " + std::to_string(payout_->seq));
}

void Simulation::on_stale_close(Who who)
{
    begin(id(who).name, "stale-close");
    if (anchor_->status() != channel::AnchorStatus::Open) {
        cur_.skip = true;
        return;
    }
    // Best state for herself among everything both signed; oldest on ties.
    const ChannelState* best = nullptr;
    for (const auto& s : signedHistory_)
        if (!best || claim(who, s) > claim(who, *best))
            best = &s;
    cause_message(channel::as_update(*best, payer_));
    submit_state(who, *best);
    schedule_settle();
    at(now_ + Duration{1}, [this, who] { on_counter(other(who)); });
}

void Simulation::on_counter(Who who)
{
    begin(id(who).name, "counter-submit");
    cause_message(channel::as_update(lastSigned_, payer_));
    if (anchor_->status() != channel::AnchorStatus::Disputed) {
        cur_.skip = true;
        return;
    }
    if (closers_.insert(who).second) {
        submit_state(who, lastSigned_);
        for (const auto& m : held(who))
            submit_evidence(who, m);
    }
}

void Simulation::on_reversal()
{
    begin(payer_.name, "reversal");
    if (!session_) {
        cur_.skip = true;
        return;
    }
    const bool ok = extrail::request_reversal(*payerBank_, *payeeBank_, session_->sessionId, now_);
    note(ok ? "transfer reversed" : "reversal refused");
}

void Simulation::on_review()
{
    begin(payee_.name, "DISPUTE");
    if (!session_ || !session_->acceptedDigest) {
        cur_.skip = true;
        return;
    }
    const auto res = session_->resolution.value_or(session_->phase);
    const auto expected = session_->terms.fiatAmount.amount();
    const auto got = holdings(Who::Payee).fiat;
    const auto before = start_[payee_.name].fiat;
    const bool shortfall = got < before + expected;
    if ((res != Phase::Settled && res != Phase::SettledWithCompensation) || !shortfall) {
        cur_.skip = true;
        return;
    }
    try {
        auto raised = rebalance::raise_dispute(*session_, payeeHeld_, payee_, *dir_);
        auto filed = rebalance::dispute_message(raised.dispute, cfg_.channelId, payeeKey_);
        cause_message(filed);
        session_ = raised.session;
        dispute_ = raised.dispute;

        auto verdict = extrail::adjudicate(raised.dispute, *payerBank_, *payeeBank_, *dir_);
        extrail::apply_remedy(verdict, *payerBank_, *payeeBank_);
        verdict_ = verdict;

        SignedMessage v;
        v.kind = MessageKind::VERDICT;
        v.session = session_->sessionId;
        v.channel = cfg_.channelId;
        v.body = VerdictBody{regulatorId_, content_digest(filed), verdict.culprit, verdict.remedy,
                             std::string(extrail::to_string(verdict.rationale))};
        v = sign(regulatorKey_, v);
        note("verdict: " + std::string(extrail::to_string(verdict.rationale)) +
             (verdict.culprit ? " against " + verdict.culprit->name : std::string()) + ", remedy " +
             std::to_string(verdict.remedy.amount()));
        cur_.transcript.push_back("DISPUTE");
        cur_.transcript.push_back("VERDICT");
    } catch (const ProtocolError& e) {
        note(std::string("dispute not admissible: ") + e.what());
    }
}

std::uint64_t Simulation::termination_bound() const
{
    std::uint64_t bound = cfg_.interactions.size() + 1 + 2 * cfg_.disputeWindow + 20;
    if (cfg_.session) {
        const auto& d = cfg_.session->deadlines;
        bound += 3 * d.initiationTimeout.ticks + d.transferMax.ticks + d.actualTransfer.ticks +
                 cfg_.session->irreversibleAfter;
    }
    for (const auto* b : {&cfg_.payerBankConfig, &cfg_.payeeBankConfig})
        if (b->conduct.behavior == extrail::BankBehavior::Slow)
            bound += b->conduct.slowDelay.ticks;
    for (const auto* s : {&cfg_.payerStrategy, &cfg_.payeeStrategy})
        for (const auto& [_, ticks] : s->delay)
            bound += ticks;
    return bound;
}

RunResult Simulation::run()
{
    trace_.header = {{"record", "header"},
                     {"format", kTraceFormat},
                     {"scenario", to_json(cfg_)},
                     {"terminationBound", termination_bound()}};
    at(LogicalTime{0}, [this] { on_open(); });
    bool reviewed = false;
    while (true) {
        if (queue_.empty()) {
            if (reviewed)
                break;
            reviewed = true;
            at(LogicalTime{lastTick_ + 1}, [this] { on_review(); });
        }
        Event ev = queue_.top();
        queue_.pop();
        now_ = ev.at;
        ev.run();
        emit(ev);
    }

    RunResult r;
    r.config = cfg_;
    r.directory = dir_;
    r.session = session_;
    r.channel = channel_;
    r.payout = payout_;
    r.payerBank = payerBank_;
    r.payeeBank = payeeBank_;
    r.payerEvidence = payerHeld_;
    r.payeeEvidence = payeeHeld_;
    r.dispute = dispute_;
    r.verdict = verdict_;
    r.start = start_;
    if (r.start.empty()) {
        r.start[payer_.name] = holdings(Who::Payer);
        r.start[payee_.name] = holdings(Who::Payee);
    }
    r.finish[payer_.name] = holdings(Who::Payer);
    r.finish[payee_.name] = holdings(Who::Payee);
    r.terminationBound = termination_bound();
    r.finalTick = lastTick_;
    trace_.end = {{"record", "end"},
                  {"events", trace_.events.size()},
                  {"finalTick", lastTick_},
                  {"outcome", r.outcome()}};
    r.trace = std::move(trace_);
    r.violations = audit_trace(r.trace);
    for (auto& v : check_safety(r))
        r.violations.push_back(std::move(v));
    return r;
}

} // namespace

std::string RunResult::outcome() const
{
    if (!session)
        return "NONE";
    return std::string(rebalance::to_string(session->resolution.value_or(session->phase)));
}

RunResult simulate(const ScenarioConfig& config, std::uint64_t seed)
{
    return Simulation(config, seed).run();
}

std::vector<Violation> check_safety(const RunResult& r)
{
    std::vector<Violation> out;
    const auto rate = r.config.equivalenceRate;
    std::optional<Phase> res;
    if (r.session && r.session->acceptedDigest)
        res = r.session->resolution;
    std::uint64_t ca = 0;
    std::uint64_t ci = 0;
    if (r.config.session) {
        ca = r.config.session->collateralPayer * rate;
        ci = r.config.session->collateralPayee * rate;
    }
    auto check = [&](const std::string& name, const ParticipantStrategy& strat, bool isPayer) {
        if (!strat.honest() || !r.start.count(name) || !r.finish.count(name))
            return;
        const auto start = static_cast<std::int64_t>(r.start.at(name).total(rate));
        const auto end = static_cast<std::int64_t>(r.finish.at(name).total(rate));
        std::int64_t required = start;
        // The protocol's own punishment and compensation rules.
        if (res == Phase::Reverted)
            required += isPayer ? -static_cast<std::int64_t>(ca) : static_cast<std::int64_t>(ca);
        if (res == Phase::SettledWithCompensation)
            required += isPayer ? static_cast<std::int64_t>(ci) : -static_cast<std::int64_t>(ci);
        if (end < required)
            out.push_back({std::nullopt, "safety",
                           "honest " + name + " ends with " + std::to_string(end) + ", entitled to at least " +
                               std::to_string(required)});
    };
    check(r.config.payer, r.config.payerStrategy, true);
    check(r.config.payee, r.config.payeeStrategy, false);
    return out;
}

json report_json(const RunResult& r)
{
    json j;
    j["scenario"] = r.config.name;
    j["outcome"] = r.outcome();
    j["phase"] = r.session ? json(std::string(rebalance::to_string(r.session->phase))) : json(nullptr);
    const bool closed = r.payout.has_value();
    j["channel"] = {{"status", closed ? "closed" : "open"},
                    {"seq", closed ? r.payout->seq : r.channel.seq},
                    {r.config.payer, closed ? r.payout->toA.amount() : r.channel.balanceA.amount()},
                    {r.config.payee, closed ? r.payout->toI.amount() : r.channel.balanceI.amount()},
                    {"locked", closed ? 0 : r.channel.locked().amount()}};
    json parties = json::object();
    for (const auto& [name, fin] : r.finish) {
        const auto& st = r.start.at(name);
        parties[name] = {{"channelStart", st.channel},
                         {"channelEnd", fin.channel},
                         {"fiatStart", st.fiat},
                         {"fiatEnd", fin.fiat},
                         {"netChange", static_cast<std::int64_t>(fin.total(r.config.equivalenceRate)) -
                                           static_cast<std::int64_t>(st.total(r.config.equivalenceRate))}};
    }
    j["parties"] = parties;
    if (r.verdict) {
        j["verdict"] = {{"culprit", r.verdict->culprit ? json(r.verdict->culprit->name) : json(nullptr)},
                        {"remedy", r.verdict->remedy.amount()},
                        {"beneficiary", r.verdict->beneficiary.name},
                        {"rationale", std::string(extrail::to_string(r.verdict->rationale))}};
    } else {
        j["verdict"] = nullptr;
    }
    j["events"] = r.trace.events.size();
    j["finalTick"] = r.finalTick;
    j["terminationBound"] = r.terminationBound;
    json v = json::array();
    for (const auto& x : r.violations)
        v.push_back(to_json(x));
    j["violations"] = v;
    return j;
}

std::string report_table(const RunResult& r)
{
    const auto j = report_json(r);
    std::ostringstream out;
    out << "scenario   " << r.config.name << "\n";
    out << "outcome    " << j["outcome"].get<std::string>() << "\n";
    out << "channel    " << j["channel"]["status"].get<std::string>() << " seq " << j["channel"]["seq"] << ": "
        << r.config.payer << " " << j["channel"][r.config.payer] << ", " << r.config.payee << " "
        << j["channel"][r.config.payee] << "\n";
    for (const auto& [name, p] : j["parties"].items())
        out << "party      " << name << ": channel " << p["channelStart"] << " -> " << p["channelEnd"] << ", fiat "
            << p["fiatStart"] << " -> " << p["fiatEnd"] << ", net " << p["netChange"] << "\n";
    if (!j["verdict"].is_null())
        out << "verdict    " << j["verdict"]["rationale"].get<std::string>() << ", culprit "
            << (j["verdict"]["culprit"].is_null() ? std::string("none") : j["verdict"]["culprit"].get<std::string>())
            << ", remedy " << j["verdict"]["remedy"] << "\n";
    out << "events     " << r.trace.events.size() << " (final tick " << r.finalTick << ", bound "
        << r.terminationBound << ")\n";
    if (r.violations.empty()) {
        out << "violations none\n";
    } else {
        for (const auto& v : r.violations)
            out << "violation  " << v.invariant << (v.index ? " @" + std::to_string(*v.index) : std::string())
                << ": " << v.detail << "\n";
    }
    return out.str();
}

} // namespace hybridpay::sim
