#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hybridpay/message.hpp"

namespace hybridpay::extrail {

enum class BankBehavior : std::uint8_t { Honest, ConfirmNoExecute, ReceiveNoCredit, Silent, Slow };

std::string_view to_string(BankBehavior behavior);
std::optional<BankBehavior> bank_behavior_from_string(std::string_view name);

struct BankConduct {
    BankBehavior behavior = BankBehavior::Honest;
    Duration slowDelay{3};
};

/// Ticks an honest bank needs to move value to the receiving bank.
inline constexpr Duration kDeliveryLatency{2};

struct TransferOrder {
    std::string orderId;
    PartyId from;
    PartyId to;
    PartyId fromBank;
    PartyId toBank;
    Value amount = Value::fiat(0);
    std::string sessionRef;
    LogicalTime triggeredAt;
    Duration irreversibleAfter{8};
    TransferMode mode = TransferMode::Push;
    /// The countersigned request (m_A1I1) authorising the transfer.
    SignedMessage authorization;
    /// Sources the participants registered for this session.
    std::vector<PartyId> registeredSources;
};

/// Forensic record a bank keeps per session; the regulator reads these.
struct OrderRecord {
    TransferOrder order;
    LogicalTime receivedAt;
    bool confirmed = false;
    bool debited = false;
    bool delivered = false;
    bool received = false;
    bool credited = false;
    bool rejected = false;
    bool reversed = false;
    std::optional<LogicalTime> creditedAt;
    std::string note;
};

class BankLedger {
public:
    BankLedger(PartyId bank, BankConduct conduct, Value equity);

    const PartyId& bank() const { return bank_; }
    const BankConduct& conduct() const { return conduct_; }

    void open_account(const std::string& customer, Value balance);
    void close_account(const std::string& customer);
    std::optional<Value> balance(const std::string& customer) const;
    const std::map<std::string, Value>& accounts() const { return accounts_; }

    Value suspense() const { return suspense_; }
    Value equity() const { return equity_; }
    /// Value debited here and not yet booked by the receiving bank.
    Value in_flight() const;
    const std::vector<TransferOrder>& pending_transfers() const { return pending_; }

    /// accounts + suspense + equity + in-flight.
    Value total() const;

    const OrderRecord* record(const std::string& sessionRef) const;
    OrderRecord* record(const std::string& sessionRef);
    OrderRecord& record_for(const TransferOrder& order, LogicalTime now);

    // Raw bookings, used by the operations below and by regulator remedies.
    void debit(const std::string& customer, Value amount);
    void credit(const std::string& customer, Value amount);
    void book_suspense(Value amount) { suspense_ += amount; }
    void release_suspense(Value amount) { suspense_ -= amount; }
    void draw_equity(Value amount) { equity_ -= amount; }
    void push_pending(TransferOrder order) { pending_.push_back(std::move(order)); }
    std::optional<TransferOrder> pop_pending(const std::string& orderId);

private:
    PartyId bank_;
    BankConduct conduct_;
    std::map<std::string, Value> accounts_;
    Value suspense_ = Value::fiat(0);
    Value equity_ = Value::fiat(0);
    std::vector<TransferOrder> pending_;
    std::map<std::string, OrderRecord> records_;
};

struct Delivery {
    TransferOrder order;
    LogicalTime arriveAt;
};

struct BankEffects {
    std::vector<SignedMessage> certificates;
    std::optional<Delivery> delivery;
    /// Set when the bank defers the work (SLOW); call again at this tick.
    std::optional<LogicalTime> retryAt;
    bool ignored = false;
    std::string note;
};

/// True iff the order carries a verifying m_A1I1 naming this bank as the
/// payer's bank, and this bank is a registered source.
bool order_authorised(const BankLedger& bank, const TransferOrder& order, const KeyDirectory& directory);

/// Payer's bank handles an order. Under Alternative 1 an executing bank emits
/// Cert1; under Alternative 2 it executes after m_A1I1BA1BI1 without Cert1.
/// `deferred` marks a call that a SLOW bank scheduled for itself.
BankEffects process_order(BankLedger& bank, const TransferOrder& order, LogicalTime now, const KeyPair& bankKey,
                          const KeyDirectory& directory, bool deferred = false);

/// Payee's bank books an inter-bank delivery. Throws UnknownCustomer (with no
/// booking) when the payee has no account there.
BankEffects receive_delivery(BankLedger& receiver, BankLedger& sender, const TransferOrder& order, LogicalTime now,
                             const KeyPair& bankKey, bool deferred = false);

/// Books a delivery the receiver could not credit (closed account) into suspense.
void reject_delivery(BankLedger& receiver, BankLedger& sender, const TransferOrder& order, LogicalTime now);

struct RelayEffects {
    std::optional<SignedMessage> message;
    std::optional<LogicalTime> retryAt;
};

/// Alternative 2, payer's bank: countersigns m_A1I1 into m_A1I1BA1.
RelayEffects forward_alternative2(BankLedger& payerBank, const TransferOrder& order, LogicalTime now,
                                  const KeyPair& bankKey, const KeyDirectory& directory, bool deferred = false);

/// Alternative 2, payee's bank: appends its signature to a verifying
/// m_A1I1BA1 issued by `payerBank`, or stays silent.
RelayEffects relay_alternative2(const BankLedger& payerBank, BankLedger& payeeBank, const SignedMessage& mA1I1BA1,
                                LogicalTime now, const KeyPair& bankKey, const KeyDirectory& directory,
                                bool deferred = false);

/// Alternative 2, payer's bank, after m_A1I1BA1BI1 arrives: debits and
/// delivers (a CONFIRM_NO_EXECUTE bank records the confirmation and stops).
BankEffects execute_alternative2(BankLedger& payerBank, const SignedMessage& mA1I1BA1BI1, LogicalTime now,
                                 const KeyDirectory& directory);

/// Reverses a delivered transfer. Push transfers can be reversed until
/// `irreversibleAfter` has elapsed; request-to-pay transfers never.
bool request_reversal(BankLedger& payerBank, BankLedger& payeeBank, const std::string& sessionRef,
                      LogicalTime now);

struct DisputeCase {
    PartyId claimant;
    std::string sessionRef;
    Digest authorization{};
    RebalanceTerms terms;
    std::vector<SignedMessage> certificates;
};

enum class Rationale : std::uint8_t {
    CompletedCorrectly,
    ConfirmedNotExecuted,
    ReceivedNotCredited,
    PayeeAccountClosed,
    NotExecuted,
};

std::string_view to_string(Rationale rationale);

struct Verdict {
    std::optional<PartyId> culprit;
    Value remedy = Value::fiat(0);
    PartyId beneficiary;
    Rationale rationale = Rationale::CompletedCorrectly;

    bool operator==(const Verdict&) const = default;
};

/// Pure function of the case's certificates and both ledgers' records.
Verdict adjudicate(const DisputeCase& dispute, const BankLedger& payerBank, const BankLedger& payeeBank,
                   const KeyDirectory& directory);

/// Moves the remedy from the culprit bank's equity to the beneficiary's account.
void apply_remedy(const Verdict& verdict, BankLedger& payerBank, BankLedger& payeeBank);

} // namespace hybridpay::extrail
