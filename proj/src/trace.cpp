#include "hybridpay/trace.hpp"

#include <fstream>
#include <sstream>

#include "hybridpay/crypto.hpp"
#include "hybridpay/error.hpp"

namespace hybridpay::sim {

using nlohmann::json;

std::string Trace::to_jsonl() const
{
    std::string out = header.dump() + "\n";
    for (const auto& e : events)
        out += e.dump() + "\n";
    out += end.dump() + "\n";
    return out;
}

Trace parse_trace(const std::string& text)
{
    Trace t;
    std::istringstream in(text);
    std::string line;
    bool sawHeader = false;
    bool sawEnd = false;
    std::size_t lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        if (line.empty())
            continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception&) {
            fail(Errc::Malformed, "line " + std::to_string(lineNo) + " is not JSON");
        }
        if (!rec.is_object() || !rec.contains("record") || !rec["record"].is_string())
            fail(Errc::Malformed, "line " + std::to_string(lineNo) + " has no record type");
        const auto type = rec["record"].get<std::string>();
        if (sawEnd)
            fail(Errc::Malformed, "records after the end record");
        if (type == "header") {
            if (sawHeader)
                fail(Errc::Malformed, "duplicate header");
            if (rec.value("format", "") != kTraceFormat)
                fail(Errc::Malformed, "unsupported trace format");
            t.header = rec;
            sawHeader = true;
        } else if (!sawHeader) {
            fail(Errc::Malformed, "trace does not start with a header");
        } else if (type == "event") {
            if (!rec.contains("snapshot") || !rec["snapshot"].is_object() || !rec.contains("tick") ||
                !rec["tick"].is_number_unsigned())
                fail(Errc::Malformed, "event on line " + std::to_string(lineNo) + " lacks tick or snapshot");
            t.events.push_back(std::move(rec));
        } else if (type == "end") {
            t.end = rec;
            sawEnd = true;
        } else {
            fail(Errc::Malformed, "unknown record type '" + type + "'");
        }
    }
    if (!sawHeader)
        fail(Errc::Malformed, "empty trace");
    if (!sawEnd)
        fail(Errc::Malformed, "trace has no end record");
    return t;
}

Trace load_trace(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(Errc::Malformed, "cannot read trace '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_trace(buf.str());
}

std::string snapshot_digest(const json& snapshot)
{
    return to_hex(sha256(snapshot.dump()));
}

json to_json(const Violation& v)
{
    json j;
    j["index"] = v.index ? json(*v.index) : json(nullptr);
    j["invariant"] = v.invariant;
    j["detail"] = v.detail;
    return j;
}

namespace {

std::uint64_t num(const json& obj, const char* key)
{
    if (!obj.is_object() || !obj.contains(key) || !obj[key].is_number_unsigned())
        fail(Errc::Malformed, std::string("missing numeric field '") + key + "'");
    return obj[key].get<std::uint64_t>();
}

/// Fields of the channel snapshot that only signed messages, timeouts or the
/// ledger may change.
json channel_core(const json& channel)
{
    return {{"seq", channel.at("seq")},
            {"balanceA", channel.at("balanceA")},
            {"balanceI", channel.at("balanceI")},
            {"locks", channel.at("locks")},
            {"status", channel.at("status")}};
}

std::uint64_t fiat_total(const json& banks)
{
    std::uint64_t total = 0;
    for (const auto& [_, bank] : banks.items()) {
        for (const auto& [__, v] : bank.at("accounts").items())
            total += v.get<std::uint64_t>();
        total += num(bank, "suspense") + num(bank, "equity") + num(bank, "inFlight");
    }
    return total;
}

const std::vector<std::string> kPhaseOrder = {"PROPOSED", "ACCEPTED_LOCKED", "TRANSFER_TRIGGERED", "AWAITING_RECEIPT",
                                              "SETTLED", "SETTLED_WITH_COMPENSATION", "REVERTED", "DISPUTED"};

bool terminal_phase(const std::string& p)
{
    return p == "SETTLED" || p == "SETTLED_WITH_COMPENSATION" || p == "REVERTED" || p == "DISPUTED";
}

// Mirrors the normative phase graph without depending on the engine, so an
// engine bug cannot hide from the auditor.
bool phase_edge(const std::string& from, const std::string& to)
{
    if (from == to || to == "DISPUTED")
        return true;
    if (from == "PROPOSED")
        return to == "ACCEPTED_LOCKED" || to == "REVERTED";
    if (from == "ACCEPTED_LOCKED")
        return to == "SETTLED" || to == "AWAITING_RECEIPT" || to == "TRANSFER_TRIGGERED" || to == "REVERTED";
    if (from == "TRANSFER_TRIGGERED")
        return to == "SETTLED" || to == "AWAITING_RECEIPT" || to == "REVERTED";
    if (from == "AWAITING_RECEIPT")
        return to == "SETTLED" || to == "SETTLED_WITH_COMPENSATION";
    return false;
}

} // namespace

std::vector<Violation> audit_trace(const Trace& trace)
{
    std::vector<Violation> out;
    auto flag = [&](std::optional<std::size_t> i, std::string inv, std::string detail) {
        out.push_back({i, std::move(inv), std::move(detail)});
    };

    std::optional<std::uint64_t> fiatStart;
    std::optional<json> prevCore;
    std::optional<std::string> prevPhase;
    std::uint64_t prevTick = 0;
    bool accepted = false;
    bool settling = false;
    std::uint64_t lastTick = 0;

    for (std::size_t i = 0; i < trace.events.size(); ++i) {
        const auto& e = trace.events[i];
        try {
            const auto& snap = e.at("snapshot");
            const auto tick = num(e, "tick");
            lastTick = tick;
            if (tick < prevTick)
                flag(i, "time-monotonic", "tick " + std::to_string(tick) + " after " + std::to_string(prevTick));
            prevTick = tick;

            if (!e.contains("digest") || e["digest"] != snapshot_digest(snap))
                flag(i, "snapshot-digest", "recorded digest does not match the snapshot");

            const auto& ch = snap.at("channel");
            std::uint64_t locked = 0;
            for (const auto& l : ch.at("locks"))
                locked += num(l, "amount");
            if (num(ch, "balanceA") + num(ch, "balanceI") + locked != num(ch, "capacity"))
                flag(i, "channel-conservation",
                     "balances " + std::to_string(num(ch, "balanceA")) + "+" + std::to_string(num(ch, "balanceI")) +
                         " plus locked " + std::to_string(locked) + " != capacity " +
                         std::to_string(num(ch, "capacity")));

            const auto fiat = fiat_total(snap.at("banks"));
            if (!fiatStart)
                fiatStart = fiat;
            else if (fiat != *fiatStart)
                flag(i, "fiat-conservation",
                     "bank totals " + std::to_string(fiat) + " != " + std::to_string(*fiatStart));

            const auto core = channel_core(ch);
            if (prevCore && core != *prevCore) {
                const auto& cause = e.at("cause");
                const auto type = cause.value("type", "none");
                const bool ok = type == "timeout" || type == "ledger" ||
                                (type == "message" && cause.value("verified", false));
                if (!ok)
                    flag(i, "signed-transition",
                         "channel state changed without a verified message, timeout or ledger action");
            }
            prevCore = core;

            if (e.contains("transcript"))
                for (const auto& k : e["transcript"]) {
                    const auto kind = k.get<std::string>();
                    if (kind == "M_A1I1")
                        accepted = true;
                    if (kind == "CERT1" || kind == "CERT2" || kind == "M_A1I1BA1BI1")
                        settling = true;
                }

            const auto& session = snap.at("session");
            if (!session.is_null()) {
                const auto phase = session.at("phase").get<std::string>();
                if (std::find(kPhaseOrder.begin(), kPhaseOrder.end(), phase) == kPhaseOrder.end())
                    flag(i, "phase-graph", "unknown phase " + phase);
                if (prevPhase && !phase_edge(*prevPhase, phase))
                    flag(i, "phase-graph", *prevPhase + " -> " + phase + " is not an allowed transition");
                const bool settledNow = phase == "SETTLED" || phase == "SETTLED_WITH_COMPENSATION";
                const bool newlySettled = settledNow && (!prevPhase || *prevPhase != phase);
                if (newlySettled && !(accepted && settling))
                    flag(i, "authorisation", phase + " reached without a verified m_A1I1 and settling message");
                prevPhase = phase;
            }
        } catch (const nlohmann::json::exception& ex) {
            flag(i, "record-shape", ex.what());
        } catch (const ProtocolError& ex) {
            flag(i, "record-shape", ex.what());
        }
    }

    if (trace.header.contains("terminationBound") && trace.header["terminationBound"].is_number_unsigned()) {
        const auto bound = trace.header["terminationBound"].get<std::uint64_t>();
        if (lastTick > bound)
            flag(std::nullopt, "termination",
                 "last event at tick " + std::to_string(lastTick) + " exceeds bound " + std::to_string(bound));
    }
    if (prevPhase && !terminal_phase(*prevPhase))
        flag(std::nullopt, "termination", "session ended in non-terminal phase " + *prevPhase);
    return out;
}

} // namespace hybridpay::sim
