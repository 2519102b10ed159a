#include "hybridpay/scenario.hpp"

#include <fstream>
#include <initializer_list>

namespace hybridpay::sim {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what)
{
    fail(Errc::InvalidScenario, what);
}

void only_fields(const json& obj, const std::string& where, std::initializer_list<std::string_view> allowed)
{
    if (!obj.is_object())
        invalid(where + " must be an object");
    for (const auto& [key, _] : obj.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            invalid("unknown field '" + key + "' in " + where);
}

std::uint64_t uint_field(const json& obj, const char* key, const std::string& where, std::uint64_t fallback)
{
    if (!obj.contains(key))
        return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number_unsigned())
        invalid(where + "." + key + " must be a non-negative integer");
    return v.get<std::uint64_t>();
}

std::string string_field(const json& obj, const char* key, const std::string& where, std::string fallback)
{
    if (!obj.contains(key))
        return fallback;
    const auto& v = obj.at(key);
    if (!v.is_string() || v.get<std::string>().empty())
        invalid(where + "." + key + " must be a non-empty string");
    return v.get<std::string>();
}

bool bool_field(const json& obj, const char* key, const std::string& where, bool fallback)
{
    if (!obj.contains(key))
        return fallback;
    if (!obj.at(key).is_boolean())
        invalid(where + "." + key + " must be a boolean");
    return obj.at(key).get<bool>();
}

MessageKind kind_value(const json& v, const std::string& where)
{
    if (!v.is_string())
        invalid(where + " must name a message kind");
    auto kind = message_kind_from_string(v.get<std::string>());
    if (!kind)
        invalid(where + ": unknown message kind '" + v.get<std::string>() + "'");
    return *kind;
}

Beneficiary beneficiary_value(const json& obj, const char* key, const std::string& where, Beneficiary fallback)
{
    auto s = string_field(obj, key, where, fallback == Beneficiary::Payer ? "payer" : "payee");
    if (s == "payer")
        return Beneficiary::Payer;
    if (s == "payee")
        return Beneficiary::Payee;
    invalid(where + "." + key + " must be 'payer' or 'payee'");
}

ParticipantStrategy parse_strategy(const json& obj, const std::string& where)
{
    only_fields(obj, where, {"drop", "delay", "forge", "staleClose", "withholdCosign", "reverseTransfer"});
    ParticipantStrategy s;
    if (obj.contains("drop")) {
        if (!obj["drop"].is_array())
            invalid(where + ".drop must be an array");
        for (const auto& k : obj["drop"])
            s.drop.insert(kind_value(k, where + ".drop"));
    }
    if (obj.contains("forge")) {
        if (!obj["forge"].is_array())
            invalid(where + ".forge must be an array");
        for (const auto& k : obj["forge"])
            s.forge.insert(kind_value(k, where + ".forge"));
    }
    if (obj.contains("delay")) {
        if (!obj["delay"].is_object())
            invalid(where + ".delay must be an object of kind -> ticks");
        for (const auto& [k, v] : obj["delay"].items()) {
            auto kind = kind_value(json(k), where + ".delay");
            if (!v.is_number_unsigned())
                invalid(where + ".delay." + k + " must be a non-negative integer");
            s.delay[kind] = v.get<std::uint64_t>();
        }
    }
    s.staleClose = bool_field(obj, "staleClose", where, false);
    s.withholdCosign = bool_field(obj, "withholdCosign", where, false);
    s.reverseTransfer = bool_field(obj, "reverseTransfer", where, false);
    return s;
}

BankConfig parse_bank(const json& obj, const std::string& where)
{
    only_fields(obj, where, {"equity", "behavior", "slowDelay", "accounts"});
    BankConfig b;
    b.equity = uint_field(obj, "equity", where, b.equity);
    auto behavior = string_field(obj, "behavior", where, "HONEST");
    auto parsed = extrail::bank_behavior_from_string(behavior);
    if (!parsed)
        invalid(where + ".behavior: unknown bank behavior '" + behavior + "'");
    b.conduct.behavior = *parsed;
    b.conduct.slowDelay = Duration{uint_field(obj, "slowDelay", where, 3)};
    if (obj.contains("accounts")) {
        if (!obj["accounts"].is_object())
            invalid(where + ".accounts must be an object");
        for (const auto& [name, v] : obj["accounts"].items()) {
            if (!v.is_number_unsigned())
                invalid(where + ".accounts." + name + " must be a non-negative integer");
            b.accounts[name] = v.get<std::uint64_t>();
        }
    }
    return b;
}

SessionConfig parse_session(const json& obj)
{
    const std::string where = "session";
    only_fields(obj, where,
                {"amount", "collateralPayer", "collateralPayee", "alternative", "alt2ReceiptStage", "mode", "deadlines",
                 "registeredSources", "dispositions", "irreversibleAfter", "method"});
    SessionConfig s;
    s.amount = uint_field(obj, "amount", where, s.amount);
    s.collateralPayer = uint_field(obj, "collateralPayer", where, 0);
    s.collateralPayee = uint_field(obj, "collateralPayee", where, 0);
    auto alt = string_field(obj, "alternative", where, "ALT1_DESIGN2");
    auto parsedAlt = alternative_from_string(alt);
    if (!parsedAlt)
        invalid("session.alternative: unknown alternative '" + alt + "'");
    s.alternative = *parsedAlt;
    s.receiptStage = bool_field(obj, "alt2ReceiptStage", where, false);
    auto mode = string_field(obj, "mode", where, "push");
    if (mode == "push")
        s.mode = TransferMode::Push;
    else if (mode == "request-to-pay")
        s.mode = TransferMode::RequestToPay;
    else
        invalid("session.mode must be 'push' or 'request-to-pay'");
    if (obj.contains("deadlines")) {
        const auto& d = obj["deadlines"];
        only_fields(d, "session.deadlines", {"initiationTimeout", "actualTransfer", "transferMax"});
        s.deadlines.initiationTimeout = Duration{uint_field(d, "initiationTimeout", "session.deadlines", 20)};
        s.deadlines.actualTransfer = Duration{uint_field(d, "actualTransfer", "session.deadlines", 5)};
        s.deadlines.transferMax = Duration{uint_field(d, "transferMax", "session.deadlines", 15)};
    }
    if (s.deadlines.initiationTimeout.ticks == 0 || s.deadlines.transferMax.ticks == 0 ||
        s.deadlines.actualTransfer.ticks == 0)
        invalid("session deadlines must be positive");
    if (obj.contains("registeredSources")) {
        if (!obj["registeredSources"].is_array())
            invalid("session.registeredSources must be an array");
        s.registeredSources.emplace();
        for (const auto& v : obj["registeredSources"]) {
            if (!v.is_string())
                invalid("session.registeredSources entries must be party names");
            s.registeredSources->push_back(v.get<std::string>());
        }
    }
    if (obj.contains("dispositions")) {
        const auto& d = obj["dispositions"];
        only_fields(d, "session.dispositions", {"payerCollateralOnTimeout", "payeeCollateralOnCompensation"});
        s.policy.payerCollateralOnTimeout =
            beneficiary_value(d, "payerCollateralOnTimeout", "session.dispositions", Beneficiary::Payee);
        s.policy.payeeCollateralOnCompensation =
            beneficiary_value(d, "payeeCollateralOnCompensation", "session.dispositions", Beneficiary::Payer);
    }
    s.irreversibleAfter = uint_field(obj, "irreversibleAfter", where, 8);
    s.method = string_field(obj, "method", where, s.method);
    return s;
}

json strategy_json(const ParticipantStrategy& s)
{
    json j = json::object();
    j["drop"] = json::array();
    for (auto k : s.drop)
        j["drop"].push_back(to_string(k));
    j["forge"] = json::array();
    for (auto k : s.forge)
        j["forge"].push_back(to_string(k));
    j["delay"] = json::object();
    for (auto [k, v] : s.delay)
        j["delay"][std::string(to_string(k))] = v;
    j["staleClose"] = s.staleClose;
    j["withholdCosign"] = s.withholdCosign;
    j["reverseTransfer"] = s.reverseTransfer;
    return j;
}

json bank_json(const BankConfig& b)
{
    json j;
    j["equity"] = b.equity;
    j["behavior"] = extrail::to_string(b.conduct.behavior);
    j["slowDelay"] = b.conduct.slowDelay.ticks;
    j["accounts"] = json::object();
    for (const auto& [name, v] : b.accounts)
        j["accounts"][name] = v;
    return j;
}

} // namespace

bool ParticipantStrategy::honest() const
{
    return drop.empty() && delay.empty() && forge.empty() && !staleClose && !withholdCosign && !reverseTransfer;
}

std::optional<ParticipantStrategy> strategy_preset(std::string_view name)
{
    ParticipantStrategy s;
    if (name == "honest")
        return s;
    if (name == "forgeOrder") {
        s.forge.insert(MessageKind::M_A1I1);
        return s;
    }
    if (name == "abandon" || name == "decline") {
        s.drop.insert(MessageKind::M_A1I1);
        return s;
    }
    if (name == "staleClose") {
        s.staleClose = true;
        return s;
    }
    if (name == "withholdCosign") {
        s.withholdCosign = true;
        return s;
    }
    if (name == "reverseTransfer") {
        s.reverseTransfer = true;
        return s;
    }
    return std::nullopt;
}

ScenarioConfig parse_scenario(const json& doc)
{
    only_fields(doc, "scenario",
                {"name", "signatureScheme", "equivalenceRate", "parties", "channel", "session", "banks", "adversary"});
    ScenarioConfig c;
    c.name = string_field(doc, "name", "scenario", c.name);
    c.signatureScheme = string_field(doc, "signatureScheme", "scenario", c.signatureScheme);
    if (c.signatureScheme != "ed25519" && c.signatureScheme != "hmac-sha256")
        invalid("signatureScheme must be 'ed25519' or 'hmac-sha256'");
    c.equivalenceRate = uint_field(doc, "equivalenceRate", "scenario", 1);
    if (c.equivalenceRate == 0)
        invalid("equivalenceRate must be positive");

    if (doc.contains("parties")) {
        const auto& p = doc["parties"];
        only_fields(p, "parties", {"payer", "payee", "payerBank", "payeeBank", "regulator"});
        c.payer = string_field(p, "payer", "parties", c.payer);
        c.payee = string_field(p, "payee", "parties", c.payee);
        c.payerBank = string_field(p, "payerBank", "parties", c.payerBank);
        c.payeeBank = string_field(p, "payeeBank", "parties", c.payeeBank);
        c.regulator = string_field(p, "regulator", "parties", c.regulator);
    }
    std::set<std::string> names{c.payer, c.payee, c.payerBank, c.payeeBank, c.regulator};
    if (names.size() != 5 || names.count("Ledger"))
        invalid("party names must be distinct and must not use the reserved name 'Ledger'");

    if (!doc.contains("channel"))
        invalid("missing 'channel'");
    const auto& ch = doc["channel"];
    only_fields(ch, "channel", {"id", "depositPayer", "depositPayee", "disputeWindow", "interactions"});
    c.channelId = string_field(ch, "id", "channel", c.channelId);
    c.depositPayer = uint_field(ch, "depositPayer", "channel", c.depositPayer);
    c.depositPayee = uint_field(ch, "depositPayee", "channel", c.depositPayee);
    c.disputeWindow = uint_field(ch, "disputeWindow", "channel", c.disputeWindow);
    if (c.depositPayer == 0 || c.depositPayee == 0)
        invalid("channel deposits must be positive");
    if (ch.contains("interactions")) {
        if (!ch["interactions"].is_array())
            invalid("channel.interactions must be an array");
        for (const auto& step : ch["interactions"]) {
            only_fields(step, "channel.interactions[]", {"payer", "payee"});
            Interaction in{uint_field(step, "payer", "interaction", 0), uint_field(step, "payee", "interaction", 0)};
            if (in.payer + in.payee != c.depositPayer + c.depositPayee)
                invalid("interaction balances must sum to the channel capacity");
            c.interactions.push_back(in);
        }
    }

    if (doc.contains("session")) {
        c.session = parse_session(doc["session"]);
        for (const auto& src : c.session->registeredSources.value_or(std::vector<std::string>{}))
            if (!names.count(src))
                invalid("registered source '" + src + "' is not a scenario party");
    }

    if (doc.contains("banks")) {
        const auto& b = doc["banks"];
        only_fields(b, "banks", {"payerBank", "payeeBank"});
        if (b.contains("payerBank"))
            c.payerBankConfig = parse_bank(b["payerBank"], "banks.payerBank");
        if (b.contains("payeeBank"))
            c.payeeBankConfig = parse_bank(b["payeeBank"], "banks.payeeBank");
    }
    if (doc.contains("adversary")) {
        const auto& a = doc["adversary"];
        only_fields(a, "adversary", {"payer", "payee"});
        if (a.contains("payer"))
            c.payerStrategy = parse_strategy(a["payer"], "adversary.payer");
        if (a.contains("payee"))
            c.payeeStrategy = parse_strategy(a["payee"], "adversary.payee");
    }
    return c;
}

ScenarioConfig load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        invalid("cannot read scenario file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        invalid("scenario file '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_scenario(doc);
}

json to_json(const ScenarioConfig& c)
{
    json j;
    j["name"] = c.name;
    j["signatureScheme"] = c.signatureScheme;
    j["equivalenceRate"] = c.equivalenceRate;
    j["parties"] = {{"payer", c.payer},
                    {"payee", c.payee},
                    {"payerBank", c.payerBank},
                    {"payeeBank", c.payeeBank},
                    {"regulator", c.regulator}};
    json interactions = json::array();
    for (const auto& in : c.interactions)
        interactions.push_back({{"payer", in.payer}, {"payee", in.payee}});
    j["channel"] = {{"id", c.channelId},
                    {"depositPayer", c.depositPayer},
                    {"depositPayee", c.depositPayee},
                    {"disputeWindow", c.disputeWindow},
                    {"interactions", interactions}};
    if (c.session) {
        const auto& s = *c.session;
        j["session"] = {
            {"amount", s.amount},
            {"collateralPayer", s.collateralPayer},
            {"collateralPayee", s.collateralPayee},
            {"alternative", to_string(s.alternative)},
            {"alt2ReceiptStage", s.receiptStage},
            {"mode", to_string(s.mode)},
            {"deadlines",
             {{"initiationTimeout", s.deadlines.initiationTimeout.ticks},
              {"actualTransfer", s.deadlines.actualTransfer.ticks},
              {"transferMax", s.deadlines.transferMax.ticks}}},
            {"dispositions",
             {{"payerCollateralOnTimeout", s.policy.payerCollateralOnTimeout == Beneficiary::Payer ? "payer" : "payee"},
              {"payeeCollateralOnCompensation",
               s.policy.payeeCollateralOnCompensation == Beneficiary::Payer ? "payer" : "payee"}}},
            {"irreversibleAfter", s.irreversibleAfter},
            {"method", s.method},
        };
        if (s.registeredSources)
            j["session"]["registeredSources"] = *s.registeredSources;
    }
    j["banks"] = {{"payerBank", bank_json(c.payerBankConfig)}, {"payeeBank", bank_json(c.payeeBankConfig)}};
    j["adversary"] = {{"payer", strategy_json(c.payerStrategy)}, {"payee", strategy_json(c.payeeStrategy)}};
    return j;
}

std::optional<PartyId> party_by_name(const ScenarioConfig& c, std::string_view name)
{
    if (name == c.payer || name == c.payee)
        return PartyId{std::string(name), Role::Participant};
    if (name == c.payerBank || name == c.payeeBank)
        return PartyId{std::string(name), Role::Bank};
    if (name == c.regulator)
        return PartyId{std::string(name), Role::Regulator};
    return std::nullopt;
}

} // namespace hybridpay::sim
