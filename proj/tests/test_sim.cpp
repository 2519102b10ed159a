#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hybridpay/enumerate.hpp"
#include "hybridpay/error.hpp"
#include "hybridpay/simulator.hpp"
#include "support.hpp"

using namespace hybridpay;
using namespace hybridpay::sim;
using nlohmann::json;
using testing::source_path;

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

json base_doc()
{
    std::ifstream in(source_path("scenarios/alt1_design2_happy.json"));
    return json::parse(in);
}

RunResult run_named(const std::string& name, std::uint64_t seed = 0)
{
    return simulate(load_scenario(source_path("scenarios/" + name + ".json")), seed);
}

bool has(const std::vector<Violation>& vs, const std::string& invariant)
{
    return std::any_of(vs.begin(), vs.end(), [&](const Violation& v) { return v.invariant == invariant; });
}

void redigest(Trace& t)
{
    for (auto& e : t.events)
        e["digest"] = snapshot_digest(e["snapshot"]);
}

std::vector<std::string> library()
{
    std::vector<std::string> names;
    for (const auto& entry : std::filesystem::directory_iterator(source_path("scenarios")))
        if (entry.path().extension() == ".json")
            names.push_back(entry.path().stem().string());
    std::sort(names.begin(), names.end());
    return names;
}

} // namespace

TEST_SUITE("sim")
{
    TEST_CASE("scenario parsing refuses bad input")
    {
        auto reject = [](json doc) {
            return code_of([&] { (void)parse_scenario(doc); });
        };
        CHECK_NOTHROW((void)parse_scenario(base_doc()));

        auto d = base_doc();
        d["colour"] = "blue";
        CHECK(reject(d) == Errc::InvalidScenario);
        d = base_doc();
        d["session"]["collateralPayer"] = -1;
        CHECK(reject(d) == Errc::InvalidScenario);
        d = base_doc();
        d["session"]["alternative"] = "ALT3";
        CHECK(reject(d) == Errc::InvalidScenario);
        d = base_doc();
        d["channel"]["interactions"][0]["payer"] = 11;
        CHECK(reject(d) == Errc::InvalidScenario);
        d = base_doc();
        d["session"]["deadlines"]["transferMax"] = 0;
        CHECK(reject(d) == Errc::InvalidScenario);
        d = base_doc();
        d["parties"]["payee"] = d["parties"]["payer"];
        CHECK(reject(d) == Errc::InvalidScenario);
        d = base_doc();
        d["banks"]["payerBank"]["behavior"] = "EVIL";
        CHECK(reject(d) == Errc::InvalidScenario);
        d = base_doc();
        d["adversary"] = {{"payer", {{"drop", {"NOT_A_KIND"}}}}};
        CHECK(reject(d) == Errc::InvalidScenario);
        d = base_doc();
        d["signatureScheme"] = "rot13";
        CHECK(reject(d) == Errc::InvalidScenario);
    }

    TEST_CASE("scenario JSON round-trips")
    {
        for (const auto& name : library()) {
            CAPTURE(name);
            auto cfg = load_scenario(source_path("scenarios/" + name + ".json"));
            auto again = parse_scenario(to_json(cfg));
            CHECK(to_json(again) == to_json(cfg));
        }
    }

    TEST_CASE("strategy presets")
    {
        CHECK(strategy_preset("honest")->honest());
        CHECK(strategy_preset("forgeOrder")->forge.count(MessageKind::M_A1I1) == 1);
        CHECK(strategy_preset("abandon")->drop.count(MessageKind::M_A1I1) == 1);
        CHECK(strategy_preset("staleClose")->staleClose);
        CHECK(strategy_preset("withholdCosign")->withholdCosign);
        CHECK_FALSE(strategy_preset("nonsense").has_value());
    }

    TEST_CASE("library outcomes")
    {
        struct Expect {
            const char* name;
            const char* outcome;
            std::uint64_t chA, chI, fiatA, fiatI;
            const char* culprit;
        };
        // Start: channel {10, 20} after the interaction, Alice 100 at B_A,
        // Ingrid 50 at B_I, amount 10, C_A 2, C_I 3.
        const Expect table[] = {
            {"alt1_design1_happy", "SETTLED", 20, 10, 90, 60, nullptr},
            {"alt1_design2_happy", "SETTLED", 20, 10, 90, 60, nullptr},
            {"alt2_happy", "SETTLED", 20, 10, 90, 60, nullptr},
            {"alt2_receipt_stage_happy", "SETTLED", 20, 10, 90, 60, nullptr},
            {"request_to_pay_happy", "SETTLED", 20, 10, 90, 60, nullptr},
            {"hmac_scheme_happy", "SETTLED", 20, 10, 90, 60, nullptr},
            {"slow_banks", "SETTLED", 20, 10, 90, 60, nullptr},
            {"alt1_design2_compensation", "SETTLED_WITH_COMPENSATION", 23, 7, 90, 60, "B_I"},
            {"alt1_design2_late_receipt", "SETTLED_WITH_COMPENSATION", 23, 7, 90, 60, nullptr},
            {"unregistered_receipt_source", "SETTLED_WITH_COMPENSATION", 23, 7, 90, 60, nullptr},
            {"timeout_silent_payer_bank", "REVERTED", 8, 22, 100, 50, nullptr},
            {"timeout_silent_payer_bank_ca5", "REVERTED", 5, 25, 100, 50, nullptr},
            {"timeout_silent_payer_bank_no_collateral", "REVERTED", 10, 20, 100, 50, nullptr},
            {"alt2_timeout_silent_payee_bank", "REVERTED", 8, 22, 100, 50, nullptr},
            {"forged_order", "REVERTED", 8, 22, 100, 50, nullptr},
            {"payer_abandons", "REVERTED", 8, 22, 100, 50, nullptr},
            {"late_order_expired", "REVERTED", 8, 22, 100, 50, nullptr},
            {"payee_declines", "REVERTED", 10, 20, 100, 50, nullptr},
            {"dispute_confirm_no_execute", "SETTLED", 20, 10, 100, 60, "B_A"},
            {"dispute_receive_no_credit", "SETTLED", 20, 10, 90, 60, "B_I"},
            {"r2p_reversal_refused", "SETTLED", 20, 10, 90, 60, nullptr},
            {"stale_close_by_payee", "SETTLED", 20, 10, 90, 60, nullptr},
            {"withhold_cosign_payee", "SETTLED", 20, 10, 90, 60, nullptr},
            {"withhold_cosign_payer_on_revert", "REVERTED", 8, 22, 100, 50, nullptr},
            {"amount_exceeds_balance", "NONE", 10, 20, 100, 50, nullptr},
            {"channel_only", "NONE", 10, 20, 100, 50, nullptr},
        };
        CHECK(std::size(table) == library().size());
        for (const auto& x : table) {
            CAPTURE(x.name);
            auto r = run_named(x.name);
            CHECK(r.violations.empty());
            CHECK(r.outcome() == x.outcome);
            CHECK(r.finish.at("Alice").channel == x.chA);
            CHECK(r.finish.at("Ingrid").channel == x.chI);
            CHECK(r.finish.at("Alice").fiat == x.fiatA);
            CHECK(r.finish.at("Ingrid").fiat == x.fiatI);
            if (x.culprit) {
                REQUIRE(r.verdict);
                REQUIRE(r.verdict->culprit);
                CHECK(r.verdict->culprit->name == x.culprit);
            } else {
                CHECK((!r.verdict || !r.verdict->culprit));
            }
        }
    }

    TEST_CASE("closed channels pay out the final state")
    {
        for (const char* name : {"stale_close_by_payee", "withhold_cosign_payee"}) {
            CAPTURE(name);
            auto r = run_named(name);
            REQUIRE(r.payout);
            CHECK(r.payout->toA == Value::channel(20));
            CHECK(r.payout->toI == Value::channel(10));
        }
    }

    TEST_CASE("traces are deterministic and seed-independent")
    {
        for (const auto& name : library()) {
            CAPTURE(name);
            const auto a = run_named(name, 0).trace.to_jsonl();
            CHECK(run_named(name, 0).trace.to_jsonl() == a);
            CHECK(run_named(name, 99).trace.to_jsonl() == a);
        }
    }

    TEST_CASE("trace text round-trips and malformed traces are refused")
    {
        auto text = run_named("alt2_happy").trace.to_jsonl();
        auto t = parse_trace(text);
        CHECK(t.to_jsonl() == text);
        CHECK(audit_trace(t).empty());
        CHECK(t.header["format"] == kTraceFormat);

        CHECK(code_of([] { (void)parse_trace(""); }) == Errc::Malformed);
        CHECK(code_of([] { (void)parse_trace("not json\n"); }) == Errc::Malformed);
        auto cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
        CHECK(code_of([&] { (void)parse_trace(cut); }) == Errc::Malformed);
        auto firstEvent = text.substr(text.find('\n') + 1);
        CHECK(code_of([&] { (void)parse_trace(firstEvent); }) == Errc::Malformed);
        CHECK(code_of([&] { (void)parse_trace(text + text.substr(text.find('\n') + 1)); }) == Errc::Malformed);
        CHECK(code_of([] { (void)load_trace("/nonexistent/trace.jsonl"); }) == Errc::Malformed);
    }

    TEST_CASE("auditor catches corrupted traces")
    {
        const auto clean = run_named("alt1_design2_happy").trace;
        REQUIRE(audit_trace(clean).empty());
        const auto last = clean.events.size() - 1;

        SUBCASE("digest mismatch")
        {
            auto t = clean;
            t.events[last]["snapshot"]["channel"]["signatures"] = 0u;
            CHECK(has(audit_trace(t), "snapshot-digest"));
        }
        SUBCASE("channel conservation")
        {
            auto t = clean;
            t.events[last]["snapshot"]["channel"]["balanceA"] = 21u;
            redigest(t);
            auto v = audit_trace(t);
            CHECK(has(v, "channel-conservation"));
            CHECK_FALSE(has(v, "snapshot-digest"));
        }
        SUBCASE("fiat conservation")
        {
            auto t = clean;
            t.events[last]["snapshot"]["banks"]["B_A"]["equity"] = 999u;
            redigest(t);
            CHECK(has(audit_trace(t), "fiat-conservation"));
        }
        SUBCASE("unverified transition")
        {
            auto t = clean;
            bool changed = false;
            for (std::size_t i = 1; i < t.events.size() && !changed; ++i)
                if (t.events[i]["snapshot"]["channel"]["seq"] != t.events[i - 1]["snapshot"]["channel"]["seq"] &&
                    t.events[i]["cause"]["type"] == "message") {
                    t.events[i]["cause"]["verified"] = false;
                    changed = true;
                }
            REQUIRE(changed);
            CHECK(has(audit_trace(t), "signed-transition"));
        }
        SUBCASE("settlement without authorisation")
        {
            auto t = clean;
            for (auto& e : t.events)
                e.erase("transcript");
            CHECK(has(audit_trace(t), "authorisation"));
        }
        SUBCASE("time runs backwards")
        {
            auto t = clean;
            t.events[last]["tick"] = 0u;
            CHECK(has(audit_trace(t), "time-monotonic"));
        }
        SUBCASE("termination bound")
        {
            auto t = clean;
            t.header["terminationBound"] = 1u;
            CHECK(has(audit_trace(t), "termination"));
        }
        SUBCASE("illegal phase edge")
        {
            auto t = clean;
            for (auto& e : t.events)
                if (!e["snapshot"]["session"].is_null() && e["snapshot"]["session"]["phase"] == "AWAITING_RECEIPT")
                    e["snapshot"]["session"]["phase"] = "REVERTED";
            redigest(t);
            CHECK(has(audit_trace(t), "phase-graph"));
        }
        SUBCASE("record shape")
        {
            auto t = clean;
            t.events[1].erase("snapshot");
            CHECK(has(audit_trace(t), "record-shape"));
        }
    }

    TEST_CASE("safety oracle flags the collateral mutation and push reversal")
    {
        auto mutated = simulate(load_scenario(source_path("tests/fixtures/mutation_collateral_disabled.json")));
        CHECK(has(mutated.violations, "safety"));
        CHECK(audit_trace(mutated.trace).empty());
        auto reversal = simulate(load_scenario(source_path("tests/fixtures/push_reversal.json")));
        CHECK(has(reversal.violations, "safety"));
        auto closed = simulate(load_scenario(source_path("tests/fixtures/payee_account_closed.json")));
        REQUIRE(closed.verdict);
        CHECK(closed.verdict->rationale == extrail::Rationale::PayeeAccountClosed);
    }

    TEST_CASE("grids expand and refuse oversize requests")
    {
        const auto base = load_scenario(source_path("scenarios/alt1_design2_happy.json"));
        const auto grid = load_grid(source_path("tests/fixtures/grid_banks.json"));
        CHECK(grid_size(grid) == 25);
        auto cells = expand(base, grid);
        CHECK(cells.size() == 25);
        CHECK(grid_size(default_fault_grid()) == 900);

        const auto big = load_grid(source_path("tests/fixtures/grid_too_large.json"));
        CHECK(grid_size(big) > kMaxGridCells);
        CHECK(code_of([&] { (void)expand(base, big); }) == Errc::GridTooLarge);

        auto noSession = base;
        noSession.session.reset();
        CHECK(code_of([&] { (void)expand(noSession, grid); }) == Errc::InvalidScenario);
        CHECK(code_of([] { (void)parse_grid(json{{"payerBank", {"EVIL"}}}); }) == Errc::InvalidScenario);
        CHECK(code_of([] { (void)parse_grid(json{{"axes", 1}}); }) == Errc::InvalidScenario);
    }

    TEST_CASE("bank grid enumeration is clean")
    {
        const auto base = load_scenario(source_path("scenarios/alt1_design2_happy.json"));
        auto e = enumerate(base, load_grid(source_path("tests/fixtures/grid_banks.json")));
        CHECK(e.cells.size() == 25);
        CHECK(e.violating == 0);
        auto j = enumeration_json(e);
        CHECK(j["cells"].size() == 25);
        CHECK_FALSE(enumeration_table(e).empty());
    }
}
