#include "hybridpay/enumerate.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace hybridpay::sim {

using nlohmann::json;

namespace {

template <class T>
std::size_t axis(const std::vector<T>& v)
{
    return v.empty() ? 1 : v.size();
}

template <class T, class F>
std::vector<T> parse_axis(const json& doc, const char* key, F convert)
{
    std::vector<T> out;
    if (!doc.contains(key))
        return out;
    if (!doc[key].is_array())
        fail(Errc::InvalidScenario, std::string("grid.") + key + " must be an array");
    for (const auto& v : doc[key])
        out.push_back(convert(v));
    return out;
}

std::uint64_t as_uint(const json& v)
{
    if (!v.is_number_unsigned())
        fail(Errc::InvalidScenario, "grid values must be non-negative integers");
    return v.get<std::uint64_t>();
}

std::string as_string(const json& v)
{
    if (!v.is_string())
        fail(Errc::InvalidScenario, "grid values must be strings");
    return v.get<std::string>();
}

} // namespace

GridSpec default_fault_grid()
{
    using extrail::BankBehavior;
    const std::vector<BankBehavior> all{BankBehavior::Honest, BankBehavior::ConfirmNoExecute,
                                        BankBehavior::ReceiveNoCredit, BankBehavior::Silent, BankBehavior::Slow};
    GridSpec g;
    g.payerBank = all;
    g.payeeBank = all;
    g.payerStrategies = {"honest", "forgeOrder", "abandon", "staleClose"};
    g.payeeStrategies = {"honest", "staleClose", "withholdCosign"};
    g.alternatives = {Alternative::Alt1Design1, Alternative::Alt1Design2, Alternative::Alt2};
    return g;
}

GridSpec parse_grid(const json& doc)
{
    if (!doc.is_object())
        fail(Errc::InvalidScenario, "grid must be a JSON object");
    for (const auto& [key, _] : doc.items())
        if (key != "payerBank" && key != "payeeBank" && key != "payerStrategies" && key != "payeeStrategies" &&
            key != "alternatives" && key != "slowDelays" && key != "collateralPayer" && key != "collateralPayee")
            fail(Errc::InvalidScenario, "unknown grid field '" + key + "'");
    auto behavior = [](const json& v) {
        auto b = extrail::bank_behavior_from_string(as_string(v));
        if (!b)
            fail(Errc::InvalidScenario, "unknown bank behavior '" + v.get<std::string>() + "'");
        return *b;
    };
    auto strategy = [](const json& v) {
        auto s = as_string(v);
        if (!strategy_preset(s))
            fail(Errc::InvalidScenario, "unknown strategy '" + s + "'");
        return s;
    };
    auto alternative = [](const json& v) {
        auto a = alternative_from_string(as_string(v));
        if (!a)
            fail(Errc::InvalidScenario, "unknown alternative '" + v.get<std::string>() + "'");
        return *a;
    };
    GridSpec g;
    g.payerBank = parse_axis<extrail::BankBehavior>(doc, "payerBank", behavior);
    g.payeeBank = parse_axis<extrail::BankBehavior>(doc, "payeeBank", behavior);
    g.payerStrategies = parse_axis<std::string>(doc, "payerStrategies", strategy);
    g.payeeStrategies = parse_axis<std::string>(doc, "payeeStrategies", strategy);
    g.alternatives = parse_axis<Alternative>(doc, "alternatives", alternative);
    g.slowDelays = parse_axis<std::uint64_t>(doc, "slowDelays", as_uint);
    g.collateralPayer = parse_axis<std::uint64_t>(doc, "collateralPayer", as_uint);
    g.collateralPayee = parse_axis<std::uint64_t>(doc, "collateralPayee", as_uint);
    return g;
}

GridSpec load_grid(const std::string& pathOrName)
{
    if (pathOrName == "faults")
        return default_fault_grid();
    std::ifstream in(pathOrName);
    if (!in)
        fail(Errc::InvalidScenario, "cannot read grid '" + pathOrName + "'");
    try {
        return parse_grid(json::parse(in));
    } catch (const json::exception& e) {
        fail(Errc::InvalidScenario, std::string("grid is not valid JSON: ") + e.what());
    }
}

std::size_t grid_size(const GridSpec& g)
{
    std::size_t n = 1;
    for (std::size_t a : {axis(g.payerBank), axis(g.payeeBank), axis(g.payerStrategies), axis(g.payeeStrategies),
                          axis(g.alternatives), axis(g.slowDelays), axis(g.collateralPayer), axis(g.collateralPayee)}) {
        n *= a;
        if (n > kMaxGridCells)
            return n;
    }
    return n;
}

std::vector<Cell> expand(const ScenarioConfig& base, const GridSpec& g)
{
    const auto size = grid_size(g);
    if (size > kMaxGridCells)
        fail(Errc::GridTooLarge, "grid has more than " + std::to_string(kMaxGridCells) + " cells");
    if (!base.session)
        fail(Errc::InvalidScenario, "fault enumeration needs a scenario with a session");

    std::vector<Cell> cells;
    cells.reserve(size);
    std::vector<std::size_t> dims{axis(g.payerBank),    axis(g.payeeBank),       axis(g.payerStrategies),
                                  axis(g.payeeStrategies), axis(g.alternatives), axis(g.slowDelays),
                                  axis(g.collateralPayer), axis(g.collateralPayee)};
    for (std::size_t n = 0; n < size; ++n) {
        std::vector<std::size_t> ix(dims.size());
        std::size_t rest = n;
        for (std::size_t d = dims.size(); d-- > 0;) {
            ix[d] = rest % dims[d];
            rest /= dims[d];
        }
        Cell c{base, json::object()};
        auto& cfg = c.config;
        if (!g.payerBank.empty()) {
            cfg.payerBankConfig.conduct.behavior = g.payerBank[ix[0]];
            c.labels["payerBank"] = extrail::to_string(g.payerBank[ix[0]]);
        }
        if (!g.payeeBank.empty()) {
            cfg.payeeBankConfig.conduct.behavior = g.payeeBank[ix[1]];
            c.labels["payeeBank"] = extrail::to_string(g.payeeBank[ix[1]]);
        }
        if (!g.payerStrategies.empty()) {
            cfg.payerStrategy = *strategy_preset(g.payerStrategies[ix[2]]);
            c.labels["payer"] = g.payerStrategies[ix[2]];
        }
        if (!g.payeeStrategies.empty()) {
            cfg.payeeStrategy = *strategy_preset(g.payeeStrategies[ix[3]]);
            c.labels["payee"] = g.payeeStrategies[ix[3]];
        }
        if (!g.alternatives.empty()) {
            cfg.session->alternative = g.alternatives[ix[4]];
            c.labels["alternative"] = to_string(g.alternatives[ix[4]]);
        }
        if (!g.slowDelays.empty()) {
            cfg.payerBankConfig.conduct.slowDelay = Duration{g.slowDelays[ix[5]]};
            cfg.payeeBankConfig.conduct.slowDelay = Duration{g.slowDelays[ix[5]]};
            c.labels["slowDelay"] = g.slowDelays[ix[5]];
        }
        if (!g.collateralPayer.empty()) {
            cfg.session->collateralPayer = g.collateralPayer[ix[6]];
            c.labels["collateralPayer"] = g.collateralPayer[ix[6]];
        }
        if (!g.collateralPayee.empty()) {
            cfg.session->collateralPayee = g.collateralPayee[ix[7]];
            c.labels["collateralPayee"] = g.collateralPayee[ix[7]];
        }
        cfg.name = base.name + "#" + std::to_string(n);
        cells.push_back(std::move(c));
    }
    return cells;
}

Enumeration enumerate(const ScenarioConfig& base, const GridSpec& grid, std::uint64_t seed,
                      const CellObserver& observer)
{
    Enumeration e;
    for (const auto& cell : expand(base, grid)) {
        auto r = simulate(cell.config, seed);
        CellSummary s;
        s.labels = cell.labels;
        s.outcome = r.outcome();
        s.violations = r.violations;
        s.verdict = report_json(r)["verdict"];
        if (!s.violations.empty())
            ++e.violating;
        if (observer)
            observer(cell, r);
        e.cells.push_back(std::move(s));
    }
    return e;
}

namespace {

/// Outcome counts, overall and per alternative when the grid varies it.
struct Tally {
    std::map<std::string, std::size_t> overall;
    std::map<std::string, std::map<std::string, std::size_t>> byAlternative;

    explicit Tally(const Enumeration& e)
    {
        for (const auto& c : e.cells) {
            ++overall[c.outcome];
            if (c.labels.contains("alternative"))
                ++byAlternative[c.labels["alternative"].get<std::string>()][c.outcome];
        }
    }
};

} // namespace

json enumeration_json(const Enumeration& e)
{
    json cells = json::array();
    for (const auto& c : e.cells) {
        json v = json::array();
        for (const auto& x : c.violations)
            v.push_back(to_json(x));
        cells.push_back({{"labels", c.labels}, {"outcome", c.outcome}, {"verdict", c.verdict}, {"violations", v}});
    }
    const Tally t(e);
    json out{{"cells", cells}, {"total", e.cells.size()}, {"violating", e.violating}, {"outcomes", t.overall}};
    if (!t.byAlternative.empty())
        out["outcomesByAlternative"] = t.byAlternative;
    return out;
}

std::string enumeration_table(const Enumeration& e)
{
    std::ostringstream out;
    for (const auto& c : e.cells) {
        if (c.violations.empty())
            continue;
        out << "VIOLATION " << c.labels.dump() << "\n";
        for (const auto& v : c.violations)
            out << "  " << v.invariant << ": " << v.detail << "\n";
    }
    const Tally t(e);
    out << "cells      " << e.cells.size() << "\n";
    for (const auto& [name, n] : t.overall)
        out << "outcome    " << name << " " << n << "\n";
    for (const auto& [alt, counts] : t.byAlternative)
        for (const auto& [name, n] : counts)
            out << "  " << alt << " " << name << " " << n << "\n";
    out << "violating  " << e.violating << "\n";
    return out.str();
}

} // namespace hybridpay::sim
