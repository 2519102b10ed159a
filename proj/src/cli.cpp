#include "hybridpay/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "hybridpay/enumerate.hpp"
#include "hybridpay/simulator.hpp"

namespace hybridpay::cli {

using nlohmann::json;

namespace {

struct Options {
    std::string input;
    std::string traceOut;
    std::string transcriptOut;
    std::string format = "table";
    std::string grid = "faults";
    std::uint64_t seed = 0;
};

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write '" + path + "'");
    f << text;
}

std::string read_file(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        fail(Errc::Malformed, "cannot read '" + path + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

json transcript_json(const sim::RunResult& r)
{
    json out = json::array();
    if (!r.session)
        return out;
    for (const auto& m : r.session->transcript)
        out.push_back({{"kind", std::string(to_string(m.kind))},
                       {"digest", to_hex(message_digest(m))},
                       {"bytes", to_hex(canonical_serialize(m))}});
    return out;
}

int cmd_run(const Options& o, std::ostream& out)
{
    auto cfg = sim::load_scenario(o.input);
    auto r = sim::simulate(cfg, o.seed);
    if (!o.traceOut.empty())
        write_file(o.traceOut, r.trace.to_jsonl());
    if (!o.transcriptOut.empty())
        write_file(o.transcriptOut, transcript_json(r).dump(2) + "\n");
    if (o.format == "structured")
        out << sim::report_json(r).dump(2) << "\n";
    else
        out << sim::report_table(r);
    return r.violations.empty() ? Ok : Violations;
}

int cmd_enumerate(const Options& o, std::ostream& out)
{
    auto cfg = sim::load_scenario(o.input);
    auto grid = sim::load_grid(o.grid);
    auto e = sim::enumerate(cfg, grid, o.seed);
    if (o.format == "structured")
        out << sim::enumeration_json(e).dump(2) << "\n";
    else
        out << sim::enumeration_table(e);
    return e.violating == 0 ? Ok : Violations;
}

int cmd_audit(const Options& o, std::ostream& out)
{
    auto trace = sim::load_trace(o.input);
    auto violations = sim::audit_trace(trace);
    if (o.format == "structured") {
        json v = json::array();
        for (const auto& x : violations)
            v.push_back(sim::to_json(x));
        out << json{{"events", trace.events.size()}, {"violations", v}}.dump(2) << "\n";
    } else {
        for (const auto& v : violations)
            out << "violation " << v.invariant << (v.index ? " @" + std::to_string(*v.index) : std::string())
                << ": " << v.detail << "\n";
        out << trace.events.size() << " events, " << violations.size() << " violations\n";
    }
    return violations.empty() ? Ok : Violations;
}

int cmd_replay(const Options& o, std::ostream& out)
{
    const auto original = read_file(o.input);
    auto trace = sim::parse_trace(original);
    if (!trace.header.contains("scenario"))
        fail(Errc::Malformed, "trace header carries no scenario");
    auto cfg = sim::parse_scenario(trace.header["scenario"]);
    auto r = sim::simulate(cfg, o.seed);
    const auto again = r.trace.to_jsonl();
    if (!o.traceOut.empty())
        write_file(o.traceOut, again);
    if (again == original) {
        out << "replay identical (" << r.trace.events.size() << " events)\n";
        return Ok;
    }
    std::istringstream a(original), b(again);
    std::string la, lb;
    std::size_t line = 0;
    while (true) {
        ++line;
        const bool ga = static_cast<bool>(std::getline(a, la));
        const bool gb = static_cast<bool>(std::getline(b, lb));
        if (!ga && !gb)
            break;
        if (ga != gb || la != lb) {
            out << "replay diverges at line " << line << "\n";
            break;
        }
    }
    return Violations;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Simulator for off-chain channel re-balancing through external payment rails", "hybridpay-cli"};
    app.require_subcommand(1);
    Options o;

    auto add_format = [&](CLI::App* sub) {
        sub->add_option("--format", o.format, "table or structured (JSON)")
            ->check(CLI::IsMember({"table", "structured"}));
    };

    auto* run = app.add_subcommand("run", "Run one scenario");
    run->add_option("config", o.input, "scenario JSON")->required();
    run->add_option("--trace-out", o.traceOut, "write the JSONL trace here");
    run->add_option("--transcript-out", o.transcriptOut, "write the session's canonical messages here");
    run->add_option("--seed", o.seed, "key derivation seed");
    add_format(run);

    auto* en = app.add_subcommand("enumerate", "Run a scenario across a fault grid");
    en->add_option("config", o.input, "base scenario JSON")->required();
    en->add_option("--grid", o.grid, "grid JSON file, or 'faults' for the built-in grid");
    en->add_option("--seed", o.seed, "key derivation seed");
    add_format(en);

    auto* au = app.add_subcommand("audit", "Check a trace against the safety invariants");
    au->add_option("trace", o.input, "trace JSONL")->required();
    add_format(au);

    auto* re = app.add_subcommand("replay", "Re-run a trace's scenario and compare byte for byte");
    re->add_option("trace", o.input, "trace JSONL")->required();
    re->add_option("--trace-out", o.traceOut, "write the regenerated trace here");
    re->add_option("--seed", o.seed, "key derivation seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return Ok;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return BadInput;
    }

    try {
        if (app.got_subcommand(run))
            return cmd_run(o, out);
        if (app.got_subcommand(en))
            return cmd_enumerate(o, out);
        if (app.got_subcommand(au))
            return cmd_audit(o, out);
        return cmd_replay(o, out);
    } catch (const ProtocolError& e) {
        err << "error: " << e.what() << "\n";
        switch (e.code()) {
        case Errc::InvalidScenario:
        case Errc::Malformed: return BadInput;
        case Errc::GridTooLarge: return GridTooLarge;
        default: return Internal;
        }
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return Internal;
    }
}

} // namespace hybridpay::cli
