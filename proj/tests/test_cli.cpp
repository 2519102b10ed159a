#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hybridpay/cli.hpp"
#include "support.hpp"

using testing::source_path;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "hybridpay-cli");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = hybridpay::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch()
{
    auto dir = fs::temp_directory_path() / "hybridpay-cli-tests";
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_SUITE("cli")
{
    TEST_CASE("run writes reports, traces and transcripts")
    {
        const auto dir = scratch();
        const auto trace = (dir / "happy.jsonl").string();
        const auto transcript = (dir / "happy.transcript.json").string();
        auto r = cli({"run", source_path("scenarios/alt1_design2_happy.json"), "--trace-out", trace,
                      "--transcript-out", transcript, "--format", "structured"});
        CHECK(r.code == hybridpay::cli::Ok);
        auto report = nlohmann::json::parse(r.out);
        CHECK(report["outcome"] == "SETTLED");
        CHECK(report["violations"].empty());
        CHECK(fs::file_size(trace) > 0);
        auto kinds = nlohmann::json::parse(slurp(transcript));
        REQUIRE(kinds.size() >= 2);
        CHECK(kinds[0]["kind"] == "M_A1");

        auto table = cli({"run", source_path("scenarios/alt1_design2_happy.json")});
        CHECK(table.code == 0);
        CHECK(table.out.find("SETTLED") != std::string::npos);
    }

    TEST_CASE("structured reports match the checked-in goldens")
    {
        for (const char* name : {"alt1_design2_happy", "dispute_confirm_no_execute"}) {
            CAPTURE(name);
            auto r = cli({"run", source_path(std::string("scenarios/") + name + ".json"), "--format", "structured"});
            CHECK(r.out == slurp(source_path(std::string("tests/golden/report_") + name + ".json")));
        }
    }

    TEST_CASE("bad input exits 2")
    {
        CHECK(cli({"run", source_path("tests/fixtures/unknown_field.json")}).code == hybridpay::cli::BadInput);
        CHECK(cli({"run", source_path("tests/fixtures/negative_collateral.json")}).code == hybridpay::cli::BadInput);
        CHECK(cli({"run", source_path("tests/fixtures/not_json.json")}).code == hybridpay::cli::BadInput);
        CHECK(cli({"run", "/nonexistent.json"}).code == hybridpay::cli::BadInput);
        CHECK(cli({"run", source_path("scenarios/alt2_happy.json"), "--format", "xml"}).code ==
              hybridpay::cli::BadInput);
        CHECK(cli({"frobnicate"}).code == hybridpay::cli::BadInput);
        CHECK(cli({}).code == hybridpay::cli::BadInput);
        CHECK(cli({"audit", source_path("tests/fixtures/not_json.json")}).code == hybridpay::cli::BadInput);
    }

    TEST_CASE("violations exit 3")
    {
        auto r = cli({"run", source_path("tests/fixtures/mutation_collateral_disabled.json"), "--format",
                      "structured"});
        CHECK(r.code == hybridpay::cli::Violations);
        CHECK(nlohmann::json::parse(r.out)["violations"][0]["invariant"] == "safety");
        CHECK(cli({"run", source_path("tests/fixtures/push_reversal.json")}).code == hybridpay::cli::Violations);
        CHECK(cli({"audit", source_path("tests/fixtures/traces/conservation_broken.jsonl")}).code ==
              hybridpay::cli::Violations);
    }

    TEST_CASE("oversize grids exit 4")
    {
        auto r = cli({"enumerate", source_path("scenarios/alt1_design2_happy.json"), "--grid",
                      source_path("tests/fixtures/grid_too_large.json")});
        CHECK(r.code == hybridpay::cli::GridTooLarge);
        CHECK_FALSE(r.err.empty());
    }

    TEST_CASE("enumerate a small grid")
    {
        auto r = cli({"enumerate", source_path("scenarios/alt2_happy.json"), "--grid",
                      source_path("tests/fixtures/grid_banks.json"), "--format", "structured"});
        CHECK(r.code == hybridpay::cli::Ok);
        CHECK(nlohmann::json::parse(r.out)["cells"].size() == 25);
        CHECK_FALSE(nlohmann::json::parse(r.out).contains("outcomesByAlternative"));
    }

    TEST_CASE("a grid over alternatives reports per-alternative counts")
    {
        const auto dir = scratch();
        const auto grid = (dir / "alts.json").string();
        std::ofstream(grid) << R"({"alternatives": ["ALT1_DESIGN1", "ALT1_DESIGN2", "ALT2"], "payerBank": ["HONEST", "SILENT"]})";
        auto r = cli({"enumerate", source_path("scenarios/alt1_design2_happy.json"), "--grid", grid, "--format",
                      "structured"});
        REQUIRE(r.code == 0);
        auto by = nlohmann::json::parse(r.out)["outcomesByAlternative"];
        CHECK(by.size() == 3);
        for (const auto& [alt, counts] : by.items()) {
            CAPTURE(alt);
            CHECK(counts["SETTLED"] == 1);
            CHECK(counts["REVERTED"] == 1);
        }
        auto table = cli({"enumerate", source_path("scenarios/alt1_design2_happy.json"), "--grid", grid});
        CHECK(table.out.find("ALT2 REVERTED 1") != std::string::npos);
    }

    TEST_CASE("audit and replay")
    {
        const auto dir = scratch();
        const auto trace = (dir / "r2p.jsonl").string();
        REQUIRE(cli({"run", source_path("scenarios/request_to_pay_happy.json"), "--trace-out", trace}).code == 0);
        auto audit = cli({"audit", trace, "--format", "structured"});
        CHECK(audit.code == 0);
        CHECK(nlohmann::json::parse(audit.out)["violations"].empty());

        const auto again = (dir / "r2p.again.jsonl").string();
        auto replay = cli({"replay", trace, "--trace-out", again, "--seed", "5"});
        CHECK(replay.code == 0);
        CHECK(replay.out.find("identical") != std::string::npos);
        CHECK(slurp(trace) == slurp(again));

        // Flip one snapshot byte; the regenerated trace no longer matches.
        auto text = slurp(trace);
        auto pos = text.find("\"balanceA\":10");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 13, "\"balanceA\":11");
        const auto edited = (dir / "r2p.edited.jsonl").string();
        std::ofstream(edited, std::ios::binary) << text;
        auto diverged = cli({"replay", edited});
        CHECK(diverged.code == hybridpay::cli::Violations);
        CHECK(diverged.out.find("diverges") != std::string::npos);
        CHECK(cli({"audit", edited}).code == hybridpay::cli::Violations);
    }
}
