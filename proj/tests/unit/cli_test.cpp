// SPDX-License-Identifier: Apache-2.0
#include <mtc/cli.hpp>
#include <mtc/tools.hpp>

#include "../support/fixture_builder.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace
{

using namespace mtc;
using namespace mtc::cli;

struct Run
{
    int code;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args, std::map<std::string, std::string> env = {})
{
    std::ostringstream out, err;
    auto lookup = [env](const std::string& name) -> std::optional<std::string> {
        if (auto it = env.find(name); it != env.end())
            return it->second;
        return std::nullopt;
    };
    int code = run_cli(args, out, err, lookup);
    return {code, out.str(), err.str()};
}

std::string fixture(const std::string& name)
{
    return (fixtures::fixture_dir() / name).string();
}

std::vector<std::string> replay_args(const std::string& command, const std::string& transcript)
{
    return {command,       "--backend",   "replay",       "--transcript", fixture(transcript),
            "--bundle",    fixture("fixture.bundle"),     "--exemplars",  "3"};
}

class TempDir
{
  public:
    TempDir(): _path(std::filesystem::temp_directory_path() / ("mtc_cli_" + std::to_string(::getpid())))
    {
        std::filesystem::create_directories(_path);
    }
    ~TempDir() { std::filesystem::remove_all(_path); }
    std::filesystem::path operator/(const std::string& name) const { return _path / name; }

  private:
    std::filesystem::path _path;
};

void write(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream(p) << text;
}

TEST(CliTools, CalcPrintsTheInjectedString)
{
    auto r = run({"calc", "12 * 3 / 342 * 100"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "10.53\n");
    EXPECT_EQ(r.err, "");
}

TEST(CliTools, CalcJoinsUnquotedWords)
{
    EXPECT_EQ(run({"calc", "2", "*", "62"}).out, "124\n");
}

TEST(CliTools, BalanceExamples)
{
    auto ok = run({"balance", "--reactants", "Fe,O2", "--products", "Fe2O3"});
    EXPECT_EQ(ok.code, 0);
    EXPECT_EQ(ok.out, "4Fe + 3O2 → 2Fe2O3\n");

    auto bad = run({"balance", "--reactants", "C", "--products", "O2"});
    EXPECT_EQ(bad.code, 1);
    EXPECT_EQ(bad.out, "");
    EXPECT_NE(bad.err.find("NoSolution"), std::string::npos);
}

TEST(CliTools, OutputsAgreeWithToolDispatch)
{
    const auto registry = tools::make_registry(
        {tools::ToolId::Calculator, tools::ToolId::ReactionPredictor, tools::ToolId::MolarMassList});
    auto via = [&](std::string_view tool, std::vector<std::string> input) {
        return registry.dispatch({std::string(tool), std::move(input)}).output() + "\n";
    };
    EXPECT_EQ(run({"calc", "2 * 74.09"}).out, via(tools::kCalculator, {"2 * 74.09"}));
    EXPECT_EQ(run({"molar-mass", "Ca(OH)2"}).out, via(tools::kMolarMassList, {"Ca(OH)2"}));
    EXPECT_EQ(run({"balance", "--reactants", "Ca(OH)2, CO2", "--products", "CaCO3, H2O"}).out,
              via(tools::kReactionPredictor, {"Ca(OH)2, CO2", "CaCO3, H2O"}));
}

TEST(CliTools, MolarMassWithWeightOverrides)
{
    TempDir dir;
    write(dir / "w.txt", "H 1\nO 16\n");
    EXPECT_EQ(run({"molar-mass", "H2O"}).out, "18.02\n");
    EXPECT_EQ(run({"molar-mass", "H2O", "--weights", (dir / "w.txt").string()}).out, "18\n");
}

TEST(CliTools, DomainErrorsExitOne)
{
    EXPECT_EQ(run({"calc", "1 / 0"}).code, 1);
    EXPECT_EQ(run({"molar-mass", "Xx2"}).code, 1);
    EXPECT_EQ(run({"molar-mass", "H2O", "--weights", "/nonexistent/weights"}).code, 1);
}

TEST(CliUsage, ErrorsExitTwoWithHelp)
{
    for (const auto& args: std::vector<std::vector<std::string>>{
             {},
             {"frobnicate"},
             {"calc"},
             {"balance", "--reactants", "Fe"},
             {"eval", "--backend", "replay", "--dataset", "x.jsonl"},
             {"eval", "--backend", "carrier-pigeon", "--dataset", "x.jsonl"},
             {"eval", "--backend", "replay", "--transcript", "t.jsonl"},
             {"solve", "q", "--mode", "few-shot", "--tools", "cal"},
             {"solve", "q", "--tools", "abacus"},
             {"solve", "q", "--budget", "-1"},
         })
    {
        auto r = run(args);
        EXPECT_EQ(r.code, 2) << testing::PrintToString(args);
        EXPECT_NE(r.err.find("Usage:"), std::string::npos) << testing::PrintToString(args);
        EXPECT_EQ(r.out, "");
    }
}

TEST(CliUsage, HelpExitsZero)
{
    auto r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("replay-check"), std::string::npos);
    EXPECT_NE(run({"eval", "--help"}).out.find("--dataset"), std::string::npos);
}

TEST(CliConfig, ParsesKeyValueLines)
{
    std::istringstream in("# comment\n\nmodel = m1\nbase-url=http://x/v1 \n  workers =4\n");
    auto values = parse_config(in);
    EXPECT_EQ(values.size(), 3u);
    EXPECT_EQ(values["model"], "m1");
    EXPECT_EQ(values["base_url"], "http://x/v1");
    EXPECT_EQ(values["workers"], "4");

    std::istringstream bad("model m1\n");
    EXPECT_THROW((void)parse_config(bad), ConfigError);
    std::istringstream empty_key(" = 3\n");
    EXPECT_THROW((void)parse_config(empty_key), ConfigError);
}

TEST(CliConfig, PrecedenceFlagThenEnvThenFileThenDefault)
{
    auto env = [](const std::string& name) -> std::optional<std::string> {
        if (name == "MTC_MODEL")
            return "from-env";
        return std::nullopt;
    };
    Settings s({{"model", "from-file"}, {"workers", "3"}}, env);
    EXPECT_EQ(s.get("model", std::string("from-flag"), "default"), "from-flag");
    EXPECT_EQ(s.get("model", std::nullopt, "default"), "from-env");
    EXPECT_EQ(s.get("workers", std::nullopt, "1"), "3");
    EXPECT_EQ(s.get("budget", std::nullopt, "16"), "16");
    EXPECT_EQ(Settings::env_name("base_url"), "MTC_BASE_URL");
    EXPECT_EQ(Settings::env_name("api_key"), "MTC_API_KEY");
}

TEST(CliConfig, BadConfigFileIsAUsageError)
{
    TempDir dir;
    write(dir / "bad.conf", "no equals sign\n");
    EXPECT_EQ(run({"--config", (dir / "bad.conf").string(), "calc", "1"}).code, 2);
    EXPECT_EQ(run({"--config", (dir / "missing.conf").string(), "calc", "1"}).code, 1);
}

TEST(CliConfig, ConfigFileAndEnvironmentSelectTheBackend)
{
    TempDir dir;
    write(dir / "replay.conf", "backend = replay\ntranscript = " + fixture("matrix.jsonl") +
                                   "\nbundle = " + fixture("fixture.bundle") + "\nexemplars = 3\n");
    const std::vector<std::string> eval = {"eval", "--dataset", fixture("dataset.jsonl"), "--overrides",
                                           fixture("overrides.txt"), "--deterministic", "--matrix"};
    auto expected = fixtures::read_file(fixture("matrix_table.txt"));

    auto with_flag = eval;
    with_flag.insert(with_flag.begin(), {"--config", (dir / "replay.conf").string()});
    auto r = run(with_flag);
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, expected);

    auto r2 = run(eval, {{"MTC_CONFIG", (dir / "replay.conf").string()}});
    EXPECT_EQ(r2.out, expected);

    // environment beats the config file: a transcript without the needed entries
    auto r3 = run(eval, {{"MTC_CONFIG", (dir / "replay.conf").string()},
                         {"MTC_TRANSCRIPT", fixture("golden_three_tool.jsonl")}});
    EXPECT_EQ(r3.code, 1);
    EXPECT_NE(r3.err.find("AbortThreshold"), std::string::npos) << r3.err;

    // and a flag beats the environment
    auto flagged = eval;
    flagged.insert(flagged.end(), {"--transcript", fixture("matrix.jsonl")});
    auto r4 = run(flagged, {{"MTC_CONFIG", (dir / "replay.conf").string()},
                            {"MTC_TRANSCRIPT", fixture("golden_three_tool.jsonl")}});
    EXPECT_EQ(r4.out, expected);
}

TEST(CliEval, ReplayMatrixReproducesTheShippedTable)
{
    auto args = replay_args("eval", "matrix.jsonl");
    args.insert(args.end(), {"--dataset", fixture("dataset.jsonl"), "--overrides", fixture("overrides.txt"),
                             "--matrix", "--deterministic", "--workers", "3"});
    auto r = run(args);
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, fixtures::read_file(fixture("matrix_table.txt")));
}

TEST(CliEval, ReportFileMatchesTheShippedReport)
{
    TempDir dir;
    auto args = replay_args("eval", "matrix.jsonl");
    args.insert(args.end(), {"--dataset", fixture("dataset.jsonl"), "--overrides", fixture("overrides.txt"),
                             "--deterministic", "--report", (dir / "r.json").string()});
    auto r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(fixtures::read_file(dir / "r.json"), fixtures::read_file(fixture("multitool_report.json")));
    EXPECT_NE(r.out.find("MultiTool (Cal+Crp+Mml)"), std::string::npos);
}

TEST(CliEval, MatrixReportIsAnArrayOfReports)
{
    TempDir dir;
    auto args = replay_args("eval", "matrix.jsonl");
    args.insert(args.end(), {"--dataset", fixture("dataset.jsonl"), "--matrix", "--deterministic", "--report",
                             (dir / "m.json").string()});
    ASSERT_EQ(run(args).code, 0);
    auto j = nlohmann::json::parse(fixtures::read_file(dir / "m.json"));
    ASSERT_TRUE(j.is_array());
    EXPECT_EQ(j.size(), 11u);
    EXPECT_EQ(j.front()["method"], "Zero-Shot");
}

TEST(CliEval, MissingDatasetIsAUsageError)
{
    auto r = run(replay_args("eval", "matrix.jsonl"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--dataset"), std::string::npos);
}

TEST(CliSolve, PrintsTraceAndAnswer)
{
    auto args = replay_args("solve", "golden_three_tool.jsonl");
    args.push_back(fixtures::fixture_item("q01").question);
    auto r = run(args);
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("<<Chemical reaction predictor>> Ca(OH)2 + CO2 → CaCO3 + H2O\n"), std::string::npos);
    EXPECT_NE(r.out.find("Ca(OH)2 <<Molar mass list>> " + run({"molar-mass", "Ca(OH)2"}).out), std::string::npos);
    EXPECT_NE(r.out.find("2 * 74.09 <<Calculator>> " + run({"calc", "2 * 74.09"}).out), std::string::npos);
    EXPECT_TRUE(r.out.ends_with("\nAnswer: 148.18\n")) << r.out;
}

TEST(CliSolve, ReplayMissIsADomainError)
{
    auto args = replay_args("solve", "golden_three_tool.jsonl");
    args.push_back("A question nobody recorded");
    auto r = run(args);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("ReplayMiss"), std::string::npos) << r.err;
}

TEST(CliRecord, RecordedTranscriptReplaysTheSameRun)
{
    TempDir dir;
    auto rec = replay_args("record", "matrix.jsonl");
    rec.insert(rec.end(), {"--dataset", fixture("dataset.jsonl"), "--deterministic", "--mode", "few-shot-cot",
                           "--out", (dir / "t.jsonl").string()});
    auto first = run(rec);
    ASSERT_EQ(first.code, 0) << first.err;

    auto again = replay_args("eval", "matrix.jsonl");
    again[4] = (dir / "t.jsonl").string();
    again.insert(again.end(), {"--dataset", fixture("dataset.jsonl"), "--deterministic", "--mode", "few-shot-cot"});
    auto second = run(again);
    EXPECT_EQ(second.code, 0) << second.err;
    EXPECT_EQ(first.out, second.out);

    auto check = replay_args("replay-check", "matrix.jsonl");
    check[4] = (dir / "t.jsonl").string();
    check.insert(check.end(), {"--dataset", fixture("dataset.jsonl"), "--mode", "few-shot-cot"});
    EXPECT_EQ(run(check).code, 0);
    check.insert(check.end(), {"--mode", "multitool"});
    EXPECT_EQ(run(check).code, 2) << "--mode given twice";
}

TEST(CliRecord, OutIsRequired)
{
    auto args = replay_args("record", "matrix.jsonl");
    args.insert(args.end(), {"--dataset", fixture("dataset.jsonl")});
    EXPECT_EQ(run(args).code, 2);
}

TEST(CliReplayCheck, CountsEntriesAndMisses)
{
    auto ok = run({"replay-check", "--transcript", fixture("golden_fallback.jsonl")});
    EXPECT_EQ(ok.code, 0);
    EXPECT_EQ(ok.out, "entries: 4\n");

    auto args = replay_args("replay-check", "golden_fallback.jsonl");
    args.insert(args.end(), {"--dataset", fixture("dataset.jsonl")});
    auto partial = run(args);
    EXPECT_EQ(partial.code, 1);
    EXPECT_NE(partial.out.find("MultiTool (Cal+Crp+Mml): 9 missing"), std::string::npos) << partial.out;
}

TEST(CliReplayCheck, TamperedTranscriptIsRejected)
{
    TempDir dir;
    auto text = fixtures::read_file(fixture("golden_three_tool.jsonl"));
    auto at = text.find("Calcium hydroxide");
    ASSERT_NE(at, std::string::npos);
    text.replace(at, 7, "Barium ");
    write(dir / "t.jsonl", text);
    auto r = run({"replay-check", "--transcript", (dir / "t.jsonl").string()});
    EXPECT_EQ(r.code, 1);
}

} // namespace
