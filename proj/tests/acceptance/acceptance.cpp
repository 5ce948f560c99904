// SPDX-License-Identifier: Apache-2.0
// Acceptance runner: one PASS/FAIL line per criterion. Every check runs twice
// and the second pass must reproduce the first byte for byte.

#include "../support/balance_oracle.hpp"
#include "../support/expr_oracle.hpp"
#include "../support/molar_mass_corpus.hpp"
#include "../support/reaction_corpus.hpp"

#include <mtc/calculator.hpp>
#include <mtc/chemistry.hpp>
#include <mtc/cli.hpp>
#include <mtc/harness.hpp>
#include <mtc/llm.hpp>
#include <mtc/orchestrator.hpp>
#include <mtc/tools.hpp>

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <thread>

#include <unistd.h>

namespace
{

using namespace mtc;
namespace fs = std::filesystem;

// Pinned tolerances and limits.
constexpr std::size_t kMinReactions = 50;
constexpr int kBruteForceLimit = 10;
constexpr double kBalanceSeconds = 5.0;
constexpr std::size_t kMinFormulas = 30;
constexpr double kMassTolerance = 0.01;
constexpr int kTrees = 1000;
constexpr int kTreeDepth = 6;
constexpr unsigned kTreeSeed = 20230519;
constexpr std::size_t kFixtureExemplars = 3;
constexpr double kFixtureAccuracy = 0.6;
constexpr std::size_t kFixtureItems = 10;

struct Outcome
{
    bool pass = true;
    std::string detail;
    /// Everything the check produced; compared across the two passes.
    std::string output;

    void require(bool ok, const std::string& what)
    {
        if (!ok && pass)
        {
            pass = false;
            detail = what;
        }
    }
};

fs::path fixtures()
{
    return fs::path(MTC_SOURCE_DIR) / "tests" / "fixtures";
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::vector<chem::ChemicalFormula> parse_all(const std::vector<std::string>& texts)
{
    std::vector<chem::ChemicalFormula> out;
    for (const auto& t: texts)
        out.push_back(chem::parse_formula(t));
    return out;
}

Outcome balancer_suite()
{
    Outcome o;
    const auto started = std::chrono::steady_clock::now();
    const auto& corpus = testing::reaction_corpus();
    o.require(corpus.size() >= kMinReactions, "corpus has only " + std::to_string(corpus.size()) + " reactions");
    bool has_example = false;
    std::size_t matched = 0;
    for (const auto& rx: corpus)
    {
        if (rx.reactants == std::vector<std::string>{"Ca(OH)2", "CO2"} &&
            rx.products == std::vector<std::string>{"CaCO3", "H2O"})
            has_example = true;
        auto reactants = parse_all(rx.reactants);
        auto products = parse_all(rx.products);
        std::vector<testing::Composition> rc, pc;
        for (const auto& f: reactants)
            rc.push_back(f.composition);
        for (const auto& f: products)
            pc.push_back(f.composition);
        auto oracle = testing::brute_force_balance(rc, pc, kBruteForceLimit);

        chem::Reaction reaction;
        try
        {
            reaction = chem::balance(reactants, products);
        }
        catch (const std::exception& e)
        {
            o.require(false, rx.reactants.front() + ": " + e.what());
            continue;
        }
        const auto equation = chem::format_equation(reaction);
        o.output += equation + "\n";
        o.require(oracle.minimal_solutions.size() == 1, equation + ": brute force found " +
                                                            std::to_string(oracle.minimal_solutions.size()) +
                                                            " minimal solutions");
        o.require(!oracle.minimal_solutions.empty() && *reaction.coefficients == oracle.minimal_solutions.front(),
                  equation + ": differs from brute force");
        o.require(chem::is_balanced(reaction), equation + ": not conserved");
        std::int64_t g = 0;
        for (auto c: *reaction.coefficients)
            g = std::gcd(g, c);
        o.require(g == 1, equation + ": gcd " + std::to_string(g));
        if (o.pass)
            ++matched;
    }
    o.require(has_example, "Ca(OH)2 + CO2 -> CaCO3 + H2O missing from the corpus");
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    o.require(seconds < kBalanceSeconds, "took " + std::to_string(seconds) + " s");
    if (o.pass)
    {
        std::ostringstream d;
        d << matched << " reactions equal brute force over coefficients <= " << kBruteForceLimit
          << ", conserved, gcd 1; " << std::fixed << std::setprecision(2) << seconds << " s < " << kBalanceSeconds
          << " s";
        o.detail = d.str();
    }
    return o;
}

Outcome molar_mass_suite()
{
    Outcome o;
    const auto& corpus = testing::molar_mass_corpus();
    o.require(corpus.size() >= kMinFormulas, "only " + std::to_string(corpus.size()) + " formulas");
    for (const std::string required: {"H2O", "CO2", "CaCO3", "Al2(CO3)3"})
        o.require(std::any_of(corpus.begin(), corpus.end(), [&](const auto& c) { return c.formula == required; }),
                  required + " missing from the corpus");
    double worst = 0.0;
    for (const auto& c: corpus)
    {
        auto mass = chem::molar_mass(chem::parse_formula(c.formula));
        double diff = std::abs(mass.grams_per_mole() - testing::hand_molar_mass(c));
        worst = std::max(worst, diff);
        o.require(diff <= kMassTolerance, c.formula + " off by " + std::to_string(diff));
        o.output += c.formula + " " + mass.render() + "\n";
    }
    if (o.pass)
    {
        std::ostringstream d;
        d << corpus.size() << " formulas within " << kMassTolerance << " g/mol of hand sums (worst " << std::fixed
          << std::setprecision(4) << worst << ")";
        o.detail = d.str();
    }
    return o;
}

Outcome calculator_suite()
{
    Outcome o;
    testing::TreeGenerator gen(kTreeSeed);
    int valued = 0;
    int undefined = 0;
    for (int i = 0; i < kTrees; ++i)
    {
        auto tree = gen.generate(kTreeDepth);
        auto expected = testing::oracle_eval(*tree);
        auto text = testing::oracle_text(*tree);
        try
        {
            auto result = calc::evaluate(calc::parse_expression(text));
            std::string got = boost::multiprecision::numerator(result.value).str() + "/" +
                              boost::multiprecision::denominator(result.value).str();
            o.require(expected.has_value(), text + ": oracle divides by zero, calculator gave " + got);
            if (expected)
            {
                o.require(result.exact && got == expected->get_num().get_str() + "/" + expected->get_den().get_str(),
                          text + ": " + got + " != " + expected->get_str());
                ++valued;
            }
            o.output += got + "\n";
        }
        catch (const calc::CalcError& e)
        {
            o.require(!expected && e.kind() == calc::CalcError::Kind::DivisionByZero, text + ": " + e.what());
            ++undefined;
            o.output += "undefined\n";
        }
    }

    auto example = calc::evaluate(calc::parse_expression("12 * 3 / 342 * 100"));
    o.require(example.value == calc::Rational(200, 19), "12 * 3 / 342 * 100 is not 200/19");
    auto injected = tools::make_registry({tools::ToolId::Calculator})
                        .dispatch({std::string(tools::kCalculator), {"12 * 3 / 342 * 100"}});
    o.require(injected.ok() && injected.output() == "10.53", "calculator tool did not print 10.53");
    o.output += injected.ok() ? injected.output() + "\n" : "error\n";
    if (o.pass)
        o.detail = std::to_string(kTrees) + " trees of depth <= " + std::to_string(kTreeDepth) + " agree with GMP (" +
                   std::to_string(valued) + " exact values, " + std::to_string(undefined) +
                   " divisions by zero); 12 * 3 / 342 * 100 = 200/19 -> \"10.53\"";
    return o;
}

harness::MethodConfig full_multitool(int budget = orch::kDefaultToolBudget)
{
    harness::MethodConfig c;
    c.mode = orch::PromptStyle::MultiTool;
    c.enabled_tools = {tools::ToolId::Calculator, tools::ToolId::ReactionPredictor, tools::ToolId::MolarMassList};
    c.exemplar_count = kFixtureExemplars;
    c.tool_budget = budget;
    return c;
}

std::vector<harness::DatasetItem> fixture_items(const std::string& id = "")
{
    auto all = harness::load_dataset(fixtures() / "dataset.jsonl");
    if (id.empty())
        return all;
    std::vector<harness::DatasetItem> one;
    for (const auto& item: all)
        if (item.id == id)
            one.push_back(item);
    return one;
}

harness::RunOptions fixture_options()
{
    harness::RunOptions options;
    options.measure_time = false;
    options.incorrect_gold = harness::load_overrides(fixtures() / "overrides.txt");
    return options;
}

harness::EvalRecord replay_one(const std::string& transcript, const std::string& id, int budget)
{
    llm::ReplayBackend replay(llm::load_transcript(fixtures() / transcript));
    auto bundle = orch::load_bundle(fixtures() / "fixture.bundle");
    auto report = harness::run_eval(replay, full_multitool(budget), bundle, fixture_items(id), fixture_options());
    return report.records.front();
}

std::string segment_kinds(const orch::Session& s)
{
    std::string out;
    for (const auto& seg: s.trace)
    {
        if (!out.empty())
            out += ",";
        if (std::holds_alternative<orch::GeneratedText>(seg))
            out += "text";
        else if (const auto* t = std::get_if<orch::ToolInvocation>(&seg))
            out += "tool:" + t->call.tool_name;
        else
            out += "fallback:" + std::get<orch::FallbackGeneration>(seg).call.tool_name;
    }
    return out;
}

Outcome golden_traces()
{
    Outcome o;
    const std::string three_tool = "text,tool:Chemical reaction predictor,text,tool:Molar mass list,text,"
                                   "tool:Calculator,text";

    // (a) three tools, run twice
    auto a1 = replay_one("golden_three_tool.jsonl", "q01", orch::kDefaultToolBudget);
    auto a2 = replay_one("golden_three_tool.jsonl", "q01", orch::kDefaultToolBudget);
    const auto& sa = a1.solution.session;
    o.require(sa.status == orch::SessionStatus::Completed, "(a) status " + std::string(orch::to_string(sa.status)));
    o.require(segment_kinds(sa) == three_tool, "(a) segments " + segment_kinds(sa));
    o.require(orch::describe(sa) == orch::describe(a2.solution.session), "(a) two runs differ");
    o.require(orch::describe(sa) == read_file(fixtures() / "golden_three_tool.trace.txt"),
              "(a) trace differs from the shipped golden");
    o.require(a1.correct, "(a) answer " + a1.predicted_text + " is not correct");
    o.output += orch::describe(sa);

    // (b) invalid reaction-predictor input falls back to generation
    auto b = replay_one("golden_fallback.jsonl", "q07", orch::kDefaultToolBudget);
    const auto& sb = b.solution.session;
    o.require(sb.fallbacks() == 1, "(b) " + std::to_string(sb.fallbacks()) + " fallbacks");
    o.require(segment_kinds(sb).find("fallback:Chemical reaction predictor") != std::string::npos,
              "(b) segments " + segment_kinds(sb));
    o.require(b.error_category == harness::ErrorCategory::InvalidToolInput, "(b) not counted as InvalidToolInput");
    o.require(orch::describe(sb) == read_file(fixtures() / "golden_fallback.trace.txt"),
              "(b) trace differs from the shipped golden");
    o.output += orch::describe(sb);

    // (c) no tool budget
    auto c = replay_one("golden_budget_zero.jsonl", "q01", 0);
    const auto& sc = c.solution.session;
    o.require(sc.status == orch::SessionStatus::BudgetExhausted,
              "(c) status " + std::string(orch::to_string(sc.status)));
    o.require(sc.tool_invocations() == 0 && sc.fallbacks() == 0, "(c) a tool ran");
    o.require(orch::describe(sc) == read_file(fixtures() / "golden_budget_zero.trace.txt"),
              "(c) trace differs from the shipped golden");
    o.output += orch::describe(sc);

    if (o.pass)
        o.detail = "(a) Completed [" + three_tool + "], identical twice; (b) fallback counted InvalidToolInput; "
                   "(c) BudgetExhausted";
    return o;
}

Outcome harness_fixture()
{
    Outcome o;
    llm::ReplayBackend replay(llm::load_transcript(fixtures() / "matrix.jsonl"));
    auto bundle = orch::load_bundle(fixtures() / "fixture.bundle");
    auto dataset = fixture_items();
    auto options = fixture_options();
    auto serial = harness::run_eval(replay, full_multitool(), bundle, dataset, options);
    options.workers = 4;
    auto parallel = harness::run_eval(replay, full_multitool(), bundle, dataset, options);

    auto count = [&](harness::ErrorCategory c) {
        return serial.categories.contains(c) ? serial.categories.at(c) : std::size_t{0};
    };
    using C = harness::ErrorCategory;
    o.require(serial.items == kFixtureItems, std::to_string(serial.items) + " items");
    o.require(serial.correct == 6 && serial.accuracy == kFixtureAccuracy,
              "accuracy " + std::to_string(serial.accuracy));
    o.require(count(C::InvalidToolInput) == 1 && count(C::AnswerFormat) == 1 && count(C::IncorrectReasoning) == 1 &&
                  count(C::IncorrectGold) == 1,
              "category counts differ from 1/1/1/1");
    std::size_t categorized = 0;
    for (const auto& [_, n]: serial.categories)
        categorized += n;
    o.require(serial.correct + categorized + serial.uncategorized == serial.items, "counts do not add up to items");
    o.require(serial.accuracy == static_cast<double>(serial.correct) / static_cast<double>(serial.items),
              "accuracy is not correct / items");
    for (const auto& r: serial.records)
        o.require(!(r.correct && r.error_category), r.id + " is correct but categorized");
    const auto json = harness::report_json(serial);
    o.require(json == harness::report_json(parallel), "1 and 4 workers give different reports");
    o.require(json == read_file(fixtures() / "multitool_report.json"), "report differs from the shipped report");
    o.output += json;
    if (o.pass)
        o.detail = "accuracy 0.6 (6/10); IncorrectReasoning 1, InvalidToolInput 1, IncorrectGold 1, AnswerFormat 1; "
                   "counts sum to 10";
    return o;
}

/// Serves /v1/completions from a recorded transcript, standing in for a live endpoint.
class TranscriptServer
{
  public:
    explicit TranscriptServer(const fs::path& transcript): _replay(llm::load_transcript(transcript))
    {
        _server.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
            auto body = nlohmann::json::parse(req.body);
            llm::CompletionRequest request;
            request.prompt = body.at("prompt").get<std::string>();
            request.max_tokens = body.at("max_tokens").get<int>();
            request.temperature = body.at("temperature").get<double>();
            request.model_id = body.at("model").get<std::string>();
            if (body.contains("stop"))
                request.stop_sequences = body.at("stop").get<std::vector<std::string>>();
            try
            {
                auto response = _replay.complete(request);
                nlohmann::json choice = {{"index", 0}, {"text", response.text}};
                switch (response.finish.kind)
                {
                    case llm::FinishReason::Kind::Stop:
                        choice["finish_reason"] = "stop";
                        if (!response.finish.stop_sequence.empty())
                            choice["stop_reason"] = response.finish.stop_sequence;
                        break;
                    case llm::FinishReason::Kind::Length: choice["finish_reason"] = "length"; break;
                    case llm::FinishReason::Kind::End: choice["finish_reason"] = "eos"; break;
                }
                res.set_content(nlohmann::json{{"choices", {choice}}}.dump(), "application/json");
            }
            catch (const llm::LlmError& e)
            {
                res.status = 404;
                res.set_content(e.what(), "text/plain");
            }
        });
        _port = _server.bind_to_any_port("127.0.0.1");
        _thread = std::thread([this] { _server.listen_after_bind(); });
        _server.wait_until_ready();
    }
    ~TranscriptServer()
    {
        _server.stop();
        _thread.join();
    }

    [[nodiscard]] std::string base_url() const { return "http://127.0.0.1:" + std::to_string(_port) + "/v1"; }

  private:
    llm::ReplayBackend _replay;
    httplib::Server _server;
    int _port = 0;
    std::thread _thread;
};

Outcome method_matrix()
{
    Outcome o;
    const auto expected_table = read_file(fixtures() / "matrix_table.txt");

    // replay backend through the library
    llm::ReplayBackend replay(llm::load_transcript(fixtures() / "matrix.jsonl"));
    auto bundle = orch::load_bundle(fixtures() / "fixture.bundle");
    std::vector<harness::EvalReport> reports;
    for (const auto& config: harness::method_matrix(kFixtureExemplars))
    {
        reports.push_back(harness::run_eval(replay, config, bundle, fixture_items(), fixture_options()));
        o.require(reports.back().transport_failures == 0, config.method_name() + " missed the transcript");
    }
    o.require(reports.size() == 11, std::to_string(reports.size()) + " methods in the matrix");
    const auto table = harness::render_table(reports);
    o.require(table == expected_table, "replayed table differs from the shipped table");
    o.output += table;

    // the eval command against an HTTP completion endpoint, unchanged code path
    TranscriptServer server(fixtures() / "matrix.jsonl");
    const auto report_path = fs::temp_directory_path() / ("mtc_acceptance_" + std::to_string(::getpid()) + ".json");
    std::ostringstream out, err;
    auto env = [](const std::string& name) -> std::optional<std::string> {
        if (name == "MTC_API_KEY")
            return "acceptance";
        return std::nullopt;
    };
    int code = cli::run_cli({"eval", "--backend", "remote", "--base-url", server.base_url(), "--bundle",
                             (fixtures() / "fixture.bundle").string(), "--dataset",
                             (fixtures() / "dataset.jsonl").string(), "--overrides",
                             (fixtures() / "overrides.txt").string(), "--exemplars",
                             std::to_string(kFixtureExemplars), "--matrix", "--deterministic", "--workers", "2",
                             "--report", report_path.string()},
                            out, err, env);
    o.require(code == 0, "eval over HTTP exited " + std::to_string(code) + ": " + err.str());
    o.require(out.str() == expected_table, "eval over HTTP printed a different table");
    o.output += out.str();

    auto report_text = read_file(report_path);
    fs::remove(report_path);
    try
    {
        auto j = nlohmann::json::parse(report_text);
        o.require(j.is_array() && j.size() == reports.size(), "report is not one entry per method");
        for (const auto& entry: j)
            for (const char* key: {"method", "tools", "exemplars", "accuracy", "error_categories"})
                o.require(entry.contains(key), std::string("report entry lacks ") + key);
    }
    catch (const nlohmann::json::exception& e)
    {
        o.require(false, std::string("report is not JSON: ") + e.what());
    }
    o.output += report_text;
    if (o.pass)
        o.detail = "11 methods (4 baselines + 7 tool subsets) replay end to end; `eval --backend remote` against a "
                   "local HTTP endpoint prints the same table and a per-method JSON report";
    return o;
}

struct Criterion
{
    std::string name;
    std::function<Outcome()> run;
};

Outcome guarded(const Criterion& c)
{
    try
    {
        return c.run();
    }
    catch (const std::exception& e)
    {
        Outcome o;
        o.require(false, std::string("exception: ") + e.what());
        return o;
    }
}

} // namespace

int main()
{
    const std::vector<Criterion> criteria = {
        {"balancer-oracle", balancer_suite},   {"molar-mass", molar_mass_suite},
        {"calculator-oracle", calculator_suite}, {"golden-traces", golden_traces},
        {"harness-fixture", harness_fixture}, {"method-matrix", method_matrix},
    };

    std::vector<Outcome> first, second;
    for (const auto& c: criteria)
        first.push_back(guarded(c));
    for (const auto& c: criteria)
        second.push_back(guarded(c));

    bool all = true;
    bool identical = true;
    std::string mismatch;
    for (std::size_t i = 0; i < criteria.size(); ++i)
    {
        const auto& o = first[i];
        bool pass = o.pass && second[i].pass;
        std::cout << (pass ? "PASS " : "FAIL ") << criteria[i].name << ": "
                  << (o.pass ? (second[i].pass ? o.detail : "second pass: " + second[i].detail) : o.detail) << "\n";
        all = all && pass;
        if (first[i].output != second[i].output)
        {
            identical = false;
            mismatch += (mismatch.empty() ? "" : ", ") + criteria[i].name;
        }
    }
    std::size_t bytes = 0;
    for (const auto& o: first)
        bytes += o.output.size();
    std::cout << (identical && all ? "PASS " : "FAIL ") << "determinism: "
              << (identical ? (all ? "every check passed twice with byte-identical output (" + std::to_string(bytes) +
                                         " bytes compared)"
                                   : "outputs identical, but a check failed")
                            : "outputs differ between passes: " + mismatch)
              << "\n";
    return all && identical ? 0 : 1;
}
