// SPDX-License-Identifier: Apache-2.0
#include <mtc/cli.hpp>

#include <mtc/calculator.hpp>
#include <mtc/chemistry.hpp>
#include <mtc/harness.hpp>
#include <mtc/llm.hpp>
#include <mtc/orchestrator.hpp>
#include <mtc/tools.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>

#ifndef MTC_DEFAULT_BUNDLE
#define MTC_DEFAULT_BUNDLE "data/prompts/default.bundle"
#endif

namespace mtc::cli
{

namespace
{

class UsageError: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

std::string trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

using Flag = std::optional<std::string>;

struct BackendFlags
{
    Flag backend;
    Flag transcript;
    Flag model;
    Flag base_url;
    Flag max_tokens;
    Flag bundle;
};

struct MethodFlags
{
    Flag mode;
    Flag tools;
    Flag exemplars;
    Flag budget;
};

struct EvalFlags
{
    Flag dataset;
    Flag overrides;
    Flag report;
    Flag workers;
    bool matrix = false;
    bool deterministic = false;
};

struct Flags
{
    Flag config;
    std::vector<std::string> expression;
    std::string formula;
    std::string reactants;
    std::string products;
    Flag weights;
    std::string question;
    Flag out_path;
    BackendFlags backend;
    MethodFlags method;
    EvalFlags eval;
};

long parse_int(const std::string& key, const std::string& text, long min)
{
    long value = 0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size() || value < min)
        throw UsageError(key + ": expected an integer >= " + std::to_string(min) + ", got '" + text + "'");
    return value;
}

const chem::ElementTable& element_table(const Settings& settings, const Flag& flag,
                                        std::optional<chem::ElementTable>& storage)
{
    auto path = settings.get("weights", flag);
    if (!path)
        return chem::ElementTable::standard();
    storage = chem::ElementTable::with_overrides(std::filesystem::path(*path));
    return *storage;
}

int print_tool_result(const tools::ToolResult& result, std::ostream& out, std::ostream& err)
{
    if (!result.ok())
    {
        err << "error: " << tools::to_string(result.error().kind) << ": " << result.error().detail << "\n";
        return kExitDomainError;
    }
    out << result.output() << "\n";
    return kExitOk;
}

std::set<tools::ToolId> parse_tools(const std::string& text)
{
    std::set<tools::ToolId> ids;
    std::stringstream in(text);
    std::string part;
    while (std::getline(in, part, ','))
    {
        auto name = trim(part);
        if (name.empty())
            continue;
        auto id = tools::parse_tool_id(name);
        if (!id)
            throw UsageError("unknown tool '" + name + "' (expected cal, crp or mml)");
        ids.insert(*id);
    }
    return ids;
}

harness::MethodConfig method_config(const Settings& settings, const MethodFlags& flags)
{
    harness::MethodConfig config;
    auto mode_text = settings.get("mode", flags.mode, "multitool");
    auto mode = harness::parse_mode(mode_text);
    if (!mode)
        throw UsageError("unknown mode '" + mode_text + "'");
    config.mode = *mode;
    if (auto tools_text = settings.get("tools", flags.tools))
        config.enabled_tools = parse_tools(*tools_text);
    else if (config.mode == orch::PromptStyle::MultiTool)
        config.enabled_tools = {tools::ToolId::Calculator, tools::ToolId::ReactionPredictor,
                                tools::ToolId::MolarMassList};
    config.exemplar_count =
        static_cast<std::size_t>(parse_int("exemplars", settings.get("exemplars", flags.exemplars, "20"), 1));
    config.tool_budget = static_cast<int>(
        parse_int("budget", settings.get("budget", flags.budget, std::to_string(orch::kDefaultToolBudget)), 0));
    try
    {
        config.validate();
    }
    catch (const harness::HarnessError& e)
    {
        throw UsageError(e.what());
    }
    return config;
}

std::unique_ptr<llm::Backend> make_backend(const Settings& settings, const BackendFlags& flags)
{
    auto kind = settings.get("backend", flags.backend, "remote");
    if (kind == "replay")
    {
        auto path = settings.get("transcript", flags.transcript);
        if (!path)
            throw UsageError("the replay backend needs --transcript");
        return std::make_unique<llm::ReplayBackend>(llm::load_transcript(std::filesystem::path(*path)));
    }
    if (kind != "remote")
        throw UsageError("unknown backend '" + kind + "' (expected remote or replay)");
    llm::RemoteConfig config;
    config.base_url = settings.get("base_url", flags.base_url, config.base_url);
    config.api_key = settings.get("api_key", std::nullopt, "");
    return std::make_unique<llm::RemoteBackend>(std::move(config));
}

std::string model_id(const Settings& settings, const BackendFlags& flags)
{
    return settings.get("model", flags.model, std::string(llm::kDefaultModel));
}

int max_tokens(const Settings& settings, const BackendFlags& flags)
{
    return static_cast<int>(
        parse_int("max_tokens", settings.get("max_tokens", flags.max_tokens, std::to_string(llm::kDefaultMaxTokens)), 1));
}

orch::PromptBundle prompt_bundle(const Settings& settings, const BackendFlags& flags)
{
    return orch::load_bundle(std::filesystem::path(settings.get("bundle", flags.bundle, MTC_DEFAULT_BUNDLE)));
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw harness::HarnessError(harness::HarnessError::Kind::Io, "cannot write " + path.string());
    out << text;
}

int cmd_solve(const Settings& settings, const Flags& flags, std::ostream& out, std::ostream& err)
{
    auto backend = make_backend(settings, flags.backend);
    auto config = method_config(settings, flags.method);
    auto bundle = prompt_bundle(settings, flags.backend);
    if (orch::uses_exemplars(config.mode))
        bundle = bundle.with_exemplar_count(config.exemplar_count);
    std::optional<chem::ElementTable> storage;
    const auto registry = tools::make_registry(config.enabled_tools, element_table(settings, flags.weights, storage));
    bundle.validate(registry);

    orch::SessionOptions options;
    options.style = config.mode;
    options.tool_budget = config.tool_budget;
    options.max_tokens = max_tokens(settings, flags.backend);
    options.model_id = model_id(settings, flags.backend);
    auto solution = orch::solve(*backend, registry, bundle, flags.question, options);

    auto trace = solution.session.trace_text();
    trace.erase(trace.find_last_not_of(" \n") + 1);
    out << trace << "\n";
    if (!solution.answer)
    {
        err << "error: no answer: " << solution.answer_error;
        if (!solution.session.failure_reason.empty())
            err << ": " << solution.session.failure_reason;
        err << "\n";
        return kExitDomainError;
    }
    out << "Answer: " << solution.answer->text << "\n";
    return kExitOk;
}

struct EvalRun
{
    std::vector<harness::EvalReport> reports;
};

std::string dataset_path(const Settings& settings, const Flags& flags)
{
    auto path = settings.get("dataset", flags.eval.dataset);
    if (!path)
        throw UsageError("--dataset is required");
    return *path;
}

EvalRun run_evals(llm::Backend& backend, const Settings& settings, const Flags& flags, double abort_fraction)
{
    auto dataset_path = cli::dataset_path(settings, flags);
    auto dataset = harness::load_dataset(std::filesystem::path(dataset_path));
    auto bundle = prompt_bundle(settings, flags.backend);

    harness::RunOptions options;
    options.workers = static_cast<std::size_t>(parse_int("workers", settings.get("workers", flags.eval.workers, "1"), 1));
    options.measure_time = !flags.eval.deterministic;
    options.abort_fraction = abort_fraction;
    options.model_id = model_id(settings, flags.backend);
    options.max_tokens = max_tokens(settings, flags.backend);
    if (auto overrides = settings.get("overrides", flags.eval.overrides))
        options.incorrect_gold = harness::load_overrides(std::filesystem::path(*overrides));

    std::vector<harness::MethodConfig> configs;
    auto single = method_config(settings, flags.method);
    if (flags.eval.matrix)
    {
        configs = harness::method_matrix(single.exemplar_count);
        for (auto& c: configs)
            c.tool_budget = single.tool_budget;
    }
    else
        configs.push_back(single);

    EvalRun run;
    for (const auto& config: configs)
        run.reports.push_back(harness::run_eval(backend, config, bundle, dataset, options));
    return run;
}

void emit_reports(const EvalRun& run, const Flags& flags, std::ostream& out)
{
    out << harness::render_table(run.reports);
    if (!flags.eval.report)
        return;
    std::string text;
    if (run.reports.size() == 1)
        text = harness::report_json(run.reports.front());
    else
    {
        auto all = nlohmann::ordered_json::array();
        for (const auto& r: run.reports)
            all.push_back(nlohmann::ordered_json::parse(harness::report_json(r)));
        text = all.dump(2) + "\n";
    }
    write_text(*flags.eval.report, text);
}

int cmd_eval(const Settings& settings, const Flags& flags, std::ostream& out)
{
    (void)dataset_path(settings, flags);
    auto backend = make_backend(settings, flags.backend);
    auto run = run_evals(*backend, settings, flags, 0.5);
    emit_reports(run, flags, out);
    return kExitOk;
}

int cmd_record(const Settings& settings, const Flags& flags, std::ostream& out)
{
    if (!flags.out_path)
        throw UsageError("--out is required");
    (void)dataset_path(settings, flags);
    auto backend = make_backend(settings, flags.backend);
    llm::RecordingBackend recorder(*backend);
    auto run = run_evals(recorder, settings, flags, 0.5);
    llm::save_transcript(recorder.transcript(), std::filesystem::path(*flags.out_path));
    emit_reports(run, flags, out);
    return kExitOk;
}

int cmd_replay_check(const Settings& settings, const Flags& flags, std::ostream& out, std::ostream& err)
{
    auto path = settings.get("transcript", flags.backend.transcript);
    if (!path)
        throw UsageError("--transcript is required");
    auto transcript = llm::load_transcript(std::filesystem::path(*path));
    out << "entries: " << transcript.entries.size() << "\n";
    if (!settings.get("dataset", flags.eval.dataset))
        return kExitOk;

    llm::ReplayBackend replay(std::move(transcript));
    // every miss is reported, so never abort
    auto run = run_evals(replay, settings, flags, 1.0);
    std::size_t misses = 0;
    for (const auto& report: run.reports)
    {
        out << report.config.method_name() << ": " << report.transport_failures << " missing\n";
        misses += report.transport_failures;
    }
    if (misses > 0)
    {
        err << "error: " << misses << " item(s) need completions the transcript does not have\n";
        return kExitDomainError;
    }
    return kExitOk;
}

void add_backend_options(CLI::App* cmd, BackendFlags& f)
{
    cmd->add_option("--backend", f.backend, "remote (default) or replay");
    cmd->add_option("--transcript", f.transcript, "Recorded transcript for the replay backend");
    cmd->add_option("--model", f.model, "Model id sent to the endpoint");
    cmd->add_option("--base-url", f.base_url, "Completion endpoint base URL");
    cmd->add_option("--max-tokens", f.max_tokens, "Token limit per completion");
    cmd->add_option("--bundle", f.bundle, "Prompt bundle file");
}

void add_method_options(CLI::App* cmd, MethodFlags& f)
{
    cmd->add_option("--mode", f.mode, "zero-shot, zero-shot-cot, few-shot, few-shot-cot or multitool");
    cmd->add_option("--tools", f.tools, "Comma-separated tool subset: cal,crp,mml");
    cmd->add_option("--exemplars", f.exemplars, "Number of exemplars");
    cmd->add_option("--budget", f.budget, "Tool calls allowed per question");
}

void add_eval_options(CLI::App* cmd, EvalFlags& f)
{
    cmd->add_option("--dataset", f.dataset, "Dataset, one JSON record per line");
    cmd->add_option("--overrides", f.overrides, "Item ids whose gold answer is wrong");
    cmd->add_option("--report", f.report, "Write the JSON report here");
    cmd->add_option("--workers", f.workers, "Items evaluated in parallel");
    cmd->add_flag("--matrix", f.matrix, "Run every baseline and tool subset");
    cmd->add_flag("--deterministic", f.deterministic, "Leave wall-clock time out of the report");
}

} // namespace

Environment process_environment()
{
    return [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str()))
            return std::string(v);
        return std::nullopt;
    };
}

std::map<std::string, std::string> parse_config(std::istream& in)
{
    std::map<std::string, std::string> values;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line))
    {
        ++number;
        auto text = trim(line);
        if (text.empty() || text.front() == '#')
            continue;
        auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
        auto key = trim(text.substr(0, eq));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(number) + ": empty key");
        std::replace(key.begin(), key.end(), '-', '_');
        values[key] = trim(text.substr(eq + 1));
    }
    return values;
}

Settings::Settings(std::map<std::string, std::string> file, Environment env):
    _file(std::move(file)),
    _env(std::move(env))
{
}

std::string Settings::env_name(const std::string& key)
{
    std::string name = "MTC_";
    for (char c: key)
        name += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return name;
}

std::optional<std::string> Settings::get(const std::string& key, const std::optional<std::string>& flag) const
{
    if (flag)
        return flag;
    if (_env)
        if (auto v = _env(env_name(key)))
            return v;
    if (auto it = _file.find(key); it != _file.end())
        return it->second;
    return std::nullopt;
}

std::string Settings::get(const std::string& key, const std::optional<std::string>& flag,
                          const std::string& fallback) const
{
    return get(key, flag).value_or(fallback);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Environment& env)
{
    Flags flags;
    CLI::App app{"Chemistry word-problem solver with tool-augmented language model prompting", "mtc"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.add_option("--config", flags.config, "key = value settings file (also MTC_CONFIG)");

    auto* calc = app.add_subcommand("calc", "Evaluate an arithmetic expression as the Calculator tool does");
    calc->add_option("expression", flags.expression, "Expression, e.g. \"2 * 62\"")->required();

    auto* mass = app.add_subcommand("molar-mass", "Molar mass of a formula as the Molar mass list tool prints it");
    mass->add_option("formula", flags.formula, "Chemical formula, e.g. Ca(OH)2")->required();
    mass->add_option("--weights", flags.weights, "Atomic weight overrides (symbol weight per line)");

    auto* bal = app.add_subcommand("balance", "Balance a reaction as the Chemical reaction predictor tool does");
    bal->add_option("--reactants", flags.reactants, "Reactant formulas, comma-separated")->required();
    bal->add_option("--products", flags.products, "Product formulas, comma-separated")->required();
    bal->add_option("--weights", flags.weights, "Atomic weight overrides");

    auto* solve = app.add_subcommand("solve", "Answer one question and print the reasoning trace");
    solve->add_option("question", flags.question, "The question")->required();
    solve->add_option("--weights", flags.weights, "Atomic weight overrides");
    add_backend_options(solve, flags.backend);
    add_method_options(solve, flags.method);

    auto* eval = app.add_subcommand("eval", "Evaluate a method (or the whole method matrix) over a dataset");
    add_backend_options(eval, flags.backend);
    add_method_options(eval, flags.method);
    add_eval_options(eval, flags.eval);

    auto* record = app.add_subcommand("record", "Run an evaluation and save every completion to a transcript");
    record->add_option("--out", flags.out_path, "Transcript to write");
    add_backend_options(record, flags.backend);
    add_method_options(record, flags.method);
    add_eval_options(record, flags.eval);

    auto* check = app.add_subcommand("replay-check",
                                     "Validate a transcript, and with --dataset check it covers a whole run");
    add_backend_options(check, flags.backend);
    add_method_options(check, flags.method);
    add_eval_options(check, flags.eval);

    auto usage = [&](const std::string& message) {
        err << "error: " << message << "\n\n";
        auto chosen = app.get_subcommands();
        err << (chosen.empty() ? app.help() : chosen.front()->help());
        return kExitUsage;
    };

    try
    {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    }
    catch (const CLI::CallForHelp&)
    {
        auto chosen = app.get_subcommands();
        out << (chosen.empty() ? app.help() : chosen.front()->help());
        return kExitOk;
    }
    catch (const CLI::CallForAllHelp&)
    {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    }
    catch (const CLI::ParseError& e)
    {
        return usage(e.what());
    }

    try
    {
        std::map<std::string, std::string> file;
        auto config_path = flags.config;
        if (!config_path && env)
            config_path = env("MTC_CONFIG");
        if (config_path)
        {
            std::ifstream in(*config_path);
            if (!in)
                throw harness::HarnessError(harness::HarnessError::Kind::Io, "cannot read config " + *config_path);
            file = parse_config(in);
        }
        const Settings settings(std::move(file), env);

        if (*calc)
        {
            std::string expr;
            for (const auto& part: flags.expression)
                expr += (expr.empty() ? "" : " ") + part;
            auto registry = tools::make_registry({tools::ToolId::Calculator});
            return print_tool_result(registry.dispatch({std::string(tools::kCalculator), {expr}}), out, err);
        }
        if (*mass || *bal)
        {
            std::optional<chem::ElementTable> storage;
            const auto& table = element_table(settings, flags.weights, storage);
            if (*mass)
            {
                tools::ToolRegistry registry({tools::molar_mass_tool(table)});
                return print_tool_result(registry.dispatch({std::string(tools::kMolarMassList), {flags.formula}}), out,
                                         err);
            }
            tools::ToolRegistry registry({tools::reaction_predictor_tool(table)});
            return print_tool_result(
                registry.dispatch({std::string(tools::kReactionPredictor), {flags.reactants, flags.products}}), out,
                err);
        }
        if (*solve)
            return cmd_solve(settings, flags, out, err);
        if (*eval)
            return cmd_eval(settings, flags, out);
        if (*record)
            return cmd_record(settings, flags, out);
        return cmd_replay_check(settings, flags, out, err);
    }
    catch (const UsageError& e)
    {
        return usage(e.what());
    }
    catch (const ConfigError& e)
    {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << "\n";
        return kExitDomainError;
    }
}

} // namespace mtc::cli
