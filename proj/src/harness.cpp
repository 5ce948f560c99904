// SPDX-License-Identifier: Apache-2.0
#include <mtc/harness.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace mtc::harness
{

namespace
{

using nlohmann::json;
using nlohmann::ordered_json;

std::string trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string number_text(double v)
{
    // shortest text that reads back as the same double
    for (int precision = 1; precision <= 17; ++precision)
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v)
            return buf;
    }
    return std::to_string(v);
}

DatasetItem item_from(const json& j, std::size_t line)
{
    using K = HarnessError::Kind;
    if (!j.is_object())
        throw HarnessError(K::MalformedRecord, "record is not an object", line);
    for (const char* field: {"id", "question", "answer"})
        if (!j.contains(field))
            throw HarnessError(K::MalformedRecord, std::string("missing field '") + field + "'", line);

    DatasetItem item;
    const auto& id = j["id"];
    if (id.is_string())
        item.id = id.get<std::string>();
    else if (id.is_number_integer())
        item.id = std::to_string(id.get<long long>());
    else
        throw HarnessError(K::MalformedRecord, "id must be a string or integer", line);
    if (item.id.empty())
        throw HarnessError(K::MalformedRecord, "empty id", line);

    if (!j["question"].is_string() || trim(j["question"].get<std::string>()).empty())
        throw HarnessError(K::MalformedRecord, "question must be a non-empty string", line);
    item.question = j["question"].get<std::string>();

    const auto& answer = j["answer"];
    if (answer.is_number())
    {
        item.gold_answer = answer.get<double>();
        item.gold_text = answer.is_number_float() ? number_text(item.gold_answer) : answer.dump();
    }
    else if (answer.is_string())
    {
        auto text = trim(answer.get<std::string>());
        auto split = text.find_first_of(" \t");
        auto number = text.substr(0, split);
        auto parsed = orch::parse_plain_number(number);
        if (!parsed)
            throw HarnessError(K::NonNumericAnswer, "answer '" + text + "' does not start with a number", line);
        item.gold_answer = parsed->first;
        item.gold_text = parsed->second;
        if (split != std::string::npos)
            item.gold_unit = trim(text.substr(split));
    }
    else
    {
        throw HarnessError(K::NonNumericAnswer, "answer must be a number or a string", line);
    }
    if (!std::isfinite(item.gold_answer))
        throw HarnessError(K::NonNumericAnswer, "answer is not finite", line);
    return item;
}

std::string tool_key(const tools::ToolCall& call)
{
    return call.tool_name.empty() ? std::string("(malformed trigger)") : call.tool_name;
}

bool has_tool_input_error(const orch::Session& session)
{
    for (const auto& seg: session.trace)
        if (const auto* fb = std::get_if<orch::FallbackGeneration>(&seg); fb && !fb->tool_disabled())
            return true;
    return false;
}

EvalRecord evaluate_item(llm::Backend& backend, const tools::ToolRegistry& registry, const orch::PromptBundle& bundle,
                         const DatasetItem& item, const orch::SessionOptions& options)
{
    EvalRecord record;
    record.id = item.id;
    record.gold = item.gold_answer;
    record.gold_text = item.gold_text;
    record.solution = orch::solve(backend, registry, bundle, item.question, options);
    const auto& sol = record.solution;
    record.transport_failed =
        sol.session.status == orch::SessionStatus::Failed || !sol.extraction_failure.empty();
    if (sol.answer)
    {
        record.predicted = sol.answer->value;
        record.predicted_text = sol.answer->text;
        record.correct = normalize_and_compare(sol.answer->value, item.gold_answer);
    }
    return record;
}

ordered_json segment_json(const orch::TraceSegment& seg)
{
    if (const auto* g = std::get_if<orch::GeneratedText>(&seg))
        return {{"kind", "generated"}, {"text", g->text}};
    if (const auto* t = std::get_if<orch::ToolInvocation>(&seg))
        return {{"kind", "tool"}, {"tool", t->call.tool_name}, {"input", t->call.raw_input}, {"output", t->output}};
    const auto& f = std::get<orch::FallbackGeneration>(seg);
    return {{"kind", "fallback"},   {"tool", f.call.tool_name}, {"input", f.call.raw_input},
            {"error", f.error_kind}, {"detail", f.error_detail}, {"output", f.output}};
}

ordered_json record_json(const EvalRecord& r)
{
    const auto& sol = r.solution;
    ordered_json j;
    j["id"] = r.id;
    j["gold"] = r.gold_text;
    j["predicted"] = r.predicted ? ordered_json(r.predicted_text) : ordered_json(nullptr);
    j["correct"] = r.correct;
    j["category"] = r.error_category ? ordered_json(std::string(to_string(*r.error_category))) : ordered_json(nullptr);
    j["status"] = std::string(orch::to_string(sol.session.status));
    if (!sol.session.failure_reason.empty())
        j["failure"] = sol.session.failure_reason;
    if (sol.answer)
    {
        j["answer_method"] = std::string(orch::to_string(sol.answer->method));
        j["answer_sentence"] = sol.answer->source_sentence;
    }
    else
    {
        j["answer_error"] = sol.answer_error;
    }
    j["tool_invocations"] = sol.session.tool_invocations();
    j["fallbacks"] = sol.session.fallbacks();
    j["completion_calls"] = sol.session.completion_calls;
    auto trace = ordered_json::array();
    for (const auto& seg: sol.session.trace)
        trace.push_back(segment_json(seg));
    j["trace"] = std::move(trace);
    return j;
}

std::string percent(double fraction)
{
    std::ostringstream out;
    out << std::fixed << std::setprecision(2) << fraction * 100.0;
    return out.str();
}

} // namespace

HarnessError::HarnessError(Kind kind, const std::string& detail, std::optional<std::size_t> line):
    std::runtime_error(std::string(to_string(kind)) + (line ? " at line " + std::to_string(*line) : std::string()) +
                       ": " + detail),
    _kind(kind), _line(line)
{
}

std::string_view to_string(HarnessError::Kind kind)
{
    switch (kind)
    {
        case HarnessError::Kind::MalformedRecord: return "MalformedRecord";
        case HarnessError::Kind::DuplicateId: return "DuplicateId";
        case HarnessError::Kind::NonNumericAnswer: return "NonNumericAnswer";
        case HarnessError::Kind::EmptyDataset: return "EmptyDataset";
        case HarnessError::Kind::InvalidConfig: return "InvalidConfig";
        case HarnessError::Kind::AbortThreshold: return "AbortThreshold";
        case HarnessError::Kind::Io: return "Io";
    }
    return "HarnessError";
}

std::vector<DatasetItem> parse_dataset(std::istream& in)
{
    std::vector<DatasetItem> items;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (trim(line).empty())
            continue;
        json j;
        try
        {
            j = json::parse(line);
        }
        catch (const json::exception& e)
        {
            throw HarnessError(HarnessError::Kind::MalformedRecord, e.what(), line_no);
        }
        auto item = item_from(j, line_no);
        if (!ids.insert(item.id).second)
            throw HarnessError(HarnessError::Kind::DuplicateId, "id '" + item.id + "' already used", line_no);
        items.push_back(std::move(item));
    }
    return items;
}

std::vector<DatasetItem> load_dataset(const std::filesystem::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in)
        throw HarnessError(HarnessError::Kind::Io, "cannot read " + file.string());
    return parse_dataset(in);
}

bool normalize_and_compare(double predicted, double gold)
{
    return std::fabs(predicted - gold) <= std::max(1e-6, 1e-4 * std::fabs(gold));
}

void MethodConfig::validate() const
{
    if (mode == orch::PromptStyle::MultiTool && enabled_tools.empty())
        throw HarnessError(HarnessError::Kind::InvalidConfig, "MultiTool needs at least one tool");
    if (mode != orch::PromptStyle::MultiTool && !enabled_tools.empty())
        throw HarnessError(HarnessError::Kind::InvalidConfig,
                           std::string(orch::to_string(mode)) + " runs without tools");
    if (orch::uses_exemplars(mode) && exemplar_count == 0)
        throw HarnessError(HarnessError::Kind::InvalidConfig,
                           std::string(orch::to_string(mode)) + " needs at least one exemplar");
    if (tool_budget < 0)
        throw HarnessError(HarnessError::Kind::InvalidConfig, "tool budget must be non-negative");
}

std::string MethodConfig::tool_label() const
{
    if (enabled_tools.empty())
        return "-";
    std::string label;
    for (auto id: enabled_tools)
    {
        if (!label.empty())
            label += '+';
        label += tools::short_name(id);
    }
    return label;
}

std::string MethodConfig::method_name() const
{
    auto name = std::string(orch::to_string(mode));
    if (mode == orch::PromptStyle::MultiTool)
        name += " (" + tool_label() + ")";
    return name;
}

std::optional<orch::PromptStyle> parse_mode(std::string_view text)
{
    using orch::PromptStyle;
    for (auto style: {PromptStyle::ZeroShot, PromptStyle::ZeroShotCoT, PromptStyle::FewShot, PromptStyle::FewShotCoT,
                      PromptStyle::MultiTool})
        if (text == mode_flag(style))
            return style;
    return std::nullopt;
}

std::string_view mode_flag(orch::PromptStyle style)
{
    switch (style)
    {
        case orch::PromptStyle::ZeroShot: return "zero-shot";
        case orch::PromptStyle::ZeroShotCoT: return "zero-shot-cot";
        case orch::PromptStyle::FewShot: return "few-shot";
        case orch::PromptStyle::FewShotCoT: return "few-shot-cot";
        case orch::PromptStyle::MultiTool: return "multitool";
    }
    return "?";
}

std::vector<MethodConfig> method_matrix(std::size_t exemplar_count)
{
    using orch::PromptStyle;
    std::vector<MethodConfig> matrix;
    for (auto style: {PromptStyle::ZeroShot, PromptStyle::ZeroShotCoT, PromptStyle::FewShot, PromptStyle::FewShotCoT})
        matrix.push_back({style, {}, exemplar_count});
    const auto ids = tools::all_tools();
    // single tools, then pairs, then all three
    std::vector<std::set<tools::ToolId>> subsets;
    for (unsigned mask = 1; mask < (1u << ids.size()); ++mask)
    {
        std::set<tools::ToolId> s;
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (mask & (1u << i))
                s.insert(ids[i]);
        subsets.push_back(std::move(s));
    }
    std::stable_sort(subsets.begin(), subsets.end(), [](const auto& a, const auto& b) { return a.size() < b.size(); });
    for (auto& s: subsets)
        matrix.push_back({PromptStyle::MultiTool, std::move(s), exemplar_count});
    return matrix;
}

std::string_view to_string(ErrorCategory category)
{
    switch (category)
    {
        case ErrorCategory::IncorrectReasoning: return "IncorrectReasoning";
        case ErrorCategory::InvalidToolInput: return "InvalidToolInput";
        case ErrorCategory::IncorrectGold: return "IncorrectGold";
        case ErrorCategory::AnswerFormat: return "AnswerFormat";
    }
    return "?";
}

const std::vector<ErrorCategory>& all_categories()
{
    static const std::vector<ErrorCategory> all = {ErrorCategory::IncorrectReasoning, ErrorCategory::InvalidToolInput,
                                                   ErrorCategory::IncorrectGold, ErrorCategory::AnswerFormat};
    return all;
}

std::set<std::string> parse_overrides(std::istream& in)
{
    std::set<std::string> ids;
    std::string line;
    while (std::getline(in, line))
    {
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        auto id = trim(line);
        if (!id.empty())
            ids.insert(id);
    }
    return ids;
}

std::set<std::string> load_overrides(const std::filesystem::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in)
        throw HarnessError(HarnessError::Kind::Io, "cannot read " + file.string());
    return parse_overrides(in);
}

void categorize_errors(std::vector<EvalRecord>& records, const std::set<std::string>& incorrect_gold)
{
    for (auto& r: records)
    {
        r.error_category.reset();
        if (r.correct || r.transport_failed)
            continue;
        const auto& sol = r.solution;
        if (incorrect_gold.contains(r.id))
            r.error_category = ErrorCategory::IncorrectGold;
        else if (has_tool_input_error(sol.session))
            r.error_category = ErrorCategory::InvalidToolInput;
        else if (!sol.answer ? sol.answer_error == "NoAnswerFound"
                             : sol.answer->method == orch::ExtractedAnswer::Method::RegexFallback)
            r.error_category = ErrorCategory::AnswerFormat;
        else
            r.error_category = ErrorCategory::IncorrectReasoning;
    }
}

EvalReport run_eval(llm::Backend& backend, const MethodConfig& config, const orch::PromptBundle& bundle,
                    const std::vector<DatasetItem>& dataset, const RunOptions& options)
{
    config.validate();
    if (dataset.empty())
        throw HarnessError(HarnessError::Kind::EmptyDataset, "accuracy over zero items is undefined");

    const auto prompts = orch::uses_exemplars(config.mode) ? bundle.with_exemplar_count(config.exemplar_count) : bundle;
    const auto registry = tools::make_registry(config.enabled_tools);
    prompts.validate(registry);

    orch::SessionOptions session_options;
    session_options.style = config.mode;
    session_options.tool_budget = config.tool_budget;
    session_options.max_tokens = options.max_tokens;
    session_options.model_id = options.model_id;

    const auto started = std::chrono::steady_clock::now();
    std::vector<std::optional<EvalRecord>> slots(dataset.size());
    std::atomic<std::size_t> next = 0;
    std::atomic<std::size_t> failures = 0;
    std::atomic<bool> aborted = false;
    const auto allowed_failures = static_cast<std::size_t>(options.abort_fraction * static_cast<double>(dataset.size()));
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&] {
        while (!aborted)
        {
            auto i = next++;
            if (i >= dataset.size())
                return;
            try
            {
                slots[i] = evaluate_item(backend, registry, prompts, dataset[i], session_options);
                if (slots[i]->transport_failed && ++failures > allowed_failures)
                    aborted = true;
            }
            catch (...)
            {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                aborted = true;
            }
        }
    };

    const auto workers = std::clamp<std::size_t>(options.workers, 1, dataset.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w)
        pool.emplace_back(worker);
    worker();
    for (auto& t: pool)
        t.join();

    if (error)
        std::rethrow_exception(error);
    if (failures > allowed_failures)
        throw HarnessError(HarnessError::Kind::AbortThreshold,
                           std::to_string(failures.load()) + " of " + std::to_string(dataset.size()) +
                               " items failed at the backend");

    EvalReport report;
    report.config = config;
    report.model_id = options.model_id;
    report.items = dataset.size();
    for (auto& slot: slots)
        report.records.push_back(std::move(*slot));
    categorize_errors(report.records, options.incorrect_gold);

    for (const auto& c: all_categories())
        report.categories[c] = 0;
    for (const auto& r: report.records)
    {
        report.correct += r.correct;
        report.transport_failures += r.transport_failed;
        if (r.error_category)
            ++report.categories[*r.error_category];
        else if (!r.correct)
            ++report.uncategorized;
        const auto& s = r.solution.session;
        report.completion_calls += s.completion_calls;
        report.prompt_chars += s.prompt_chars;
        report.completion_chars += s.completion_chars;
        for (const auto& seg: s.trace)
        {
            if (const auto* t = std::get_if<orch::ToolInvocation>(&seg))
                ++report.tools[tool_key(t->call)].invocations;
            else if (const auto* f = std::get_if<orch::FallbackGeneration>(&seg))
                ++report.tools[tool_key(f->call)].fallbacks;
        }
    }
    report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.items);
    if (options.measure_time)
        report.elapsed_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

std::string report_json(const EvalReport& report, bool include_records)
{
    ordered_json j;
    j["method"] = report.config.method_name();
    j["mode"] = std::string(mode_flag(report.config.mode));
    j["tools"] = report.config.tool_label();
    j["exemplars"] = orch::uses_exemplars(report.config.mode) ? report.config.exemplar_count : 0;
    j["tool_budget"] = report.config.tool_budget;
    j["model"] = report.model_id;
    j["items"] = report.items;
    j["correct"] = report.correct;
    j["accuracy"] = report.accuracy;
    ordered_json categories;
    for (const auto& c: all_categories())
        categories[std::string(to_string(c))] = report.categories.contains(c) ? report.categories.at(c) : 0;
    j["error_categories"] = std::move(categories);
    j["uncategorized"] = report.uncategorized;
    j["transport_failures"] = report.transport_failures;
    ordered_json tools = ordered_json::object();
    for (const auto& [name, stats]: report.tools)
        tools[name] = {{"invocations", stats.invocations}, {"fallbacks", stats.fallbacks}};
    j["tool_usage"] = std::move(tools);
    j["completion_calls"] = report.completion_calls;
    j["prompt_chars"] = report.prompt_chars;
    j["completion_chars"] = report.completion_chars;
    if (report.elapsed_seconds)
        j["elapsed_seconds"] = *report.elapsed_seconds;
    if (include_records)
    {
        auto records = ordered_json::array();
        for (const auto& r: report.records)
            records.push_back(record_json(r));
        j["records"] = std::move(records);
    }
    return j.dump(2) + "\n";
}

std::string render_table(const std::vector<EvalReport>& reports)
{
    std::vector<std::vector<std::string>> rows = {{"Method", "Exemplars", "Items", "Accuracy (%)",
                                                   "IncorrectReasoning", "InvalidToolInput", "IncorrectGold",
                                                   "AnswerFormat", "Uncategorized"}};
    for (const auto& r: reports)
    {
        std::vector<std::string> row = {
            r.config.method_name(),
            orch::uses_exemplars(r.config.mode) ? std::to_string(r.config.exemplar_count) : "0",
            std::to_string(r.items),
            percent(r.accuracy),
        };
        for (const auto& c: all_categories())
            row.push_back(std::to_string(r.categories.contains(c) ? r.categories.at(c) : 0));
        row.push_back(std::to_string(r.uncategorized));
        rows.push_back(std::move(row));
    }

    std::vector<std::size_t> widths(rows.front().size(), 0);
    for (const auto& row: rows)
        for (std::size_t i = 0; i < row.size(); ++i)
            widths[i] = std::max(widths[i], row[i].size());

    std::ostringstream out;
    auto rule = [&] {
        for (std::size_t i = 0; i < widths.size(); ++i)
            out << (i ? "-+-" : "") << std::string(widths[i], '-');
        out << '\n';
    };
    for (std::size_t r = 0; r < rows.size(); ++r)
    {
        for (std::size_t i = 0; i < rows[r].size(); ++i)
        {
            if (i)
                out << " | ";
            // method column left-aligned, numbers right-aligned
            if (i == 0)
                out << rows[r][i] << std::string(widths[i] - rows[r][i].size(), ' ');
            else
                out << std::string(widths[i] - rows[r][i].size(), ' ') << rows[r][i];
        }
        out << '\n';
        if (r == 0)
            rule();
    }
    return out.str();
}

} // namespace mtc::harness
