// SPDX-License-Identifier: Apache-2.0
#include <mtc/orchestrator.hpp>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace mtc::orch
{

namespace
{

const std::vector<std::string> kTriggerStops = {">>", "\nQ:"};
const std::vector<std::string> kQuestionStop = {"\nQ:"};
const std::vector<std::string> kLineStop = {"\n"};
constexpr int kAnswerMaxTokens = 16;
constexpr int kCueMaxTokens = 32;

template <class... Fs> struct Overloaded: Fs...
{
    using Fs::operator()...;
};
template <class... Fs> Overloaded(Fs...) -> Overloaded<Fs...>;

std::string trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

bool is_digit(char c)
{
    return std::isdigit(static_cast<unsigned char>(c)) != 0;
}

bool is_alpha(char c)
{
    return std::isalpha(static_cast<unsigned char>(c)) != 0;
}

bool has_open_marker(std::string_view text)
{
    auto open = text.rfind("<<");
    if (open == std::string_view::npos)
        return false;
    auto close = text.rfind(">>");
    return close == std::string_view::npos || close < open;
}

bool halted_on_trigger(const llm::CompletionResponse& response)
{
    if (response.finish.kind != llm::FinishReason::Kind::Stop)
        return false;
    if (response.finish.stop_sequence == ">>")
        return true;
    return response.finish.stop_sequence.empty() && has_open_marker(response.text);
}

/// Backend wrapper that tallies calls and characters.
class Metered
{
  public:
    Metered(llm::Backend& backend, const SessionOptions& options): _backend(backend), _options(options) {}

    llm::CompletionResponse complete(std::string prompt, const std::vector<std::string>& stops, int max_tokens)
    {
        llm::CompletionRequest request;
        request.prompt = std::move(prompt);
        request.stop_sequences = stops;
        request.max_tokens = max_tokens;
        request.model_id = _options.model_id;
        ++calls;
        prompt_chars += request.prompt.size();
        auto response = _backend.complete(request);
        completion_chars += response.text.size();
        return response;
    }

    std::size_t calls = 0;
    std::size_t prompt_chars = 0;
    std::size_t completion_chars = 0;

  private:
    llm::Backend& _backend;
    const SessionOptions& _options;
};

struct ToolFailure
{
    tools::ToolCall call;
    std::string kind;
    std::string detail;
};

/// Runs the trigger that `trace` ends with; returns the output or why it failed.
std::variant<ToolInvocation, ToolFailure> run_trigger(const std::string& trace, const tools::ToolRegistry& registry)
{
    tools::ToolCall call;
    call.trigger_offset = trace.rfind("<<") == std::string::npos ? trace.size() : trace.rfind("<<");
    try
    {
        auto trigger = tools::detect_trigger(trace);
        if (!trigger)
            return ToolFailure{call, std::string(to_string(tools::TriggerError::Kind::MalformedTrigger)),
                               "'>>' without an opening '<<'"};
        call.tool_name = trigger->name;
        call.trigger_offset = trigger->offset;
        const auto* spec = registry.find(trigger->name);
        if (!spec)
        {
            auto result = registry.dispatch(call);
            return ToolFailure{call, std::string(to_string(result.error().kind)), result.error().detail};
        }
        call = tools::extract_input(trace, trigger->offset, *spec);
    }
    catch (const tools::TriggerError& e)
    {
        return ToolFailure{call, std::string(to_string(e.kind())), e.what()};
    }
    auto result = registry.dispatch(call);
    if (!result.ok())
        return ToolFailure{call, std::string(to_string(result.error().kind)), result.error().detail};
    return ToolInvocation{call, result.output()};
}

void record_usage(Session& session, const Metered& metered)
{
    session.completion_calls = metered.calls;
    session.prompt_chars = metered.prompt_chars;
    session.completion_chars = metered.completion_chars;
}

bool number_char_before_ok(std::string_view text, std::size_t pos)
{
    if (pos == 0)
        return true;
    char c = text[pos - 1];
    return !(is_alpha(c) || is_digit(c) || c == ')' || c == ']' || c == '.' || c == ',' || c == '_');
}

/// Matches digits with optional ",ddd" groups and an optional fraction at `pos`.
std::size_t match_number(std::string_view text, std::size_t pos)
{
    auto i = pos;
    while (i < text.size() && is_digit(text[i]))
        ++i;
    if (i == pos)
        return 0;
    while (i + 3 < text.size() && text[i] == ',' && is_digit(text[i + 1]) && is_digit(text[i + 2]) &&
           is_digit(text[i + 3]) && (i + 4 >= text.size() || !is_digit(text[i + 4])))
        i += 4;
    if (i + 1 < text.size() && text[i] == '.' && is_digit(text[i + 1]))
    {
        ++i;
        while (i < text.size() && is_digit(text[i]))
            ++i;
    }
    return i - pos;
}

std::pair<double, std::string> to_number(std::string written)
{
    std::string plain;
    for (char c: written)
        if (c != ',')
            plain += c;
    return {std::strtod(plain.c_str(), nullptr), plain};
}

} // namespace

std::string appended_text(const TraceSegment& segment)
{
    return std::visit(Overloaded{
                          [](const GeneratedText& g) { return g.text; },
                          [](const ToolInvocation& t) { return " " + t.output + "\n"; },
                          [](const FallbackGeneration& f) { return f.output; },
                      },
                      segment);
}

std::string_view to_string(SessionStatus status)
{
    switch (status)
    {
        case SessionStatus::Running: return "Running";
        case SessionStatus::Completed: return "Completed";
        case SessionStatus::BudgetExhausted: return "BudgetExhausted";
        case SessionStatus::Failed: return "Failed";
    }
    return "?";
}

std::string_view to_string(ExtractedAnswer::Method method)
{
    switch (method)
    {
        case ExtractedAnswer::Method::FewShotMap: return "FewShotMap";
        case ExtractedAnswer::Method::RegexFallback: return "RegexFallback";
        case ExtractedAnswer::Method::Direct: return "Direct";
    }
    return "?";
}

std::string Session::trace_text() const
{
    std::string out;
    for (const auto& s: trace)
        out += appended_text(s);
    return out;
}

std::size_t Session::tool_invocations() const
{
    std::size_t n = 0;
    for (const auto& s: trace)
        n += std::holds_alternative<ToolInvocation>(s);
    return n;
}

std::size_t Session::fallbacks() const
{
    std::size_t n = 0;
    for (const auto& s: trace)
        n += std::holds_alternative<FallbackGeneration>(s);
    return n;
}

Session run_session(llm::Backend& backend, const tools::ToolRegistry& registry, const PromptBundle& bundle,
                    std::string_view question, const SessionOptions& options)
{
    Session session;
    session.prompt = assemble_prompt(bundle, question, options.style);
    session.initial_budget = session.tool_budget = std::max(0, options.tool_budget);

    Metered metered(backend, options);
    std::string trace;
    const bool triggers = uses_triggers(options.style);

    try
    {
        while (session.status == SessionStatus::Running)
        {
            auto response = metered.complete(session.prompt + trace, triggers ? kTriggerStops : kQuestionStop,
                                             options.max_tokens);
            if (!triggers || !halted_on_trigger(response))
            {
                trace += response.text;
                session.trace.emplace_back(GeneratedText{response.text});
                session.status = SessionStatus::Completed;
                break;
            }

            auto text = response.text + ">>";
            trace += text;
            session.trace.emplace_back(GeneratedText{std::move(text)});
            if (session.tool_budget == 0)
            {
                session.status = SessionStatus::BudgetExhausted;
                break;
            }
            --session.tool_budget;

            auto outcome = run_trigger(trace, registry);
            if (auto* done = std::get_if<ToolInvocation>(&outcome))
            {
                trace += appended_text(*done);
                session.trace.emplace_back(std::move(*done));
                continue;
            }

            // The model writes the output line itself.
            auto& failure = std::get<ToolFailure>(outcome);
            auto cont = metered.complete(session.prompt + trace, kLineStop, options.max_tokens);
            auto output = cont.text;
            if (cont.finish.kind == llm::FinishReason::Kind::Stop)
                output += "\n";
            trace += output;
            session.trace.emplace_back(
                FallbackGeneration{std::move(failure.call), std::move(output), failure.kind, failure.detail});
        }
    }
    catch (const llm::LlmError& e)
    {
        session.status = SessionStatus::Failed;
        session.failure_reason = std::string(to_string(e.kind()));
    }
    record_usage(session, metered);
    return session;
}

std::string last_sentence(std::string_view text)
{
    std::vector<std::string> pieces;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i)
    {
        char c = text[i];
        bool end = c == '\n';
        if (c == '.' || c == '!' || c == '?')
            end = i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]));
        if (end)
        {
            pieces.push_back(trim(text.substr(start, i + 1 - start)));
            start = i + 1;
        }
    }
    pieces.push_back(trim(text.substr(start)));
    for (auto it = pieces.rbegin(); it != pieces.rend(); ++it)
        if (!it->empty())
            return *it;
    return {};
}

std::optional<std::pair<double, std::string>> parse_plain_number(std::string_view text)
{
    auto t = trim(text);
    if (!t.empty() && t.back() == '.')
        t.pop_back();
    if (t.empty())
        return std::nullopt;
    std::size_t pos = (t[0] == '-' || t[0] == '+') ? 1 : 0;
    auto len = match_number(t, pos);
    if (len == 0 || pos + len != t.size())
        return std::nullopt;
    auto result = to_number(t[0] == '+' ? t.substr(1) : t);
    if (!std::isfinite(result.first))
        return std::nullopt;
    return result;
}

std::optional<std::pair<double, std::string>> last_number(std::string_view text)
{
    std::optional<std::pair<double, std::string>> found;
    std::size_t i = 0;
    while (i < text.size())
    {
        if (!is_digit(text[i]) || !number_char_before_ok(text, i))
        {
            ++i;
            continue;
        }
        auto len = match_number(text, i);
        std::size_t begin = i;
        if (begin > 0 && text[begin - 1] == '-' && number_char_before_ok(text, begin - 1))
            --begin;
        auto value = to_number(std::string(text.substr(begin, i + len - begin)));
        if (std::isfinite(value.first))
            found = std::move(value);
        i += len;
    }
    return found;
}

std::string mapping_prompt(const std::vector<AnswerMapExample>& examples, std::string_view sentence)
{
    std::string prompt;
    for (const auto& ex: examples)
        prompt += "Sentence: " + ex.sentence + "\nAnswer: " + ex.answer + "\n\n";
    prompt += "Sentence: " + std::string(sentence) + "\nAnswer:";
    return prompt;
}

namespace
{

std::string final_generation(const Session& session)
{
    for (auto it = session.trace.rbegin(); it != session.trace.rend(); ++it)
        if (const auto* g = std::get_if<GeneratedText>(&*it))
            return g->text;
    return {};
}

ExtractedAnswer from_text(std::string_view reply, const std::string& sentence, ExtractedAnswer::Method strict)
{
    if (auto n = parse_plain_number(reply))
        return {n->first, n->second, sentence, strict};
    if (auto n = last_number(sentence))
        return {n->first, n->second, sentence, ExtractedAnswer::Method::RegexFallback};
    throw OrchestratorError(OrchestratorError::Kind::NoAnswerFound, "no number in '" + sentence + "'");
}

ExtractedAnswer extract_with(Metered& metered, const std::vector<AnswerMapExample>& examples, const Session& session)
{
    auto sentence = last_sentence(final_generation(session));
    if (sentence.empty())
        sentence = last_sentence(session.trace_text());
    if (sentence.empty())
        throw OrchestratorError(OrchestratorError::Kind::NoAnswerFound, "the model produced no text");
    if (examples.empty())
        return from_text("", sentence, ExtractedAnswer::Method::FewShotMap);
    auto reply = metered.complete(mapping_prompt(examples, sentence), kLineStop, kAnswerMaxTokens);
    return from_text(reply.text, sentence, ExtractedAnswer::Method::FewShotMap);
}

} // namespace

ExtractedAnswer extract_answer(llm::Backend& backend, const std::vector<AnswerMapExample>& examples,
                               const Session& session, const SessionOptions& options)
{
    Metered metered(backend, options);
    return extract_with(metered, examples, session);
}

Solution solve(llm::Backend& backend, const tools::ToolRegistry& registry, const PromptBundle& bundle,
               std::string_view question, const SessionOptions& options)
{
    Solution solution;
    solution.session = run_session(backend, registry, bundle, question, options);
    auto& session = solution.session;
    if (session.status != SessionStatus::Completed)
    {
        solution.answer_error = std::string(to_string(session.status));
        return solution;
    }

    Metered metered(backend, options);
    try
    {
        switch (options.style)
        {
            case PromptStyle::ZeroShot:
            case PromptStyle::FewShot: {
                auto text = session.trace_text();
                auto sentence = last_sentence(text);
                solution.answer = from_text(text, sentence, ExtractedAnswer::Method::Direct);
                break;
            }
            case PromptStyle::ZeroShotCoT: {
                auto context = session.prompt + session.trace_text();
                while (!context.empty() && std::isspace(static_cast<unsigned char>(context.back())))
                    context.pop_back();
                context += "\n" + std::string(kAnswerCue);
                auto reply = metered.complete(std::move(context), kLineStop, kCueMaxTokens);
                solution.answer = from_text(reply.text, trim(reply.text), ExtractedAnswer::Method::Direct);
                break;
            }
            case PromptStyle::FewShotCoT:
            case PromptStyle::MultiTool: solution.answer = extract_with(metered, bundle.answer_map, session); break;
        }
    }
    catch (const OrchestratorError& e)
    {
        solution.answer_error = std::string(to_string(e.kind()));
    }
    catch (const llm::LlmError& e)
    {
        solution.answer_error = solution.extraction_failure = std::string(to_string(e.kind()));
    }
    session.completion_calls += metered.calls;
    session.prompt_chars += metered.prompt_chars;
    session.completion_chars += metered.completion_chars;
    return solution;
}

std::string describe(const Session& session)
{
    std::ostringstream out;
    out << "status: " << to_string(session.status);
    if (!session.failure_reason.empty())
        out << " (" << session.failure_reason << ")";
    out << "\ntool budget: " << session.tool_budget << " of " << session.initial_budget << " left\n";
    for (const auto& segment: session.trace)
    {
        std::visit(Overloaded{
                       [&](const GeneratedText& g) { out << "[generated]\n" << g.text << "\n"; },
                       [&](const ToolInvocation& t) {
                           out << "[tool " << t.call.tool_name << "] output: " << t.output << "\n";
                       },
                       [&](const FallbackGeneration& f) {
                           out << "[fallback " << f.call.tool_name << "] " << f.error_kind << ": " << f.error_detail
                               << "\nmodel output: " << trim(f.output) << "\n";
                       },
                   },
                   segment);
    }
    return out.str();
}

} // namespace mtc::orch
