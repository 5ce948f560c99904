// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mtc/llm.hpp>
#include <mtc/tools.hpp>

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mtc::orch
{

class OrchestratorError: public std::runtime_error
{
  public:
    enum class Kind
    {
        EmptyExemplarSet,
        EmptyQuestion,
        InvalidBundle,
        NoAnswerFound,
    };

    OrchestratorError(Kind kind, const std::string& detail);

    [[nodiscard]] Kind kind() const noexcept { return _kind; }

  private:
    Kind _kind;
};

[[nodiscard]] std::string_view to_string(OrchestratorError::Kind kind);

enum class PromptStyle
{
    ZeroShot,
    ZeroShotCoT,
    FewShot,
    FewShotCoT,
    MultiTool,
};

[[nodiscard]] std::string_view to_string(PromptStyle style);
[[nodiscard]] bool uses_exemplars(PromptStyle style);
/// Styles whose generations may contain tool triggers.
[[nodiscard]] bool uses_triggers(PromptStyle style);

inline constexpr std::string_view kStepByStep = "Let's think step by step.";
inline constexpr std::string_view kAnswerCue = "Therefore, the answer (Arabic numerals) is ";

struct Exemplar
{
    std::string question;
    /// Chain of thought with triggers and their outputs inline.
    std::string reasoning;
    /// Bare answer, used by the answer-only few-shot style.
    std::string answer;

    bool operator==(const Exemplar&) const = default;
};

/// A final sentence and the number it states; drives the answer mapping pass.
struct AnswerMapExample
{
    std::string sentence;
    std::string answer;

    bool operator==(const AnswerMapExample&) const = default;
};

struct PromptBundle
{
    /// Names the available tools; used by the trigger styles.
    std::string instruction;
    /// Used by the styles without tools; may be empty.
    std::string baseline_instruction;
    std::vector<Exemplar> exemplars;
    /// "{question}" is replaced by the question text.
    std::string question_template = "Q: {question}\nA:";
    std::vector<AnswerMapExample> answer_map;

    /// First `count` exemplars; InvalidBundle if there are fewer.
    [[nodiscard]] PromptBundle with_exemplar_count(std::size_t count) const;

    /// Throws InvalidBundle if an exemplar triggers a tool the registry does not know.
    void validate(const tools::ToolRegistry& registry) const;

    bool operator==(const PromptBundle&) const = default;
};

/// Sections start with a line "@@ <name>"; names are instruction,
/// baseline-instruction, question-template, question, reasoning, answer,
/// map-sentence and map-answer. Text before the first section is ignored.
[[nodiscard]] PromptBundle parse_bundle(std::istream& in);
[[nodiscard]] PromptBundle load_bundle(const std::filesystem::path& file);
void write_bundle(const PromptBundle& bundle, std::ostream& out);

/// Trigger names used in `reasoning`, in order of appearance.
[[nodiscard]] std::vector<std::string> triggers_in(std::string_view reasoning);

[[nodiscard]] std::string assemble_prompt(const PromptBundle& bundle, std::string_view question,
                                          PromptStyle style = PromptStyle::MultiTool);

/// Model text; ends with ">>" when generation halted on a trigger.
struct GeneratedText
{
    std::string text;

    bool operator==(const GeneratedText&) const = default;
};

struct ToolInvocation
{
    tools::ToolCall call;
    std::string output;

    bool operator==(const ToolInvocation&) const = default;
};

/// The tool could not run, so the model wrote the output line itself.
struct FallbackGeneration
{
    tools::ToolCall call;
    /// Verbatim continuation text, including its line break.
    std::string output;
    /// ToolError or TriggerError kind name, e.g. "ExecutionFailure".
    std::string error_kind;
    std::string error_detail;

    /// True when the tool exists but is switched off for the run.
    [[nodiscard]] bool tool_disabled() const { return error_kind == "Disabled"; }

    bool operator==(const FallbackGeneration&) const = default;
};

using TraceSegment = std::variant<GeneratedText, ToolInvocation, FallbackGeneration>;

/// Exact text the segment contributed to the model context.
[[nodiscard]] std::string appended_text(const TraceSegment& segment);

enum class SessionStatus
{
    Running,
    Completed,
    BudgetExhausted,
    Failed,
};

[[nodiscard]] std::string_view to_string(SessionStatus status);

inline constexpr int kDefaultToolBudget = 16;

struct SessionOptions
{
    PromptStyle style = PromptStyle::MultiTool;
    int tool_budget = kDefaultToolBudget;
    int max_tokens = llm::kDefaultMaxTokens;
    std::string model_id = std::string(llm::kDefaultModel);
};

struct Session
{
    std::string prompt;
    std::vector<TraceSegment> trace;
    int initial_budget = 0;
    int tool_budget = 0;
    SessionStatus status = SessionStatus::Running;
    /// LlmError kind name when status is Failed.
    std::string failure_reason;
    std::size_t completion_calls = 0;
    std::size_t prompt_chars = 0;
    std::size_t completion_chars = 0;

    /// Concatenated segment texts (without the prompt).
    [[nodiscard]] std::string trace_text() const;
    [[nodiscard]] std::size_t tool_invocations() const;
    [[nodiscard]] std::size_t fallbacks() const;

    bool operator==(const Session&) const = default;
};

/// Generates until the model answers without a trigger, the tool budget runs
/// out or the backend fails. Backend errors end in status Failed rather than
/// an exception.
[[nodiscard]] Session run_session(llm::Backend& backend, const tools::ToolRegistry& registry, const PromptBundle& bundle,
                                  std::string_view question, const SessionOptions& options = {});

struct ExtractedAnswer
{
    enum class Method
    {
        FewShotMap,
        RegexFallback,
        /// The completion itself was the answer (answer-only styles).
        Direct,
    };

    double value = 0.0;
    /// The number as written, e.g. "10.53".
    std::string text;
    std::string source_sentence;
    Method method = Method::Direct;

    bool operator==(const ExtractedAnswer&) const = default;
};

[[nodiscard]] std::string_view to_string(ExtractedAnswer::Method method);

/// Last sentence of `text`; sentences end at '.', '!' or '?' followed by
/// whitespace or the end, and at line breaks.
[[nodiscard]] std::string last_sentence(std::string_view text);

/// Parses a bare decimal ("148", "-0.5", "1,000", "10.53."); nullopt otherwise.
[[nodiscard]] std::optional<std::pair<double, std::string>> parse_plain_number(std::string_view text);

/// Last number in `text` that is not part of a formula such as H2O or Ca(OH)2.
[[nodiscard]] std::optional<std::pair<double, std::string>> last_number(std::string_view text);

[[nodiscard]] std::string mapping_prompt(const std::vector<AnswerMapExample>& examples, std::string_view sentence);

/// Maps the last sentence of the final generation to a number with one
/// few-shot completion, falling back to last_number(). Throws NoAnswerFound;
/// backend errors propagate as LlmError.
[[nodiscard]] ExtractedAnswer extract_answer(llm::Backend& backend, const std::vector<AnswerMapExample>& examples,
                                             const Session& session, const SessionOptions& options = {});

struct Solution
{
    Session session;
    std::optional<ExtractedAnswer> answer;
    /// Why there is no answer: an OrchestratorError or LlmError kind name, or the session status.
    std::string answer_error;
    /// LlmError kind name when answer extraction hit a backend failure.
    std::string extraction_failure;
};

/// Session plus the answer step that fits the style.
[[nodiscard]] Solution solve(llm::Backend& backend, const tools::ToolRegistry& registry, const PromptBundle& bundle,
                             std::string_view question, const SessionOptions& options = {});

/// Human-readable dump of a session, one segment per block.
[[nodiscard]] std::string describe(const Session& session);

} // namespace mtc::orch
