// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mtc/orchestrator.hpp>

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtc::harness
{

class HarnessError: public std::runtime_error
{
  public:
    enum class Kind
    {
        MalformedRecord,
        DuplicateId,
        NonNumericAnswer,
        EmptyDataset,
        InvalidConfig,
        AbortThreshold,
        Io,
    };

    HarnessError(Kind kind, const std::string& detail, std::optional<std::size_t> line = std::nullopt);

    [[nodiscard]] Kind kind() const noexcept { return _kind; }
    [[nodiscard]] std::optional<std::size_t> line() const noexcept { return _line; }

  private:
    Kind _kind;
    std::optional<std::size_t> _line;
};

[[nodiscard]] std::string_view to_string(HarnessError::Kind kind);

struct DatasetItem
{
    std::string id;
    std::string question;
    double gold_answer = 0.0;
    /// The gold number as written in the dataset, e.g. "148".
    std::string gold_text;
    std::optional<std::string> gold_unit;

    bool operator==(const DatasetItem&) const = default;
};

/// One JSON object per line: {"id", "question", "answer"}. The answer is a
/// number or a string such as "148 grams"; blank lines are skipped.
[[nodiscard]] std::vector<DatasetItem> parse_dataset(std::istream& in);
[[nodiscard]] std::vector<DatasetItem> load_dataset(const std::filesystem::path& file);

/// |predicted - gold| <= max(1e-6, 1e-4 * |gold|).
[[nodiscard]] bool normalize_and_compare(double predicted, double gold);

struct MethodConfig
{
    orch::PromptStyle mode = orch::PromptStyle::MultiTool;
    std::set<tools::ToolId> enabled_tools;
    std::size_t exemplar_count = 20;
    int tool_budget = orch::kDefaultToolBudget;

    /// Throws InvalidConfig: tools only with MultiTool, which needs at least one.
    void validate() const;

    /// "Few-Shot+CoT", "MultiTool (Cal+Crp+Mml)", ...
    [[nodiscard]] std::string method_name() const;
    /// "Cal+Crp+Mml", or "-" when no tool is enabled.
    [[nodiscard]] std::string tool_label() const;

    bool operator==(const MethodConfig&) const = default;
};

/// "zero-shot", "zero-shot-cot", "few-shot", "few-shot-cot", "multitool".
[[nodiscard]] std::optional<orch::PromptStyle> parse_mode(std::string_view text);
[[nodiscard]] std::string_view mode_flag(orch::PromptStyle style);

/// The four prompting baselines followed by MultiTool with every non-empty tool subset.
[[nodiscard]] std::vector<MethodConfig> method_matrix(std::size_t exemplar_count = 20);

enum class ErrorCategory
{
    IncorrectReasoning,
    InvalidToolInput,
    IncorrectGold,
    AnswerFormat,
};

[[nodiscard]] std::string_view to_string(ErrorCategory category);
[[nodiscard]] const std::vector<ErrorCategory>& all_categories();

struct EvalRecord
{
    std::string id;
    double gold = 0.0;
    std::string gold_text;
    std::optional<double> predicted;
    std::string predicted_text;
    bool correct = false;
    /// The backend failed; such items stay uncategorized.
    bool transport_failed = false;
    std::optional<ErrorCategory> error_category;
    orch::Solution solution;
};

struct ToolStats
{
    std::size_t invocations = 0;
    std::size_t fallbacks = 0;

    bool operator==(const ToolStats&) const = default;
};

struct EvalReport
{
    MethodConfig config;
    std::string model_id;
    std::size_t items = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
    std::map<ErrorCategory, std::size_t> categories;
    std::size_t uncategorized = 0;
    std::size_t transport_failures = 0;
    std::map<std::string, ToolStats> tools;
    std::size_t completion_calls = 0;
    std::size_t prompt_chars = 0;
    std::size_t completion_chars = 0;
    std::optional<double> elapsed_seconds;
    std::vector<EvalRecord> records;
};

/// Item ids, one per line ('#' starts a comment), whose gold answer is known to be wrong.
[[nodiscard]] std::set<std::string> parse_overrides(std::istream& in);
[[nodiscard]] std::set<std::string> load_overrides(const std::filesystem::path& file);

/// Assigns a category to every incorrect record that did not fail in transport.
void categorize_errors(std::vector<EvalRecord>& records, const std::set<std::string>& incorrect_gold = {});

struct RunOptions
{
    std::size_t workers = 1;
    bool measure_time = true;
    /// Abort when more than this fraction of items fail in transport.
    double abort_fraction = 0.5;
    std::string model_id = std::string(llm::kDefaultModel);
    int max_tokens = llm::kDefaultMaxTokens;
    std::set<std::string> incorrect_gold;
};

/// Runs every item; the record order follows the dataset.
[[nodiscard]] EvalReport run_eval(llm::Backend& backend, const MethodConfig& config, const orch::PromptBundle& bundle,
                                  const std::vector<DatasetItem>& dataset, const RunOptions& options = {});

/// Pretty-printed JSON; byte-identical for identical reports.
[[nodiscard]] std::string report_json(const EvalReport& report, bool include_records = true);

/// Method/accuracy table followed by error-category counts, one row per report.
[[nodiscard]] std::string render_table(const std::vector<EvalReport>& reports);

} // namespace mtc::harness
