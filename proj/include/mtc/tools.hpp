// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mtc/chemistry.hpp>

#include <cstddef>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mtc::tools
{

inline constexpr std::string_view kCalculator = "Calculator";
inline constexpr std::string_view kReactionPredictor = "Chemical reaction predictor";
inline constexpr std::string_view kMolarMassList = "Molar mass list";

/// Where a tool finds its input relative to the trigger.
enum class InputMode
{
    SameLine,
    PreviousTwoLines,
};

struct ToolError
{
    enum class Kind
    {
        ParseFailure,
        ExecutionFailure,
        UnknownTool,
        /// A known tool that is switched off for this run (ablations).
        Disabled,
    };

    Kind kind;
    std::string detail;

    bool operator==(const ToolError&) const = default;
};

[[nodiscard]] std::string_view to_string(ToolError::Kind kind);

class ToolResult
{
  public:
    static ToolResult success(std::string output) { return ToolResult(std::move(output)); }
    static ToolResult failure(ToolError error) { return ToolResult(std::move(error)); }

    [[nodiscard]] bool ok() const noexcept { return std::holds_alternative<std::string>(_value); }
    [[nodiscard]] const std::string& output() const { return std::get<std::string>(_value); }
    [[nodiscard]] const ToolError& error() const { return std::get<ToolError>(_value); }

  private:
    explicit ToolResult(std::string output): _value(std::move(output)) {}
    explicit ToolResult(ToolError error): _value(std::move(error)) {}

    std::variant<std::string, ToolError> _value;
};

struct ToolCall
{
    std::string tool_name;
    /// One line for SameLine tools, two (reactants, products) for PreviousTwoLines.
    std::vector<std::string> raw_input;
    /// Offset of "<<" in the text the call was extracted from.
    std::size_t trigger_offset = 0;

    bool operator==(const ToolCall&) const = default;
};

struct ToolSpec
{
    std::string name;
    InputMode input_mode = InputMode::SameLine;
    std::function<ToolResult(const std::vector<std::string>&)> executor;
};

class TriggerError: public std::runtime_error
{
  public:
    enum class Kind
    {
        MalformedTrigger,
        MissingInput,
        InsufficientContext,
    };

    TriggerError(Kind kind, const std::string& detail);

    [[nodiscard]] Kind kind() const noexcept { return _kind; }

  private:
    Kind _kind;
};

[[nodiscard]] std::string_view to_string(TriggerError::Kind kind);

struct Trigger
{
    std::string name;
    std::size_t offset = 0;

    bool operator==(const Trigger&) const = default;
};

/// Finds the trigger that `text` ends with ("... <<Calculator>>"). Returns
/// nullopt when the text does not end in a trigger; throws MalformedTrigger
/// for an unterminated "<<" at the end or a name containing '<', '>' or a
/// line break.
[[nodiscard]] std::optional<Trigger> detect_trigger(std::string_view text);

/// Pulls the tool input out of `text` for the trigger at `trigger_offset`.
[[nodiscard]] ToolCall extract_input(std::string_view text, std::size_t trigger_offset, const ToolSpec& spec);

/// Immutable set of enabled tools, plus the names of known tools that are
/// switched off for the run.
class ToolRegistry
{
  public:
    ToolRegistry() = default;
    explicit ToolRegistry(std::vector<ToolSpec> enabled, std::set<std::string> disabled = {});

    [[nodiscard]] const ToolSpec* find(std::string_view name) const;
    [[nodiscard]] bool is_enabled(std::string_view name) const { return find(name) != nullptr; }
    /// Enabled or disabled; an unknown name is neither.
    [[nodiscard]] bool knows(std::string_view name) const;
    [[nodiscard]] std::vector<std::string> enabled_names() const;
    [[nodiscard]] const std::set<std::string>& disabled_names() const noexcept { return _disabled; }

    /// Runs the named tool. The output is a single line: multi-line tool
    /// output is joined with "; ".
    [[nodiscard]] ToolResult dispatch(const ToolCall& call) const;

  private:
    std::vector<ToolSpec> _tools;
    std::set<std::string> _disabled;
};

/// The three built-in tools.
enum class ToolId
{
    Calculator,
    ReactionPredictor,
    MolarMassList,
};

[[nodiscard]] std::string_view trigger_name(ToolId id);
/// "Cal", "Crp", "Mml".
[[nodiscard]] std::string_view short_name(ToolId id);
/// Accepts the short names (any case) or the exact trigger names.
[[nodiscard]] std::optional<ToolId> parse_tool_id(std::string_view text);
[[nodiscard]] std::vector<ToolId> all_tools();

[[nodiscard]] ToolSpec calculator_tool();
[[nodiscard]] ToolSpec reaction_predictor_tool(const chem::ElementTable& table = chem::ElementTable::standard());
[[nodiscard]] ToolSpec molar_mass_tool(const chem::ElementTable& table = chem::ElementTable::standard());

/// Registry with `enabled` tools active and the remaining built-ins disabled.
[[nodiscard]] ToolRegistry make_registry(const std::set<ToolId>& enabled,
                                         const chem::ElementTable& table = chem::ElementTable::standard());

/// Splits one reaction-side line ("Reactants: Ca(OH)2, CO2") into species texts.
[[nodiscard]] std::vector<std::string> split_species(std::string_view line);

} // namespace mtc::tools
