// SPDX-License-Identifier: Apache-2.0
#include <mtc/tools.hpp>

#include <mtc/calculator.hpp>

#include <algorithm>
#include <cctype>
#include <memory>

namespace mtc::tools
{

namespace
{

std::string_view trim(std::string_view s)
{
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos)
        return {};
    auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

bool iequals_prefix(std::string_view text, std::string_view prefix)
{
    if (text.size() < prefix.size())
        return false;
    for (std::size_t i = 0; i < prefix.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(text[i])) != std::tolower(static_cast<unsigned char>(prefix[i])))
            return false;
    return true;
}

/// Offsets at which a whitespace-separated token starts.
std::vector<std::size_t> token_starts(std::string_view s)
{
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (!std::isspace(static_cast<unsigned char>(s[i])) && (i == 0 || std::isspace(static_cast<unsigned char>(s[i - 1]))))
            starts.push_back(i);
    return starts;
}

ToolResult run_calculator(const std::vector<std::string>& input)
{
    auto line = calc::sanitize_formula(input.at(0));
    if (line.empty())
        return ToolResult::failure({ToolError::Kind::ParseFailure, "empty formula"});

    // The longest trailing span of the line that parses is the formula; prose
    // in front of it ("So the mass is 2 * 62") is ignored.
    std::optional<calc::Expression> parsed;
    std::string first_error;
    for (auto start: token_starts(line))
    {
        try
        {
            parsed = calc::parse_expression(std::string_view(line).substr(start));
            break;
        }
        catch (const calc::CalcError& e)
        {
            if (first_error.empty())
                first_error = e.what();
        }
    }
    if (!parsed)
        return ToolResult::failure({ToolError::Kind::ParseFailure, first_error});

    try
    {
        return ToolResult::success(calc::evaluate(*parsed).trace_form());
    }
    catch (const calc::CalcError& e)
    {
        return ToolResult::failure({ToolError::Kind::ExecutionFailure, e.what()});
    }
}

ToolResult run_molar_mass(const chem::ElementTable& table, const std::vector<std::string>& input)
{
    auto line = std::string(trim(input.at(0)));
    while (!line.empty() && std::string_view(":=,.?").find(line.back()) != std::string_view::npos)
        line = std::string(trim(line.substr(0, line.size() - 1)));
    if (line.empty())
        return ToolResult::failure({ToolError::Kind::ParseFailure, "empty formula"});

    // The formula is the last word on the line ("The molar mass of H2O").
    auto starts = token_starts(line);
    auto formula_text = std::string_view(line).substr(starts.back());
    try
    {
        auto formula = chem::parse_formula(formula_text, table);
        return ToolResult::success(chem::molar_mass(formula, table).render());
    }
    catch (const chem::ChemistryError& e)
    {
        return ToolResult::failure({ToolError::Kind::ParseFailure, e.what()});
    }
}

ToolResult run_reaction_predictor(const chem::ElementTable& table, const std::vector<std::string>& input)
{
    std::vector<chem::ChemicalFormula> sides[2];
    for (int side = 0; side < 2; ++side)
    {
        auto species = split_species(input.at(static_cast<std::size_t>(side)));
        if (species.empty())
            return ToolResult::failure(
                {ToolError::Kind::ParseFailure, side == 0 ? "no reactants given" : "no products given"});
        try
        {
            for (const auto& s: species)
                sides[side].push_back(chem::parse_formula(s, table));
        }
        catch (const chem::ChemistryError& e)
        {
            return ToolResult::failure({ToolError::Kind::ParseFailure, e.what()});
        }
    }
    try
    {
        auto reaction = chem::balance(std::move(sides[0]), std::move(sides[1]));
        return ToolResult::success(chem::format_equation(reaction));
    }
    catch (const chem::ChemistryError& e)
    {
        return ToolResult::failure({ToolError::Kind::ExecutionFailure, e.what()});
    }
}

std::string single_line(std::string_view output)
{
    std::string joined;
    std::size_t pos = 0;
    while (pos <= output.size())
    {
        auto end = output.find('\n', pos);
        auto line = trim(output.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
        if (!line.empty())
        {
            if (!joined.empty())
                joined += "; ";
            joined += line;
        }
        if (end == std::string_view::npos)
            break;
        pos = end + 1;
    }
    return joined;
}

} // namespace

std::string_view to_string(ToolError::Kind kind)
{
    switch (kind)
    {
        case ToolError::Kind::ParseFailure: return "ParseFailure";
        case ToolError::Kind::ExecutionFailure: return "ExecutionFailure";
        case ToolError::Kind::UnknownTool: return "UnknownTool";
        case ToolError::Kind::Disabled: return "Disabled";
    }
    return "ToolError";
}

TriggerError::TriggerError(Kind kind, const std::string& detail):
    std::runtime_error(std::string(to_string(kind)) + ": " + detail), _kind(kind)
{
}

std::string_view to_string(TriggerError::Kind kind)
{
    switch (kind)
    {
        case TriggerError::Kind::MalformedTrigger: return "MalformedTrigger";
        case TriggerError::Kind::MissingInput: return "MissingInput";
        case TriggerError::Kind::InsufficientContext: return "InsufficientContext";
    }
    return "TriggerError";
}

std::optional<Trigger> detect_trigger(std::string_view text)
{
    const auto open = text.rfind("<<");
    if (text.size() < 2 || text.substr(text.size() - 2) != ">>")
    {
        // An opening marker after the last closing one means a cut-off trigger.
        const auto close = text.rfind(">>");
        if (open != std::string_view::npos && (close == std::string_view::npos || close < open))
            throw TriggerError(TriggerError::Kind::MalformedTrigger, "'<<' without a closing '>>'");
        return std::nullopt;
    }
    if (open == std::string_view::npos || open + 2 > text.size() - 2)
        return std::nullopt;

    auto name = text.substr(open + 2, text.size() - 2 - (open + 2));
    if (name.empty() || name.find_first_of("<>\r\n") != std::string_view::npos)
        throw TriggerError(TriggerError::Kind::MalformedTrigger, "invalid tool name '" + std::string(name) + "'");
    return Trigger{std::string(name), open};
}

ToolCall extract_input(std::string_view text, std::size_t trigger_offset, const ToolSpec& spec)
{
    if (trigger_offset > text.size())
        throw TriggerError(TriggerError::Kind::MalformedTrigger, "trigger offset outside text");

    const auto line_start = trigger_offset == 0 ? 0 : [&] {
        auto nl = text.rfind('\n', trigger_offset - 1);
        return nl == std::string_view::npos ? std::size_t{0} : nl + 1;
    }();

    ToolCall call{spec.name, {}, trigger_offset};
    if (spec.input_mode == InputMode::SameLine)
    {
        auto input = trim(text.substr(line_start, trigger_offset - line_start));
        if (input.empty())
            throw TriggerError(TriggerError::Kind::MissingInput, "nothing before <<" + spec.name + ">> on its line");
        call.raw_input.emplace_back(input);
        return call;
    }

    // Two complete lines directly above the trigger's line.
    std::vector<std::string_view> above;
    auto end = line_start;
    while (above.size() < 2 && end > 0)
    {
        auto prev_end = end - 1; // the '\n' terminating the previous line
        auto nl = prev_end == 0 ? std::string_view::npos : text.rfind('\n', prev_end - 1);
        auto start = nl == std::string_view::npos ? 0 : nl + 1;
        above.push_back(text.substr(start, prev_end - start));
        end = start;
    }
    if (above.size() < 2)
        throw TriggerError(TriggerError::Kind::InsufficientContext,
                           "<<" + spec.name + ">> needs reactant and product lines above it");
    for (auto it = above.rbegin(); it != above.rend(); ++it)
    {
        auto line = trim(*it);
        if (line.empty())
            throw TriggerError(TriggerError::Kind::MissingInput, "empty input line above <<" + spec.name + ">>");
        call.raw_input.emplace_back(line);
    }
    return call;
}

ToolRegistry::ToolRegistry(std::vector<ToolSpec> enabled, std::set<std::string> disabled):
    _tools(std::move(enabled)), _disabled(std::move(disabled))
{
    std::set<std::string> seen;
    for (const auto& t: _tools)
    {
        if (t.name.empty() || t.name.find_first_of("<>\r\n") != std::string::npos)
            throw std::invalid_argument("invalid tool name '" + t.name + "'");
        if (!t.executor)
            throw std::invalid_argument("tool '" + t.name + "' has no executor");
        if (!seen.insert(t.name).second)
            throw std::invalid_argument("duplicate tool name '" + t.name + "'");
    }
    for (const auto& name: _disabled)
        if (seen.contains(name))
            throw std::invalid_argument("tool '" + name + "' is both enabled and disabled");
}

const ToolSpec* ToolRegistry::find(std::string_view name) const
{
    auto it = std::find_if(_tools.begin(), _tools.end(), [&](const ToolSpec& t) { return t.name == name; });
    return it == _tools.end() ? nullptr : &*it;
}

bool ToolRegistry::knows(std::string_view name) const
{
    return is_enabled(name) || _disabled.contains(std::string(name));
}

std::vector<std::string> ToolRegistry::enabled_names() const
{
    std::vector<std::string> names;
    for (const auto& t: _tools)
        names.push_back(t.name);
    return names;
}

ToolResult ToolRegistry::dispatch(const ToolCall& call) const
{
    const auto* spec = find(call.tool_name);
    if (!spec)
    {
        if (_disabled.contains(call.tool_name))
            return ToolResult::failure({ToolError::Kind::Disabled, call.tool_name + " is disabled for this run"});
        return ToolResult::failure({ToolError::Kind::UnknownTool, "no tool named '" + call.tool_name + "'"});
    }
    const std::size_t expected = spec->input_mode == InputMode::SameLine ? 1 : 2;
    if (call.raw_input.size() != expected)
        return ToolResult::failure({ToolError::Kind::ParseFailure, spec->name + " expects " +
                                                                       std::to_string(expected) + " input line(s)"});
    ToolResult result = [&] {
        try
        {
            return spec->executor(call.raw_input);
        }
        catch (const std::exception& e)
        {
            return ToolResult::failure({ToolError::Kind::ExecutionFailure, e.what()});
        }
    }();
    if (!result.ok())
    {
        if (result.error().detail.empty())
            return ToolResult::failure({result.error().kind, spec->name + " failed"});
        return result;
    }
    auto line = single_line(result.output());
    if (line.empty())
        return ToolResult::failure({ToolError::Kind::ExecutionFailure, spec->name + " produced no output"});
    return ToolResult::success(std::move(line));
}

std::string_view trigger_name(ToolId id)
{
    switch (id)
    {
        case ToolId::Calculator: return kCalculator;
        case ToolId::ReactionPredictor: return kReactionPredictor;
        case ToolId::MolarMassList: return kMolarMassList;
    }
    return {};
}

std::string_view short_name(ToolId id)
{
    switch (id)
    {
        case ToolId::Calculator: return "Cal";
        case ToolId::ReactionPredictor: return "Crp";
        case ToolId::MolarMassList: return "Mml";
    }
    return {};
}

std::optional<ToolId> parse_tool_id(std::string_view text)
{
    text = trim(text);
    for (auto id: all_tools())
    {
        auto s = short_name(id);
        if (text == trigger_name(id) || (text.size() == s.size() && iequals_prefix(text, s)))
            return id;
    }
    return std::nullopt;
}

std::vector<ToolId> all_tools()
{
    return {ToolId::Calculator, ToolId::ReactionPredictor, ToolId::MolarMassList};
}

ToolSpec calculator_tool()
{
    return {std::string(kCalculator), InputMode::SameLine, run_calculator};
}

ToolSpec reaction_predictor_tool(const chem::ElementTable& table)
{
    auto owned = std::make_shared<const chem::ElementTable>(table);
    return {std::string(kReactionPredictor), InputMode::PreviousTwoLines,
            [owned](const std::vector<std::string>& in) { return run_reaction_predictor(*owned, in); }};
}

ToolSpec molar_mass_tool(const chem::ElementTable& table)
{
    auto owned = std::make_shared<const chem::ElementTable>(table);
    return {std::string(kMolarMassList), InputMode::SameLine,
            [owned](const std::vector<std::string>& in) { return run_molar_mass(*owned, in); }};
}

ToolRegistry make_registry(const std::set<ToolId>& enabled, const chem::ElementTable& table)
{
    std::vector<ToolSpec> specs;
    std::set<std::string> disabled;
    for (auto id: all_tools())
    {
        if (!enabled.contains(id))
        {
            disabled.emplace(trigger_name(id));
            continue;
        }
        switch (id)
        {
            case ToolId::Calculator: specs.push_back(calculator_tool()); break;
            case ToolId::ReactionPredictor: specs.push_back(reaction_predictor_tool(table)); break;
            case ToolId::MolarMassList: specs.push_back(molar_mass_tool(table)); break;
        }
    }
    return ToolRegistry(std::move(specs), std::move(disabled));
}

std::vector<std::string> split_species(std::string_view line)
{
    line = trim(line);
    for (auto label: {std::string_view("Reactants:"), std::string_view("Products:")})
    {
        if (iequals_prefix(line, label))
        {
            line = trim(line.substr(label.size()));
            break;
        }
    }

    std::string normalized(line);
    // " and " is a separator too.
    for (std::size_t pos; (pos = normalized.find(" and ")) != std::string::npos;)
        normalized.replace(pos, 5, ",");

    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= normalized.size(); ++i)
    {
        if (i == normalized.size() || normalized[i] == ',' || normalized[i] == '+')
        {
            auto piece = trim(std::string_view(normalized).substr(start, i - start));
            if (!piece.empty())
                out.emplace_back(piece);
            start = i + 1;
        }
    }
    return out;
}

} // namespace mtc::tools
