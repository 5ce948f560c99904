// SPDX-License-Identifier: Apache-2.0
#include <mtc/orchestrator.hpp>

#include <fstream>
#include <istream>
#include <ostream>

namespace mtc::orch
{

namespace
{

constexpr std::string_view kSectionMarker = "@@ ";
constexpr std::string_view kPlaceholder = "{question}";

std::string trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string render_question(const std::string& tmpl, std::string_view question)
{
    auto out = tmpl;
    auto pos = out.find(kPlaceholder);
    out.replace(pos, kPlaceholder.size(), question);
    return out;
}

[[noreturn]] void bad_bundle(const std::string& detail)
{
    throw OrchestratorError(OrchestratorError::Kind::InvalidBundle, detail);
}

} // namespace

OrchestratorError::OrchestratorError(Kind kind, const std::string& detail):
    std::runtime_error(std::string(to_string(kind)) + ": " + detail), _kind(kind)
{
}

std::string_view to_string(OrchestratorError::Kind kind)
{
    switch (kind)
    {
        case OrchestratorError::Kind::EmptyExemplarSet: return "EmptyExemplarSet";
        case OrchestratorError::Kind::EmptyQuestion: return "EmptyQuestion";
        case OrchestratorError::Kind::InvalidBundle: return "InvalidBundle";
        case OrchestratorError::Kind::NoAnswerFound: return "NoAnswerFound";
    }
    return "OrchestratorError";
}

std::string_view to_string(PromptStyle style)
{
    switch (style)
    {
        case PromptStyle::ZeroShot: return "Zero-Shot";
        case PromptStyle::ZeroShotCoT: return "Zero-Shot+CoT";
        case PromptStyle::FewShot: return "Few-Shot";
        case PromptStyle::FewShotCoT: return "Few-Shot+CoT";
        case PromptStyle::MultiTool: return "MultiTool";
    }
    return "?";
}

bool uses_exemplars(PromptStyle style)
{
    return style == PromptStyle::FewShot || style == PromptStyle::FewShotCoT || style == PromptStyle::MultiTool;
}

bool uses_triggers(PromptStyle style)
{
    return style == PromptStyle::FewShotCoT || style == PromptStyle::MultiTool;
}

PromptBundle PromptBundle::with_exemplar_count(std::size_t count) const
{
    if (count > exemplars.size())
        bad_bundle("requested " + std::to_string(count) + " exemplars, bundle has " +
                   std::to_string(exemplars.size()));
    auto copy = *this;
    copy.exemplars.resize(count);
    return copy;
}

void PromptBundle::validate(const tools::ToolRegistry& registry) const
{
    if (question_template.find(kPlaceholder) == std::string::npos)
        bad_bundle("question template lacks {question}");
    for (std::size_t i = 0; i < exemplars.size(); ++i)
        for (const auto& name: triggers_in(exemplars[i].reasoning))
            if (!registry.knows(name))
                bad_bundle("exemplar " + std::to_string(i + 1) + " uses unknown tool '" + name + "'");
}

std::vector<std::string> triggers_in(std::string_view reasoning)
{
    std::vector<std::string> names;
    std::size_t pos = 0;
    while ((pos = reasoning.find("<<", pos)) != std::string_view::npos)
    {
        auto close = reasoning.find(">>", pos + 2);
        if (close == std::string_view::npos)
            break;
        names.emplace_back(reasoning.substr(pos + 2, close - pos - 2));
        pos = close + 2;
    }
    return names;
}

std::string assemble_prompt(const PromptBundle& bundle, std::string_view question, PromptStyle style)
{
    auto q = trim(question);
    if (q.empty())
        throw OrchestratorError(OrchestratorError::Kind::EmptyQuestion, "question is blank");
    if (bundle.question_template.find(kPlaceholder) == std::string::npos)
        bad_bundle("question template lacks {question}");

    std::vector<std::string> blocks;
    const auto& instruction = uses_triggers(style) ? bundle.instruction : bundle.baseline_instruction;
    if (!instruction.empty())
        blocks.push_back(instruction);

    if (uses_exemplars(style))
    {
        if (bundle.exemplars.empty())
            throw OrchestratorError(OrchestratorError::Kind::EmptyExemplarSet,
                                    std::string(to_string(style)) + " needs at least one exemplar");
        for (const auto& ex: bundle.exemplars)
        {
            const auto& body = style == PromptStyle::FewShot ? ex.answer : ex.reasoning;
            blocks.push_back(render_question(bundle.question_template, ex.question) + " " + body);
        }
    }

    auto last = render_question(bundle.question_template, q);
    if (style == PromptStyle::ZeroShotCoT)
        last += " " + std::string(kStepByStep);
    blocks.push_back(std::move(last));

    std::string prompt;
    for (std::size_t i = 0; i < blocks.size(); ++i)
    {
        if (i)
            prompt += "\n\n";
        prompt += blocks[i];
    }
    return prompt;
}

PromptBundle parse_bundle(std::istream& in)
{
    PromptBundle bundle;
    bool template_seen = false;
    std::string* target = nullptr;
    std::vector<std::string> body;
    std::string section;
    std::size_t line_no = 0;
    std::size_t section_line = 0;

    auto finish_section = [&] {
        if (!target)
            return;
        while (!body.empty() && trim(body.back()).empty())
            body.pop_back();
        std::size_t first = 0;
        while (first < body.size() && trim(body[first]).empty())
            ++first;
        if (first == body.size())
            bad_bundle("line " + std::to_string(section_line) + ": section '" + section + "' is empty");
        std::string text;
        for (auto i = first; i < body.size(); ++i)
        {
            if (i > first)
                text += '\n';
            text += body[i];
        }
        *target = std::move(text);
        body.clear();
    };

    std::string line;
    while (std::getline(in, line))
    {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (!line.starts_with(kSectionMarker))
        {
            if (target)
                body.push_back(line);
            continue;
        }

        finish_section();
        section = trim(line.substr(kSectionMarker.size()));
        section_line = line_no;
        auto here = "line " + std::to_string(line_no) + ": ";
        auto once = [&](std::string& field) {
            if (!field.empty())
                bad_bundle(here + "section '" + section + "' repeated");
            return &field;
        };
        if (section == "instruction")
            target = once(bundle.instruction);
        else if (section == "baseline-instruction")
            target = once(bundle.baseline_instruction);
        else if (section == "question-template")
        {
            if (template_seen)
                bad_bundle(here + "section '" + section + "' repeated");
            template_seen = true;
            target = &bundle.question_template;
        }
        else if (section == "question")
        {
            bundle.exemplars.emplace_back();
            target = &bundle.exemplars.back().question;
        }
        else if (section == "reasoning" || section == "answer")
        {
            if (bundle.exemplars.empty())
                bad_bundle(here + "'" + section + "' before any question");
            auto& ex = bundle.exemplars.back();
            target = once(section == "reasoning" ? ex.reasoning : ex.answer);
        }
        else if (section == "map-sentence")
        {
            bundle.answer_map.emplace_back();
            target = &bundle.answer_map.back().sentence;
        }
        else if (section == "map-answer")
        {
            if (bundle.answer_map.empty())
                bad_bundle(here + "map-answer before any map-sentence");
            target = once(bundle.answer_map.back().answer);
        }
        else
            bad_bundle(here + "unknown section '" + section + "'");
    }
    finish_section();

    if (bundle.instruction.empty())
        bad_bundle("missing instruction section");
    if (bundle.question_template.find(kPlaceholder) == std::string::npos)
        bad_bundle("question template lacks {question}");
    for (std::size_t i = 0; i < bundle.exemplars.size(); ++i)
    {
        const auto& ex = bundle.exemplars[i];
        if (ex.reasoning.empty() || ex.answer.empty())
            bad_bundle("exemplar " + std::to_string(i + 1) + " needs question, reasoning and answer");
    }
    for (std::size_t i = 0; i < bundle.answer_map.size(); ++i)
        if (bundle.answer_map[i].answer.empty())
            bad_bundle("answer-map pair " + std::to_string(i + 1) + " lacks map-answer");
    return bundle;
}

PromptBundle load_bundle(const std::filesystem::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in)
        bad_bundle("cannot read " + file.string());
    return parse_bundle(in);
}

void write_bundle(const PromptBundle& bundle, std::ostream& out)
{
    auto section = [&](std::string_view name, const std::string& body) { out << kSectionMarker << name << '\n' << body << "\n\n"; };
    section("instruction", bundle.instruction);
    if (!bundle.baseline_instruction.empty())
        section("baseline-instruction", bundle.baseline_instruction);
    if (bundle.question_template != PromptBundle{}.question_template)
        section("question-template", bundle.question_template);
    for (const auto& ex: bundle.exemplars)
    {
        section("question", ex.question);
        section("reasoning", ex.reasoning);
        section("answer", ex.answer);
    }
    for (const auto& m: bundle.answer_map)
    {
        section("map-sentence", m.sentence);
        section("map-answer", m.answer);
    }
}

} // namespace mtc::orch
