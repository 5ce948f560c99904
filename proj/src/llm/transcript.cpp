// SPDX-License-Identifier: Apache-2.0
#include <mtc/llm.hpp>

#include <json.hpp>

#include <fstream>
#include <set>

namespace mtc::llm
{

namespace
{

constexpr std::string_view kFormat = "mtc-transcript";

using nlohmann::json;

std::string_view finish_name(FinishReason::Kind kind)
{
    switch (kind)
    {
        case FinishReason::Kind::Stop: return "stop";
        case FinishReason::Kind::Length: return "length";
        case FinishReason::Kind::End: return "end";
    }
    return "end";
}

FinishReason::Kind finish_from(const std::string& name, std::size_t line)
{
    if (name == "stop")
        return FinishReason::Kind::Stop;
    if (name == "length")
        return FinishReason::Kind::Length;
    if (name == "end")
        return FinishReason::Kind::End;
    throw LlmError(LlmError::Kind::SerializationFailure,
                   "line " + std::to_string(line) + ": unknown finish reason '" + name + "'");
}

json to_json(const TranscriptEntry& e)
{
    json response = {
        {"text", e.response.text},
        {"finish_reason", finish_name(e.response.finish.kind)},
        {"stop_sequence", e.response.finish.stop_sequence},
    };
    if (e.response.raw_output)
        response["raw"] = *e.response.raw_output;
    return {
        {"fingerprint", e.fingerprint},
        {"request",
         {
             {"prompt", e.request.prompt},
             {"stop", e.request.stop_sequences},
             {"max_tokens", e.request.max_tokens},
             {"temperature", e.request.temperature},
             {"model_id", e.request.model_id},
         }},
        {"response", std::move(response)},
    };
}

TranscriptEntry entry_from(const json& j, std::size_t line)
{
    TranscriptEntry e;
    const auto& req = j.at("request");
    e.fingerprint = j.at("fingerprint").get<std::string>();
    e.request.prompt = req.at("prompt").get<std::string>();
    e.request.stop_sequences = req.at("stop").get<std::vector<std::string>>();
    e.request.max_tokens = req.at("max_tokens").get<int>();
    e.request.temperature = req.at("temperature").get<double>();
    e.request.model_id = req.at("model_id").get<std::string>();
    const auto& resp = j.at("response");
    e.response.text = resp.at("text").get<std::string>();
    e.response.finish.kind = finish_from(resp.at("finish_reason").get<std::string>(), line);
    e.response.finish.stop_sequence = resp.at("stop_sequence").get<std::string>();
    if (resp.contains("raw"))
        e.response.raw_output = resp.at("raw").get<std::string>();
    return e;
}

} // namespace

void save_transcript(const Transcript& transcript, std::ostream& out)
{
    out << json{{"format", kFormat}, {"version", kTranscriptVersion}}.dump() << '\n';
    for (const auto& e: transcript.entries)
        out << to_json(e).dump() << '\n';
    if (!out)
        throw LlmError(LlmError::Kind::SerializationFailure, "write failed");
}

void save_transcript(const Transcript& transcript, const std::filesystem::path& file)
{
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out)
        throw LlmError(LlmError::Kind::SerializationFailure, "cannot write " + file.string());
    save_transcript(transcript, out);
}

Transcript load_transcript(std::istream& in)
{
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line))
        throw LlmError(LlmError::Kind::SerializationFailure, "missing transcript header");
    try
    {
        auto header = json::parse(line);
        if (header.at("format").get<std::string>() != kFormat)
            throw LlmError(LlmError::Kind::SerializationFailure, "not a transcript file");
        auto version = header.at("version").get<int>();
        if (version != kTranscriptVersion)
            throw LlmError(LlmError::Kind::SchemaVersionMismatch,
                           "transcript version " + std::to_string(version) + ", expected " +
                               std::to_string(kTranscriptVersion));
    }
    catch (const json::exception& e)
    {
        throw LlmError(LlmError::Kind::SerializationFailure, std::string("bad header: ") + e.what());
    }

    Transcript transcript;
    std::set<std::string> seen;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.empty())
            continue;
        TranscriptEntry entry;
        try
        {
            entry = entry_from(json::parse(line), line_no);
        }
        catch (const json::exception& e)
        {
            throw LlmError(LlmError::Kind::SerializationFailure, "line " + std::to_string(line_no) + ": " + e.what());
        }
        if (fingerprint(entry.request) != entry.fingerprint)
            throw LlmError(LlmError::Kind::SerializationFailure,
                           "line " + std::to_string(line_no) + ": fingerprint does not match request");
        if (!seen.insert(entry.fingerprint).second)
            throw LlmError(LlmError::Kind::SerializationFailure,
                           "line " + std::to_string(line_no) + ": duplicate fingerprint");
        transcript.entries.push_back(std::move(entry));
    }
    return transcript;
}

Transcript load_transcript(const std::filesystem::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in)
        throw LlmError(LlmError::Kind::SerializationFailure, "cannot read " + file.string());
    return load_transcript(in);
}

} // namespace mtc::llm
