// SPDX-License-Identifier: Apache-2.0
#include <mtc/llm.hpp>

#include <json.hpp>
#include <openssl/evp.h>

#include <array>
#include <cstdio>

namespace mtc::llm
{

LlmError::LlmError(Kind kind, const std::string& detail):
    std::runtime_error(std::string(to_string(kind)) + ": " + detail), _kind(kind)
{
}

std::string_view to_string(LlmError::Kind kind)
{
    switch (kind)
    {
        case LlmError::Kind::InvalidRequest: return "InvalidRequest";
        case LlmError::Kind::BackendUnavailable: return "BackendUnavailable";
        case LlmError::Kind::ReplayMiss: return "ReplayMiss";
        case LlmError::Kind::ContextOverflow: return "ContextOverflow";
        case LlmError::Kind::SerializationFailure: return "SerializationFailure";
        case LlmError::Kind::SchemaVersionMismatch: return "SchemaVersionMismatch";
    }
    return "LlmError";
}

void CompletionRequest::validate() const
{
    if (prompt.empty())
        throw LlmError(LlmError::Kind::InvalidRequest, "prompt is empty");
    if (max_tokens < 1)
        throw LlmError(LlmError::Kind::InvalidRequest, "max_tokens must be at least 1");
    if (!(temperature >= 0.0))
        throw LlmError(LlmError::Kind::InvalidRequest, "temperature must be non-negative");
    if (stop_sequences.size() > kMaxStopSequences)
        throw LlmError(LlmError::Kind::InvalidRequest, "at most 4 stop sequences are allowed");
    for (const auto& s: stop_sequences)
        if (s.empty())
            throw LlmError(LlmError::Kind::InvalidRequest, "empty stop sequence");
}

std::string fingerprint(const CompletionRequest& request)
{
    const nlohmann::json canonical = {
        {"max_tokens", request.max_tokens},
        {"model_id", request.model_id},
        {"prompt", request.prompt},
        {"stop", request.stop_sequences},
        {"temperature", request.temperature},
    };
    const auto bytes = canonical.dump();

    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1)
        throw LlmError(LlmError::Kind::SerializationFailure, "SHA-256 failed");

    std::string hex;
    hex.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i)
    {
        char buf[3];
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

CompletionResponse apply_stop_sequences(const std::string& raw, const std::vector<std::string>& stops)
{
    std::size_t cut = std::string::npos;
    const std::string* matched = nullptr;
    for (const auto& s: stops)
    {
        auto pos = raw.find(s);
        if (pos != std::string::npos && (cut == std::string::npos || pos < cut))
        {
            cut = pos;
            matched = &s;
        }
    }
    CompletionResponse response;
    response.raw_output = raw;
    if (matched)
    {
        response.text = raw.substr(0, cut);
        response.finish = {FinishReason::Kind::Stop, *matched};
    }
    else
    {
        response.text = raw;
        response.finish = {FinishReason::Kind::End, {}};
    }
    return response;
}

const TranscriptEntry* Transcript::find(const std::string& fp) const
{
    for (const auto& e: entries)
        if (e.fingerprint == fp)
            return &e;
    return nullptr;
}

ReplayBackend::ReplayBackend(Transcript transcript)
{
    for (auto& e: transcript.entries)
        _responses.emplace(std::move(e.fingerprint), std::move(e.response));
}

CompletionResponse ReplayBackend::complete(const CompletionRequest& request)
{
    request.validate();
    auto fp = fingerprint(request);
    auto it = _responses.find(fp);
    if (it == _responses.end())
        throw LlmError(LlmError::Kind::ReplayMiss, "no recorded response for request " + fp.substr(0, 16));
    return it->second;
}

CompletionResponse RecordingBackend::complete(const CompletionRequest& request)
{
    auto response = _inner.complete(request);
    auto fp = fingerprint(request);
    std::lock_guard lock(_mutex);
    ++_calls;
    if (!_index.contains(fp))
    {
        _index.emplace(fp, _transcript.entries.size());
        _transcript.entries.push_back({fp, request, response});
    }
    return response;
}

Transcript RecordingBackend::transcript() const
{
    std::lock_guard lock(_mutex);
    return _transcript;
}

std::size_t RecordingBackend::calls() const
{
    std::lock_guard lock(_mutex);
    return _calls;
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> raw_outputs):
    _pending(std::make_move_iterator(raw_outputs.begin()), std::make_move_iterator(raw_outputs.end()))
{
}

CompletionResponse ScriptedBackend::complete(const CompletionRequest& request)
{
    request.validate();
    std::string raw;
    {
        std::lock_guard lock(_mutex);
        if (_pending.empty())
            throw LlmError(LlmError::Kind::BackendUnavailable, "script exhausted");
        raw = std::move(_pending.front());
        _pending.pop_front();
    }
    return apply_stop_sequences(raw, request.stop_sequences);
}

std::size_t ScriptedBackend::remaining() const
{
    std::lock_guard lock(_mutex);
    return _pending.size();
}

} // namespace mtc::llm
