// SPDX-License-Identifier: Apache-2.0
#include <httplib.h>

#include <mtc/llm.hpp>

#include <json.hpp>

#include <cstdlib>
#include <thread>

namespace mtc::llm
{

namespace
{

using nlohmann::json;

bool looks_like_context_overflow(const std::string& body)
{
    return body.find("context_length_exceeded") != std::string::npos ||
           body.find("maximum context length") != std::string::npos;
}

bool transient_status(int status)
{
    return status == 429 || status >= 500;
}

FinishReason finish_from(const json& choice, const std::vector<std::string>& stops)
{
    FinishReason finish;
    const auto reason = choice.contains("finish_reason") && choice["finish_reason"].is_string()
                            ? choice["finish_reason"].get<std::string>()
                            : std::string();
    if (reason == "stop")
    {
        finish.kind = FinishReason::Kind::Stop;
        // Some servers report the matched sequence; otherwise only a single
        // requested stop sequence is unambiguous.
        if (choice.contains("stop_reason") && choice["stop_reason"].is_string())
            finish.stop_sequence = choice["stop_reason"].get<std::string>();
        else if (stops.size() == 1)
            finish.stop_sequence = stops.front();
        if (stops.empty())
            finish.kind = FinishReason::Kind::End;
    }
    else if (reason == "length")
    {
        finish.kind = FinishReason::Kind::Length;
    }
    else
    {
        finish.kind = FinishReason::Kind::End;
    }
    return finish;
}

} // namespace

RemoteConfig RemoteConfig::from_environment()
{
    RemoteConfig config;
    if (const char* url = std::getenv("MTC_BASE_URL"); url && *url)
        config.base_url = url;
    if (const char* key = std::getenv("MTC_API_KEY"); key && *key)
        config.api_key = key;
    return config;
}

RemoteBackend::RemoteBackend(RemoteConfig config): _config(std::move(config))
{
    if (!_config.sleep)
        _config.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (_config.max_attempts < 1)
        _config.max_attempts = 1;

    const auto& url = _config.base_url;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw LlmError(LlmError::Kind::InvalidRequest, "base URL needs a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    _scheme_host_port = url.substr(0, path_start);
    _path_prefix = path_start == std::string::npos ? std::string() : url.substr(path_start);
    while (!_path_prefix.empty() && _path_prefix.back() == '/')
        _path_prefix.pop_back();
}

CompletionResponse RemoteBackend::complete(const CompletionRequest& request)
{
    request.validate();

    json body = {
        {"model", request.model_id},
        {"prompt", request.prompt},
        {"max_tokens", request.max_tokens},
        {"temperature", request.temperature},
    };
    if (!request.stop_sequences.empty())
        body["stop"] = request.stop_sequences;
    const auto payload = body.dump();
    const auto path = _path_prefix + "/completions";

    httplib::Headers headers;
    if (!_config.api_key.empty())
        headers.emplace("Authorization", "Bearer " + _config.api_key);

    std::string last_error;
    auto backoff = _config.initial_backoff;
    for (int attempt = 1; attempt <= _config.max_attempts; ++attempt)
    {
        if (attempt > 1)
        {
            _config.sleep(backoff);
            backoff *= 2;
        }

        httplib::Client client(_scheme_host_port);
        client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(_config.timeout).count());
        client.set_read_timeout(_config.timeout);
        auto result = client.Post(path, headers, payload, "application/json");
        if (!result)
        {
            last_error = "transport error: " + httplib::to_string(result.error());
            continue;
        }
        const auto& res = *result;
        if (res.status == 200)
        {
            try
            {
                auto parsed = json::parse(res.body);
                const auto& choice = parsed.at("choices").at(0);
                CompletionResponse response;
                response.text = choice.at("text").get<std::string>();
                response.finish = finish_from(choice, request.stop_sequences);
                return response;
            }
            catch (const json::exception& e)
            {
                throw LlmError(LlmError::Kind::BackendUnavailable, std::string("malformed response: ") + e.what());
            }
        }
        if (looks_like_context_overflow(res.body))
            throw LlmError(LlmError::Kind::ContextOverflow, "prompt plus max_tokens exceeds the model window");
        last_error = "HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 200);
        if (!transient_status(res.status))
            throw LlmError(LlmError::Kind::BackendUnavailable, last_error);
    }
    throw LlmError(LlmError::Kind::BackendUnavailable,
                   last_error + " (after " + std::to_string(_config.max_attempts) + " attempts)");
}

} // namespace mtc::llm
