// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace mtc::llm
{

inline constexpr int kDefaultMaxTokens = 600;
inline constexpr std::string_view kDefaultModel = "text-davinci-003";
inline constexpr std::size_t kMaxStopSequences = 4;

class LlmError: public std::runtime_error
{
  public:
    enum class Kind
    {
        InvalidRequest,
        BackendUnavailable,
        ReplayMiss,
        ContextOverflow,
        SerializationFailure,
        SchemaVersionMismatch,
    };

    LlmError(Kind kind, const std::string& detail);

    [[nodiscard]] Kind kind() const noexcept { return _kind; }

  private:
    Kind _kind;
};

[[nodiscard]] std::string_view to_string(LlmError::Kind kind);

struct CompletionRequest
{
    std::string prompt;
    std::vector<std::string> stop_sequences;
    int max_tokens = kDefaultMaxTokens;
    double temperature = 0.0;
    std::string model_id = std::string(kDefaultModel);

    /// Throws InvalidRequest on an empty prompt, max_tokens < 1, a negative
    /// temperature or more than four stop sequences.
    void validate() const;

    bool operator==(const CompletionRequest&) const = default;
};

struct FinishReason
{
    enum class Kind
    {
        Stop,
        Length,
        End,
    };

    Kind kind = Kind::End;
    /// The stop sequence that ended generation; empty when the backend did
    /// not say which one matched.
    std::string stop_sequence;

    bool operator==(const FinishReason&) const = default;
};

struct CompletionResponse
{
    /// Generated text, excluding the stop sequence.
    std::string text;
    FinishReason finish;
    /// Untruncated model output, when the backend knows it.
    std::optional<std::string> raw_output;

    bool operator==(const CompletionResponse&) const = default;
};

/// SHA-256 (hex) over prompt, stop sequences, max_tokens, temperature and model id.
[[nodiscard]] std::string fingerprint(const CompletionRequest& request);

/// Cuts `raw` at the earliest stop sequence, as a completion endpoint would.
[[nodiscard]] CompletionResponse apply_stop_sequences(const std::string& raw, const std::vector<std::string>& stops);

class Backend
{
  public:
    virtual ~Backend() = default;

    /// Must be safe to call from several threads at once.
    virtual CompletionResponse complete(const CompletionRequest& request) = 0;
};

struct TranscriptEntry
{
    std::string fingerprint;
    CompletionRequest request;
    CompletionResponse response;

    bool operator==(const TranscriptEntry&) const = default;
};

struct Transcript
{
    std::vector<TranscriptEntry> entries;

    [[nodiscard]] const TranscriptEntry* find(const std::string& fingerprint) const;

    bool operator==(const Transcript&) const = default;
};

inline constexpr int kTranscriptVersion = 1;

/// One JSON object per line; the first line is a {"format", "version"} header.
void save_transcript(const Transcript& transcript, std::ostream& out);
void save_transcript(const Transcript& transcript, const std::filesystem::path& file);
[[nodiscard]] Transcript load_transcript(std::istream& in);
[[nodiscard]] Transcript load_transcript(const std::filesystem::path& file);

/// Answers from a recorded transcript; unknown requests raise ReplayMiss.
class ReplayBackend: public Backend
{
  public:
    explicit ReplayBackend(Transcript transcript);

    CompletionResponse complete(const CompletionRequest& request) override;

  private:
    std::unordered_map<std::string, CompletionResponse> _responses;
};

/// Delegates to another backend and keeps every distinct request/response pair.
class RecordingBackend: public Backend
{
  public:
    explicit RecordingBackend(Backend& inner): _inner(inner) {}

    CompletionResponse complete(const CompletionRequest& request) override;

    [[nodiscard]] Transcript transcript() const;
    [[nodiscard]] std::size_t calls() const;

  private:
    Backend& _inner;
    mutable std::mutex _mutex;
    Transcript _transcript;
    std::unordered_map<std::string, std::size_t> _index;
    std::size_t _calls = 0;
};

/// Plays back a fixed list of raw model outputs in order, applying each
/// request's stop sequences. Useful for scripting model behaviour in tests.
class ScriptedBackend: public Backend
{
  public:
    explicit ScriptedBackend(std::vector<std::string> raw_outputs);

    CompletionResponse complete(const CompletionRequest& request) override;

    [[nodiscard]] std::size_t remaining() const;

  private:
    mutable std::mutex _mutex;
    std::deque<std::string> _pending;
};

struct RemoteConfig
{
    /// e.g. "https://api.openai.com/v1"; requests go to {base_url}/completions.
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key;
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    std::chrono::seconds timeout{60};
    /// Replaceable for tests.
    std::function<void(std::chrono::milliseconds)> sleep;

    /// MTC_BASE_URL and MTC_API_KEY, when set.
    [[nodiscard]] static RemoteConfig from_environment();
};

/// HTTP text-completion client (OpenAI-compatible /completions endpoint).
/// Transport failures, HTTP 429 and 5xx responses are retried with
/// exponential backoff; other errors surface immediately.
class RemoteBackend: public Backend
{
  public:
    explicit RemoteBackend(RemoteConfig config);

    CompletionResponse complete(const CompletionRequest& request) override;

  private:
    RemoteConfig _config;
    std::string _scheme_host_port;
    std::string _path_prefix;
};

} // namespace mtc::llm
