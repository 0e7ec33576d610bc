#pragma once

#include <memory>
#include <optional>
#include <string>

#include "tqa/corpus.hpp"
#include "tqa/promptgen.hpp"

namespace tqa {

// Which wire shape the endpoint expects. ChatCompletions splits the prompt
// into system and user messages; RawCompletion sends the rendered prompt
// string verbatim.
enum class ApiStyle {
    ChatCompletions,
    RawCompletion,
};

std::string to_string(ApiStyle style);
ApiStyle api_style_from_string(const std::string& s);

struct ModelClientConfig {
    // http(s) endpoint, or an offline stub:
    //   "stub:fixed:<text>"   always replies <text>
    //   "stub://<script.json>" scripted replies keyed on prompt substrings
    std::string endpoint;
    std::string model_id = "llama-2";
    double temperature = 0.0;
    int max_new_tokens = 64;
    int timeout_ms = 30000;
    int max_retries = 3;
    double backoff_initial_ms = 100.0;
    int max_in_flight = 8;
    ApiStyle api_style = ApiStyle::ChatCompletions;
    // bearer token read from this environment variable, never from config
    std::string api_key_env = "TQA_MODEL_API_KEY";
    // when set, request/response pairs are appended here as JSON lines
    std::string audit_log;
};

struct TokenUsage {
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    long long total_tokens = 0;
};

struct ModelResponse {
    std::string text; // verbatim, no trimming at this layer
    double latency_ms = 0.0;
    std::optional<TokenUsage> usage;
    std::optional<std::string> raw_id;
};

// How a response was mapped to an option label.
enum class ParseStatus {
    ExactLabel,
    LabelInText,
    TextMatch,
    Unparsable,
};

std::string to_string(ParseStatus status);
ParseStatus parse_status_from_string(const std::string& s);

struct ParsedAnswer {
    std::string question_id;
    std::optional<std::string> predicted_label; // present iff parseable
    ParseStatus parse_status = ParseStatus::Unparsable;
    std::string raw_text;
};

// A completion endpoint. Implementations are safe for concurrent complete()
// calls; the HTTP client additionally caps in-flight requests at
// config.max_in_flight.
class ModelClient {
  public:
    virtual ~ModelClient() = default;
    virtual ModelResponse complete(const std::string& prompt) = 0;

    static std::unique_ptr<ModelClient> create(const ModelClientConfig& cfg);
};

// One-shot convenience around create() + complete().
ModelResponse generate(const ModelClientConfig& cfg, const AssembledPrompt& prompt);

// Maps a free-text response onto one of the question's options.
//
// Cascade: (1) the trimmed response starts with "(X)", "X)" or a bare "X"
// at a word boundary for a valid label X -> ExactLabel; (2) exactly one
// distinct valid "(X)" pattern appears anywhere -> LabelInText; (3) exactly
// one option's normalized text occurs in the normalized response ->
// TextMatch; otherwise Unparsable. Deterministic and total; never yields a
// label outside the question's options.
ParsedAnswer parse_answer(const ModelResponse& resp, const Question& q);

} // namespace tqa
