#include "tqa/generation.hpp"

#include <cctype>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <set>

#include "json.hpp"

#include "tqa/errors.hpp"

#include "internal/http.hpp"
#include "internal/text.hpp"

namespace tqa {

namespace {

using nlohmann::json;

void check_config(const ModelClientConfig& cfg) {
    if (cfg.endpoint.empty()) throw ConfigError("model endpoint is empty");
    if (cfg.temperature < 0.0) throw ConfigError("temperature must be >= 0");
    if (cfg.max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
    if (cfg.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (cfg.max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

// Always replies with the same text. "stub:fixed:<text>" endpoints.
class FixedStubModel : public ModelClient {
  public:
    explicit FixedStubModel(std::string reply) : reply_(std::move(reply)) {}
    ModelResponse complete(const std::string&) override {
        return ModelResponse{reply_, 0.0, std::nullopt, std::nullopt};
    }

  private:
    std::string reply_;
};

// Replies from a JSON script: the first rule whose "contains" string occurs
// in the prompt wins, otherwise "default_reply". A reply of
// "!!provider_error" simulates an outage for abort-and-resume tests.
class ScriptedStubModel : public ModelClient {
  public:
    explicit ScriptedStubModel(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open stub script " + path);
        json doc;
        try {
            in >> doc;
        } catch (const json::exception& e) {
            throw ParseError("stub script " + path + ": " + e.what());
        }
        default_reply_ = doc.value("default_reply", std::string());
        if (doc.contains("rules")) {
            if (!doc["rules"].is_array()) {
                throw ParseError("stub script " + path + ": rules must be an array");
            }
            for (const auto& rule : doc["rules"]) {
                if (!rule.contains("contains") || !rule.contains("reply")) {
                    throw ParseError("stub script " + path +
                                     ": each rule needs contains and reply");
                }
                rules_.emplace_back(rule["contains"].get<std::string>(),
                                    rule["reply"].get<std::string>());
            }
        }
    }

    ModelResponse complete(const std::string& prompt) override {
        std::string reply = default_reply_;
        for (const auto& [needle, r] : rules_) {
            if (prompt.find(needle) != std::string::npos) {
                reply = r;
                break;
            }
        }
        if (reply == "!!provider_error") {
            throw ProviderUnavailable("stub script simulated outage");
        }
        return ModelResponse{reply, 0.0, std::nullopt, std::nullopt};
    }

  private:
    std::string default_reply_;
    std::vector<std::pair<std::string, std::string>> rules_;
};

// OpenAI-compatible HTTP client for both API styles.
class HttpModelClient : public ModelClient {
  public:
    explicit HttpModelClient(ModelClientConfig cfg) : cfg_(std::move(cfg)) {}

    ModelResponse complete(const std::string& prompt) override {
        InFlightSlot slot(*this);
        const auto t0 = std::chrono::steady_clock::now();

        json body;
        std::string path;
        if (cfg_.api_style == ApiStyle::ChatCompletions) {
            path = "/v1/chat/completions";
            body = chat_body(prompt);
        } else {
            path = "/v1/completions";
            body["model"] = cfg_.model_id;
            body["prompt"] = prompt;
        }
        body["temperature"] = cfg_.temperature;
        body["max_tokens"] = cfg_.max_new_tokens;

        internal::HttpPostSpec spec;
        spec.endpoint = cfg_.endpoint;
        spec.path = path;
        spec.body = body.dump();
        spec.bearer = internal::bearer_from_env(cfg_.api_key_env);
        spec.timeout_ms = static_cast<std::size_t>(cfg_.timeout_ms);
        spec.max_retries = static_cast<std::size_t>(cfg_.max_retries);
        spec.backoff_initial_ms = cfg_.backoff_initial_ms;

        const std::string raw = internal::http_post_json(spec);
        const auto t1 = std::chrono::steady_clock::now();

        ModelResponse out = parse_response(raw);
        out.latency_ms =
            std::chrono::duration<double, std::milli>(t1 - t0).count();
        audit(body, raw);
        return out;
    }

  private:
    // Bounded in-flight requests; destructor releases the slot.
    struct InFlightSlot {
        explicit InFlightSlot(HttpModelClient& c) : client(c) {
            std::unique_lock lock(client.mu_);
            client.cv_.wait(lock, [&] {
                return client.in_flight_ < client.cfg_.max_in_flight;
            });
            ++client.in_flight_;
        }
        ~InFlightSlot() {
            {
                std::lock_guard lock(client.mu_);
                --client.in_flight_;
            }
            client.cv_.notify_one();
        }
        HttpModelClient& client;
    };

    json chat_body(const std::string& prompt) const {
        // Pull the instruction block into the system role; the rest of the
        // rendered prompt (without the [INST] framing) becomes the user turn.
        static const std::string kSysOpen = "[INST]<<SYS>>\n";
        static const std::string kSysClose = "\n<</SYS>>\n\n";
        static const std::string kInstClose = "[/INST]";

        std::string system;
        std::string user = prompt;
        if (user.rfind(kSysOpen, 0) == 0) {
            const auto close = user.find(kSysClose, kSysOpen.size());
            if (close != std::string::npos) {
                system = user.substr(kSysOpen.size(), close - kSysOpen.size());
                user = user.substr(close + kSysClose.size());
            }
        }
        if (user.size() >= kInstClose.size() &&
            user.compare(user.size() - kInstClose.size(), kInstClose.size(),
                         kInstClose) == 0) {
            user.resize(user.size() - kInstClose.size());
        }

        json messages = json::array();
        if (!system.empty()) {
            messages.push_back({{"role", "system"}, {"content", system}});
        }
        messages.push_back({{"role", "user"}, {"content", user}});
        return json{{"model", cfg_.model_id}, {"messages", messages}};
    }

    ModelResponse parse_response(const std::string& raw) const {
        json doc;
        try {
            doc = json::parse(raw);
        } catch (const json::exception& e) {
            throw MalformedServiceResponse(std::string("model response is not "
                                                       "JSON: ") +
                                           e.what());
        }
        if (!doc.contains("choices") || !doc["choices"].is_array() ||
            doc["choices"].empty()) {
            throw MalformedServiceResponse("model response has no choices");
        }
        const json& choice = doc["choices"][0];
        ModelResponse out;
        if (cfg_.api_style == ApiStyle::ChatCompletions) {
            if (!choice.contains("message") ||
                !choice["message"].contains("content") ||
                !choice["message"]["content"].is_string()) {
                throw MalformedServiceResponse(
                    "chat choice lacks message.content");
            }
            out.text = choice["message"]["content"].get<std::string>();
        } else {
            if (!choice.contains("text") || !choice["text"].is_string()) {
                throw MalformedServiceResponse("completion choice lacks text");
            }
            out.text = choice["text"].get<std::string>();
        }
        if (doc.contains("usage") && doc["usage"].is_object()) {
            TokenUsage u;
            u.prompt_tokens = doc["usage"].value("prompt_tokens", 0LL);
            u.completion_tokens = doc["usage"].value("completion_tokens", 0LL);
            u.total_tokens = doc["usage"].value("total_tokens", 0LL);
            out.usage = u;
        }
        if (doc.contains("id") && doc["id"].is_string()) {
            out.raw_id = doc["id"].get<std::string>();
        }
        return out;
    }

    void audit(const json& request, const std::string& raw_response) {
        if (cfg_.audit_log.empty()) return;
        json line{{"request", request}};
        try {
            line["response"] = json::parse(raw_response);
        } catch (const json::exception&) {
            line["response"] = raw_response;
        }
        std::lock_guard lock(audit_mu_);
        std::ofstream out(cfg_.audit_log, std::ios::app | std::ios::binary);
        if (!out) throw IoError("cannot append to audit log " + cfg_.audit_log);
        out << line.dump() << "\n";
    }

    ModelClientConfig cfg_;
    std::mutex mu_;
    std::condition_variable cv_;
    int in_flight_ = 0;
    std::mutex audit_mu_;
};

} // namespace

std::string to_string(ApiStyle style) {
    switch (style) {
        case ApiStyle::ChatCompletions: return "chat_completions";
        case ApiStyle::RawCompletion: return "raw_completion";
    }
    throw ConfigError("invalid api style value");
}

ApiStyle api_style_from_string(const std::string& s) {
    if (s == "chat_completions") return ApiStyle::ChatCompletions;
    if (s == "raw_completion") return ApiStyle::RawCompletion;
    throw ConfigError("unknown api style '" + s + "'");
}

std::string to_string(ParseStatus status) {
    switch (status) {
        case ParseStatus::ExactLabel: return "exact_label";
        case ParseStatus::LabelInText: return "label_in_text";
        case ParseStatus::TextMatch: return "text_match";
        case ParseStatus::Unparsable: return "unparsable";
    }
    throw ConfigError("invalid parse status value");
}

ParseStatus parse_status_from_string(const std::string& s) {
    if (s == "exact_label") return ParseStatus::ExactLabel;
    if (s == "label_in_text") return ParseStatus::LabelInText;
    if (s == "text_match") return ParseStatus::TextMatch;
    if (s == "unparsable") return ParseStatus::Unparsable;
    throw ConfigError("unknown parse status '" + s + "'");
}

std::unique_ptr<ModelClient> ModelClient::create(const ModelClientConfig& cfg) {
    check_config(cfg);
    static const std::string kFixed = "stub:fixed:";
    static const std::string kScript = "stub://";
    if (cfg.endpoint.rfind(kFixed, 0) == 0) {
        return std::make_unique<FixedStubModel>(cfg.endpoint.substr(kFixed.size()));
    }
    if (cfg.endpoint.rfind(kScript, 0) == 0) {
        return std::make_unique<ScriptedStubModel>(
            cfg.endpoint.substr(kScript.size()));
    }
    if (cfg.endpoint.rfind("stub:", 0) == 0) {
        throw ConfigError("unknown model stub '" + cfg.endpoint + "'");
    }
    return std::make_unique<HttpModelClient>(cfg);
}

ModelResponse generate(const ModelClientConfig& cfg,
                       const AssembledPrompt& prompt) {
    return ModelClient::create(cfg)->complete(prompt.text);
}

ParsedAnswer parse_answer(const ModelResponse& resp, const Question& q) {
    ParsedAnswer out;
    out.question_id = q.question_id;
    out.raw_text = resp.text;

    auto valid = [&](char c) -> std::optional<std::string> {
        std::string label(1, static_cast<char>(std::toupper(
                                 static_cast<unsigned char>(c))));
        if (q.find_option(label) != nullptr) return label;
        return std::nullopt;
    };

    // stage 1: the response starts with a label
    const std::string_view trimmed = internal::trim(resp.text);
    std::optional<std::string> head;
    if (trimmed.size() >= 3 && trimmed[0] == '(' && trimmed[2] == ')') {
        head = valid(trimmed[1]);
    } else if (trimmed.size() >= 2 && trimmed[1] == ')') {
        head = valid(trimmed[0]);
    } else if (!trimmed.empty() &&
               (trimmed.size() == 1 || !internal::is_alnum(trimmed[1]))) {
        head = valid(trimmed[0]);
    }
    if (head) {
        out.predicted_label = *head;
        out.parse_status = ParseStatus::ExactLabel;
        return out;
    }

    // stage 2: exactly one distinct "(X)" pattern anywhere
    std::set<std::string> seen;
    for (std::size_t i = 0; i + 2 < resp.text.size(); ++i) {
        if (resp.text[i] == '(' && resp.text[i + 2] == ')') {
            if (auto label = valid(resp.text[i + 1])) seen.insert(*label);
        }
    }
    if (seen.size() == 1) {
        out.predicted_label = *seen.begin();
        out.parse_status = ParseStatus::LabelInText;
        return out;
    }

    // stage 3: exactly one option text occurs in the response
    const std::string norm = internal::normalize_for_match(resp.text);
    std::optional<std::string> matched;
    int matches = 0;
    for (const Option& opt : q.options) {
        const std::string norm_opt = internal::normalize_for_match(opt.text);
        if (norm_opt.empty()) continue;
        if (norm.find(norm_opt) != std::string::npos) {
            ++matches;
            matched = opt.label;
        }
    }
    if (matches == 1) {
        out.predicted_label = *matched;
        out.parse_status = ParseStatus::TextMatch;
        return out;
    }

    out.parse_status = ParseStatus::Unparsable;
    return out;
}

} // namespace tqa
