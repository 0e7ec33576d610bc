#include "tqa/run_config.hpp"

#include <fstream>
#include <initializer_list>

#include "json.hpp"

#include "tqa/errors.hpp"

#include "internal/hash.hpp"

namespace tqa {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
        }
    }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out,
                const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("field '" + std::string(key) + "' in " + where +
                          " has the wrong type");
    }
}

std::string read_enum(const json& obj, const char* key,
                      const std::string& fallback, const std::string& where) {
    std::string s = fallback;
    read_field(obj, key, s, where);
    return s;
}

json budget_to_json(const TokenBudget& b) {
    return json{{"max_tokens", b.max_tokens},
                {"reserved_for_answer", b.reserved_for_answer},
                {"chars_per_token", b.chars_per_token}};
}

TokenBudget budget_from_json(const json& obj, const std::string& where) {
    check_keys(obj, {"max_tokens", "reserved_for_answer", "chars_per_token"},
               where);
    TokenBudget b;
    read_field(obj, "max_tokens", b.max_tokens, where);
    read_field(obj, "reserved_for_answer", b.reserved_for_answer, where);
    read_field(obj, "chars_per_token", b.chars_per_token, where);
    return b;
}

json embedder_to_json(const EmbedderConfig& e) {
    return json{{"provider", std::string(to_string(e.provider))},
                {"model_id", e.model_id},
                {"dim", e.dim},
                {"endpoint", e.endpoint},
                {"api_key_env", e.api_key_env},
                {"batch_size", e.batch_size},
                {"max_retries", e.max_retries},
                {"max_in_flight", e.max_in_flight},
                {"backoff_initial_ms", e.backoff_initial_ms},
                {"timeout_ms", e.timeout_ms},
                {"embed_topic_titles", e.embed_topic_titles},
                {"cache_dir", e.cache_dir}};
}

EmbedderConfig embedder_from_json(const json& obj, const std::string& where) {
    check_keys(obj,
               {"provider", "model_id", "dim", "endpoint", "api_key_env",
                "batch_size", "max_retries", "max_in_flight",
                "backoff_initial_ms", "timeout_ms", "embed_topic_titles",
                "cache_dir"},
               where);
    EmbedderConfig e;
    e.provider = embedder_provider_from_string(
        read_enum(obj, "provider", std::string(to_string(e.provider)), where));
    read_field(obj, "model_id", e.model_id, where);
    read_field(obj, "dim", e.dim, where);
    read_field(obj, "endpoint", e.endpoint, where);
    read_field(obj, "api_key_env", e.api_key_env, where);
    read_field(obj, "batch_size", e.batch_size, where);
    read_field(obj, "max_retries", e.max_retries, where);
    read_field(obj, "max_in_flight", e.max_in_flight, where);
    read_field(obj, "backoff_initial_ms", e.backoff_initial_ms, where);
    read_field(obj, "timeout_ms", e.timeout_ms, where);
    read_field(obj, "embed_topic_titles", e.embed_topic_titles, where);
    read_field(obj, "cache_dir", e.cache_dir, where);
    return e;
}

json model_to_json(const ModelClientConfig& m) {
    return json{{"endpoint", m.endpoint},
                {"model_id", m.model_id},
                {"temperature", m.temperature},
                {"max_new_tokens", m.max_new_tokens},
                {"timeout_ms", m.timeout_ms},
                {"max_retries", m.max_retries},
                {"backoff_initial_ms", m.backoff_initial_ms},
                {"max_in_flight", m.max_in_flight},
                {"api_style", to_string(m.api_style)},
                {"api_key_env", m.api_key_env},
                {"audit_log", m.audit_log}};
}

ModelClientConfig model_from_json(const json& obj, const std::string& where) {
    check_keys(obj,
               {"endpoint", "model_id", "temperature", "max_new_tokens",
                "timeout_ms", "max_retries", "backoff_initial_ms",
                "max_in_flight", "api_style", "api_key_env", "audit_log"},
               where);
    ModelClientConfig m;
    read_field(obj, "endpoint", m.endpoint, where);
    read_field(obj, "model_id", m.model_id, where);
    read_field(obj, "temperature", m.temperature, where);
    read_field(obj, "max_new_tokens", m.max_new_tokens, where);
    read_field(obj, "timeout_ms", m.timeout_ms, where);
    read_field(obj, "max_retries", m.max_retries, where);
    read_field(obj, "backoff_initial_ms", m.backoff_initial_ms, where);
    read_field(obj, "max_in_flight", m.max_in_flight, where);
    m.api_style = api_style_from_string(
        read_enum(obj, "api_style", to_string(m.api_style), where));
    read_field(obj, "api_key_env", m.api_key_env, where);
    read_field(obj, "audit_log", m.audit_log, where);
    return m;
}

// No "rerank" key here on purpose: the row-level EvalConfig flag is the only
// rerank switch, so a config file cannot say two contradictory things.
json retrieval_to_json(const RetrievalConfig& r) {
    return json{{"top_k", r.top_k},
                {"metric", std::string(to_string(r.metric))},
                {"rerank_model_id", r.rerank_model_id},
                {"rerank_candidates", r.rerank_candidates},
                {"rerank_endpoint", r.rerank_endpoint},
                {"rerank_api_key_env", r.rerank_api_key_env},
                {"rerank_max_retries", r.rerank_max_retries},
                {"rerank_backoff_initial_ms", r.rerank_backoff_initial_ms},
                {"rerank_timeout_ms", r.rerank_timeout_ms},
                {"rerank_fallback", r.rerank_fallback}};
}

RetrievalConfig retrieval_from_json(const json& obj, const std::string& where) {
    check_keys(obj,
               {"top_k", "metric", "rerank_model_id", "rerank_candidates",
                "rerank_endpoint", "rerank_api_key_env", "rerank_max_retries",
                "rerank_backoff_initial_ms", "rerank_timeout_ms",
                "rerank_fallback"},
               where);
    RetrievalConfig r;
    read_field(obj, "top_k", r.top_k, where);
    r.metric = metric_from_string(
        read_enum(obj, "metric", std::string(to_string(r.metric)), where));
    read_field(obj, "rerank_model_id", r.rerank_model_id, where);
    read_field(obj, "rerank_candidates", r.rerank_candidates, where);
    read_field(obj, "rerank_endpoint", r.rerank_endpoint, where);
    read_field(obj, "rerank_api_key_env", r.rerank_api_key_env, where);
    read_field(obj, "rerank_max_retries", r.rerank_max_retries, where);
    read_field(obj, "rerank_backoff_initial_ms", r.rerank_backoff_initial_ms,
               where);
    read_field(obj, "rerank_timeout_ms", r.rerank_timeout_ms, where);
    read_field(obj, "rerank_fallback", r.rerank_fallback, where);
    return r;
}

json eval_to_json(const EvalConfig& cfg) {
    return json{
        {"name", cfg.name},
        {"split", std::string(to_string(cfg.split))},
        {"context_mode", to_string(cfg.context_mode)},
        {"retrieval",
         cfg.retrieval ? retrieval_to_json(*cfg.retrieval) : json()},
        {"rerank", cfg.rerank},
        {"embedder", embedder_to_json(cfg.embedder)},
        {"model", model_to_json(cfg.model)},
        {"budget", budget_to_json(cfg.budget)},
        {"concurrency", cfg.concurrency},
        {"seed", cfg.seed},
        {"question_limit",
         cfg.question_limit ? json(*cfg.question_limit) : json()},
    };
}

EvalConfig eval_from_json(const json& obj, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    check_keys(obj,
               {"name", "split", "context_mode", "retrieval", "rerank",
                "embedder", "model", "budget", "concurrency", "seed",
                "question_limit"},
               where);
    EvalConfig cfg;
    read_field(obj, "name", cfg.name, where);
    cfg.split = split_from_string(
        read_enum(obj, "split", std::string(to_string(cfg.split)), where));
    cfg.context_mode = context_mode_from_string(
        read_enum(obj, "context_mode", to_string(cfg.context_mode), where));
    if (obj.contains("retrieval") && !obj.at("retrieval").is_null()) {
        cfg.retrieval =
            retrieval_from_json(obj.at("retrieval"), where + ".retrieval");
    }
    read_field(obj, "rerank", cfg.rerank, where);
    if (obj.contains("embedder")) {
        cfg.embedder = embedder_from_json(obj.at("embedder"), where + ".embedder");
    }
    if (obj.contains("model")) {
        cfg.model = model_from_json(obj.at("model"), where + ".model");
    }
    if (obj.contains("budget")) {
        cfg.budget = budget_from_json(obj.at("budget"), where + ".budget");
    }
    read_field(obj, "concurrency", cfg.concurrency, where);
    read_field(obj, "seed", cfg.seed, where);
    if (obj.contains("question_limit") && !obj.at("question_limit").is_null()) {
        int limit = 0;
        read_field(obj, "question_limit", limit, where);
        cfg.question_limit = limit;
    }
    return cfg;
}

json parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file " + path);
    try {
        json doc;
        in >> doc;
        return doc;
    } catch (const json::exception& e) {
        throw ParseError("config file " + path + ": " + e.what());
    }
}

// objects merge recursively, everything else is replaced by the overlay
json deep_merge(json base, const json& overlay) {
    if (!base.is_object() || !overlay.is_object()) return overlay;
    for (auto it = overlay.begin(); it != overlay.end(); ++it) {
        if (base.contains(it.key())) {
            base[it.key()] = deep_merge(base.at(it.key()), it.value());
        } else {
            base[it.key()] = it.value();
        }
    }
    return base;
}

} // namespace

std::string eval_config_to_json(const EvalConfig& cfg) {
    return eval_to_json(cfg).dump();
}

EvalConfig eval_config_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("eval config is not JSON: ") + e.what());
    }
    EvalConfig cfg = eval_from_json(doc, "eval config");
    validate(cfg);
    return cfg;
}

std::string config_hash(const EvalConfig& cfg) {
    // concurrency is an execution knob, not part of the experiment identity:
    // a run at 8 workers must hash (and therefore report) the same as at 1
    EvalConfig normalized = cfg;
    normalized.concurrency = 1;
    return internal::sha256_hex(eval_config_to_json(normalized));
}

RunSpec load_run_spec(const std::string& path) {
    json doc = parse_file(path);
    if (!doc.is_object()) throw ConfigError("run spec must be a JSON object");
    check_keys(doc, {"corpus_path", "corpus_format", "index_path", "out_dir",
                     "eval"},
               "run spec");
    if (!doc.contains("eval")) {
        throw ConfigError("run spec has no 'eval' section");
    }
    RunSpec spec;
    read_field(doc, "corpus_path", spec.corpus_path, "run spec");
    spec.corpus_format = corpus_format_from_string(read_enum(
        doc, "corpus_format", std::string(to_string(spec.corpus_format)),
        "run spec"));
    read_field(doc, "index_path", spec.index_path, "run spec");
    read_field(doc, "out_dir", spec.out_dir, "run spec");
    spec.eval = eval_from_json(doc.at("eval"), "run spec eval");
    validate(spec.eval);
    return spec;
}

AblationMatrix load_ablation_matrix(const std::string& path) {
    json doc = parse_file(path);
    if (!doc.is_object()) {
        throw ConfigError("ablation file must be a JSON object");
    }
    check_keys(doc, {"defaults", "rows"}, "ablation file");
    if (!doc.contains("rows") || !doc.at("rows").is_array() ||
        doc.at("rows").empty()) {
        throw ConfigError("ablation file needs a non-empty 'rows' array");
    }
    const json defaults =
        doc.contains("defaults") ? doc.at("defaults") : json::object();
    if (!defaults.is_object()) {
        throw ConfigError("ablation 'defaults' must be an object");
    }

    AblationMatrix matrix;
    std::size_t i = 0;
    for (const json& row : doc.at("rows")) {
        const std::string where = "ablation row " + std::to_string(i);
        if (!row.is_object()) throw ConfigError(where + " must be an object");
        EvalConfig cfg = eval_from_json(deep_merge(defaults, row), where);
        validate(cfg);
        matrix.rows.push_back(std::move(cfg));
        ++i;
    }
    return matrix;
}

} // namespace tqa
