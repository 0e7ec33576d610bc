// tqa-stub-server: deterministic local stand-in for the remote services the
// engine talks to. One process serves chat completions, raw completions,
// embeddings and rerank, so live-wire runs need no external account.
//
// Replies are pure functions of the request (plus the optional script file),
// which keeps end-to-end runs against this server reproducible.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"

#include "tqa/embedder.hpp"
#include "tqa/version.hpp"

#include "internal/text.hpp"

using nlohmann::json;

namespace {

struct ScriptRule {
    std::string contains;
    std::string reply;
};

struct Script {
    std::string default_reply = "(A)";
    std::vector<ScriptRule> rules;

    // first matching rule wins, same contract as the in-process stub model
    const std::string& reply_for(const std::string& prompt) const {
        for (const ScriptRule& rule : rules) {
            if (prompt.find(rule.contains) != std::string::npos) {
                return rule.reply;
            }
        }
        return default_reply;
    }
};

Script load_script(const std::string& path) {
    Script script;
    if (path.empty()) return script;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open script " + path);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    json doc = json::parse(buf.str());
    script.default_reply = doc.value("default_reply", std::string("(A)"));
    for (const json& rule : doc.value("rules", json::array())) {
        script.rules.push_back({rule.at("contains").get<std::string>(),
                                rule.at("reply").get<std::string>()});
    }
    return script;
}

void send_json(httplib::Response& res, const json& body) {
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    send_json(res, json{{"error", {{"message", message}}}});
}

// token-overlap relevance, mirroring the engine's stub:overlap reranker
double overlap_score(const std::string& query, const std::string& document) {
    std::vector<std::string> q = tqa::internal::tokenize(query);
    std::vector<std::string> d = tqa::internal::tokenize(document);
    if (q.empty() || d.empty()) return 0.0;
    std::size_t shared = 0;
    for (const std::string& token : q) {
        if (std::find(d.begin(), d.end(), token) != d.end()) ++shared;
    }
    return static_cast<double>(shared) / static_cast<double>(q.size());
}

std::string messages_to_prompt(const json& messages) {
    std::string prompt;
    for (const json& m : messages) {
        if (!prompt.empty()) prompt += "\n";
        prompt += m.value("content", std::string());
    }
    return prompt;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic chat/embeddings/rerank stub server"};
    app.set_version_flag("--version", std::string(tqa::kEngineVersion));
    std::string host = "127.0.0.1";
    int port = 8700;
    std::string script_path;
    std::size_t dim = 256;
    app.add_option("--host", host, "bind address");
    app.add_option("--port", port, "bind port (0 picks a free one)");
    app.add_option("--script", script_path,
                   "reply script: {\"default_reply\", \"rules\": "
                   "[{\"contains\", \"reply\"}]}");
    app.add_option("--dim", dim, "embedding dimension served");
    CLI11_PARSE(app, argc, argv);

    Script script;
    try {
        script = load_script(script_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    httplib::Server server;

    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("ok", "text/plain");
    });

    server.Post("/v1/chat/completions", [&](const httplib::Request& req,
                                            httplib::Response& res) {
        json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.contains("messages")) {
            return send_error(res, 400, "body needs a messages array");
        }
        const std::string prompt = messages_to_prompt(body["messages"]);
        json reply = {
            {"id", "stub-chat-1"},
            {"object", "chat.completion"},
            {"model", body.value("model", std::string("stub"))},
            {"choices",
             json::array({{{"index", 0},
                           {"message", {{"role", "assistant"},
                                        {"content", script.reply_for(prompt)}}},
                           {"finish_reason", "stop"}}})},
            {"usage",
             {{"prompt_tokens", static_cast<long long>(prompt.size() / 4)},
              {"completion_tokens", 8},
              {"total_tokens", static_cast<long long>(prompt.size() / 4) + 8}}}};
        send_json(res, reply);
    });

    server.Post("/v1/completions", [&](const httplib::Request& req,
                                       httplib::Response& res) {
        json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.contains("prompt")) {
            return send_error(res, 400, "body needs a prompt");
        }
        const std::string prompt = body["prompt"].get<std::string>();
        json reply = {{"id", "stub-completion-1"},
                      {"object", "text_completion"},
                      {"model", body.value("model", std::string("stub"))},
                      {"choices", json::array({{{"index", 0},
                                                {"text", script.reply_for(prompt)},
                                                {"finish_reason", "stop"}}})}};
        send_json(res, reply);
    });

    server.Post("/v1/embeddings", [&](const httplib::Request& req,
                                      httplib::Response& res) {
        json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.contains("input")) {
            return send_error(res, 400, "body needs an input array");
        }
        json input = body["input"];
        if (input.is_string()) input = json::array({input});
        json data = json::array();
        int i = 0;
        for (const json& text : input) {
            if (!text.is_string()) {
                return send_error(res, 400, "input entries must be strings");
            }
            tqa::EmbeddingVector vec =
                tqa::deterministic_embed(text.get<std::string>(), dim);
            data.push_back({{"object", "embedding"},
                            {"index", i++},
                            {"embedding", vec}});
        }
        send_json(res, json{{"object", "list"},
                            {"model", body.value("model", std::string("stub"))},
                            {"data", data}});
    });

    server.Post("/v1/rerank", [&](const httplib::Request& req,
                                  httplib::Response& res) {
        json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.contains("query") ||
            !body.contains("documents")) {
            return send_error(res, 400, "body needs query and documents");
        }
        const std::string query = body["query"].get<std::string>();
        json results = json::array();
        int i = 0;
        for (const json& doc : body["documents"]) {
            results.push_back(
                {{"index", i++},
                 {"relevance_score", overlap_score(query, doc.get<std::string>())}});
        }
        send_json(res, json{{"results", results}});
    });

    if (port == 0) {
        port = server.bind_to_any_port(host);
        std::cout << "listening on http://" << host << ":" << port << "\n"
                  << std::flush;
        return server.listen_after_bind() ? 0 : 1;
    }
    std::cout << "listening on http://" << host << ":" << port << "\n"
              << std::flush;
    return server.listen(host, port) ? 0 : 1;
}
