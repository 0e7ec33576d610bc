#include "tqa/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "json.hpp"

#include "internal/http.hpp"
#include "internal/text.hpp"

namespace tqa {

using nlohmann::json;

namespace {

// Jaccard overlap of lowercase token sets; a deterministic offline stand-in
// for a relevance model.
class OverlapStub : public RerankClient {
public:
    std::vector<double> score(const std::string& query,
                              const std::vector<std::string>& documents) override {
        auto qtok = internal::tokenize(query);
        std::set<std::string> qset(qtok.begin(), qtok.end());
        std::vector<double> scores;
        scores.reserve(documents.size());
        for (const std::string& doc : documents) {
            auto dtok = internal::tokenize(doc);
            std::set<std::string> dset(dtok.begin(), dtok.end());
            std::size_t common = 0;
            for (const std::string& t : dset) common += qset.count(t);
            std::size_t unions = qset.size() + dset.size() - common;
            scores.push_back(unions == 0 ? 0.0
                                         : static_cast<double>(common) /
                                               static_cast<double>(unions));
        }
        return scores;
    }
};

// Highest score to the last candidate: output order is the input reversed.
class ReverseStub : public RerankClient {
public:
    std::vector<double> score(const std::string&,
                              const std::vector<std::string>& documents) override {
        std::vector<double> scores(documents.size());
        for (std::size_t i = 0; i < documents.size(); ++i) {
            scores[i] = static_cast<double>(i);
        }
        return scores;
    }
};

// All candidates equal: the tie rule must keep the original order.
class EqualStub : public RerankClient {
public:
    std::vector<double> score(const std::string&,
                              const std::vector<std::string>& documents) override {
        return std::vector<double>(documents.size(), 0.5);
    }
};

class HttpRerankClient : public RerankClient {
public:
    explicit HttpRerankClient(const RetrievalConfig& cfg) : cfg_(cfg) {}

    std::vector<double> score(const std::string& query,
                              const std::vector<std::string>& documents) override {
        json body;
        body["model"] = cfg_.rerank_model_id;
        body["query"] = query;
        body["documents"] = documents;

        internal::HttpPostSpec spec;
        spec.endpoint = cfg_.rerank_endpoint;
        spec.path = "/v1/rerank";
        spec.body = body.dump();
        spec.bearer = internal::bearer_from_env(cfg_.rerank_api_key_env);
        spec.timeout_ms = cfg_.rerank_timeout_ms;
        spec.max_retries = cfg_.rerank_max_retries;
        spec.backoff_initial_ms = cfg_.rerank_backoff_initial_ms;
        std::string response = internal::http_post_json(spec);

        json doc;
        try {
            doc = json::parse(response);
        } catch (const json::parse_error& e) {
            throw MalformedServiceResponse(
                std::string("rerank response is not JSON: ") + e.what());
        }
        if (!doc.contains("results") || !doc["results"].is_array()) {
            throw MalformedServiceResponse("rerank response lacks results array");
        }
        std::vector<double> scores(documents.size());
        std::vector<bool> seen(documents.size(), false);
        for (const auto& item : doc["results"]) {
            if (!item.contains("index") || !item.contains("relevance_score")) {
                throw MalformedServiceResponse(
                    "rerank result lacks index or relevance_score");
            }
            std::size_t idx = item["index"].get<std::size_t>();
            if (idx >= documents.size() || seen[idx]) {
                throw MalformedServiceResponse(
                    "rerank result has bad or duplicate index");
            }
            seen[idx] = true;
            double s = item["relevance_score"].get<double>();
            if (!std::isfinite(s)) {
                throw MalformedServiceResponse("rerank score is not finite");
            }
            scores[idx] = s;
        }
        if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
            throw MalformedServiceResponse(
                "rerank response does not cover every document");
        }
        return scores;
    }

private:
    RetrievalConfig cfg_;
};

} // namespace

std::unique_ptr<RerankClient> RerankClient::create(const RetrievalConfig& cfg) {
    const std::string& ep = cfg.rerank_endpoint;
    if (ep == "stub:overlap") return std::make_unique<OverlapStub>();
    if (ep == "stub:reverse") return std::make_unique<ReverseStub>();
    if (ep == "stub:equal") return std::make_unique<EqualStub>();
    if (ep.rfind("stub:", 0) == 0) {
        throw ConfigError("unknown rerank stub: " + ep);
    }
    if (ep.empty()) {
        throw ConfigError("rerank enabled but rerank_endpoint is empty");
    }
    return std::make_unique<HttpRerankClient>(cfg);
}

std::vector<RerankedCandidate> rerank_hits(
    const std::string& question_text,
    const std::vector<std::pair<std::string, std::string>>& candidates,
    RerankClient& client) {
    if (candidates.empty()) {
        throw EmptyInputError("rerank_hits called with no candidates");
    }
    std::vector<std::string> documents;
    documents.reserve(candidates.size());
    for (const auto& [id, text] : candidates) documents.push_back(text);

    std::vector<double> scores = client.score(question_text, documents);
    if (scores.size() != candidates.size()) {
        throw MalformedServiceResponse(
            "rerank client returned " + std::to_string(scores.size()) +
            " scores for " + std::to_string(candidates.size()) + " candidates");
    }

    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    // stable: equal relevance keeps original candidate order
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    std::vector<RerankedCandidate> out;
    out.reserve(candidates.size());
    for (std::size_t i : order) {
        out.push_back(RerankedCandidate{candidates[i].first, scores[i]});
    }
    return out;
}

RetrievedContext retrieve(const Question& q, const VectorIndex& index,
                          Embedder& embedder, const RetrievalConfig& rcfg,
                          const Dataset& ds) {
    if (index.model_id() != embedder.config().model_id) {
        throw ModelIdMismatch("index built with model '" + index.model_id() +
                              "' but embedder is '" +
                              embedder.config().model_id + "'");
    }
    if (rcfg.top_k == 0) {
        throw ConfigError("retrieval top_k must be >= 1");
    }
    if (rcfg.rerank && rcfg.rerank_candidates < rcfg.top_k) {
        throw ConfigError("rerank_candidates must be >= top_k");
    }

    RetrievedContext ctx;
    ctx.question_id = q.question_id;

    EmbeddingVector qvec = embedder.embed_one(q.stem);
    if (!rcfg.rerank) {
        ctx.hits = index.search(qvec, rcfg.top_k, rcfg.metric);
    } else {
        std::vector<SearchHit> candidates =
            index.search(qvec, rcfg.rerank_candidates, rcfg.metric);
        std::vector<std::pair<std::string, std::string>> docs;
        docs.reserve(candidates.size());
        for (const SearchHit& h : candidates) {
            docs.emplace_back(h.topic_id, ds.topic(h.topic_id).text);
        }
        try {
            auto client = RerankClient::create(rcfg);
            std::vector<RerankedCandidate> reranked =
                rerank_hits(q.stem, docs, *client);
            for (std::size_t i = 0;
                 i < std::min(rcfg.top_k, reranked.size()); ++i) {
                const std::string& tid = reranked[i].topic_id;
                auto it = std::find_if(
                    candidates.begin(), candidates.end(),
                    [&](const SearchHit& h) { return h.topic_id == tid; });
                ctx.hits.push_back(SearchHit{tid, it->lesson_id,
                                             reranked[i].relevance, i + 1});
            }
            ctx.rerank_applied = true;
        } catch (const ProviderUnavailable&) {
            if (!rcfg.rerank_fallback) throw;
            ctx.hits.assign(candidates.begin(),
                            candidates.begin() +
                                std::min(rcfg.top_k, candidates.size()));
            ctx.rerank_applied = false;
        }
    }

    ctx.in_lesson = !ctx.hits.empty() && ctx.hits.front().lesson_id == q.lesson_id;
    return ctx;
}

double in_lesson_rate(const std::vector<RetrievedContext>& contexts) {
    if (contexts.empty()) {
        throw EmptyInputError("in_lesson_rate over an empty list");
    }
    std::size_t hits = 0;
    for (const RetrievedContext& c : contexts) {
        if (c.in_lesson) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(contexts.size());
}

} // namespace tqa
