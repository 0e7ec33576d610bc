#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "tqa/corpus.hpp"
#include "tqa/embedder.hpp"
#include "tqa/errors.hpp"
#include "tqa/vectorstore.hpp"

namespace tqa {

struct RetrievalConfig {
    std::size_t top_k = 1;
    Metric metric = Metric::Dot;
    bool rerank = false;
    std::string rerank_model_id = "rerank-english-v2.0";
    std::size_t rerank_candidates = 10;
    // http(s) URL, or one of the offline stubs: "stub:overlap",
    // "stub:reverse", "stub:equal"
    std::string rerank_endpoint;
    std::string rerank_api_key_env = "TQA_RERANK_API_KEY";
    std::size_t rerank_max_retries = 3;
    double rerank_backoff_initial_ms = 100.0;
    std::size_t rerank_timeout_ms = 30000;
    // when the rerank service stays down: true → return unreranked hits with
    // rerank_applied=false, false → propagate the provider error
    bool rerank_fallback = false;
};

struct RetrievedContext {
    std::string question_id;
    std::vector<SearchHit> hits; // final rank order
    bool rerank_applied = false;
    bool in_lesson = false; // rank-1 hit's lesson equals the question's
};

/// Scores documents against a query. Implementations: HTTP client speaking a
/// Cohere-style rerank wire format, plus deterministic offline stubs.
class RerankClient {
public:
    virtual ~RerankClient() = default;

    /// One relevance score per document, same order as the input.
    virtual std::vector<double> score(const std::string& query,
                                      const std::vector<std::string>& documents) = 0;

    /// Dispatch on rerank_endpoint ("stub:..." or a URL).
    static std::unique_ptr<RerankClient> create(const RetrievalConfig& cfg);
};

struct RerankedCandidate {
    std::string topic_id;
    double relevance = 0.0;
};

/// Reorder candidates by descending service relevance; equal scores keep
/// their original relative order. The id set is never changed.
std::vector<RerankedCandidate> rerank_hits(
    const std::string& question_text,
    const std::vector<std::pair<std::string, std::string>>& candidates,
    RerankClient& client);

/// Embed the question stem, search, optionally re-rank. The index must have
/// been built with the embedder's model (ModelIdMismatch otherwise).
RetrievedContext retrieve(const Question& q, const VectorIndex& index,
                          Embedder& embedder, const RetrievalConfig& rcfg,
                          const Dataset& ds);

/// Fraction of contexts whose rank-1 hit came from the question's own lesson.
double in_lesson_rate(const std::vector<RetrievedContext>& contexts);

} // namespace tqa
