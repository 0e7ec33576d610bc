#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tqa/errors.hpp"

namespace tqa {

/// Fixed-dimension embedding. Values are always finite; persisted forms use
/// little-endian float64 so round trips are bit-exact.
using EmbeddingVector = std::vector<double>;

enum class EmbedderProvider { DeterministicLocal, RemoteHttp };

std::string_view to_string(EmbedderProvider p);
EmbedderProvider embedder_provider_from_string(std::string_view s);

struct EmbedderConfig {
    EmbedderProvider provider = EmbedderProvider::DeterministicLocal;
    std::string model_id = "deterministic-local";
    std::size_t dim = 256;
    std::string endpoint;                          // RemoteHttp base URL
    std::string api_key_env = "TQA_EMBED_API_KEY"; // bearer token source
    std::size_t batch_size = 64;                   // texts per remote request
    std::size_t max_retries = 3;
    std::size_t max_in_flight = 4;                 // concurrent remote requests
    double backoff_initial_ms = 100.0;
    std::size_t timeout_ms = 30000;
    bool embed_topic_titles = false; // prefix "title\n\n" onto indexed chunks
    std::filesystem::path cache_dir; // empty disables the disk cache
};

/// Hashed bag of words: lowercase, split on non-alphanumerics, FNV-1a 64 per
/// token, bucket = hash mod dim, unit increment, then L2-normalize. A text
/// with no tokens maps to the first basis vector. Stable across hosts.
EmbeddingVector deterministic_embed(std::string_view text, std::size_t dim);

struct CacheStats {
    std::size_t hits = 0;
    std::size_t misses = 0;
    std::size_t puts = 0;
    std::size_t corrupt_removed = 0;
};

/// One file per entry under a content-addressed directory. Corrupt entries
/// (bad checksum, truncation, wrong model) are deleted, counted, and treated
/// as absent so the caller re-embeds and overwrites.
class EmbeddingCache {
public:
    explicit EmbeddingCache(std::filesystem::path dir);

    static std::string key(std::string_view model_id, std::string_view text);

    std::optional<EmbeddingVector> get(std::string_view model_id,
                                       std::string_view text);
    void put(std::string_view model_id, std::string_view text,
             const EmbeddingVector& vec);
    CacheStats stats() const;

private:
    struct State;
    std::shared_ptr<State> state_;
};

/// Provider frontend with cache-first lookup. Thread-safe; remote calls are
/// bounded by max_in_flight and retried with exponential backoff.
class Embedder {
public:
    explicit Embedder(EmbedderConfig cfg);
    ~Embedder();
    Embedder(Embedder&&) noexcept;
    Embedder& operator=(Embedder&&) noexcept;

    const EmbedderConfig& config() const;

    /// One vector per input, order-preserving. Every text must be non-empty
    /// after trimming (EmptyTextError) and the list non-empty
    /// (EmptyInputError).
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);
    EmbeddingVector embed_one(const std::string& text);

    CacheStats cache_stats() const;   // zeros when the cache is disabled
    std::size_t remote_calls() const; // HTTP requests issued so far

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Convenience wrapper constructing a one-shot Embedder.
std::vector<EmbeddingVector> embed_texts(const EmbedderConfig& cfg,
                                         const std::vector<std::string>& texts);

} // namespace tqa
