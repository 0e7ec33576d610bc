#include "tqa/embedder.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "json.hpp"

#include "internal/binio.hpp"
#include "internal/hash.hpp"
#include "internal/http.hpp"
#include "internal/text.hpp"

namespace tqa {

using nlohmann::json;

std::string_view to_string(EmbedderProvider p) {
    switch (p) {
    case EmbedderProvider::DeterministicLocal: return "deterministic_local";
    case EmbedderProvider::RemoteHttp: return "remote_http";
    }
    return "deterministic_local";
}

EmbedderProvider embedder_provider_from_string(std::string_view s) {
    if (s == "deterministic_local") return EmbedderProvider::DeterministicLocal;
    if (s == "remote_http") return EmbedderProvider::RemoteHttp;
    throw ConfigError("unknown embedder provider: " + std::string(s));
}

EmbeddingVector deterministic_embed(std::string_view text, std::size_t dim) {
    if (dim < 2) {
        throw ConfigError("deterministic_embed requires dim >= 2, got " +
                          std::to_string(dim));
    }
    EmbeddingVector v(dim, 0.0);
    std::size_t tokens = 0;
    for (const std::string& tok : internal::tokenize(text)) {
        v[internal::fnv1a64(tok) % dim] += 1.0;
        ++tokens;
    }
    if (tokens == 0) {
        v[0] = 1.0;
        return v;
    }
    double sq = 0.0;
    for (double x : v) sq += x * x;
    double norm = std::sqrt(sq);
    for (double& x : v) x /= norm;
    return v;
}

// ---------------------------------------------------------------------------
// Disk cache
// ---------------------------------------------------------------------------

namespace {

constexpr char kCacheMagic[4] = {'T', 'Q', 'E', 'C'};
constexpr std::uint32_t kCacheVersion = 1;

std::string encode_cache_entry(std::string_view model_id,
                               const EmbeddingVector& vec) {
    internal::BinWriter w;
    w.bytes(std::string_view(kCacheMagic, sizeof kCacheMagic));
    w.u32(kCacheVersion);
    w.str(model_id);
    w.u32(static_cast<std::uint32_t>(vec.size()));
    for (double x : vec) w.f64(x);
    const std::string& body = w.data();
    internal::BinWriter out;
    out.bytes(body);
    out.u32(internal::crc32_of(body));
    return out.data();
}

// Throws CacheCorruption on any structural or checksum defect.
EmbeddingVector decode_cache_entry(std::string_view bytes,
                                   std::string_view model_id) {
    if (bytes.size() < sizeof kCacheMagic + 12) {
        throw CacheCorruption("cache entry too short");
    }
    std::string_view body = bytes.substr(0, bytes.size() - 4);
    internal::BinReader crc_reader(bytes.substr(bytes.size() - 4));
    if (crc_reader.u32() != internal::crc32_of(body)) {
        throw CacheCorruption("cache entry checksum mismatch");
    }
    try {
        internal::BinReader r(body);
        if (r.raw(sizeof kCacheMagic) !=
            std::string_view(kCacheMagic, sizeof kCacheMagic)) {
            throw CacheCorruption("cache entry magic mismatch");
        }
        if (r.u32() != kCacheVersion) {
            throw CacheCorruption("cache entry version mismatch");
        }
        if (r.str() != model_id) {
            throw CacheCorruption("cache entry written by another model");
        }
        std::uint32_t dim = r.u32();
        EmbeddingVector vec(dim);
        for (std::uint32_t i = 0; i < dim; ++i) vec[i] = r.f64();
        if (r.remaining() != 0) {
            throw CacheCorruption("cache entry has trailing bytes");
        }
        return vec;
    } catch (const ParseError& e) {
        throw CacheCorruption(std::string("cache entry malformed: ") + e.what());
    }
}

} // namespace

struct EmbeddingCache::State {
    std::filesystem::path dir;
    mutable std::mutex mu;
    CacheStats stats;
};

EmbeddingCache::EmbeddingCache(std::filesystem::path dir)
    : state_(std::make_shared<State>()) {
    state_->dir = std::move(dir);
    std::filesystem::create_directories(state_->dir);
}

std::string EmbeddingCache::key(std::string_view model_id, std::string_view text) {
    std::string input(model_id);
    input.push_back('\0');
    input += text;
    return internal::sha256_hex(input);
}

namespace {

std::filesystem::path cache_entry_path(const std::filesystem::path& dir,
                                       const std::string& key) {
    return dir / key.substr(0, 2) / (key + ".vec");
}

} // namespace

std::optional<EmbeddingVector> EmbeddingCache::get(std::string_view model_id,
                                                   std::string_view text) {
    std::filesystem::path path =
        cache_entry_path(state_->dir, key(model_id, text));
    std::string bytes;
    {
        std::error_code ec;
        if (!std::filesystem::exists(path, ec)) {
            std::lock_guard lock(state_->mu);
            ++state_->stats.misses;
            return std::nullopt;
        }
        try {
            bytes = internal::read_file_bytes(path);
        } catch (const IoError&) {
            std::lock_guard lock(state_->mu);
            ++state_->stats.misses;
            return std::nullopt;
        }
    }
    try {
        EmbeddingVector vec = decode_cache_entry(bytes, model_id);
        std::lock_guard lock(state_->mu);
        ++state_->stats.hits;
        return vec;
    } catch (const CacheCorruption&) {
        std::error_code ec;
        std::filesystem::remove(path, ec);
        std::lock_guard lock(state_->mu);
        ++state_->stats.corrupt_removed;
        ++state_->stats.misses;
        return std::nullopt;
    }
}

void EmbeddingCache::put(std::string_view model_id, std::string_view text,
                         const EmbeddingVector& vec) {
    std::filesystem::path path =
        cache_entry_path(state_->dir, key(model_id, text));
    internal::write_file_atomic(path, encode_cache_entry(model_id, vec));
    std::lock_guard lock(state_->mu);
    ++state_->stats.puts;
}

CacheStats EmbeddingCache::stats() const {
    std::lock_guard lock(state_->mu);
    return state_->stats;
}

// ---------------------------------------------------------------------------
// Embedder
// ---------------------------------------------------------------------------

struct Embedder::Impl {
    EmbedderConfig cfg;
    std::optional<EmbeddingCache> cache;
    std::atomic<std::size_t> remote_calls{0};

    explicit Impl(EmbedderConfig c) : cfg(std::move(c)) {
        if (cfg.dim < 2) {
            throw ConfigError("embedder dim must be >= 2");
        }
        if (cfg.batch_size == 0) {
            throw ConfigError("embedder batch_size must be >= 1");
        }
        if (cfg.provider == EmbedderProvider::RemoteHttp && cfg.endpoint.empty()) {
            throw ConfigError("remote embedder requires an endpoint");
        }
        if (!cfg.cache_dir.empty()) {
            cache.emplace(cfg.cache_dir);
        }
    }

    // One wire request for a contiguous batch; results written into `out` at
    // the batch's positions.
    void embed_remote_batch(const std::vector<std::string>& texts,
                            const std::vector<std::size_t>& positions,
                            std::size_t begin, std::size_t end,
                            std::vector<EmbeddingVector>& out) {
        json body;
        body["model"] = cfg.model_id;
        body["input"] = json::array();
        for (std::size_t i = begin; i < end; ++i) {
            body["input"].push_back(texts[positions[i]]);
        }
        internal::HttpPostSpec spec;
        spec.endpoint = cfg.endpoint;
        spec.path = "/v1/embeddings";
        spec.body = body.dump();
        spec.bearer = internal::bearer_from_env(cfg.api_key_env);
        spec.timeout_ms = cfg.timeout_ms;
        spec.max_retries = cfg.max_retries;
        spec.backoff_initial_ms = cfg.backoff_initial_ms;
        std::string response = internal::http_post_json(
            spec, [this] { remote_calls.fetch_add(1, std::memory_order_relaxed); });

        json doc;
        try {
            doc = json::parse(response);
        } catch (const json::parse_error& e) {
            throw MalformedServiceResponse(
                std::string("embeddings response is not JSON: ") + e.what());
        }
        if (!doc.contains("data") || !doc["data"].is_array()) {
            throw MalformedServiceResponse("embeddings response lacks data array");
        }
        const std::size_t n = end - begin;
        if (doc["data"].size() != n) {
            throw MalformedServiceResponse(
                "embeddings response count mismatch: sent " + std::to_string(n) +
                ", got " + std::to_string(doc["data"].size()));
        }
        std::vector<bool> seen(n, false);
        std::size_t position_fallback = 0;
        for (const auto& item : doc["data"]) {
            std::size_t idx = item.contains("index")
                                  ? item["index"].get<std::size_t>()
                                  : position_fallback;
            ++position_fallback;
            if (idx >= n || seen[idx]) {
                throw MalformedServiceResponse(
                    "embeddings response has bad or duplicate index");
            }
            seen[idx] = true;
            if (!item.contains("embedding") || !item["embedding"].is_array()) {
                throw MalformedServiceResponse("embeddings item lacks a vector");
            }
            EmbeddingVector vec = item["embedding"].get<EmbeddingVector>();
            if (vec.size() != cfg.dim) {
                throw DimensionMismatch(
                    "provider returned dim " + std::to_string(vec.size()) +
                    ", config says " + std::to_string(cfg.dim));
            }
            for (double x : vec) {
                if (!std::isfinite(x)) {
                    throw MalformedServiceResponse(
                        "embeddings response contains a non-finite value");
                }
            }
            out[positions[begin + idx]] = std::move(vec);
        }
    }
};

Embedder::Embedder(EmbedderConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}
Embedder::~Embedder() = default;
Embedder::Embedder(Embedder&&) noexcept = default;
Embedder& Embedder::operator=(Embedder&&) noexcept = default;

const EmbedderConfig& Embedder::config() const { return impl_->cfg; }

CacheStats Embedder::cache_stats() const {
    return impl_->cache ? impl_->cache->stats() : CacheStats{};
}

std::size_t Embedder::remote_calls() const {
    return impl_->remote_calls.load(std::memory_order_relaxed);
}

std::vector<EmbeddingVector> Embedder::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) {
        throw EmptyInputError("embed called with no texts");
    }
    for (const std::string& t : texts) {
        if (internal::trim(t).empty()) {
            throw EmptyTextError("cannot embed empty text");
        }
    }

    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::size_t> missing;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (impl_->cache) {
            if (auto hit = impl_->cache->get(impl_->cfg.model_id, texts[i])) {
                out[i] = std::move(*hit);
                continue;
            }
        }
        missing.push_back(i);
    }
    if (missing.empty()) {
        return out;
    }

    if (impl_->cfg.provider == EmbedderProvider::DeterministicLocal) {
        for (std::size_t i : missing) {
            out[i] = deterministic_embed(texts[i], impl_->cfg.dim);
        }
    } else {
        // Batches dispatched by a bounded worker pool; slot placement keeps
        // the output order independent of completion order.
        const std::size_t batch = impl_->cfg.batch_size;
        const std::size_t n_batches = (missing.size() + batch - 1) / batch;
        const std::size_t n_workers =
            std::min(std::max<std::size_t>(impl_->cfg.max_in_flight, 1), n_batches);

        std::atomic<std::size_t> next{0};
        std::atomic<bool> failed{false};
        std::exception_ptr first_error;
        std::mutex error_mu;

        auto worker = [&] {
            while (!failed.load()) {
                std::size_t b = next.fetch_add(1);
                if (b >= n_batches) break;
                std::size_t begin = b * batch;
                std::size_t end = std::min(begin + batch, missing.size());
                try {
                    impl_->embed_remote_batch(texts, missing, begin, end, out);
                } catch (...) {
                    std::lock_guard lock(error_mu);
                    if (!first_error) first_error = std::current_exception();
                    failed.store(true);
                    return;
                }
            }
        };
        std::vector<std::thread> threads;
        threads.reserve(n_workers);
        for (std::size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    if (impl_->cache) {
        for (std::size_t i : missing) {
            impl_->cache->put(impl_->cfg.model_id, texts[i], out[i]);
        }
    }
    return out;
}

EmbeddingVector Embedder::embed_one(const std::string& text) {
    return embed({text})[0];
}

std::vector<EmbeddingVector> embed_texts(const EmbedderConfig& cfg,
                                         const std::vector<std::string>& texts) {
    Embedder embedder(cfg);
    return embedder.embed(texts);
}

} // namespace tqa
