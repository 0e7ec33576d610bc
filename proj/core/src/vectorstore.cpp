#include "tqa/vectorstore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "internal/binio.hpp"
#include "internal/hash.hpp"

namespace tqa {

std::string_view to_string(Metric m) {
    return m == Metric::Dot ? "dot" : "cosine";
}

Metric metric_from_string(std::string_view s) {
    if (s == "dot") return Metric::Dot;
    if (s == "cosine") return Metric::Cosine;
    throw ConfigError("unknown metric: " + std::string(s));
}

double dot(const EmbeddingVector& q, const EmbeddingVector& t) {
    if (q.size() != t.size()) {
        throw DimensionMismatch("dot: dims " + std::to_string(q.size()) + " vs " +
                                std::to_string(t.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        acc += q[i] * t[i];
    }
    return acc;
}

double l2_norm(const EmbeddingVector& v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    return std::sqrt(sq);
}

double cosine(const EmbeddingVector& q, const EmbeddingVector& t) {
    double nq = l2_norm(q);
    double nt = l2_norm(t);
    if (q.size() != t.size()) {
        throw DimensionMismatch("cosine: dims " + std::to_string(q.size()) +
                                " vs " + std::to_string(t.size()));
    }
    if (nq == 0.0 || nt == 0.0) {
        throw ZeroVectorError("cosine undefined for a zero vector");
    }
    return dot(q, t) / (nq * nt);
}

VectorIndex VectorIndex::build(std::vector<IndexEntry> items, std::string model_id) {
    if (items.empty()) {
        throw EmptyInputError("cannot build an index from zero items");
    }
    const std::size_t dim = items.front().vec.size();
    if (dim == 0) {
        throw DimensionMismatch("index entries must have positive dim");
    }
    for (const IndexEntry& e : items) {
        if (e.vec.size() != dim) {
            throw DimensionMismatch("entry " + e.topic_id + " has dim " +
                                    std::to_string(e.vec.size()) +
                                    ", index dim is " + std::to_string(dim));
        }
    }
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        return a.topic_id < b.topic_id;
    });
    for (std::size_t i = 1; i < items.size(); ++i) {
        if (items[i].topic_id == items[i - 1].topic_id) {
            throw DuplicateIdError("duplicate topic id in index: " +
                                   items[i].topic_id);
        }
    }

    VectorIndex index;
    index.model_id_ = std::move(model_id);
    index.dim_ = dim;
    index.norms_.reserve(items.size());
    for (const IndexEntry& e : items) {
        index.norms_.push_back(l2_norm(e.vec));
    }
    index.entries_ = std::move(items);
    return index;
}

std::vector<SearchHit> VectorIndex::search(const EmbeddingVector& query,
                                           std::size_t k, Metric metric) const {
    if (k == 0) {
        throw ConfigError("search requires k >= 1");
    }
    if (query.size() != dim_) {
        throw DimensionMismatch("query dim " + std::to_string(query.size()) +
                                " vs index dim " + std::to_string(dim_));
    }

    double query_norm = 0.0;
    if (metric == Metric::Cosine) {
        query_norm = l2_norm(query);
        if (query_norm == 0.0) {
            throw ZeroVectorError("cosine search with a zero query");
        }
    }

    std::vector<double> scores(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        double s = dot(query, entries_[i].vec);
        if (metric == Metric::Cosine) {
            if (norms_[i] == 0.0) {
                throw ZeroVectorError("cosine search over zero vector " +
                                      entries_[i].topic_id);
            }
            s /= query_norm * norms_[i];
        }
        scores[i] = s;
    }

    // Entries are already in ascending topic_id order, so a stable sort on
    // score alone realizes the tie rule.
    std::vector<std::size_t> order(entries_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    const std::size_t n = std::min(k, entries_.size());
    std::vector<SearchHit> hits;
    hits.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        const IndexEntry& e = entries_[order[r]];
        hits.push_back(SearchHit{e.topic_id, e.lesson_id, scores[order[r]], r + 1});
    }
    return hits;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

constexpr char kIndexMagic[8] = {'T', 'Q', 'A', 'V', 'I', 'D', 'X', '1'};
constexpr std::uint32_t kIndexVersion = 1;

} // namespace

void save_index(const VectorIndex& index, const std::filesystem::path& path) {
    internal::BinWriter w;
    w.bytes(std::string_view(kIndexMagic, sizeof kIndexMagic));
    w.u32(kIndexVersion);
    w.str(index.model_id());
    w.u32(static_cast<std::uint32_t>(index.dim()));
    w.u64(index.size());
    for (const IndexEntry& e : index.entries()) {
        w.str(e.topic_id);
        w.str(e.lesson_id);
        for (double x : e.vec) w.f64(x);
    }
    const std::string& body = w.data();
    internal::BinWriter out;
    out.bytes(body);
    out.u32(internal::crc32_of(body));
    internal::write_file_atomic(path, out.data());
}

VectorIndex load_index(const std::filesystem::path& path) {
    std::string bytes = internal::read_file_bytes(path);
    if (bytes.size() < sizeof kIndexMagic + 4) {
        throw ChecksumError("index file too short: " + path.string());
    }
    std::string_view body(bytes.data(), bytes.size() - 4);
    internal::BinReader crc_reader(
        std::string_view(bytes).substr(bytes.size() - 4));
    if (crc_reader.u32() != internal::crc32_of(body)) {
        throw ChecksumError("index file checksum mismatch: " + path.string());
    }

    try {
        internal::BinReader r(body);
        if (r.raw(sizeof kIndexMagic) !=
            std::string_view(kIndexMagic, sizeof kIndexMagic)) {
            throw FormatVersionError("not an index file: " + path.string());
        }
        std::uint32_t version = r.u32();
        if (version != kIndexVersion) {
            throw FormatVersionError("unsupported index format version " +
                                     std::to_string(version) + ": " +
                                     path.string());
        }
        std::string model_id = r.str();
        std::uint32_t dim = r.u32();
        std::uint64_t count = r.u64();
        std::vector<IndexEntry> items;
        items.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            IndexEntry e;
            e.topic_id = r.str();
            e.lesson_id = r.str();
            e.vec.resize(dim);
            for (std::uint32_t d = 0; d < dim; ++d) e.vec[d] = r.f64();
            items.push_back(std::move(e));
        }
        if (r.remaining() != 0) {
            throw FormatVersionError("index file has trailing bytes: " +
                                     path.string());
        }
        // build() re-validates the invariants on the way in
        return VectorIndex::build(std::move(items), std::move(model_id));
    } catch (const ParseError& e) {
        // checksum passed but the structure is impossible (crafted file)
        throw FormatVersionError("index file structure invalid: " +
                                 std::string(e.what()));
    }
}

} // namespace tqa
