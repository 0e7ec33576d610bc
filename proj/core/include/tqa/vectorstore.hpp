#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tqa/embedder.hpp"
#include "tqa/errors.hpp"

namespace tqa {

enum class Metric { Dot, Cosine };

std::string_view to_string(Metric m);
Metric metric_from_string(std::string_view s);

/// Similarity of a query against a stored chunk. Accumulated in double
/// precision regardless of how the vectors were produced.
double dot(const EmbeddingVector& q, const EmbeddingVector& t);
double l2_norm(const EmbeddingVector& v);
double cosine(const EmbeddingVector& q, const EmbeddingVector& t);

struct IndexEntry {
    std::string topic_id;
    std::string lesson_id;
    EmbeddingVector vec;
};

struct SearchHit {
    std::string topic_id;
    std::string lesson_id;
    double score = 0.0;
    std::size_t rank = 0; // 1-based, consecutive
};

/// Exact full-scan index. Immutable after build; concurrent searches are
/// safe. Entries are kept sorted by topic_id, which doubles as the score
/// tie-break order.
class VectorIndex {
public:
    VectorIndex() = default;

    static VectorIndex build(std::vector<IndexEntry> items, std::string model_id);

    const std::string& model_id() const { return model_id_; }
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<IndexEntry>& entries() const { return entries_; }

    /// Top-k by descending score, ties broken by ascending topic_id; k is
    /// clamped to the index size. Exact: every entry is scored.
    std::vector<SearchHit> search(const EmbeddingVector& query, std::size_t k,
                                  Metric metric = Metric::Dot) const;

private:
    std::string model_id_;
    std::size_t dim_ = 0;
    std::vector<IndexEntry> entries_;
    std::vector<double> norms_; // precomputed for Cosine
};

/// Binary persistence with a trailing whole-file checksum; load(save(x))
/// reproduces every field bit-for-bit.
void save_index(const VectorIndex& index, const std::filesystem::path& path);
VectorIndex load_index(const std::filesystem::path& path);

} // namespace tqa
