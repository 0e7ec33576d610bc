#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "tqa/vectorstore.hpp"

#include "internal/binio.hpp"
#include "internal/hash.hpp"

#include "helpers.hpp"

using namespace tqa;

namespace {

EmbeddingVector random_vec(std::mt19937& rng, std::size_t dim) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    EmbeddingVector v(dim);
    for (double& x : v) x = dist(rng);
    return v;
}

// Brute-force reference: score everything, sort by (score desc, id asc).
std::vector<std::string> oracle_top_k(const std::vector<IndexEntry>& items,
                                      const EmbeddingVector& query, std::size_t k,
                                      Metric metric) {
    std::vector<std::pair<double, std::string>> scored;
    for (const IndexEntry& e : items) {
        double s = 0.0;
        for (std::size_t i = 0; i < query.size(); ++i) s += query[i] * e.vec[i];
        if (metric == Metric::Cosine) {
            double nq = 0.0;
            double nt = 0.0;
            for (double x : query) nq += x * x;
            for (double x : e.vec) nt += x * x;
            s /= std::sqrt(nq) * std::sqrt(nt);
        }
        scored.emplace_back(s, e.topic_id);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) {
        ids.push_back(scored[i].second);
    }
    return ids;
}

std::vector<std::string> hit_ids(const std::vector<SearchHit>& hits) {
    std::vector<std::string> ids;
    for (const auto& h : hits) ids.push_back(h.topic_id);
    return ids;
}

VectorIndex small_index() {
    std::vector<IndexEntry> items{
        {"T_0002", "L_0001", {0.0, 1.0, 0.0}},
        {"T_0001", "L_0001", {1.0, 0.0, 0.0}},
        {"T_0003", "L_0002", {0.0, 0.0, 1.0}},
    };
    return VectorIndex::build(std::move(items), "test-model");
}

} // namespace

TEST_CASE("dot product basics") {
    CHECK(dot({1.0, 0.0}, {0.0, 1.0}) == 0.0);
    CHECK(dot({1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}) == 32.0);
    CHECK_THROWS_AS(dot({1.0, 2.0}, {1.0}), DimensionMismatch);
}

TEST_CASE("dot matches naive summation within 1e-12 relative, symmetric") {
    std::mt19937 rng(42);
    for (int trial = 0; trial < 1000; ++trial) {
        EmbeddingVector q = random_vec(rng, 1536);
        EmbeddingVector t = random_vec(rng, 1536);

        double naive = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) naive += q[i] * t[i];

        double got = dot(q, t);
        double scale = std::max({std::abs(naive), std::abs(got), 1e-300});
        CHECK(std::abs(got - naive) / scale <= 1e-12);

        double sym = dot(t, q);
        double sym_scale = std::max({std::abs(sym), std::abs(got), 1e-300});
        CHECK(std::abs(got - sym) / sym_scale <= 1e-12);
    }
}

TEST_CASE("cosine identities") {
    std::mt19937 rng(3);
    EmbeddingVector v = random_vec(rng, 32);
    EmbeddingVector neg(v.size());
    EmbeddingVector scaled(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        neg[i] = -v[i];
        scaled[i] = 3.0 * v[i];
    }
    CHECK(cosine(v, v) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(cosine(v, neg) == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(cosine(v, scaled) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS_AS(cosine(v, EmbeddingVector(v.size(), 0.0)), ZeroVectorError);
    CHECK_THROWS_AS(cosine(v, EmbeddingVector(4, 1.0)), DimensionMismatch);
}

TEST_CASE("build validates and sorts") {
    VectorIndex idx = small_index();
    CHECK(idx.size() == 3);
    CHECK(idx.dim() == 3);
    CHECK(idx.model_id() == "test-model");
    CHECK(idx.entries()[0].topic_id == "T_0001");
    CHECK(idx.entries()[1].topic_id == "T_0002");
    CHECK(idx.entries()[2].topic_id == "T_0003");

    CHECK_THROWS_AS(VectorIndex::build({}, "m"), EmptyInputError);
    CHECK_THROWS_AS(
        VectorIndex::build({{"a", "l", {1.0, 0.0}}, {"b", "l", {1.0, 0.0, 0.0}}},
                           "m"),
        DimensionMismatch);
    CHECK_THROWS_AS(
        VectorIndex::build({{"a", "l", {1.0}}, {"a", "l", {2.0}}}, "m"),
        DuplicateIdError);
}

TEST_CASE("search basics") {
    VectorIndex idx = small_index();

    SUBCASE("k clamps to index size") {
        auto hits = idx.search({1.0, 0.0, 0.0}, 5);
        CHECK(hits.size() == 3);
    }
    SUBCASE("self match ranks first with score 1") {
        auto hits = idx.search({0.0, 1.0, 0.0}, 1, Metric::Dot);
        REQUIRE(hits.size() == 1);
        CHECK(hits[0].topic_id == "T_0002");
        CHECK(hits[0].lesson_id == "L_0001");
        CHECK(hits[0].score == 1.0);
        CHECK(hits[0].rank == 1);
    }
    SUBCASE("ranks are consecutive from 1") {
        auto hits = idx.search({0.5, 0.3, 0.1}, 3);
        REQUIRE(hits.size() == 3);
        for (std::size_t i = 0; i < hits.size(); ++i) {
            CHECK(hits[i].rank == i + 1);
            if (i > 0) CHECK(hits[i].score <= hits[i - 1].score);
        }
    }
    SUBCASE("preconditions") {
        CHECK_THROWS_AS(idx.search({1.0, 0.0}, 1), DimensionMismatch);
        CHECK_THROWS_AS(idx.search({1.0, 0.0, 0.0}, 0), ConfigError);
    }
}

TEST_CASE("equal scores break ties by ascending topic_id") {
    std::vector<IndexEntry> items{
        {"T_0900", "L_1", {1.0, 0.0}},
        {"T_0100", "L_1", {1.0, 0.0}},
        {"T_0500", "L_1", {1.0, 0.0}},
        {"T_0300", "L_1", {0.0, 1.0}},
    };
    VectorIndex idx = VectorIndex::build(std::move(items), "m");
    auto hits = idx.search({1.0, 0.0}, 4, Metric::Dot);
    CHECK(hit_ids(hits) ==
          std::vector<std::string>{"T_0100", "T_0500", "T_0900", "T_0300"});
}

TEST_CASE("search equals brute-force oracle on random data") {
    std::mt19937 rng(2024);
    const std::size_t dim = 64;
    std::vector<IndexEntry> items;
    for (int i = 0; i < 500; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "T_%04d", i);
        char lesson[16];
        std::snprintf(lesson, sizeof lesson, "L_%04d", i / 5);
        items.push_back({id, lesson, random_vec(rng, dim)});
    }
    VectorIndex idx = VectorIndex::build(items, "oracle-test");

    for (int trial = 0; trial < 50; ++trial) {
        EmbeddingVector q = random_vec(rng, dim);
        for (Metric m : {Metric::Dot, Metric::Cosine}) {
            CAPTURE(trial);
            auto got = hit_ids(idx.search(q, 10, m));
            auto want = oracle_top_k(items, q, 10, m);
            CHECK(got == want);
        }
    }
}

TEST_CASE("search is a prefix of the full ordering and covers all ids at k=n") {
    std::mt19937 rng(5);
    std::vector<IndexEntry> items;
    for (int i = 0; i < 40; ++i) {
        items.push_back({"T_" + std::to_string(100 + i), "L_1", random_vec(rng, 8)});
    }
    VectorIndex idx = VectorIndex::build(items, "m");
    EmbeddingVector q = random_vec(rng, 8);

    auto full = hit_ids(idx.search(q, items.size()));
    for (std::size_t k = 1; k <= items.size(); k += 7) {
        auto prefix = hit_ids(idx.search(q, k));
        CHECK(std::equal(prefix.begin(), prefix.end(), full.begin()));
    }
    auto sorted_full = full;
    std::sort(sorted_full.begin(), sorted_full.end());
    std::vector<std::string> all_ids;
    for (const auto& e : idx.entries()) all_ids.push_back(e.topic_id);
    CHECK(sorted_full == all_ids); // permutation of every stored id
}

TEST_CASE("cosine id sequences are invariant under positive scaling") {
    std::mt19937 rng(99);
    const std::size_t dim = 16;
    std::vector<IndexEntry> items;
    for (int i = 0; i < 50; ++i) {
        items.push_back({"T_" + std::to_string(1000 + i), "L_1",
                         random_vec(rng, dim)});
    }
    std::uniform_real_distribution<double> scale_dist(0.01, 100.0);
    std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);

    for (int trial = 0; trial < 100; ++trial) {
        EmbeddingVector q = random_vec(rng, dim);
        VectorIndex base = VectorIndex::build(items, "m");
        auto before = hit_ids(base.search(q, 10, Metric::Cosine));

        auto scaled_items = items;
        double c = scale_dist(rng);
        for (double& x : scaled_items[pick(rng)].vec) x *= c;
        VectorIndex scaled = VectorIndex::build(std::move(scaled_items), "m");
        auto after = hit_ids(scaled.search(q, 10, Metric::Cosine));
        CHECK(before == after);

        // scaling the query too
        EmbeddingVector qs = q;
        double cq = scale_dist(rng);
        for (double& x : qs) x *= cq;
        CHECK(hit_ids(base.search(qs, 10, Metric::Cosine)) == before);
    }
}

TEST_CASE("index round trips bit-for-bit") {
    testutil::TempDir tmp;
    std::mt19937 rng(11);
    std::vector<IndexEntry> items;
    for (int i = 0; i < 7; ++i) {
        items.push_back({"T_" + std::to_string(i), "L_" + std::to_string(i % 2),
                         random_vec(rng, 12)});
    }
    VectorIndex idx = VectorIndex::build(std::move(items), "round-trip-model");
    save_index(idx, tmp / "idx.bin");
    VectorIndex back = load_index(tmp / "idx.bin");

    CHECK(back.model_id() == idx.model_id());
    CHECK(back.dim() == idx.dim());
    REQUIRE(back.size() == idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        CHECK(back.entries()[i].topic_id == idx.entries()[i].topic_id);
        CHECK(back.entries()[i].lesson_id == idx.entries()[i].lesson_id);
        CHECK(back.entries()[i].vec == idx.entries()[i].vec); // exact doubles
    }

    // saving the reloaded index reproduces identical file bytes
    save_index(back, tmp / "idx2.bin");
    CHECK(testutil::read_text(tmp / "idx.bin") ==
          testutil::read_text(tmp / "idx2.bin"));
}

TEST_CASE("single-byte corruption is always detected") {
    testutil::TempDir tmp;
    std::mt19937 rng(13);
    std::vector<IndexEntry> items;
    for (int i = 0; i < 5; ++i) {
        items.push_back({"T_" + std::to_string(i), "L_0", random_vec(rng, 8)});
    }
    save_index(VectorIndex::build(std::move(items), "fuzz"), tmp / "idx.bin");
    const std::string good = testutil::read_text(tmp / "idx.bin");

    std::uniform_int_distribution<std::size_t> pos_dist(0, good.size() - 1);
    std::uniform_int_distribution<int> bit_dist(0, 7);
    for (int trial = 0; trial < 50; ++trial) {
        std::string bad = good;
        std::size_t pos = pos_dist(rng);
        bad[pos] = static_cast<char>(bad[pos] ^ (1 << bit_dist(rng)));
        testutil::write_text(tmp / "fuzzed.bin", bad);
        CAPTURE(trial);
        CAPTURE(pos);
        CHECK_THROWS_AS(load_index(tmp / "fuzzed.bin"), ChecksumError);
    }
}

TEST_CASE("version and I/O failures are distinct errors") {
    testutil::TempDir tmp;

    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_index(tmp / "nope.bin"), IoError);
    }
    SUBCASE("future format version") {
        // craft a version-2 file with a correct checksum
        tqa::internal::BinWriter w;
        w.bytes("TQAVIDX1");
        w.u32(2);
        w.str("m");
        w.u32(4);
        w.u64(0);
        tqa::internal::BinWriter out;
        out.bytes(w.data());
        out.u32(tqa::internal::crc32_of(w.data()));
        testutil::write_text(tmp / "future.bin", out.data());
        CHECK_THROWS_AS(load_index(tmp / "future.bin"), FormatVersionError);
    }
    SUBCASE("wrong magic with correct checksum") {
        tqa::internal::BinWriter w;
        w.bytes("NOTANIDX");
        w.u32(1);
        tqa::internal::BinWriter out;
        out.bytes(w.data());
        out.u32(tqa::internal::crc32_of(w.data()));
        testutil::write_text(tmp / "odd.bin", out.data());
        CHECK_THROWS_AS(load_index(tmp / "odd.bin"), FormatVersionError);
    }
    SUBCASE("too short to hold a checksum") {
        testutil::write_text(tmp / "tiny.bin", "abc");
        CHECK_THROWS_AS(load_index(tmp / "tiny.bin"), ChecksumError);
    }
}
