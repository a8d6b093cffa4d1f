#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dietlex/dbow.hpp"
#include "dietlex/rng.hpp"

using namespace dietlex;

namespace {

double cosine(std::span<const float> a, std::span<const float> b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb) + 1e-12);
}

EmbedConfig dbow_config(std::uint64_t seed, int epochs = 40) {
    EmbedConfig cfg;
    cfg.dim = 16;
    cfg.epochs = epochs;
    cfg.min_count = 1;
    cfg.subsample = 0.0;
    cfg.seed = seed;
    return cfg;
}

// Two planted templates: A documents share a token pool, B documents use a
// disjoint pool.
std::vector<TokenDocument> planted_docs(Rng& rng, int per_template) {
    const std::vector<std::string> pool_a = {"a0", "a1", "a2", "a3", "a4"};
    const std::vector<std::string> pool_b = {"b0", "b1", "b2", "b3", "b4"};
    std::vector<TokenDocument> docs;
    for (int i = 0; i < per_template; ++i) {
        TokenDocument d;
        d.doc_id = "A" + std::to_string(i);
        for (int t = 0; t < 4; ++t) d.tokens.push_back(pool_a[rng.below(pool_a.size())]);
        docs.push_back(d);
    }
    for (int i = 0; i < per_template; ++i) {
        TokenDocument d;
        d.doc_id = "B" + std::to_string(i);
        for (int t = 0; t < 4; ++t) d.tokens.push_back(pool_b[rng.below(pool_b.size())]);
        docs.push_back(d);
    }
    return docs;
}

struct CosineGap {
    double within_a = 0.0;
    double across = 0.0;
};

CosineGap template_gap(const DbowModel& model, int per_template) {
    CosineGap gap;
    int n_within = 0, n_across = 0;
    for (int i = 0; i < per_template; ++i) {
        for (int j = i + 1; j < per_template; ++j) {
            gap.within_a += cosine(model.doc_vector(static_cast<std::size_t>(i)),
                                   model.doc_vector(static_cast<std::size_t>(j)));
            ++n_within;
        }
        for (int j = 0; j < per_template; ++j) {
            gap.across += cosine(model.doc_vector(static_cast<std::size_t>(i)),
                                 model.doc_vector(static_cast<std::size_t>(per_template + j)));
            ++n_across;
        }
    }
    gap.within_a /= n_within;
    gap.across /= n_across;
    return gap;
}

}  // namespace

TEST_CASE("train_dbow output shape and finiteness") {
    Rng rng(1);
    auto docs = planted_docs(rng, 10);
    auto model = train_dbow(docs, dbow_config(1, 10));
    CHECK(model.doc_ids.size() == 20);
    CHECK(model.doc_vectors.size() == 20 * 16);
    for (float v : model.doc_vectors) CHECK(std::isfinite(v));
    CHECK(model.excluded.empty());
    CHECK(model.to_table().rows() == 20);
}

TEST_CASE("documents from the same template are closer than across templates") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(100 + seed);
        auto docs = planted_docs(rng, 15);
        auto model = train_dbow(docs, dbow_config(seed));
        auto gap = template_gap(model, 15);
        CHECK(gap.within_a > gap.across);
    }
}

TEST_CASE("identical documents exceed the corpus mean pairwise cosine") {
    Rng rng(7);
    auto docs = planted_docs(rng, 10);
    docs.push_back({"twin1", {"a0", "a1", "a2", "b0"}});
    docs.push_back({"twin2", {"a0", "a1", "a2", "b0"}});
    auto model = train_dbow(docs, dbow_config(3));

    const std::size_t n = model.doc_ids.size();
    double mean = 0;
    int pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            mean += cosine(model.doc_vector(i), model.doc_vector(j));
            ++pairs;
        }
    mean /= pairs;
    const double twins = cosine(model.doc_vector(n - 2), model.doc_vector(n - 1));
    CHECK(twins > mean);
}

TEST_CASE("token order invariance: shuffled documents preserve the template gap") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(200 + seed);
        auto docs = planted_docs(rng, 12);
        auto shuffled = docs;
        Rng shuffle_rng(999);
        for (auto& d : shuffled) shuffle_rng.shuffle(d.tokens);

        auto m1 = train_dbow(docs, dbow_config(seed));
        auto m2 = train_dbow(shuffled, dbow_config(seed));
        CHECK(template_gap(m1, 12).within_a > template_gap(m1, 12).across);
        CHECK(template_gap(m2, 12).within_a > template_gap(m2, 12).across);
    }
}

TEST_CASE("documents with zero valid tokens are excluded with a diagnostic") {
    std::vector<TokenDocument> docs = {
        {"good1", {"x", "x", "y"}}, {"good2", {"x", "y", "y"}}, {"ghost", {"rare"}}};
    EmbedConfig cfg = dbow_config(1, 5);
    cfg.min_count = 2;  // filters "rare"
    auto model = train_dbow(docs, cfg);
    CHECK(model.doc_ids.size() == 2);
    REQUIRE(model.excluded.size() == 1);
    CHECK(model.excluded[0] == "ghost");
}

TEST_CASE("train_dbow input validation") {
    CHECK_THROWS(train_dbow({{"only", {"a"}}}, dbow_config(1)));
    std::vector<TokenDocument> docs = {{"d1", {"a"}}, {"d2", {"b"}}};
    EmbedConfig cfg = dbow_config(1);
    cfg.min_count = 5;
    CHECK_THROWS_WITH(train_dbow(docs, cfg), Catch::Matchers::ContainsSubstring("no trainable tokens"));
}

TEST_CASE("dbow strict mode is bitwise reproducible") {
    Rng rng(11);
    auto docs = planted_docs(rng, 8);
    auto a = train_dbow(docs, dbow_config(4, 10));
    auto b = train_dbow(docs, dbow_config(4, 10));
    CHECK(a.doc_vectors == b.doc_vectors);
    CHECK(a.token_output == b.token_output);
}

TEST_CASE("infer_doc_vector") {
    Rng rng(13);
    auto docs = planted_docs(rng, 15);
    auto model = train_dbow(docs, dbow_config(5));

    SECTION("self-inference lands near the trained vector") {
        int hits = 0;
        for (std::size_t i = 0; i < 10; ++i) {
            auto inferred = infer_doc_vector(model, docs[i].tokens, 77 + i);
            REQUIRE_FALSE(inferred.oov);
            if (cosine(inferred.vec, model.doc_vector(i)) > 0.5) ++hits;
        }
        CHECK(hits >= 8);
    }
    SECTION("all-unknown tokens yield the zero vector with a flag") {
        auto inferred = infer_doc_vector(model, {"nope", "never"}, 3);
        CHECK(inferred.oov);
        for (float v : inferred.vec) CHECK(v == 0.0f);
    }
    SECTION("output dimension always matches the model") {
        auto inferred = infer_doc_vector(model, {"a0"}, 4);
        CHECK(inferred.vec.size() == model.dim);
    }
    SECTION("deterministic per seed") {
        auto x = infer_doc_vector(model, docs[0].tokens, 42);
        auto y = infer_doc_vector(model, docs[0].tokens, 42);
        CHECK(x.vec == y.vec);
    }
    SECTION("inference leaves the token matrix frozen") {
        auto before = model.token_output;
        (void)infer_doc_vector(model, docs[0].tokens, 5);
        CHECK(model.token_output == before);
    }
}
