#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dietlex/rng.hpp"
#include "dietlex/sgns.hpp"
#include "dietlex/tokenize.hpp"
#include "dietlex/vector_table.hpp"
#include "dietlex/word2vec.hpp"

namespace dietlex {

// A document over word identifiers from the level below: food words for
// meals, meal words for diets.
struct TokenDocument {
    std::string doc_id;
    std::vector<std::string> tokens;
};

// Distributed bag-of-words paragraph vectors: each document vector is trained
// to predict its own tokens via negative sampling against a shared token
// output matrix. No word-order modeling.
struct DbowModel {
    std::uint32_t dim = 0;
    std::vector<std::string> doc_ids;
    std::vector<float> doc_vectors;     // N x dim
    Vocabulary vocab;                   // token vocabulary
    std::vector<float> token_output;    // |V| x dim
    std::vector<std::string> excluded;  // documents with zero valid tokens
    EmbedConfig config;

    std::span<const float> doc_vector(std::size_t i) const {
        return {doc_vectors.data() + i * dim, dim};
    }

    VectorTable to_table() const {
        VectorTable t;
        t.dim = dim;
        for (std::size_t i = 0; i < doc_ids.size(); ++i) t.add(doc_ids[i], doc_vector(i));
        return t;
    }
};

namespace detail {

inline void dbow_train_doc(float* doc_vec, std::vector<float>& token_output, int dim,
                           const std::vector<std::int32_t>& tokens, const EmbedConfig& cfg,
                           const Vocabulary& vocab, const sgns::UnigramSampler& sampler, Rng& rng,
                           float alpha, std::vector<float*>& negs, std::vector<float>& delta) {
    for (std::int32_t tok : tokens) {
        if (!keep_token(rng, cfg.subsample, vocab.counts[static_cast<std::size_t>(tok)], vocab.total_count))
            continue;
        float* positive = token_output.data() + static_cast<std::size_t>(tok) * dim;
        int n_neg = 0;
        for (int s = 0; s < cfg.negative; ++s) {
            std::int32_t cand = sampler.sample(rng);
            if (cand == tok) continue;
            negs[static_cast<std::size_t>(n_neg++)] =
                token_output.data() + static_cast<std::size_t>(cand) * dim;
        }
        sgns::apply_step(doc_vec, positive, negs.data(), n_neg, dim, alpha, delta.data());
    }
}

}  // namespace detail

inline DbowModel train_dbow(const std::vector<TokenDocument>& documents, const EmbedConfig& cfg) {
    cfg.validate();
    if (documents.size() < 2) throw std::invalid_argument("dbow: need at least 2 documents");

    DbowModel model;
    model.config = cfg;
    model.dim = static_cast<std::uint32_t>(cfg.dim);

    {
        std::vector<std::vector<std::string>> token_docs;
        token_docs.reserve(documents.size());
        for (const auto& d : documents) token_docs.push_back(d.tokens);
        model.vocab = build_vocabulary(token_docs, cfg.min_count);
    }
    if (model.vocab.empty()) throw std::runtime_error("no trainable tokens");

    // Reduce documents to in-vocabulary ids; zero-token documents are
    // excluded with a diagnostic rather than trained as empty rows.
    std::vector<std::vector<std::int32_t>> docs;
    docs.reserve(documents.size());
    std::uint64_t corpus_positions = 0;
    for (const auto& d : documents) {
        std::vector<std::int32_t> ids;
        ids.reserve(d.tokens.size());
        for (const auto& tok : d.tokens) {
            std::int32_t id = model.vocab.find(tok);
            if (id >= 0) ids.push_back(id);
        }
        if (ids.empty()) {
            model.excluded.push_back(d.doc_id);
            continue;
        }
        corpus_positions += ids.size();
        model.doc_ids.push_back(d.doc_id);
        docs.push_back(std::move(ids));
    }
    if (docs.empty()) throw std::runtime_error("no trainable documents");

    const int dim = cfg.dim;
    model.doc_vectors.resize(docs.size() * static_cast<std::size_t>(dim));
    model.token_output.assign(model.vocab.size() * static_cast<std::size_t>(dim), 0.0f);

    Rng init_rng(mix_seed(cfg.seed, 0));
    const double half_range = 0.5 / dim;
    for (auto& x : model.doc_vectors) x = static_cast<float>(init_rng.uniform(-half_range, half_range));

    const sgns::UnigramSampler sampler(model.vocab.counts, 0.75);
    const std::uint64_t total_positions = corpus_positions * static_cast<std::uint64_t>(cfg.epochs);
    std::atomic<std::uint64_t> done{0};

    auto worker = [&](std::size_t shard, std::size_t n_shards, std::uint64_t stream_seed) {
        Rng rng(stream_seed);
        std::vector<float> delta(static_cast<std::size_t>(dim));
        std::vector<float*> negs(static_cast<std::size_t>(cfg.negative));
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            for (std::size_t di = shard; di < docs.size(); di += n_shards) {
                const std::uint64_t before = done.fetch_add(docs[di].size());
                const float alpha =
                    static_cast<float>(detail::decayed_alpha(cfg.alpha, before, total_positions));
                float* doc_vec = model.doc_vectors.data() + di * static_cast<std::size_t>(dim);
                detail::dbow_train_doc(doc_vec, model.token_output, dim, docs[di], cfg, model.vocab,
                                       sampler, rng, alpha, negs, delta);
            }
        }
    };

    if (cfg.threads == 1) {
        worker(0, 1, mix_seed(cfg.seed, 1));
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(cfg.threads));
        for (int t = 0; t < cfg.threads; ++t) {
            pool.emplace_back(worker, static_cast<std::size_t>(t), static_cast<std::size_t>(cfg.threads),
                              mix_seed(cfg.seed, 1 + static_cast<std::uint64_t>(t)));
        }
        for (auto& th : pool) th.join();
    }
    return model;
}

struct InferredVector {
    std::vector<float> vec;
    bool oov = false;
};

// Trains a fresh document vector for unseen tokens with the token output
// matrix held fixed; same epochs and rate schedule as training.
inline InferredVector infer_doc_vector(const DbowModel& model, const std::vector<std::string>& tokens,
                                       std::uint64_t seed) {
    InferredVector out;
    const int dim = static_cast<int>(model.dim);
    out.vec.assign(model.dim, 0.0f);

    std::vector<std::int32_t> ids;
    ids.reserve(tokens.size());
    for (const auto& tok : tokens) {
        std::int32_t id = model.vocab.find(tok);
        if (id >= 0) ids.push_back(id);
    }
    if (ids.empty()) {
        out.oov = true;
        return out;
    }

    Rng rng(mix_seed(seed, 2));
    const double half_range = 0.5 / dim;
    for (auto& x : out.vec) x = static_cast<float>(rng.uniform(-half_range, half_range));

    const sgns::UnigramSampler sampler(model.vocab.counts, 0.75);
    const EmbedConfig& cfg = model.config;
    const std::uint64_t total = ids.size() * static_cast<std::uint64_t>(cfg.epochs);
    std::uint64_t done = 0;
    std::vector<float> delta(static_cast<std::size_t>(dim));
    std::vector<float*> negs(static_cast<std::size_t>(cfg.negative));
    std::vector<std::vector<float>> neg_copies(static_cast<std::size_t>(cfg.negative),
                                               std::vector<float>(static_cast<std::size_t>(dim)));
    std::vector<float> pos_copy(static_cast<std::size_t>(dim));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::int32_t tok : ids) {
            const float alpha = static_cast<float>(detail::decayed_alpha(cfg.alpha, done++, total));
            if (!detail::keep_token(rng, cfg.subsample, model.vocab.counts[static_cast<std::size_t>(tok)],
                                    model.vocab.total_count))
                continue;
            // Token rows are copied per step so the shared matrix stays frozen.
            const float* src = model.token_output.data() + static_cast<std::size_t>(tok) * dim;
            std::copy(src, src + dim, pos_copy.begin());
            int n_neg = 0;
            for (int s = 0; s < cfg.negative; ++s) {
                std::int32_t cand = sampler.sample(rng);
                if (cand == tok) continue;
                const float* nsrc = model.token_output.data() + static_cast<std::size_t>(cand) * dim;
                auto& copy = neg_copies[static_cast<std::size_t>(n_neg)];
                std::copy(nsrc, nsrc + dim, copy.begin());
                negs[static_cast<std::size_t>(n_neg++)] = copy.data();
            }
            sgns::apply_step(out.vec.data(), pos_copy.data(), negs.data(), n_neg, dim, alpha, delta.data());
        }
    }
    return out;
}

}  // namespace dietlex
