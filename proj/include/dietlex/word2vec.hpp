#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dietlex/rng.hpp"
#include "dietlex/sgns.hpp"
#include "dietlex/tokenize.hpp"

namespace dietlex {

struct EmbedConfig {
    int dim = 100;
    int negative = 5;        // negative samples per observed pair
    int epochs = 5;
    double alpha = 0.025;    // initial learning rate, decayed linearly to alpha/100
    int min_count = 2;       // vocabulary threshold
    double subsample = 1e-4; // frequency subsampling threshold t; 0 disables
    std::uint64_t seed = 1;
    int threads = 1;         // 1 = strict serial mode (bitwise reproducible);
                             // >1 = unsynchronized parallel updates

    void validate() const {
        if (dim < 1) throw std::invalid_argument("embed: dim must be >= 1");
        if (negative < 1) throw std::invalid_argument("embed: negative must be >= 1");
        if (epochs < 1) throw std::invalid_argument("embed: epochs must be >= 1");
        if (!(alpha > 0.0)) throw std::invalid_argument("embed: alpha must be > 0");
        if (min_count < 0) throw std::invalid_argument("embed: min_count must be >= 0");
        if (subsample < 0.0) throw std::invalid_argument("embed: subsample must be >= 0");
        if (threads < 1) throw std::invalid_argument("embed: threads must be >= 1");
    }
};

struct WordVectorTable {
    Vocabulary vocab;
    std::uint32_t dim = 0;
    std::vector<float> input;   // |V| x dim, the word vectors
    std::vector<float> output;  // |V| x dim, negative-sampling output matrix

    std::span<const float> vector_of(std::int32_t idx) const {
        return {input.data() + static_cast<std::size_t>(idx) * dim, dim};
    }
};

namespace detail {

// Shared across the word and document trainers: linear decay from alpha to
// alpha/100 over all scheduled positions.
inline double decayed_alpha(double alpha0, std::uint64_t done, std::uint64_t total) {
    double progress = total > 0 ? static_cast<double>(done) / static_cast<double>(total) : 1.0;
    if (progress > 1.0) progress = 1.0;
    return alpha0 * (1.0 - 0.99 * progress);
}

// Subsampling keep-probability sqrt(t/f) for corpus frequency fraction f.
inline bool keep_token(Rng& rng, double t, std::int64_t count, std::int64_t total) {
    if (t <= 0.0) return true;
    const double f = static_cast<double>(count) / static_cast<double>(total);
    if (f <= t) return true;
    return rng.uniform() < std::sqrt(t / f);
}

}  // namespace detail

// Skip-gram with negative sampling over token documents. Each document is a
// food name; the context window for a token is every other token in the same
// name, so no window size applies. Deterministic for a fixed seed when
// threads == 1.
inline WordVectorTable train_word_vectors(const std::vector<std::vector<std::string>>& documents,
                                          const EmbedConfig& cfg) {
    cfg.validate();
    WordVectorTable table;
    table.vocab = build_vocabulary(documents, cfg.min_count);
    table.dim = static_cast<std::uint32_t>(cfg.dim);
    if (table.vocab.empty()) throw std::runtime_error("no trainable tokens");

    const std::size_t v = table.vocab.size();
    const int dim = cfg.dim;
    table.input.resize(v * static_cast<std::size_t>(dim));
    table.output.assign(v * static_cast<std::size_t>(dim), 0.0f);

    Rng init_rng(mix_seed(cfg.seed, 0));
    const double half_range = 0.5 / dim;
    for (auto& x : table.input) x = static_cast<float>(init_rng.uniform(-half_range, half_range));

    // Documents reduced to in-vocabulary token ids.
    std::vector<std::vector<std::int32_t>> docs;
    docs.reserve(documents.size());
    std::uint64_t corpus_positions = 0;
    for (const auto& doc : documents) {
        std::vector<std::int32_t> ids;
        ids.reserve(doc.size());
        for (const auto& tok : doc) {
            std::int32_t id = table.vocab.find(tok);
            if (id >= 0) ids.push_back(id);
        }
        corpus_positions += ids.size();
        docs.push_back(std::move(ids));
    }

    const sgns::UnigramSampler sampler(table.vocab.counts, 0.75);
    const std::uint64_t total_positions =
        corpus_positions * static_cast<std::uint64_t>(cfg.epochs);
    std::atomic<std::uint64_t> done{0};

    auto worker = [&](std::size_t shard, std::size_t n_shards, std::uint64_t stream_seed) {
        Rng rng(stream_seed);
        std::vector<std::int32_t> kept;
        std::vector<float> delta(static_cast<std::size_t>(dim));
        std::vector<float*> negs(static_cast<std::size_t>(cfg.negative));
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            for (std::size_t di = shard; di < docs.size(); di += n_shards) {
                const auto& doc = docs[di];
                if (doc.empty()) continue;
                const std::uint64_t before = done.fetch_add(doc.size());
                const float alpha =
                    static_cast<float>(detail::decayed_alpha(cfg.alpha, before, total_positions));

                kept.clear();
                for (std::int32_t id : doc) {
                    if (detail::keep_token(rng, cfg.subsample, table.vocab.counts[static_cast<std::size_t>(id)],
                                           table.vocab.total_count))
                        kept.push_back(id);
                }
                if (kept.size() < 2) continue;

                for (std::size_t i = 0; i < kept.size(); ++i) {
                    float* center = table.input.data() + static_cast<std::size_t>(kept[i]) * dim;
                    for (std::size_t j = 0; j < kept.size(); ++j) {
                        if (i == j) continue;
                        const std::int32_t ctx = kept[j];
                        float* positive = table.output.data() + static_cast<std::size_t>(ctx) * dim;
                        int n_neg = 0;
                        for (int s = 0; s < cfg.negative; ++s) {
                            std::int32_t cand = sampler.sample(rng);
                            if (cand == ctx) continue;  // resampling slot against the target is skipped
                            negs[static_cast<std::size_t>(n_neg++)] =
                                table.output.data() + static_cast<std::size_t>(cand) * dim;
                        }
                        sgns::apply_step(center, positive, negs.data(), n_neg, dim, alpha, delta.data());
                    }
                }
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
    return table;
}

struct NameEmbedding {
    std::vector<float> vec;
    bool oov = false;  // no token of the name was in vocabulary
};

// Mean of the in-vocabulary token vectors; a fully out-of-vocabulary name
// maps to the zero vector with the flag set (crowd-sourced names guarantee
// OOV tokens at inference, so this is not an error).
inline NameEmbedding embed_name(const std::vector<std::string>& tokens, const WordVectorTable& table) {
    NameEmbedding out;
    out.vec.assign(table.dim, 0.0f);
    std::vector<double> acc(table.dim, 0.0);
    int hits = 0;
    for (const auto& tok : tokens) {
        std::int32_t id = table.vocab.find(tok);
        if (id < 0) continue;
        auto row = table.vector_of(id);
        for (std::uint32_t d = 0; d < table.dim; ++d) acc[d] += row[d];
        ++hits;
    }
    if (hits == 0) {
        out.oov = true;
        return out;
    }
    for (std::uint32_t d = 0; d < table.dim; ++d)
        out.vec[d] = static_cast<float>(acc[d] / hits);
    return out;
}

}  // namespace dietlex
