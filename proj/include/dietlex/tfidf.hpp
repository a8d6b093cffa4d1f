#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dietlex {

// All unigrams plus all adjacent bigrams of one member text (a bigram term
// is two tokens joined by a single space). Bigrams never cross member
// boundaries because each member text is extracted separately.
inline std::map<std::string, std::int64_t> extract_ngrams(const std::vector<std::string>& tokens) {
    std::map<std::string, std::int64_t> terms;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        ++terms[tokens[i]];
        if (i + 1 < tokens.size()) ++terms[tokens[i] + " " + tokens[i + 1]];
    }
    return terms;
}

// Term multiset of one cluster, accumulated over member texts; a member
// occurring many times contributes its terms each time, so tf reflects
// prevalence.
struct ClusterDocument {
    std::string cluster_id;
    std::map<std::string, std::int64_t> term_counts;

    void add_member_text(const std::vector<std::string>& tokens) {
        for (auto& [term, count] : extract_ngrams(tokens)) term_counts[term] += count;
    }
    bool empty() const { return term_counts.empty(); }
};

struct ScoredTerm {
    std::string term;
    double score = 0.0;
};

struct ClusterName {
    std::string cluster_id;
    std::vector<ScoredTerm> top_terms;  // score descending, ties lexicographic; at most 5 kept

    // Top two terms joined by "; ".
    std::string display_name() const {
        if (top_terms.empty()) return "unnamed";
        std::string name = top_terms[0].term;
        if (top_terms.size() > 1) name += "; " + top_terms[1].term;
        return name;
    }
};

// tf(t,c) = raw count in cluster c's document, idf(t) = ln(N / df(t)) with
// df the number of cluster documents containing t. With a single cluster all
// idf values vanish, so ranking falls back to raw tf.
inline std::vector<ClusterName> name_clusters(const std::vector<ClusterDocument>& docs,
                                              std::size_t keep = 5) {
    std::map<std::string, std::int64_t> df;
    for (const auto& doc : docs)
        for (const auto& [term, count] : doc.term_counts) ++df[term];

    const double n_docs = static_cast<double>(docs.size());
    const bool degenerate = docs.size() == 1;

    std::vector<ClusterName> names;
    names.reserve(docs.size());
    for (const auto& doc : docs) {
        std::vector<ScoredTerm> scored;
        scored.reserve(doc.term_counts.size());
        for (const auto& [term, count] : doc.term_counts) {
            const double tf = static_cast<double>(count);
            const double score =
                degenerate ? tf : tf * std::log(n_docs / static_cast<double>(df[term]));
            scored.push_back({term, score});
        }
        std::sort(scored.begin(), scored.end(), [](const ScoredTerm& a, const ScoredTerm& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.term < b.term;
        });
        if (scored.size() > keep) scored.resize(keep);
        names.push_back({doc.cluster_id, std::move(scored)});
    }
    return names;
}

}  // namespace dietlex
