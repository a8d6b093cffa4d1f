#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dietlex {

// Lowercases and splits on every character outside [a-z0-9%]. Food names are
// crowd-sourced and frequently misspelled; tokens are taken as-is with no
// spelling correction or stemming.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        char lower = (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
        bool keep = (lower >= 'a' && lower <= 'z') || (lower >= '0' && lower <= '9') || lower == '%';
        if (keep) {
            current += lower;
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

struct Vocabulary {
    std::vector<std::string> tokens;  // index order: count desc, ties lexicographic
    std::vector<std::int64_t> counts;
    std::unordered_map<std::string, std::int32_t> index;
    std::int64_t total_count = 0;  // occurrences of retained tokens

    std::int32_t find(const std::string& token) const {
        auto it = index.find(token);
        return it == index.end() ? -1 : it->second;
    }
    std::size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }
};

inline Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& documents,
                                   int min_token_count) {
    std::unordered_map<std::string, std::int64_t> raw;
    for (const auto& doc : documents)
        for (const auto& tok : doc) ++raw[tok];

    std::vector<std::pair<std::string, std::int64_t>> kept;
    kept.reserve(raw.size());
    for (auto& [tok, count] : raw)
        if (count >= min_token_count) kept.emplace_back(tok, count);

    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary vocab;
    vocab.tokens.reserve(kept.size());
    vocab.counts.reserve(kept.size());
    for (auto& [tok, count] : kept) {
        vocab.index.emplace(tok, static_cast<std::int32_t>(vocab.tokens.size()));
        vocab.tokens.push_back(tok);
        vocab.counts.push_back(count);
        vocab.total_count += count;
    }
    return vocab;
}

}  // namespace dietlex
