#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dietlex/binio.hpp"

namespace dietlex {

// Dense key -> vector map persisted in the NVEC container:
//   magic "NVEC", version u32, dimension u32, row count u64,
//   then per row: key length u32, UTF-8 key bytes, dimension little-endian
//   32-bit floats.
// The same container stores word vectors (token keys), food vectors
// (food_id keys), document vectors (doc ids) and cluster centroids
// (cluster-id keys).
struct VectorTable {
    std::uint32_t dim = 0;
    std::vector<std::string> keys;
    std::vector<float> data;  // keys.size() * dim, row-major
    std::unordered_map<std::string, std::size_t> index;

    static constexpr std::uint32_t kVersion = 1;

    std::size_t rows() const { return keys.size(); }

    std::span<const float> row(std::size_t i) const {
        return {data.data() + i * dim, dim};
    }

    const float* find(const std::string& key) const {
        auto it = index.find(key);
        return it == index.end() ? nullptr : data.data() + it->second * dim;
    }

    void add(std::string key, std::span<const float> v) {
        if (dim == 0) dim = static_cast<std::uint32_t>(v.size());
        if (v.size() != dim) throw std::invalid_argument("VectorTable: dimension mismatch for key " + key);
        if (!index.emplace(key, keys.size()).second)
            throw std::invalid_argument("VectorTable: duplicate key " + key);
        keys.push_back(std::move(key));
        data.insert(data.end(), v.begin(), v.end());
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open for write: " + path.string());
        os.write("NVEC", 4);
        put_u32_le(os, kVersion);
        put_u32_le(os, dim);
        put_u64_le(os, keys.size());
        for (std::size_t i = 0; i < keys.size(); ++i) {
            put_u32_le(os, static_cast<std::uint32_t>(keys[i].size()));
            os.write(keys[i].data(), static_cast<std::streamsize>(keys[i].size()));
            for (std::uint32_t d = 0; d < dim; ++d) put_f32_le(os, data[i * dim + d]);
        }
        if (!os) throw std::runtime_error("write failed: " + path.string());
    }

    static VectorTable load(const std::filesystem::path& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw std::runtime_error("cannot open: " + path.string());
        char magic[4];
        is.read(magic, 4);
        if (!is || std::string(magic, 4) != "NVEC")
            throw std::runtime_error("not an NVEC file: " + path.string());
        std::uint32_t version = get_u32_le(is);
        if (version != kVersion)
            throw std::runtime_error("unsupported NVEC version " + std::to_string(version));
        VectorTable t;
        t.dim = get_u32_le(is);
        std::uint64_t count = get_u64_le(is);
        t.keys.reserve(count);
        t.data.reserve(count * t.dim);
        for (std::uint64_t i = 0; i < count; ++i) {
            std::uint32_t len = get_u32_le(is);
            std::string key = get_bytes(is, len);
            t.index.emplace(key, t.keys.size());
            t.keys.push_back(std::move(key));
            for (std::uint32_t d = 0; d < t.dim; ++d) t.data.push_back(get_f32_le(is));
        }
        return t;
    }
};

}  // namespace dietlex
