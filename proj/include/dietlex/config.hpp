#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "dietlex/binio.hpp"
#include "dietlex/csv.hpp"
#include "dietlex/food_vector.hpp"
#include "dietlex/kmeans.hpp"
#include "dietlex/word2vec.hpp"

namespace dietlex {

// Invalid configuration or a refused resume; the CLI maps this to exit
// code 2, stage failures to exit code 3.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Pipeline configuration, read from a flat key = value text file. Every
// value, including defaults and derived per-stage seeds, is materialized into
// the run manifest so no setting is silent.
struct PipelineConfig {
    std::string food_db;
    std::string food_log;
    std::string out_dir;

    std::uint64_t seed = 42;
    std::string point_weighting = "frequency";  // or "uniform"

    // Per-level cluster counts; scale_factor divides all three, preserving
    // their ratio for desk-scale runs.
    int k_food = 5000;
    int k_meal = 1000;
    int k_diet = 100;
    double scale_factor = 1.0;

    BlockWeights block_weights;
    double winsor_c = 2.5;
    double calorie_floor = 1.0;

    int cluster_max_iterations = 100;
    double cluster_tol = 1e-6;
    int cluster_n_init = 3;
    int cluster_batch_size = 0;
    std::optional<std::uint64_t> cluster_seed_food;
    std::optional<std::uint64_t> cluster_seed_meal;
    std::optional<std::uint64_t> cluster_seed_diet;

    EmbedConfig name_embed;  // spec text-embedding defaults
    EmbedConfig meal_embed{.dim = 100, .negative = 5, .epochs = 20, .alpha = 0.025,
                           .min_count = 1, .subsample = 0.0, .seed = 0, .threads = 1};
    EmbedConfig diet_embed{.dim = 100, .negative = 5, .epochs = 10, .alpha = 0.025,
                           .min_count = 1, .subsample = 0.0, .seed = 0, .threads = 1};
    bool name_embed_seed_set = false;
    bool meal_embed_seed_set = false;
    bool diet_embed_seed_set = false;

    // Per-stage seeds derive from the global seed unless overridden.
    void finalize() {
        if (!name_embed_seed_set) name_embed.seed = mix_seed(seed, 101);
        if (!cluster_seed_food) cluster_seed_food = mix_seed(seed, 102);
        if (!meal_embed_seed_set) meal_embed.seed = mix_seed(seed, 103);
        if (!cluster_seed_meal) cluster_seed_meal = mix_seed(seed, 104);
        if (!diet_embed_seed_set) diet_embed.seed = mix_seed(seed, 105);
        if (!cluster_seed_diet) cluster_seed_diet = mix_seed(seed, 106);
    }

    int k_eff(int k) const {
        return std::max(1, static_cast<int>(std::llround(k / scale_factor)));
    }
    int k_food_eff() const { return k_eff(k_food); }
    int k_meal_eff() const { return k_eff(k_meal); }
    int k_diet_eff() const { return k_eff(k_diet); }

    void validate() const {
        if (food_db.empty() || food_log.empty() || out_dir.empty())
            throw ConfigError("config: food_db, food_log and out_dir are required");
        if (!std::filesystem::exists(food_db)) throw ConfigError("config: food_db not found: " + food_db);
        if (!std::filesystem::exists(food_log)) throw ConfigError("config: food_log not found: " + food_log);
        if (point_weighting != "frequency" && point_weighting != "uniform")
            throw ConfigError("config: point_weighting must be frequency or uniform");
        if (k_food < 1 || k_meal < 1 || k_diet < 1) throw ConfigError("config: k values must be >= 1");
        if (!(scale_factor > 0.0)) throw ConfigError("config: scale_factor must be > 0");
        if (!(winsor_c > 0.0)) throw ConfigError("config: winsor_c must be > 0");
        if (!(calorie_floor > 0.0)) throw ConfigError("config: calorie_floor must be > 0");
        try {
            block_weights.validate();
            name_embed.validate();
            meal_embed.validate();
            diet_embed.validate();
            ClusterConfig probe{.k = 1, .max_iterations = cluster_max_iterations, .tol = cluster_tol,
                                .seed = 0, .n_init = cluster_n_init, .batch_size = cluster_batch_size};
            probe.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }

    static PipelineConfig from_file(const std::filesystem::path& path);

    // Every effective key/value pair, in sorted key order.
    std::map<std::string, std::string> canonical() const;

    // Hash over the semantic keys (paths and thread counts excluded).
    std::string config_hash() const;
};

namespace cfgdetail {

inline std::string fmt_u64(std::uint64_t v) { return std::to_string(v); }
inline std::string fmt_int(int v) { return std::to_string(v); }
inline std::string fmt_bool(bool v) { return v ? "true" : "false"; }
inline std::string fmt_double(double v) { return format_double(v, "%.17g"); }

inline void embed_canonical(std::map<std::string, std::string>& m, const std::string& prefix,
                            const EmbedConfig& e) {
    m[prefix + ".dim"] = fmt_int(e.dim);
    m[prefix + ".negative"] = fmt_int(e.negative);
    m[prefix + ".epochs"] = fmt_int(e.epochs);
    m[prefix + ".alpha"] = fmt_double(e.alpha);
    m[prefix + ".min_count"] = fmt_int(e.min_count);
    m[prefix + ".subsample"] = fmt_double(e.subsample);
    m[prefix + ".seed"] = fmt_u64(e.seed);
    m[prefix + ".threads"] = fmt_int(e.threads);
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        std::uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError("config: bad integer for " + key + ": '" + value + "'");
    }
}

inline int parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError("config: bad integer for " + key + ": '" + value + "'");
    }
}

inline double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError("config: bad number for " + key + ": '" + value + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "on" || value == "1") return true;
    if (value == "false" || value == "off" || value == "0") return false;
    throw ConfigError("config: bad boolean for " + key + ": '" + value + "'");
}

inline bool embed_key(EmbedConfig& e, bool& seed_set, const std::string& suffix,
                      const std::string& key, const std::string& value) {
    if (suffix == "dim") e.dim = parse_int(key, value);
    else if (suffix == "negative") e.negative = parse_int(key, value);
    else if (suffix == "epochs") e.epochs = parse_int(key, value);
    else if (suffix == "alpha") e.alpha = parse_double(key, value);
    else if (suffix == "min_count") e.min_count = parse_int(key, value);
    else if (suffix == "subsample") e.subsample = parse_double(key, value);
    else if (suffix == "threads") e.threads = parse_int(key, value);
    else if (suffix == "seed") {
        e.seed = parse_u64(key, value);
        seed_set = true;
    } else {
        return false;
    }
    return true;
}

}  // namespace cfgdetail

inline PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path.string());
    PipelineConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        using namespace cfgdetail;

        if (key == "food_db") cfg.food_db = value;
        else if (key == "food_log") cfg.food_log = value;
        else if (key == "out_dir") cfg.out_dir = value;
        else if (key == "seed") cfg.seed = parse_u64(key, value);
        else if (key == "point_weighting") cfg.point_weighting = value;
        else if (key == "k_food") cfg.k_food = parse_int(key, value);
        else if (key == "k_meal") cfg.k_meal = parse_int(key, value);
        else if (key == "k_diet") cfg.k_diet = parse_int(key, value);
        else if (key == "scale_factor") cfg.scale_factor = parse_double(key, value);
        else if (key == "weight_name") cfg.block_weights.name = parse_double(key, value);
        else if (key == "weight_nutrient") cfg.block_weights.nutrient = parse_double(key, value);
        else if (key == "per_dimension_normalization")
            cfg.block_weights.per_dimension_normalization = parse_bool(key, value);
        else if (key == "winsor_c") cfg.winsor_c = parse_double(key, value);
        else if (key == "calorie_floor") cfg.calorie_floor = parse_double(key, value);
        else if (key == "cluster.max_iterations") cfg.cluster_max_iterations = parse_int(key, value);
        else if (key == "cluster.tol") cfg.cluster_tol = parse_double(key, value);
        else if (key == "cluster.n_init") cfg.cluster_n_init = parse_int(key, value);
        else if (key == "cluster.batch_size") cfg.cluster_batch_size = parse_int(key, value);
        else if (key == "cluster.seed_food") cfg.cluster_seed_food = parse_u64(key, value);
        else if (key == "cluster.seed_meal") cfg.cluster_seed_meal = parse_u64(key, value);
        else if (key == "cluster.seed_diet") cfg.cluster_seed_diet = parse_u64(key, value);
        else if (key.rfind("name_embed.", 0) == 0) {
            if (!embed_key(cfg.name_embed, cfg.name_embed_seed_set, key.substr(11), key, value))
                throw ConfigError("config: unknown key '" + key + "'");
        } else if (key.rfind("meal_embed.", 0) == 0) {
            if (!embed_key(cfg.meal_embed, cfg.meal_embed_seed_set, key.substr(11), key, value))
                throw ConfigError("config: unknown key '" + key + "'");
        } else if (key.rfind("diet_embed.", 0) == 0) {
            if (!embed_key(cfg.diet_embed, cfg.diet_embed_seed_set, key.substr(11), key, value))
                throw ConfigError("config: unknown key '" + key + "'");
        } else {
            throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    cfg.finalize();
    return cfg;
}

inline std::map<std::string, std::string> PipelineConfig::canonical() const {
    using namespace cfgdetail;
    std::map<std::string, std::string> m;
    m["food_db"] = food_db;
    m["food_log"] = food_log;
    m["out_dir"] = out_dir;
    m["seed"] = fmt_u64(seed);
    m["point_weighting"] = point_weighting;
    m["k_food"] = fmt_int(k_food);
    m["k_meal"] = fmt_int(k_meal);
    m["k_diet"] = fmt_int(k_diet);
    m["scale_factor"] = fmt_double(scale_factor);
    m["weight_name"] = fmt_double(block_weights.name);
    m["weight_nutrient"] = fmt_double(block_weights.nutrient);
    m["per_dimension_normalization"] = fmt_bool(block_weights.per_dimension_normalization);
    m["winsor_c"] = fmt_double(winsor_c);
    m["calorie_floor"] = fmt_double(calorie_floor);
    m["cluster.max_iterations"] = fmt_int(cluster_max_iterations);
    m["cluster.tol"] = fmt_double(cluster_tol);
    m["cluster.n_init"] = fmt_int(cluster_n_init);
    m["cluster.batch_size"] = fmt_int(cluster_batch_size);
    m["cluster.seed_food"] = fmt_u64(*cluster_seed_food);
    m["cluster.seed_meal"] = fmt_u64(*cluster_seed_meal);
    m["cluster.seed_diet"] = fmt_u64(*cluster_seed_diet);
    embed_canonical(m, "name_embed", name_embed);
    embed_canonical(m, "meal_embed", meal_embed);
    embed_canonical(m, "diet_embed", diet_embed);
    return m;
}

// Keys that do not influence results: artifact locations and thread counts.
inline bool semantic_config_key(const std::string& key) {
    if (key == "food_db" || key == "food_log" || key == "out_dir" || key == "seed") return false;
    if (key.size() > 8 && key.compare(key.size() - 8, 8, ".threads") == 0) return false;
    return true;
}

inline std::string PipelineConfig::config_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [key, value] : canonical()) {
        if (!semantic_config_key(key)) continue;
        h = fnv1a64(key, h);
        h = fnv1a64("=", h);
        h = fnv1a64(value, h);
        h = fnv1a64("\n", h);
    }
    return hex64(h);
}

}  // namespace dietlex
