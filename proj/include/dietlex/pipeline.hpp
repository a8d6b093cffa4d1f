#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dietlex/config.hpp"
#include "dietlex/csv.hpp"
#include "dietlex/dbow.hpp"
#include "dietlex/food_vector.hpp"
#include "dietlex/grouping.hpp"
#include "dietlex/kmeans.hpp"
#include "dietlex/parse.hpp"
#include "dietlex/report.hpp"
#include "dietlex/tfidf.hpp"
#include "dietlex/tokenize.hpp"
#include "dietlex/vector_table.hpp"
#include "dietlex/word2vec.hpp"

namespace dietlex {

// The contract-and-expand pipeline: embed, cluster and name at the food
// level, rewrite meals over food words, repeat at the meal level, rewrite
// diets over meal words, repeat once more, then emit reports. Stages
// communicate only through persisted artifacts, which makes every
// intermediate testable in isolation and enables resume.
enum class Stage : int {
    parse = 0,
    name_embedding = 1,
    food_vectors = 2,
    food_clustering = 3,
    food_naming = 4,
    meal_docs = 5,
    meal_embedding = 6,
    meal_clustering = 7,
    meal_naming = 8,
    diet_docs = 9,
    diet_embedding = 10,
    diet_clustering = 11,
    diet_naming = 12,
    reports = 13,
};

inline constexpr int kStageCount = 14;

inline constexpr std::array<const char*, kStageCount> kStageNames = {
    "parse",           "name-embedding", "food-vectors",   "food-clustering", "food-naming",
    "meal-docs",       "meal-embedding", "meal-clustering", "meal-naming",    "diet-docs",
    "diet-embedding",  "diet-clustering", "diet-naming",    "reports",
};

inline const char* stage_name(Stage s) { return kStageNames[static_cast<std::size_t>(s)]; }

inline std::optional<Stage> parse_stage(const std::string& name) {
    for (int i = 0; i < kStageCount; ++i)
        if (name == kStageNames[static_cast<std::size_t>(i)]) return static_cast<Stage>(i);
    return std::nullopt;
}

// Earliest stage whose results depend on a config key; resume compares all
// keys owned by stages upstream of the resume point.
inline int config_key_first_stage(const std::string& key) {
    if (key.rfind("name_embed.", 0) == 0) return 1;
    if (key == "weight_name" || key == "weight_nutrient" || key == "per_dimension_normalization" ||
        key == "winsor_c" || key == "calorie_floor")
        return 2;
    if (key == "k_food" || key == "scale_factor" || key == "point_weighting" ||
        key == "cluster.max_iterations" || key == "cluster.tol" || key == "cluster.n_init" ||
        key == "cluster.batch_size" || key == "cluster.seed_food")
        return 3;
    if (key.rfind("meal_embed.", 0) == 0) return 6;
    if (key == "k_meal" || key == "cluster.seed_meal") return 7;
    if (key.rfind("diet_embed.", 0) == 0) return 10;
    if (key == "k_diet" || key == "cluster.seed_diet") return 11;
    return 0;  // inputs (covered by digests) and anything unclassified
}

struct ResumeRefused : ConfigError {
    using ConfigError::ConfigError;
};

struct StageError : std::runtime_error {
    Stage stage;
    StageError(Stage s, const std::string& what)
        : std::runtime_error(std::string(stage_name(s)) + ": " + what), stage(s) {}
};

struct PipelineOutput {
    std::filesystem::path out_dir;
    nlohmann::json manifest;
};

namespace pipedetail {

inline std::vector<std::string> split_tsv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == '\t') {
            out.emplace_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
    return out;
}

inline std::vector<std::string> split_space(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == ' ') {
            if (i > start) out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline std::string file_digest(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for digest: " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (is) {
        is.read(buf, sizeof(buf));
        h = fnv1a64_bytes(buf, static_cast<std::size_t>(is.gcount()), h);
    }
    return hex64(h);
}

struct AssignRow {
    std::string point_id;
    std::int32_t cluster = 0;
    double sq_dist = 0.0;
};

inline void write_assignments(const std::filesystem::path& path, const std::vector<AssignRow>& rows) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << "point_id,cluster_id,squared_distance\n";
    for (const auto& r : rows)
        os << r.point_id << ',' << r.cluster << ',' << format_double(r.sq_dist, "%.17g") << '\n';
}

inline std::vector<AssignRow> read_assignments(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::vector<AssignRow> rows;
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (trim(line).empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 3) throw std::runtime_error("malformed assignment row in " + path.string());
        rows.push_back({f[0], static_cast<std::int32_t>(std::stol(f[1])), std::stod(f[2])});
    }
    return rows;
}

// Display names per cluster id from a names CSV ("unnamed" for clusters
// with no rows).
inline std::map<std::string, std::string> read_display_names(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::map<std::string, std::string> names;
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (trim(line).empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 5) throw std::runtime_error("malformed names row in " + path.string());
        names.emplace(f[0], f[4]);  // first row per cluster wins; all rows carry the display name
    }
    return names;
}

inline void write_names_csv(const std::filesystem::path& path, const std::vector<ClusterName>& names) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << "cluster_id,rank,term,score,display_name\n";
    for (const auto& n : names) {
        const std::string display = n.display_name();
        for (std::size_t r = 0; r < n.top_terms.size(); ++r) {
            os << n.cluster_id << ',' << r << ',' << csv_escape(n.top_terms[r].term) << ','
               << format_double(n.top_terms[r].score, "%.12g") << ',' << csv_escape(display) << '\n';
        }
    }
}

}  // namespace pipedetail

class Pipeline {
public:
    explicit Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)), out_(cfg_.out_dir) {
        cfg_.finalize();
    }

    PipelineOutput run() {
        cfg_.validate();
        std::filesystem::create_directories(out_);
        compute_input_digests();
        execute_from(0);
        return output();
    }

    PipelineOutput resume(Stage from) {
        cfg_.validate();
        const int first = static_cast<int>(from);
        nlohmann::json old = load_manifest();
        check_resume_config(old, first);
        check_upstream_artifacts(first);
        // Carry forward the recorded stats (and timings) of reused stages.
        auto old_timings = load_timings();
        for (int s = 0; s < first; ++s) {
            const char* name = kStageNames[static_cast<std::size_t>(s)];
            if (old["stages"].contains(name)) stats_[static_cast<std::size_t>(s)] = old["stages"][name];
            auto it = old_timings.find(name);
            if (it != old_timings.end()) durations_[static_cast<std::size_t>(s)] = it->second;
        }
        compute_input_digests();
        execute_from(first);
        return output();
    }

    const PipelineConfig& config() const { return cfg_; }

    // Reports are pure functions of persisted artifacts; this re-runs only
    // the report stage against an existing output directory.
    static void regenerate_reports(const std::filesystem::path& out_dir) {
        nlohmann::json manifest;
        {
            std::ifstream is(out_dir / "manifest.json");
            if (!is) throw ConfigError("no manifest.json in " + out_dir.string());
            is >> manifest;
        }
        PipelineConfig cfg = config_from_manifest(manifest);
        cfg.out_dir = out_dir.string();
        Pipeline p(std::move(cfg));
        p.stage_reports();
    }

    nlohmann::json manifest() const {
        nlohmann::json m;
        m["format"] = 1;
        nlohmann::json cfg_json;
        for (const auto& [key, value] : cfg_.canonical()) cfg_json[key] = value;
        m["config"] = cfg_json;
        m["config_hash"] = cfg_.config_hash();
        m["input_digest"] = {{"food_db", digest_food_db_}, {"food_log", digest_food_log_}};
        nlohmann::json stages;
        nlohmann::json completed = nlohmann::json::array();
        for (int s = 0; s < kStageCount; ++s) {
            if (stats_[static_cast<std::size_t>(s)].is_null()) continue;
            stages[kStageNames[static_cast<std::size_t>(s)]] = stats_[static_cast<std::size_t>(s)];
            completed.push_back(kStageNames[static_cast<std::size_t>(s)]);
        }
        m["stages"] = stages;
        m["completed_stages"] = completed;
        return m;
    }

private:
    using Clock = std::chrono::steady_clock;

    PipelineConfig cfg_;
    std::filesystem::path out_;
    std::array<nlohmann::json, kStageCount> stats_{};
    std::array<double, kStageCount> durations_{};
    std::string digest_food_db_;
    std::string digest_food_log_;

    PipelineOutput output() const { return {out_, manifest()}; }

    void compute_input_digests() {
        digest_food_db_ = pipedetail::file_digest(cfg_.food_db);
        digest_food_log_ = pipedetail::file_digest(cfg_.food_log);
    }

    nlohmann::json load_manifest() const {
        std::ifstream is(out_ / "manifest.json");
        if (!is) throw ResumeRefused("resume: no manifest.json in " + out_.string());
        nlohmann::json m;
        is >> m;
        return m;
    }

    std::map<std::string, double> load_timings() const {
        std::map<std::string, double> timings;
        std::ifstream is(out_ / "timings.csv");
        if (!is) return timings;
        std::string line;
        bool header = true;
        while (std::getline(is, line)) {
            if (header) {
                header = false;
                continue;
            }
            if (trim(line).empty()) continue;
            auto f = split_csv_line(line);
            if (f.size() == 2) timings[f[0]] = std::stod(f[1]);
        }
        return timings;
    }

    static PipelineConfig config_from_manifest(const nlohmann::json& manifest);

    void check_resume_config(const nlohmann::json& old, int first) const {
        std::vector<std::string> diffs;
        const auto& old_cfg = old["config"];
        for (const auto& [key, value] : cfg_.canonical()) {
            if (!semantic_config_key(key)) continue;
            if (config_key_first_stage(key) >= first) continue;
            const std::string stored = old_cfg.contains(key) ? old_cfg[key].get<std::string>() : "<absent>";
            if (stored != value) diffs.push_back(key + ": manifest=" + stored + " current=" + value);
        }
        if (first > 0) {
            const std::string old_db = old["input_digest"]["food_db"].get<std::string>();
            const std::string old_log = old["input_digest"]["food_log"].get<std::string>();
            const std::string cur_db = pipedetail::file_digest(cfg_.food_db);
            const std::string cur_log = pipedetail::file_digest(cfg_.food_log);
            if (old_db != cur_db) diffs.push_back("food_db content digest changed");
            if (old_log != cur_log) diffs.push_back("food_log content digest changed");
        }
        if (!diffs.empty()) {
            std::string msg = "resume refused, upstream configuration differs:";
            for (const auto& d : diffs) msg += "\n  " + d;
            throw ResumeRefused(msg);
        }
        // Every upstream stage must have completed.
        std::set<std::string> done;
        for (const auto& s : old["completed_stages"]) done.insert(s.get<std::string>());
        for (int s = 0; s < first; ++s) {
            if (!done.count(kStageNames[static_cast<std::size_t>(s)]))
                throw ResumeRefused(std::string("resume: upstream stage not completed: ") +
                                    kStageNames[static_cast<std::size_t>(s)]);
        }
    }

    std::vector<std::filesystem::path> stage_artifacts(int s) const {
        switch (static_cast<Stage>(s)) {
            case Stage::parse:
                return {out_ / "foods.jsonl", out_ / "logs.csv", out_ / "meals.tsv",
                        out_ / "parse_report.json"};
            case Stage::name_embedding:
                return {out_ / "name_vectors.nvec", out_ / "name_token_counts.txt"};
            case Stage::food_vectors:
                return {out_ / "food_vectors.nvec", out_ / "scaler.txt", out_ / "food_meta.csv"};
            case Stage::food_clustering:
                return {out_ / "food_centroids.nvec", out_ / "food_assign.csv"};
            case Stage::food_naming:
                return {out_ / "food_names.csv"};
            case Stage::meal_docs:
                return {out_ / "meal_docs.tsv"};
            case Stage::meal_embedding:
                return {out_ / "meal_vectors.nvec"};
            case Stage::meal_clustering:
                return {out_ / "meal_centroids.nvec", out_ / "meal_assign.csv"};
            case Stage::meal_naming:
                return {out_ / "meal_names.csv"};
            case Stage::diet_docs:
                return {out_ / "diet_docs.tsv"};
            case Stage::diet_embedding:
                return {out_ / "diet_vectors.nvec"};
            case Stage::diet_clustering:
                return {out_ / "diet_centroids.nvec", out_ / "diet_assign.csv"};
            case Stage::diet_naming:
                return {out_ / "diet_names.csv"};
            case Stage::reports:
                return {out_ / "reports" / "profiles.csv", out_ / "reports" / "diet_macros.csv",
                        out_ / "reports" / "diet_macros_summary.csv", out_ / "reports" / "meal_words.csv"};
        }
        return {};
    }

    void check_upstream_artifacts(int first) const {
        for (int s = 0; s < first; ++s) {
            for (const auto& p : stage_artifacts(s)) {
                if (!std::filesystem::exists(p))
                    throw ResumeRefused("resume: missing upstream artifact " + p.string());
            }
        }
    }

    void execute_from(int first) {
        for (int s = first; s < kStageCount; ++s) {
            const auto t0 = Clock::now();
            try {
                run_stage(static_cast<Stage>(s));
            } catch (const StageError&) {
                throw;
            } catch (const std::exception& e) {
                throw StageError(static_cast<Stage>(s), e.what());
            }
            durations_[static_cast<std::size_t>(s)] =
                std::chrono::duration<double>(Clock::now() - t0).count();
            write_manifest();
        }
    }

    void run_stage(Stage s) {
        switch (s) {
            case Stage::parse: stage_parse(); break;
            case Stage::name_embedding: stage_name_embedding(); break;
            case Stage::food_vectors: stage_food_vectors(); break;
            case Stage::food_clustering: stage_food_clustering(); break;
            case Stage::food_naming: stage_food_naming(); break;
            case Stage::meal_docs: stage_meal_docs(); break;
            case Stage::meal_embedding: stage_meal_embedding(); break;
            case Stage::meal_clustering: stage_meal_clustering(); break;
            case Stage::meal_naming: stage_meal_naming(); break;
            case Stage::diet_docs: stage_diet_docs(); break;
            case Stage::diet_embedding: stage_diet_embedding(); break;
            case Stage::diet_clustering: stage_diet_clustering(); break;
            case Stage::diet_naming: stage_diet_naming(); break;
            case Stage::reports: stage_reports(); break;
        }
    }

    void write_manifest() const {
        {
            std::ofstream os(out_ / "manifest.json");
            os << manifest().dump(2) << '\n';
        }
        std::ofstream os(out_ / "timings.csv");
        os << "stage,seconds\n";
        for (int s = 0; s < kStageCount; ++s) {
            if (stats_[static_cast<std::size_t>(s)].is_null()) continue;
            os << kStageNames[static_cast<std::size_t>(s)] << ','
               << format_double(durations_[static_cast<std::size_t>(s)], "%.3f") << '\n';
        }
    }

    // ----- artifact loaders -----

    FoodTable load_foods() const {
        std::ifstream is(out_ / "foods.jsonl");
        if (!is) throw std::runtime_error("cannot open foods.jsonl");
        auto res = parse_food_database(is);
        return std::move(res.table);
    }

    LogTable load_logs(const FoodTable& foods) const {
        std::ifstream is(out_ / "logs.csv");
        if (!is) throw std::runtime_error("cannot open logs.csv");
        auto res = parse_food_logs(is, foods);
        return std::move(res.logs);
    }

    MealTable load_meals() const {
        std::ifstream is(out_ / "meals.tsv");
        if (!is) throw std::runtime_error("cannot open meals.tsv");
        MealTable meals;
        std::string line;
        while (std::getline(is, line)) {
            if (trim(line).empty()) continue;
            auto f = pipedetail::split_tsv(line);
            if (f.size() != 5) throw std::runtime_error("malformed meals.tsv row");
            Meal m;
            m.meal_id = f[0];
            m.user_id = f[1];
            auto date = Date::parse(f[2]);
            auto tag = parse_meal_tag(f[3]);
            if (!date || !tag) throw std::runtime_error("malformed meals.tsv row: " + f[0]);
            m.date = *date;
            m.meal_tag = *tag;
            m.items = pipedetail::split_space(f[4]);
            meals.push_back(std::move(m));
        }
        return meals;
    }

    std::vector<TokenDocument> load_token_docs(const std::filesystem::path& path,
                                               std::vector<std::string>* user_ids = nullptr) const {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("cannot open " + path.string());
        std::vector<TokenDocument> docs;
        std::string line;
        while (std::getline(is, line)) {
            if (trim(line).empty()) continue;
            auto f = pipedetail::split_tsv(line);
            if (f.size() != 3) throw std::runtime_error("malformed document row in " + path.string());
            docs.push_back({f[0], pipedetail::split_space(f[2])});
            if (user_ids) user_ids->push_back(f[1]);
        }
        return docs;
    }

    // Log-entry frequency per food id over accepted logs.
    static std::map<std::string, std::int64_t> food_frequencies(const LogTable& logs) {
        std::map<std::string, std::int64_t> freq;
        for (const auto& e : logs) ++freq[e.food_id];
        return freq;
    }

    // ----- stages -----

    void stage_parse() {
        std::ifstream db(cfg_.food_db);
        if (!db) throw std::runtime_error("cannot open food_db: " + cfg_.food_db);
        auto food_res = parse_food_database(db);
        std::ifstream lg(cfg_.food_log);
        if (!lg) throw std::runtime_error("cannot open food_log: " + cfg_.food_log);
        auto log_res = parse_food_logs(lg, food_res.table);
        MealTable meals = assemble_meals(log_res.logs);

        {
            std::ofstream os(out_ / "foods.jsonl");
            for (const auto& f : food_res.table.foods) {
                nlohmann::json obj;
                obj["food_id"] = f.food_id;
                obj["name"] = f.name;
                obj["calories"] = f.calories;
                for (int j = 0; j < kNutrientCount; ++j) {
                    const auto js = static_cast<std::size_t>(j);
                    if (f.nutrients.present[js]) obj[kNutrientNames[js]] = f.nutrients.value[js];
                }
                os << obj.dump() << '\n';
            }
        }
        {
            std::ofstream os(out_ / "logs.csv");
            os << "user_id,date,meal_tag,food_id,portions\n";
            for (const auto& e : log_res.logs) {
                os << e.user_id << ',' << e.date.to_string() << ',' << to_string(e.meal_tag) << ','
                   << e.food_id << ',' << format_double(e.portions, "%.17g") << '\n';
            }
        }
        {
            std::ofstream os(out_ / "meals.tsv");
            for (const auto& m : meals) {
                os << m.meal_id << '\t' << m.user_id << '\t' << m.date.to_string() << '\t'
                   << to_string(m.meal_tag) << '\t';
                for (std::size_t i = 0; i < m.items.size(); ++i) {
                    if (i) os << ' ';
                    os << m.items[i];
                }
                os << '\n';
            }
        }

        auto report_json = [](const ParseReport& r, std::size_t cap = 1000) {
            nlohmann::json j;
            j["accepted"] = r.accepted;
            j["rejected"] = r.rejected;
            j["reject_reasons"] = r.reject_reasons;
            nlohmann::json diags = nlohmann::json::array();
            for (std::size_t i = 0; i < r.diagnostics.size() && i < cap; ++i) diags.push_back(r.diagnostics[i]);
            j["diagnostics"] = diags;
            j["diagnostics_truncated"] = r.diagnostics.size() > cap;
            return j;
        };
        std::set<std::string> users;
        for (const auto& e : log_res.logs) users.insert(e.user_id);
        auto freq = food_frequencies(log_res.logs);

        nlohmann::json report;
        report["food_db"] = report_json(food_res.report);
        report["food_log"] = report_json(log_res.report);
        {
            std::ofstream os(out_ / "parse_report.json");
            os << report.dump(2) << '\n';
        }

        nlohmann::json stats;
        stats["accepted_foods"] = food_res.report.accepted;
        stats["rejected_foods"] = food_res.report.rejected;
        stats["accepted_logs"] = log_res.report.accepted;
        stats["rejected_logs"] = log_res.report.rejected;
        stats["meals"] = meals.size();
        stats["users"] = users.size();
        stats["logged_foods"] = freq.size();
        stats["unlogged_foods"] = food_res.table.size() - freq.size();
        stats_[0] = stats;
    }

    // Foods referenced by at least one accepted log entry, in food-table
    // order. The embedding population at the food level: a food never logged
    // contributes neither names nor a point to cluster.
    std::vector<const FoodEntry*> logged_foods(const FoodTable& foods,
                                               const std::map<std::string, std::int64_t>& freq) const {
        std::vector<const FoodEntry*> out;
        out.reserve(freq.size());
        for (const auto& f : foods.foods)
            if (freq.count(f.food_id)) out.push_back(&f);
        return out;
    }

    void stage_name_embedding() {
        FoodTable foods = load_foods();
        LogTable logs = load_logs(foods);
        auto freq = food_frequencies(logs);
        auto population = logged_foods(foods, freq);

        std::vector<std::vector<std::string>> docs;
        docs.reserve(population.size());
        for (const FoodEntry* f : population) docs.push_back(tokenize(f->name));

        WordVectorTable table = train_word_vectors(docs, cfg_.name_embed);

        VectorTable vectors;
        vectors.dim = table.dim;
        for (std::size_t i = 0; i < table.vocab.size(); ++i)
            vectors.add(table.vocab.tokens[i], table.vector_of(static_cast<std::int32_t>(i)));
        vectors.save(out_ / "name_vectors.nvec");
        {
            std::ofstream os(out_ / "name_token_counts.txt");
            for (std::size_t i = 0; i < table.vocab.size(); ++i)
                os << table.vocab.tokens[i] << ' ' << table.vocab.counts[i] << '\n';
        }

        nlohmann::json stats;
        stats["names"] = docs.size();
        stats["vocab_size"] = table.vocab.size();
        stats["dim"] = table.dim;
        stats_[1] = stats;
    }

    void stage_food_vectors() {
        FoodTable foods = load_foods();
        LogTable logs = load_logs(foods);
        auto freq = food_frequencies(logs);
        auto population = logged_foods(foods, freq);
        VectorTable names = VectorTable::load(out_ / "name_vectors.nvec");

        PerCalorieStats pc = fit_per_calorie_medians(population, cfg_.calorie_floor);
        std::vector<std::array<double, kNutrientCount>> rows;
        std::vector<bool> blind(population.size(), false);
        rows.reserve(population.size());
        for (std::size_t i = 0; i < population.size(); ++i) {
            bool b = false;
            rows.push_back(per_calorie(population[i]->nutrients, population[i]->calories, pc, &b));
            blind[i] = b;
        }
        RobustScaler scaler = fit_robust_scaler(rows, cfg_.calorie_floor, cfg_.winsor_c);
        scaler.save(out_ / "scaler.txt");

        VectorTable food_vectors;
        std::size_t oov_count = 0;
        std::size_t blind_count = 0;
        std::vector<float> name_vec(names.dim);
        std::ofstream meta(out_ / "food_meta.csv");
        meta << "food_id,frequency,oov,nutrient_blind\n";
        for (std::size_t i = 0; i < population.size(); ++i) {
            const FoodEntry* f = population[i];
            auto tokens = tokenize(f->name);
            std::fill(name_vec.begin(), name_vec.end(), 0.0f);
            std::vector<double> acc(names.dim, 0.0);
            int hits = 0;
            for (const auto& tok : tokens) {
                const float* row = names.find(tok);
                if (!row) continue;
                for (std::uint32_t d = 0; d < names.dim; ++d) acc[d] += row[d];
                ++hits;
            }
            const bool oov = hits == 0;
            if (!oov)
                for (std::uint32_t d = 0; d < names.dim; ++d)
                    name_vec[d] = static_cast<float>(acc[d] / hits);
            if (oov) ++oov_count;
            if (blind[i]) ++blind_count;

            auto winsorized = standardize_winsorize(rows[i], scaler, cfg_.winsor_c);
            auto composite = compose_food_vector(name_vec, winsorized, cfg_.block_weights);
            food_vectors.add(f->food_id, composite);
            meta << f->food_id << ',' << freq.at(f->food_id) << ',' << (oov ? 1 : 0) << ','
                 << (blind[i] ? 1 : 0) << '\n';
        }
        food_vectors.save(out_ / "food_vectors.nvec");

        nlohmann::json stats;
        stats["foods"] = population.size();
        stats["oov_names"] = oov_count;
        stats["nutrient_blind"] = blind_count;
        stats_[2] = stats;
    }

    struct LoadedPoints {
        std::vector<std::string> ids;
        std::vector<double> data;
        std::size_t dim = 0;
    };

    static LoadedPoints to_points(const VectorTable& table) {
        LoadedPoints pts;
        pts.ids = table.keys;
        pts.dim = table.dim;
        pts.data.assign(table.data.begin(), table.data.end());
        return pts;
    }

    nlohmann::json cluster_level(const std::filesystem::path& vectors_path,
                                 const std::filesystem::path& centroids_path,
                                 const std::filesystem::path& assign_path, int k, std::uint64_t seed,
                                 const std::vector<double>* weights_opt) {
        VectorTable table = VectorTable::load(vectors_path);
        LoadedPoints pts = to_points(table);
        const std::size_t n = pts.ids.size();
        std::vector<double> weights = weights_opt ? *weights_opt : std::vector<double>(n, 1.0);

        ClusterConfig cc{.k = k, .max_iterations = cfg_.cluster_max_iterations, .tol = cfg_.cluster_tol,
                         .seed = seed, .n_init = cfg_.cluster_n_init, .batch_size = cfg_.cluster_batch_size};
        Clustering clustering = kmeans_fit(pts.data, n, pts.dim, weights, cc);

        // Persist centroids as float rows, then record squared distances to
        // the persisted values so downstream consumers see a self-consistent
        // pair of files.
        VectorTable centroids;
        centroids.dim = static_cast<std::uint32_t>(pts.dim);
        std::vector<float> row(pts.dim);
        for (int j = 0; j < clustering.k; ++j) {
            for (std::size_t d = 0; d < pts.dim; ++d)
                row[d] = static_cast<float>(clustering.centroids[static_cast<std::size_t>(j) * pts.dim + d]);
            centroids.add(std::to_string(j), row);
        }
        centroids.save(centroids_path);

        std::vector<pipedetail::AssignRow> rows(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto a = static_cast<std::size_t>(clustering.assignment[i]);
            const float* c = centroids.data.data() + a * pts.dim;
            double d2 = 0.0;
            for (std::size_t d = 0; d < pts.dim; ++d) {
                const double diff = pts.data[i * pts.dim + d] - static_cast<double>(c[d]);
                d2 += diff * diff;
            }
            rows[i] = {pts.ids[i], clustering.assignment[i], d2};
        }
        pipedetail::write_assignments(assign_path, rows);

        nlohmann::json stats;
        stats["points"] = n;
        stats["k"] = clustering.k;
        stats["objective"] = clustering.objective;
        stats["iterations"] = clustering.iterations;
        return stats;
    }

    void stage_food_clustering() {
        std::optional<std::vector<double>> weights;
        if (cfg_.point_weighting == "frequency") {
            VectorTable table = VectorTable::load(out_ / "food_vectors.nvec");
            std::map<std::string, double> freq;
            std::ifstream is(out_ / "food_meta.csv");
            std::string line;
            bool header = true;
            while (std::getline(is, line)) {
                if (header) {
                    header = false;
                    continue;
                }
                if (trim(line).empty()) continue;
                auto f = split_csv_line(line);
                freq[f[0]] = std::stod(f[1]);
            }
            std::vector<double> w;
            w.reserve(table.keys.size());
            for (const auto& id : table.keys) w.push_back(freq.at(id));
            weights = std::move(w);
        }
        stats_[3] = cluster_level(out_ / "food_vectors.nvec", out_ / "food_centroids.nvec",
                                  out_ / "food_assign.csv", cfg_.k_food_eff(),
                                  *cfg_.cluster_seed_food, weights ? &*weights : nullptr);
    }

    void stage_food_naming() {
        FoodTable foods = load_foods();
        auto rows = pipedetail::read_assignments(out_ / "food_assign.csv");
        const int k = cfg_.k_food_eff();
        std::vector<ClusterDocument> docs(static_cast<std::size_t>(k));
        for (int j = 0; j < k; ++j) docs[static_cast<std::size_t>(j)].cluster_id = std::to_string(j);
        for (const auto& r : rows) {
            const FoodEntry* f = foods.find(r.point_id);
            if (!f) throw std::runtime_error("assignment references unknown food: " + r.point_id);
            docs[static_cast<std::size_t>(r.cluster)].add_member_text(tokenize(f->name));
        }
        auto names = name_clusters(docs);
        pipedetail::write_names_csv(out_ / "food_names.csv", names);

        std::size_t unnamed = 0;
        for (const auto& n : names)
            if (n.top_terms.empty()) ++unnamed;
        nlohmann::json stats;
        stats["clusters"] = names.size();
        stats["unnamed"] = unnamed;
        stats_[4] = stats;
    }

    void stage_meal_docs() {
        MealTable meals = load_meals();
        auto rows = pipedetail::read_assignments(out_ / "food_assign.csv");
        std::map<std::string, std::string> word_of;
        for (const auto& r : rows) word_of[r.point_id] = std::to_string(r.cluster);

        std::ofstream os(out_ / "meal_docs.tsv");
        for (const auto& m : meals) {
            os << m.meal_id << '\t' << m.user_id << '\t';
            for (std::size_t i = 0; i < m.items.size(); ++i) {
                auto it = word_of.find(m.items[i]);
                if (it == word_of.end())
                    throw std::runtime_error("meal item without food word: " + m.items[i]);
                if (i) os << ' ';
                os << it->second;
            }
            os << '\n';
        }
        nlohmann::json stats;
        stats["documents"] = meals.size();
        stats_[5] = stats;
    }

    nlohmann::json embed_level(const std::filesystem::path& docs_path,
                               const std::filesystem::path& vectors_path, const EmbedConfig& cfg) {
        auto docs = load_token_docs(docs_path);
        DbowModel model = train_dbow(docs, cfg);
        model.to_table().save(vectors_path);

        nlohmann::json stats;
        stats["documents"] = model.doc_ids.size();
        stats["excluded"] = model.excluded.size();
        stats["vocab_size"] = model.vocab.size();
        stats["dim"] = model.dim;
        if (!model.excluded.empty()) {
            nlohmann::json sample = nlohmann::json::array();
            for (std::size_t i = 0; i < model.excluded.size() && i < 20; ++i)
                sample.push_back(model.excluded[i]);
            stats["excluded_sample"] = sample;
        }
        return stats;
    }

    void stage_meal_embedding() {
        stats_[6] = embed_level(out_ / "meal_docs.tsv", out_ / "meal_vectors.nvec", cfg_.meal_embed);
    }

    void stage_meal_clustering() {
        stats_[7] = cluster_level(out_ / "meal_vectors.nvec", out_ / "meal_centroids.nvec",
                                  out_ / "meal_assign.csv", cfg_.k_meal_eff(),
                                  *cfg_.cluster_seed_meal, nullptr);
    }

    void stage_meal_naming() {
        auto meal_docs = load_token_docs(out_ / "meal_docs.tsv");
        auto rows = pipedetail::read_assignments(out_ / "meal_assign.csv");
        auto food_display = pipedetail::read_display_names(out_ / "food_names.csv");
        std::map<std::string, std::int32_t> cluster_of;
        for (const auto& r : rows) cluster_of[r.point_id] = r.cluster;

        const int k = cfg_.k_meal_eff();
        std::vector<ClusterDocument> docs(static_cast<std::size_t>(k));
        for (int j = 0; j < k; ++j) docs[static_cast<std::size_t>(j)].cluster_id = std::to_string(j);
        for (const auto& d : meal_docs) {
            auto it = cluster_of.find(d.doc_id);
            if (it == cluster_of.end()) continue;  // document excluded at embedding
            auto& doc = docs[static_cast<std::size_t>(it->second)];
            for (const auto& token : d.tokens) {
                auto name_it = food_display.find(token);
                const std::string& display = name_it == food_display.end() ? "unnamed" : name_it->second;
                doc.add_member_text(tokenize(display));
            }
        }
        auto names = name_clusters(docs);
        pipedetail::write_names_csv(out_ / "meal_names.csv", names);

        nlohmann::json stats;
        stats["clusters"] = names.size();
        stats_[8] = stats;
    }

    void stage_diet_docs() {
        MealTable meals = load_meals();
        auto rows = pipedetail::read_assignments(out_ / "meal_assign.csv");
        std::map<std::string, std::string> word_of;
        for (const auto& r : rows) word_of[r.point_id] = std::to_string(r.cluster);

        auto diets = assemble_diets(meals, word_of);
        std::ofstream os(out_ / "diet_docs.tsv");
        for (const auto& d : diets) {
            os << d.user_id << '\t' << d.user_id << '\t';
            for (std::size_t i = 0; i < d.tokens.size(); ++i) {
                if (i) os << ' ';
                os << d.tokens[i];
            }
            os << '\n';
        }
        nlohmann::json stats;
        stats["documents"] = diets.size();
        stats_[9] = stats;
    }

    void stage_diet_embedding() {
        stats_[10] = embed_level(out_ / "diet_docs.tsv", out_ / "diet_vectors.nvec", cfg_.diet_embed);
    }

    void stage_diet_clustering() {
        stats_[11] = cluster_level(out_ / "diet_vectors.nvec", out_ / "diet_centroids.nvec",
                                   out_ / "diet_assign.csv", cfg_.k_diet_eff(),
                                   *cfg_.cluster_seed_diet, nullptr);
    }

    void stage_diet_naming() {
        auto diet_docs = load_token_docs(out_ / "diet_docs.tsv");
        auto rows = pipedetail::read_assignments(out_ / "diet_assign.csv");
        auto meal_display = pipedetail::read_display_names(out_ / "meal_names.csv");
        std::map<std::string, std::int32_t> cluster_of;
        for (const auto& r : rows) cluster_of[r.point_id] = r.cluster;

        const int k = cfg_.k_diet_eff();
        std::vector<ClusterDocument> docs(static_cast<std::size_t>(k));
        for (int j = 0; j < k; ++j) docs[static_cast<std::size_t>(j)].cluster_id = std::to_string(j);
        for (const auto& d : diet_docs) {
            auto it = cluster_of.find(d.doc_id);
            if (it == cluster_of.end()) continue;
            auto& doc = docs[static_cast<std::size_t>(it->second)];
            for (const auto& token : d.tokens) {
                auto name_it = meal_display.find(token);
                const std::string& display = name_it == meal_display.end() ? "unnamed" : name_it->second;
                doc.add_member_text(tokenize(display));
            }
        }
        auto names = name_clusters(docs);
        pipedetail::write_names_csv(out_ / "diet_names.csv", names);

        nlohmann::json stats;
        stats["clusters"] = names.size();
        stats_[12] = stats;
    }

    void stage_reports() {
        std::filesystem::create_directories(out_ / "reports");

        // Fig. 2 style: per food word, centroid nutrients in
        // median-deviation units.
        {
            VectorTable centroids = VectorTable::load(out_ / "food_centroids.nvec");
            auto rows = pipedetail::read_assignments(out_ / "food_assign.csv");
            auto display = pipedetail::read_display_names(out_ / "food_names.csv");
            const int k = static_cast<int>(centroids.rows());
            std::vector<std::size_t> members(static_cast<std::size_t>(k), 0);
            for (const auto& r : rows) ++members[static_cast<std::size_t>(r.cluster)];
            std::vector<std::string> names(static_cast<std::size_t>(k));
            std::vector<double> cent(centroids.data.begin(), centroids.data.end());
            // centroid rows are keyed "0".."k-1" in insertion order
            for (int j = 0; j < k; ++j) {
                auto it = display.find(std::to_string(j));
                names[static_cast<std::size_t>(j)] = it == display.end() ? "unnamed" : it->second;
            }
            auto profiles = cluster_nutrient_profiles(cent, k, centroids.dim, cfg_.block_weights,
                                                      members, names);
            std::ofstream os(out_ / "reports" / "profiles.csv");
            os << "cluster_id,name,members,fat,carbs,protein,saturated_fat,cholesterol,sodium,fiber,sugar\n";
            for (const auto& p : profiles) {
                os << p.cluster_id << ',' << csv_escape(p.display_name) << ',' << p.members;
                for (int j = 0; j < kNutrientCount; ++j)
                    os << ',' << format_double(p.nutrients[static_cast<std::size_t>(j)], "%.12g");
                os << '\n';
            }
        }

        // Fig. 3 style: per diet word, member users' macro ratios and
        // summary quantiles.
        std::size_t reported_users = 0;
        std::size_t excluded_users = 0;
        {
            FoodTable foods = load_foods();
            LogTable logs = load_logs(foods);
            MacroReport macro = macro_ratios(logs, foods);
            excluded_users = macro.excluded_users;

            auto rows = pipedetail::read_assignments(out_ / "diet_assign.csv");
            std::map<std::int32_t, std::vector<std::pair<std::string, MacroRatio>>> by_word;
            for (const auto& r : rows) {
                auto it = macro.by_user.find(r.point_id);
                if (it == macro.by_user.end()) continue;
                by_word[r.cluster].emplace_back(r.point_id, it->second);
            }
            std::ofstream os(out_ / "reports" / "diet_macros.csv");
            os << "diet_word,user_id,fat_share,carb_share,protein_share\n";
            for (auto& [word, users] : by_word) {
                std::sort(users.begin(), users.end(),
                          [](const auto& a, const auto& b) { return a.first < b.first; });
                for (const auto& [user, m] : users) {
                    os << word << ',' << user << ',' << format_double(m.fat_share, "%.12g") << ','
                       << format_double(m.carb_share, "%.12g") << ','
                       << format_double(m.protein_share, "%.12g") << '\n';
                    ++reported_users;
                }
            }
            std::ofstream osq(out_ / "reports" / "diet_macros_summary.csv");
            osq << "diet_word,macro,p10,p50,p90\n";
            for (auto& [word, users] : by_word) {
                static constexpr const char* kMacros[3] = {"fat", "carbs", "protein"};
                for (int mi = 0; mi < 3; ++mi) {
                    std::vector<double> vals;
                    vals.reserve(users.size());
                    for (const auto& [user, m] : users) {
                        (void)user;
                        vals.push_back(mi == 0 ? m.fat_share : mi == 1 ? m.carb_share : m.protein_share);
                    }
                    auto q = macro_quantiles(std::move(vals));
                    osq << word << ',' << kMacros[mi] << ',' << format_double(q.p10, "%.12g") << ','
                        << format_double(q.p50, "%.12g") << ',' << format_double(q.p90, "%.12g") << '\n';
                }
            }
        }

        // Table 1 style: per meal word, top food-word terms.
        {
            std::ifstream is(out_ / "meal_names.csv");
            if (!is) throw std::runtime_error("cannot open meal_names.csv");
            std::ofstream os(out_ / "reports" / "meal_words.csv");
            os << "meal_word,rank,term,score\n";
            std::string line;
            bool header = true;
            while (std::getline(is, line)) {
                if (header) {
                    header = false;
                    continue;
                }
                if (trim(line).empty()) continue;
                auto f = split_csv_line(line);
                os << f[0] << ',' << f[1] << ',' << csv_escape(f[2]) << ',' << f[3] << '\n';
            }
        }

        nlohmann::json stats;
        stats["reported_users"] = reported_users;
        stats["macro_excluded_users"] = excluded_users;
        stats_[13] = stats;
    }
};

inline PipelineConfig Pipeline::config_from_manifest(const nlohmann::json& manifest) {
    const auto& c = manifest["config"];
    auto get = [&c](const char* key) { return c[key].get<std::string>(); };
    PipelineConfig cfg;
    cfg.food_db = get("food_db");
    cfg.food_log = get("food_log");
    cfg.out_dir = get("out_dir");
    cfg.seed = std::stoull(get("seed"));
    cfg.point_weighting = get("point_weighting");
    cfg.k_food = std::stoi(get("k_food"));
    cfg.k_meal = std::stoi(get("k_meal"));
    cfg.k_diet = std::stoi(get("k_diet"));
    cfg.scale_factor = std::stod(get("scale_factor"));
    cfg.block_weights.name = std::stod(get("weight_name"));
    cfg.block_weights.nutrient = std::stod(get("weight_nutrient"));
    cfg.block_weights.per_dimension_normalization = get("per_dimension_normalization") == "true";
    cfg.winsor_c = std::stod(get("winsor_c"));
    cfg.calorie_floor = std::stod(get("calorie_floor"));
    cfg.cluster_max_iterations = std::stoi(get("cluster.max_iterations"));
    cfg.cluster_tol = std::stod(get("cluster.tol"));
    cfg.cluster_n_init = std::stoi(get("cluster.n_init"));
    cfg.cluster_batch_size = std::stoi(get("cluster.batch_size"));
    cfg.cluster_seed_food = std::stoull(get("cluster.seed_food"));
    cfg.cluster_seed_meal = std::stoull(get("cluster.seed_meal"));
    cfg.cluster_seed_diet = std::stoull(get("cluster.seed_diet"));
    auto embed = [&c](const std::string& prefix, EmbedConfig& e, bool& seed_set) {
        e.dim = std::stoi(c[prefix + ".dim"].get<std::string>());
        e.negative = std::stoi(c[prefix + ".negative"].get<std::string>());
        e.epochs = std::stoi(c[prefix + ".epochs"].get<std::string>());
        e.alpha = std::stod(c[prefix + ".alpha"].get<std::string>());
        e.min_count = std::stoi(c[prefix + ".min_count"].get<std::string>());
        e.subsample = std::stod(c[prefix + ".subsample"].get<std::string>());
        e.seed = std::stoull(c[prefix + ".seed"].get<std::string>());
        e.threads = std::stoi(c[prefix + ".threads"].get<std::string>());
        seed_set = true;
    };
    embed("name_embed", cfg.name_embed, cfg.name_embed_seed_set);
    embed("meal_embed", cfg.meal_embed, cfg.meal_embed_seed_set);
    embed("diet_embed", cfg.diet_embed, cfg.diet_embed_seed_set);
    return cfg;
}

inline PipelineOutput run_pipeline(const PipelineConfig& cfg) {
    Pipeline p(cfg);
    return p.run();
}

inline PipelineOutput resume_pipeline(Stage from, const PipelineConfig& cfg) {
    Pipeline p(cfg);
    return p.resume(from);
}

}  // namespace dietlex
