#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dietlex/csv.hpp"
#include "dietlex/rng.hpp"
#include "dietlex/types.hpp"

namespace dietlex {

// Desk-scale stand-in for a production food-log corpus: plants food
// archetypes (distinct nutrient profiles and name-token pools), meal
// templates (distinct archetype multisets) and diet groups (disjoint
// template mixtures ordered by carbohydrate share), and returns the hidden
// labels so recovery can be scored.
struct SyntheticSpec {
    int n_food_archetypes = 10;
    int foods_per_archetype = 200;
    int n_meal_templates = 20;
    int n_users = 200;
    int days_per_user = 21;
    int n_diet_groups = 4;
    double name_noise_rate = 0.1;      // probability a name token is replaced by noise
    double nutrient_noise_scale = 0.15;  // relative nutrient/calorie jitter
    double meal_noise_rate = 0.05;     // probability a meal gains one off-template food
    std::uint64_t rng_seed = 1;

    void validate() const {
        if (n_food_archetypes < 1 || foods_per_archetype < 1 || n_meal_templates < 1 ||
            n_users < 1 || days_per_user < 1 || n_diet_groups < 1)
            throw std::invalid_argument("synthetic: all counts must be positive");
        if (name_noise_rate < 0.0 || name_noise_rate > 1.0)
            throw std::invalid_argument("synthetic: name_noise_rate must be in [0,1]");
        if (meal_noise_rate < 0.0 || meal_noise_rate > 1.0)
            throw std::invalid_argument("synthetic: meal_noise_rate must be in [0,1]");
        if (nutrient_noise_scale < 0.0)
            throw std::invalid_argument("synthetic: nutrient_noise_scale must be >= 0");
        if (n_meal_templates < n_diet_groups)
            throw std::invalid_argument("synthetic: need at least one template per diet group");
    }

    static SyntheticSpec from_file(const std::filesystem::path& path);
};

struct SyntheticLabels {
    std::map<std::string, int> food_archetype;
    std::map<std::string, int> meal_template;
    std::map<std::string, int> user_group;
};

struct SyntheticCorpus {
    FoodTable foods;
    LogTable logs;
    SyntheticLabels labels;
    // Planted structure, exposed for tests.
    std::vector<std::array<double, 3>> archetype_macro_shares;  // fat/carb/protein
    std::vector<std::vector<int>> template_slots;               // archetype multiset per template
    std::vector<std::vector<int>> group_templates;              // template ids per diet group
};

namespace synthdetail {

inline std::string make_word(Rng& rng) {
    static const char* consonants = "bcdfghklmnprstvz";
    static const char* vowels = "aeiou";
    const int syllables = 2 + static_cast<int>(rng.below(3));
    std::string w;
    for (int s = 0; s < syllables; ++s) {
        w += consonants[rng.below(16)];
        w += vowels[rng.below(5)];
    }
    return w;
}

inline std::string fresh_word(Rng& rng, std::set<std::string>& used) {
    for (;;) {
        std::string w = make_word(rng);
        if (used.insert(w).second) return w;
    }
}

inline double round_to(double v, double unit) { return std::round(v / unit) * unit; }

}  // namespace synthdetail

inline SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.rng_seed);
    SyntheticCorpus corpus;

    const int A = spec.n_food_archetypes;
    const int T = spec.n_meal_templates;
    const int G = spec.n_diet_groups;

    // Name-token pools: distinct words per archetype plus a shared noise pool.
    std::set<std::string> used_words;
    std::vector<std::vector<std::string>> pools(static_cast<std::size_t>(A));
    for (auto& pool : pools)
        for (int w = 0; w < 8; ++w) pool.push_back(synthdetail::fresh_word(rng, used_words));
    std::vector<std::string> noise_pool;
    for (int w = 0; w < 40; ++w) noise_pool.push_back(synthdetail::fresh_word(rng, used_words));

    // Archetype nutrient profiles per 100 kcal. Carbohydrate share ramps
    // across archetypes so templates and diet groups inherit a macro
    // ordering; the top-carb archetype is also the high-sugar one.
    struct Profile {
        std::array<double, kNutrientCount> per100{};
        double base_calories = 0.0;
    };
    std::vector<Profile> profiles(static_cast<std::size_t>(A));
    for (int a = 0; a < A; ++a) {
        const double carb_share = A == 1 ? 0.45 : 0.08 + 0.74 * static_cast<double>(a) / (A - 1);
        const double fat_frac = rng.uniform(0.30, 0.70);
        const double fat_share = (1.0 - carb_share) * fat_frac;
        const double protein_share = 1.0 - carb_share - fat_share;
        auto& p = profiles[static_cast<std::size_t>(a)];
        p.per100[kFat] = 100.0 * fat_share / 9.0;
        p.per100[kCarbs] = 100.0 * carb_share / 4.0;
        p.per100[kProtein] = 100.0 * protein_share / 4.0;
        p.per100[kSaturatedFat] = p.per100[kFat] * rng.uniform(0.2, 0.6);
        p.per100[kCholesterol] = rng.uniform(0.0, 120.0);
        p.per100[kSodium] = rng.uniform(30.0, 500.0);
        p.per100[kFiber] = p.per100[kCarbs] * rng.uniform(0.02, 0.25);
        p.per100[kSugar] = p.per100[kCarbs] * (a == A - 1 ? rng.uniform(0.7, 0.9) : rng.uniform(0.05, 0.6));
        p.base_calories = rng.uniform(100.0, 500.0);
        corpus.archetype_macro_shares.push_back({fat_share, carb_share, protein_share});
    }

    // Foods.
    std::vector<std::vector<std::string>> foods_of(static_cast<std::size_t>(A));
    for (int a = 0; a < A; ++a) {
        const auto& p = profiles[static_cast<std::size_t>(a)];
        for (int i = 0; i < spec.foods_per_archetype; ++i) {
            FoodEntry food;
            char idbuf[24];
            std::snprintf(idbuf, sizeof(idbuf), "f%06d", a * spec.foods_per_archetype + i);
            food.food_id = idbuf;

            double calories = p.base_calories * (1.0 + spec.nutrient_noise_scale * rng.uniform(-1.0, 1.0));
            calories = std::max(20.0, synthdetail::round_to(calories, 0.1));
            food.calories = calories;
            for (int j = 0; j < kNutrientCount; ++j) {
                const auto js = static_cast<std::size_t>(j);
                double g = p.per100[js] * calories / 100.0;
                g *= std::max(0.0, 1.0 + spec.nutrient_noise_scale * rng.gaussian());
                food.nutrients.set(j, synthdetail::round_to(g, 0.001));
            }

            const int n_tok = 2 + static_cast<int>(rng.below(3));
            const auto& pool = pools[static_cast<std::size_t>(a)];
            std::vector<std::size_t> picks;
            while (picks.size() < static_cast<std::size_t>(n_tok)) {
                std::size_t cand = rng.below(pool.size());
                if (std::find(picks.begin(), picks.end(), cand) == picks.end()) picks.push_back(cand);
            }
            std::string name;
            for (std::size_t t = 0; t < picks.size(); ++t) {
                std::string tok = rng.bernoulli(spec.name_noise_rate)
                                      ? noise_pool[rng.below(noise_pool.size())]
                                      : pool[picks[t]];
                if (rng.bernoulli(0.5)) tok[0] = static_cast<char>(tok[0] - 'a' + 'A');
                if (t) name += ' ';
                name += tok;
            }
            food.name = name;

            corpus.labels.food_archetype[food.food_id] = a;
            foods_of[static_cast<std::size_t>(a)].push_back(food.food_id);
            corpus.foods.add(std::move(food));
        }
    }

    // Meal templates: distinct archetype multisets of size 2..5.
    std::set<std::vector<int>> seen_slots;
    for (int t = 0; t < T; ++t) {
        std::vector<int> slots;
        for (int attempt = 0; attempt < 1000; ++attempt) {
            slots.clear();
            const int size = 2 + static_cast<int>(rng.below(4));
            for (int s = 0; s < size; ++s) slots.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(A))));
            std::sort(slots.begin(), slots.end());
            if (seen_slots.insert(slots).second) break;
        }
        corpus.template_slots.push_back(slots);
    }

    // Diet groups: templates ranked by expected carbohydrate share, then
    // partitioned; group 0 is the low-carb mixture, the last group high-carb.
    std::vector<std::pair<double, int>> ranked;
    for (int t = 0; t < T; ++t) {
        double carb = 0.0;
        for (int a : corpus.template_slots[static_cast<std::size_t>(t)])
            carb += corpus.archetype_macro_shares[static_cast<std::size_t>(a)][1];
        ranked.emplace_back(carb / static_cast<double>(corpus.template_slots[static_cast<std::size_t>(t)].size()), t);
    }
    std::sort(ranked.begin(), ranked.end());
    corpus.group_templates.resize(static_cast<std::size_t>(G));
    for (int g = 0; g < G; ++g) {
        const int lo = g * T / G;
        const int hi = (g + 1) * T / G;
        for (int r = lo; r < hi; ++r)
            corpus.group_templates[static_cast<std::size_t>(g)].push_back(ranked[static_cast<std::size_t>(r)].second);
    }

    // Users and logs.
    static constexpr double kPortionChoices[6] = {0.5, 1.0, 1.0, 1.0, 1.5, 2.0};
    for (int u = 0; u < spec.n_users; ++u) {
        char ubuf[16];
        std::snprintf(ubuf, sizeof(ubuf), "u%04d", u);
        const std::string user_id = ubuf;
        const int group = u % G;
        corpus.labels.user_group[user_id] = group;
        const auto& templates = corpus.group_templates[static_cast<std::size_t>(group)];

        Date date{2024, 1, 1};
        for (int d = 0; d < spec.days_per_user; ++d) {
            for (MealTag tag : {MealTag::breakfast, MealTag::lunch, MealTag::dinner, MealTag::snacks}) {
                if (tag == MealTag::snacks && !rng.bernoulli(0.25)) continue;
                const int t = templates[rng.below(templates.size())];
                corpus.labels.meal_template[make_meal_id(user_id, date, tag)] = t;
                auto add_entry = [&](int archetype) {
                    const auto& ids = foods_of[static_cast<std::size_t>(archetype)];
                    FoodLogEntry e;
                    e.user_id = user_id;
                    e.date = date;
                    e.meal_tag = tag;
                    e.food_id = ids[rng.below(ids.size())];
                    e.portions = kPortionChoices[rng.below(6)];
                    corpus.logs.push_back(std::move(e));
                };
                for (int a : corpus.template_slots[static_cast<std::size_t>(t)]) add_entry(a);
                if (rng.bernoulli(spec.meal_noise_rate)) add_entry(static_cast<int>(rng.below(static_cast<std::uint64_t>(A))));
            }
            date = date.next();
        }
    }
    return corpus;
}

// Writes foods.jsonl, logs.csv and labels.csv in the exact formats the
// pipeline consumes.
inline void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream os(dir / "foods.jsonl");
        if (!os) throw std::runtime_error("cannot write foods.jsonl");
        for (const auto& f : corpus.foods.foods) {
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
        std::ofstream os(dir / "logs.csv");
        if (!os) throw std::runtime_error("cannot write logs.csv");
        os << "user_id,date,meal_tag,food_id,portions\n";
        for (const auto& e : corpus.logs) {
            os << e.user_id << ',' << e.date.to_string() << ',' << to_string(e.meal_tag) << ','
               << e.food_id << ',' << format_double(e.portions, "%.3g") << '\n';
        }
    }
    {
        std::ofstream os(dir / "labels.csv");
        if (!os) throw std::runtime_error("cannot write labels.csv");
        os << "kind,id,label\n";
        for (const auto& [id, label] : corpus.labels.food_archetype)
            os << "food," << id << ',' << label << '\n';
        for (const auto& [id, label] : corpus.labels.meal_template)
            os << "meal," << id << ',' << label << '\n';
        for (const auto& [id, label] : corpus.labels.user_group)
            os << "user," << id << ',' << label << '\n';
    }
}

inline SyntheticSpec SyntheticSpec::from_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open spec file: " + path.string());
    SyntheticSpec spec;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("spec line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        try {
            if (key == "n_food_archetypes") spec.n_food_archetypes = std::stoi(value);
            else if (key == "foods_per_archetype") spec.foods_per_archetype = std::stoi(value);
            else if (key == "n_meal_templates") spec.n_meal_templates = std::stoi(value);
            else if (key == "n_users") spec.n_users = std::stoi(value);
            else if (key == "days_per_user") spec.days_per_user = std::stoi(value);
            else if (key == "n_diet_groups") spec.n_diet_groups = std::stoi(value);
            else if (key == "name_noise_rate") spec.name_noise_rate = std::stod(value);
            else if (key == "nutrient_noise_scale") spec.nutrient_noise_scale = std::stod(value);
            else if (key == "meal_noise_rate") spec.meal_noise_rate = std::stod(value);
            else if (key == "rng_seed") spec.rng_seed = std::stoull(value);
            else throw std::runtime_error("unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw std::runtime_error("spec line " + std::to_string(line_no) + ": bad value for " + key);
        }
    }
    spec.validate();
    return spec;
}

}  // namespace dietlex
