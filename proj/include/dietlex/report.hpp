#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dietlex/food_vector.hpp"
#include "dietlex/types.hpp"

namespace dietlex {

// Atwater energy factors, kcal per gram.
inline constexpr double kKcalPerGramFat = 9.0;
inline constexpr double kKcalPerGramCarbs = 4.0;
inline constexpr double kKcalPerGramProtein = 4.0;

// Calorie shares of fat / carbs / protein; shares sum to 1.
struct MacroRatio {
    double fat_share = 0.0;
    double carb_share = 0.0;
    double protein_share = 0.0;
};

// Average daily macro ratio of one user: per-day calorie shares from
// portion-scaled grams, then the mean across days. Entries missing all three
// macros are excluded; days with zero macro energy are unusable. Returns
// nothing when no day is usable.
inline std::optional<MacroRatio> user_macro_ratio(const std::vector<const FoodLogEntry*>& entries,
                                                  const FoodTable& foods) {
    std::map<Date, std::array<double, 3>> day_energy;
    for (const FoodLogEntry* e : entries) {
        const FoodEntry* food = foods.find(e->food_id);
        if (!food) continue;
        const auto& nut = food->nutrients;
        const bool has_macro = nut.present[kFat] || nut.present[kCarbs] || nut.present[kProtein];
        if (!has_macro) continue;
        auto& acc = day_energy[e->date];
        if (nut.present[kFat]) acc[0] += e->portions * nut.value[kFat] * kKcalPerGramFat;
        if (nut.present[kCarbs]) acc[1] += e->portions * nut.value[kCarbs] * kKcalPerGramCarbs;
        if (nut.present[kProtein]) acc[2] += e->portions * nut.value[kProtein] * kKcalPerGramProtein;
    }

    std::array<double, 3> mean{};
    int days = 0;
    for (const auto& [date, acc] : day_energy) {
        const double total = acc[0] + acc[1] + acc[2];
        if (total <= 0.0) continue;
        mean[0] += acc[0] / total;
        mean[1] += acc[1] / total;
        mean[2] += acc[2] / total;
        ++days;
    }
    if (days == 0) return std::nullopt;
    return MacroRatio{mean[0] / days, mean[1] / days, mean[2] / days};
}

struct MacroReport {
    std::map<std::string, MacroRatio> by_user;  // deterministic user order
    std::size_t excluded_users = 0;
};

inline MacroReport macro_ratios(const LogTable& logs, const FoodTable& foods) {
    std::map<std::string, std::vector<const FoodLogEntry*>> by_user;
    for (const auto& e : logs) by_user[e.user_id].push_back(&e);
    MacroReport report;
    for (const auto& [user, entries] : by_user) {
        auto ratio = user_macro_ratio(entries, foods);
        if (ratio) report.by_user.emplace(user, *ratio);
        else ++report.excluded_users;
    }
    return report;
}

// Nutrient portion of a food-word centroid in median-deviation units, with
// the automatically derived display name and member count.
struct ClusterProfile {
    std::string cluster_id;
    std::string display_name;
    std::size_t members = 0;
    std::array<double, kNutrientCount> nutrients{};
};

// Unscales the nutrient block of composite centroids back to
// median-deviation units. Convexity keeps every value inside the
// winsorization bound. A zero nutrient weight leaves no nutrient signal in
// the centroid, so the profile degrades to zeros.
inline std::vector<ClusterProfile> cluster_nutrient_profiles(
    const std::vector<double>& centroids, int k, std::size_t dim, const BlockWeights& weights,
    const std::vector<std::size_t>& member_counts, const std::vector<std::string>& display_names) {
    const std::size_t name_dim = dim - kNutrientCount;
    const double scale = weights.nutrient_scale();
    std::vector<ClusterProfile> profiles;
    profiles.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        const auto js = static_cast<std::size_t>(j);
        ClusterProfile p;
        p.cluster_id = std::to_string(j);
        p.display_name = display_names[js];
        p.members = member_counts[js];
        for (int i = 0; i < kNutrientCount; ++i) {
            const double v = centroids[js * dim + name_dim + static_cast<std::size_t>(i)];
            p.nutrients[static_cast<std::size_t>(i)] = scale > 0.0 ? v / scale : 0.0;
        }
        profiles.push_back(std::move(p));
    }
    std::sort(profiles.begin(), profiles.end(), [](const ClusterProfile& a, const ClusterProfile& b) {
        if (a.members != b.members) return a.members > b.members;
        return a.cluster_id < b.cluster_id;
    });
    return profiles;
}

// Linear-interpolation quantile over a sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    if (sorted.size() == 1) return sorted[0];
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

struct MacroQuantiles {
    double p10 = 0.0;
    double p50 = 0.0;
    double p90 = 0.0;
};

inline MacroQuantiles macro_quantiles(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return {quantile_sorted(values, 0.10), quantile_sorted(values, 0.50), quantile_sorted(values, 0.90)};
}

}  // namespace dietlex
