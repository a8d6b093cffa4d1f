#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dietlex/csv.hpp"
#include "dietlex/types.hpp"

namespace dietlex {

// Lower median: for even counts, the smaller of the two middle elements.
// Mutates its argument (partial sort).
inline double lower_median(std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("median of empty set");
    const std::size_t mid = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    return v[mid];
}

// Population medians of the per-calorie nutrient dimensions, computed over
// present components only. Used to impute missing values before the robust
// scaler is fitted.
struct PerCalorieStats {
    std::array<double, kNutrientCount> median{};
    double calorie_floor = 1.0;  // epsilon guard for the per-calorie division
};

inline double per_calorie_component(double value, double calories, double floor) {
    return value / std::max(calories, floor);
}

inline const FoodEntry& deref(const FoodEntry& f) { return f; }
inline const FoodEntry& deref(const FoodEntry* f) { return *f; }

template <typename FoodRange>  // range of FoodEntry (or pointers to them)
PerCalorieStats fit_per_calorie_medians(const FoodRange& foods, double calorie_floor = 1.0) {
    PerCalorieStats stats;
    stats.calorie_floor = calorie_floor;
    for (int j = 0; j < kNutrientCount; ++j) {
        std::vector<double> col;
        for (const auto& f : foods) {
            const FoodEntry& food = deref(f);
            if (!food.nutrients.present[static_cast<std::size_t>(j)]) continue;
            col.push_back(per_calorie_component(food.nutrients.value[static_cast<std::size_t>(j)],
                                                food.calories, calorie_floor));
        }
        stats.median[static_cast<std::size_t>(j)] = col.empty() ? 0.0 : lower_median(col);
    }
    return stats;
}

// Converts per-portion nutrients to per-calorie amounts so the vector is
// invariant to portion size. Missing components are imputed with the
// population per-calorie median of that dimension; a food with every
// component missing is flagged nutrient-blind and gets the all-median
// profile.
inline std::array<double, kNutrientCount> per_calorie(const NutrientVector& nutrients, double calories,
                                                      const PerCalorieStats& stats,
                                                      bool* nutrient_blind = nullptr) {
    std::array<double, kNutrientCount> out{};
    bool any = false;
    for (int j = 0; j < kNutrientCount; ++j) {
        const auto js = static_cast<std::size_t>(j);
        if (nutrients.present[js]) {
            out[js] = per_calorie_component(nutrients.value[js], calories, stats.calorie_floor);
            any = true;
        } else {
            out[js] = stats.median[js];
        }
    }
    if (nutrient_blind) *nutrient_blind = !any;
    return out;
}

// Robust standardization parameters: per-dimension median m_j and median
// absolute deviation s_j. A constant dimension gets s_j = 1 so it
// contributes zero distance instead of NaN.
struct RobustScaler {
    std::array<double, kNutrientCount> median{};
    std::array<double, kNutrientCount> mad{};
    double calorie_floor = 1.0;
    double winsor_c = 2.5;

    void save(const std::filesystem::path& path) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot open for write: " + path.string());
        auto write_row = [&os](const std::array<double, kNutrientCount>& row) {
            for (int j = 0; j < kNutrientCount; ++j) {
                if (j) os << ' ';
                os << format_double(row[static_cast<std::size_t>(j)], "%.17g");
            }
            os << '\n';
        };
        write_row(median);
        write_row(mad);
        os << format_double(calorie_floor, "%.17g") << ' ' << format_double(winsor_c, "%.17g") << '\n';
    }

    static RobustScaler load(const std::filesystem::path& path) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("cannot open: " + path.string());
        RobustScaler s;
        for (int j = 0; j < kNutrientCount; ++j) is >> s.median[static_cast<std::size_t>(j)];
        for (int j = 0; j < kNutrientCount; ++j) is >> s.mad[static_cast<std::size_t>(j)];
        is >> s.calorie_floor >> s.winsor_c;
        if (!is) throw std::runtime_error("malformed scaler file: " + path.string());
        return s;
    }
};

inline RobustScaler fit_robust_scaler(const std::vector<std::array<double, kNutrientCount>>& rows,
                                      double calorie_floor = 1.0, double winsor_c = 2.5) {
    if (rows.size() < 2) throw std::invalid_argument("robust scaler needs at least 2 foods");
    RobustScaler s;
    s.calorie_floor = calorie_floor;
    s.winsor_c = winsor_c;
    std::vector<double> col(rows.size());
    for (int j = 0; j < kNutrientCount; ++j) {
        const auto js = static_cast<std::size_t>(j);
        for (std::size_t i = 0; i < rows.size(); ++i) col[i] = rows[i][js];
        s.median[js] = lower_median(col);
        for (std::size_t i = 0; i < rows.size(); ++i) col[i] = std::abs(rows[i][js] - s.median[js]);
        const double mad = lower_median(col);
        s.mad[js] = mad > 0.0 ? mad : 1.0;
    }
    return s;
}

// z_j = (x_j - m_j) / s_j clamped to [-c, +c]. The clamp absorbs the large
// per-calorie outliers of foods like vitamins (very low calories, high
// nutrient content).
inline std::array<double, kNutrientCount> standardize_winsorize(
    const std::array<double, kNutrientCount>& x, const RobustScaler& s, double c = 2.5) {
    std::array<double, kNutrientCount> z{};
    for (int j = 0; j < kNutrientCount; ++j) {
        const auto js = static_cast<std::size_t>(j);
        z[js] = std::clamp((x[js] - s.median[js]) / s.mad[js], -c, c);
    }
    return z;
}

// Relative weight of the name block versus the nutrient block in the
// composite food vector. With per-dimension normalization on, squared
// Euclidean distance on composites decomposes as
// w_name * (mean-per-dim name distance) + w_nutrient * (mean-per-dim
// nutrient distance), so downstream clustering can use plain Euclidean
// distance.
struct BlockWeights {
    double name = 0.2;
    double nutrient = 0.8;
    bool per_dimension_normalization = true;

    void validate() const {
        if (name < 0.0 || nutrient < 0.0) throw std::invalid_argument("block weights must be >= 0");
        if (std::abs(name + nutrient - 1.0) > 1e-9)
            throw std::invalid_argument("block weights must sum to 1");
    }

    double name_scale(std::size_t name_dim) const {
        return per_dimension_normalization ? std::sqrt(name / static_cast<double>(name_dim))
                                           : std::sqrt(name);
    }
    double nutrient_scale() const {
        return per_dimension_normalization ? std::sqrt(nutrient / static_cast<double>(kNutrientCount))
                                           : std::sqrt(nutrient);
    }
};

struct FoodVector {
    std::string food_id;
    std::vector<float> name_part;                     // raw name embedding, d reals
    std::array<double, kNutrientCount> nutrient_part{};  // winsorized, |z_j| <= c
    std::vector<float> composite;                     // (d + 8) reals after block weighting
    bool oov = false;
    bool nutrient_blind = false;
};

inline std::vector<float> compose_food_vector(std::span<const float> name_vec,
                                              const std::array<double, kNutrientCount>& winsorized,
                                              const BlockWeights& weights) {
    weights.validate();
    if (name_vec.empty()) throw std::invalid_argument("compose: empty name vector");
    std::vector<float> composite;
    composite.reserve(name_vec.size() + kNutrientCount);
    const double ns = weights.name_scale(name_vec.size());
    for (float v : name_vec) composite.push_back(static_cast<float>(ns * v));
    const double us = weights.nutrient_scale();
    for (int j = 0; j < kNutrientCount; ++j)
        composite.push_back(static_cast<float>(us * winsorized[static_cast<std::size_t>(j)]));
    return composite;
}

}  // namespace dietlex
