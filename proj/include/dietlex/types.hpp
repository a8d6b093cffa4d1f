#pragma once

#include <array>
#include <compare>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dietlex {

inline constexpr int kNutrientCount = 8;

// Fixed nutrient order used everywhere: grams per portion, except
// cholesterol and sodium which are milligrams per portion.
inline constexpr std::array<const char*, kNutrientCount> kNutrientNames = {
    "fat", "carbs", "protein", "saturated_fat", "cholesterol", "sodium", "fiber", "sugar"};

enum Nutrient : int {
    kFat = 0,
    kCarbs = 1,
    kProtein = 2,
    kSaturatedFat = 3,
    kCholesterol = 4,
    kSodium = 5,
    kFiber = 6,
    kSugar = 7,
};

// Per-portion nutrient amounts with explicit missing markers. Crowd-sourced
// records frequently omit fields; absence is carried through and imputed
// only when food vectors are built.
struct NutrientVector {
    std::array<double, kNutrientCount> value{};
    std::array<bool, kNutrientCount> present{};

    void set(int i, double v) {
        value[static_cast<std::size_t>(i)] = v;
        present[static_cast<std::size_t>(i)] = true;
    }
    bool any_present() const {
        for (bool p : present)
            if (p) return true;
        return false;
    }
};

struct FoodEntry {
    std::string food_id;
    std::string name;
    double calories = 0.0;  // kcal per portion
    NutrientVector nutrients;
};

struct FoodTable {
    std::vector<FoodEntry> foods;
    std::unordered_map<std::string, std::size_t> index;

    bool add(FoodEntry e) {
        auto [it, inserted] = index.emplace(e.food_id, foods.size());
        (void)it;
        if (inserted) foods.push_back(std::move(e));
        return inserted;
    }
    const FoodEntry* find(const std::string& id) const {
        auto it = index.find(id);
        return it == index.end() ? nullptr : &foods[it->second];
    }
    std::size_t size() const { return foods.size(); }
};

enum class MealTag : int { breakfast = 0, lunch = 1, dinner = 2, snacks = 3 };

inline const char* to_string(MealTag t) {
    switch (t) {
        case MealTag::breakfast: return "breakfast";
        case MealTag::lunch: return "lunch";
        case MealTag::dinner: return "dinner";
        case MealTag::snacks: return "snacks";
    }
    return "?";
}

inline std::optional<MealTag> parse_meal_tag(std::string_view s) {
    std::string lower;
    lower.reserve(s.size());
    for (char c : s) lower += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
    if (lower == "breakfast") return MealTag::breakfast;
    if (lower == "lunch") return MealTag::lunch;
    if (lower == "dinner") return MealTag::dinner;
    if (lower == "snacks") return MealTag::snacks;
    return std::nullopt;
}

struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    auto operator<=>(const Date&) const = default;

    static bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

    static int days_in_month(int y, int m) {
        static constexpr int d[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        if (m == 2 && leap(y)) return 29;
        return d[m - 1];
    }

    // Strict ISO-8601 calendar day: YYYY-MM-DD.
    static std::optional<Date> parse(std::string_view s) {
        if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
        auto digits = [](std::string_view t) -> std::optional<int> {
            int v = 0;
            for (char c : t) {
                if (c < '0' || c > '9') return std::nullopt;
                v = v * 10 + (c - '0');
            }
            return v;
        };
        auto y = digits(s.substr(0, 4));
        auto m = digits(s.substr(5, 2));
        auto d = digits(s.substr(8, 2));
        if (!y || !m || !d) return std::nullopt;
        if (*m < 1 || *m > 12) return std::nullopt;
        if (*d < 1 || *d > days_in_month(*y, *m)) return std::nullopt;
        return Date{*y, *m, *d};
    }

    std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    Date next() const {
        Date n = *this;
        if (++n.day > days_in_month(n.year, n.month)) {
            n.day = 1;
            if (++n.month > 12) {
                n.month = 1;
                ++n.year;
            }
        }
        return n;
    }
};

struct FoodLogEntry {
    std::string user_id;
    Date date;
    MealTag meal_tag = MealTag::breakfast;
    std::string food_id;
    double portions = 1.0;
};

using LogTable = std::vector<FoodLogEntry>;

// One meal per distinct (user, date, tag) triple; items keep log order.
struct Meal {
    std::string meal_id;
    std::string user_id;
    Date date;
    MealTag meal_tag = MealTag::breakfast;
    std::vector<std::string> items;  // food ids
};

using MealTable = std::vector<Meal>;

inline std::string make_meal_id(const std::string& user_id, const Date& date, MealTag tag) {
    return user_id + "|" + date.to_string() + "|" + to_string(tag);
}

// A user's diet as a bag of meal-word tokens (kept as a list; multiplicity
// matters, order does not).
struct DietDocument {
    std::string user_id;
    std::vector<std::string> tokens;
};

}  // namespace dietlex
