#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "dietlex/types.hpp"

namespace dietlex {

// Groups log entries into meals: one Meal per distinct (user, date, tag)
// triple, items in log order. Output is sorted by (user, date, tag) so the
// table has a canonical on-disk order.
inline MealTable assemble_meals(const LogTable& logs) {
    using Key = std::tuple<std::string, Date, int>;
    std::map<Key, std::vector<std::string>> groups;
    for (const auto& e : logs) {
        groups[{e.user_id, e.date, static_cast<int>(e.meal_tag)}].push_back(e.food_id);
    }
    MealTable meals;
    meals.reserve(groups.size());
    for (auto& [key, items] : groups) {
        Meal m;
        m.user_id = std::get<0>(key);
        m.date = std::get<1>(key);
        m.meal_tag = static_cast<MealTag>(std::get<2>(key));
        m.meal_id = make_meal_id(m.user_id, m.date, m.meal_tag);
        m.items = std::move(items);
        meals.push_back(std::move(m));
    }
    return meals;
}

// Builds one DietDocument per user: the bag of meal-word ids over all of the
// user's meals, with multiplicity. Every meal must carry an assignment.
template <typename AssignmentMap>  // meal_id -> meal-word token (string)
std::vector<DietDocument> assemble_diets(const MealTable& meals, const AssignmentMap& meal_word) {
    std::map<std::string, std::vector<std::string>> by_user;
    for (const auto& m : meals) {
        auto it = meal_word.find(m.meal_id);
        if (it == meal_word.end()) {
            throw std::runtime_error("meal without a meal-word assignment: " + m.meal_id);
        }
        by_user[m.user_id].push_back(it->second);
    }
    std::vector<DietDocument> diets;
    diets.reserve(by_user.size());
    for (auto& [user, tokens] : by_user) {
        diets.push_back(DietDocument{user, std::move(tokens)});
    }
    return diets;
}

}  // namespace dietlex
