#pragma once

#include <cmath>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dietlex/csv.hpp"
#include "dietlex/types.hpp"

namespace dietlex {

// Parsing is total: every line is either accepted or diagnosed, never fatal.
// Reject counts are surfaced in the result so dirty crowd-sourced inputs do
// not abort a run.

struct ParseReport {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::map<std::string, std::size_t> reject_reasons;
    std::vector<std::string> diagnostics;

    void reject(std::size_t line_no, const std::string& reason, const std::string& detail = "") {
        ++rejected;
        ++reject_reasons[reason];
        std::string msg = "line " + std::to_string(line_no) + ": " + reason;
        if (!detail.empty()) msg += " (" + detail + ")";
        diagnostics.push_back(std::move(msg));
    }
    void note(std::size_t line_no, const std::string& msg) {
        diagnostics.push_back("line " + std::to_string(line_no) + ": " + msg);
    }
};

struct FoodParseResult {
    FoodTable table;
    ParseReport report;
};

struct LogParseResult {
    LogTable logs;
    ParseReport report;
};

// Identifiers flow into CSV/TSV artifacts and composite meal ids, so a small
// charset restriction keeps every downstream format unambiguous.
inline bool valid_identifier(std::string_view id) {
    if (id.empty()) return false;
    for (char c : id) {
        unsigned char u = static_cast<unsigned char>(c);
        if (u <= 0x20 || c == ',' || c == '|' || c == '"') return false;
    }
    return true;
}

// Food database: UTF-8 line-delimited JSON objects with fields
// {food_id, name, calories, fat, carbs, protein, saturated_fat,
//  cholesterol, sodium, fiber, sugar}; an absent nutrient key means missing.
inline FoodParseResult parse_food_database(std::istream& in) {
    FoodParseResult res;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty()) continue;
        nlohmann::json obj = nlohmann::json::parse(stripped, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            res.report.reject(line_no, "malformed record", "not a JSON object");
            continue;
        }

        FoodEntry entry;
        if (!obj.contains("food_id") || !obj["food_id"].is_string()) {
            res.report.reject(line_no, "missing food_id");
            continue;
        }
        entry.food_id = obj["food_id"].get<std::string>();
        if (!valid_identifier(entry.food_id)) {
            res.report.reject(line_no, "invalid food_id", entry.food_id);
            continue;
        }

        if (obj.contains("name") && obj["name"].is_string()) entry.name = trim(obj["name"].get<std::string>());
        if (entry.name.empty()) {
            res.report.reject(line_no, "missing name");
            continue;
        }

        if (!obj.contains("calories") || !obj["calories"].is_number()) {
            res.report.reject(line_no, "missing calories");
            continue;
        }
        entry.calories = obj["calories"].get<double>();
        if (!(entry.calories >= 0.0) || !std::isfinite(entry.calories)) {
            res.report.reject(line_no, "negative calories");
            continue;
        }

        for (int i = 0; i < kNutrientCount; ++i) {
            const char* key = kNutrientNames[static_cast<std::size_t>(i)];
            if (!obj.contains(key)) continue;  // missing marker stays unset
            const auto& v = obj[key];
            if (!v.is_number()) {
                res.report.note(line_no, std::string(key) + " not numeric, treated as missing");
                continue;
            }
            double x = v.get<double>();
            if (!std::isfinite(x) || x < 0.0) {
                res.report.note(line_no, std::string(key) + " out of range, treated as missing");
                continue;
            }
            entry.nutrients.set(i, x);
        }

        if (!res.table.add(std::move(entry))) {
            res.report.reject(line_no, "duplicate food_id");
            continue;
        }
        ++res.report.accepted;
    }
    return res;
}

// Food log: UTF-8 CSV with header user_id,date,meal_tag,food_id,portions.
inline LogParseResult parse_food_logs(std::istream& in, const FoodTable& foods) {
    static const char* kHeader = "user_id,date,meal_tag,food_id,portions";
    LogParseResult res;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty()) continue;
        if (!header_seen) {
            header_seen = true;
            if (stripped == kHeader) continue;
            res.report.note(line_no, "expected header '" + std::string(kHeader) + "', parsing as data");
        }
        auto fields = split_csv_line(stripped);
        if (fields.size() != 5) {
            res.report.reject(line_no, "wrong column count", std::to_string(fields.size()) + " columns");
            continue;
        }
        FoodLogEntry e;
        e.user_id = trim(fields[0]);
        if (!valid_identifier(e.user_id)) {
            res.report.reject(line_no, "invalid user_id");
            continue;
        }
        auto date = Date::parse(trim(fields[1]));
        if (!date) {
            res.report.reject(line_no, "unparseable date", fields[1]);
            continue;
        }
        e.date = *date;
        auto tag = parse_meal_tag(trim(fields[2]));
        if (!tag) {
            res.report.reject(line_no, "unknown meal_tag", fields[2]);
            continue;
        }
        e.meal_tag = *tag;
        e.food_id = trim(fields[3]);
        if (foods.find(e.food_id) == nullptr) {
            res.report.reject(line_no, "unknown food_id", e.food_id);
            continue;
        }
        char* end = nullptr;
        std::string pstr = trim(fields[4]);
        e.portions = std::strtod(pstr.c_str(), &end);
        if (end == pstr.c_str() || *end != '\0' || !std::isfinite(e.portions) || e.portions <= 0.0) {
            res.report.reject(line_no, "invalid portions", pstr);
            continue;
        }
        res.logs.push_back(std::move(e));
        ++res.report.accepted;
    }
    return res;
}

}  // namespace dietlex
