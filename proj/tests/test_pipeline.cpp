#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "dietlex/pipeline.hpp"
#include "dietlex/synthetic.hpp"
#include "support/oracles.hpp"

using namespace dietlex;

namespace {

SyntheticSpec small_spec() {
    SyntheticSpec spec;
    spec.n_food_archetypes = 3;
    spec.foods_per_archetype = 30;
    spec.n_meal_templates = 4;
    spec.n_users = 30;
    spec.days_per_user = 6;
    spec.n_diet_groups = 2;
    spec.rng_seed = 11;
    return spec;
}

void write_config(const std::filesystem::path& path, const std::filesystem::path& corpus_dir,
                  const std::filesystem::path& out_dir,
                  const std::map<std::string, std::string>& overrides = {}) {
    std::map<std::string, std::string> kv = {
        {"food_db", (corpus_dir / "foods.jsonl").string()},
        {"food_log", (corpus_dir / "logs.csv").string()},
        {"out_dir", out_dir.string()},
        {"seed", "42"},
        {"k_food", "3"},
        {"k_meal", "4"},
        {"k_diet", "2"},
        {"name_embed.dim", "24"},
        {"name_embed.epochs", "3"},
        {"meal_embed.dim", "24"},
        {"meal_embed.epochs", "8"},
        {"diet_embed.dim", "24"},
        {"diet_embed.epochs", "5"},
    };
    for (const auto& [k, v] : overrides) kv[k] = v;
    std::ofstream os(path);
    for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
}

// Every artifact byte under the output dir, excluding wall-clock timings.
std::map<std::string, std::string> snapshot(const std::filesystem::path& out_dir) {
    std::map<std::string, std::string> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(out_dir)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = std::filesystem::relative(entry.path(), out_dir).string();
        if (rel == "timings.csv") continue;
        files[rel] = testsupport::read_file(entry.path());
    }
    return files;
}

std::set<std::string> distinct_clusters(const std::filesystem::path& assign_csv) {
    std::ifstream is(assign_csv);
    REQUIRE(is);
    std::set<std::string> ids;
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (trim(line).empty()) continue;
        ids.insert(split_csv_line(line)[1]);
    }
    return ids;
}

struct Fixture {
    testsupport::TempDir corpus{"pipe_corpus"};
    testsupport::TempDir out{"pipe_out"};
    testsupport::TempDir cfgdir{"pipe_cfg"};
    std::filesystem::path config_path;
    SyntheticCorpus generated;

    explicit Fixture(const std::map<std::string, std::string>& overrides = {}) {
        generated = generate_synthetic_corpus(small_spec());
        write_corpus(generated, corpus.path);
        config_path = cfgdir.path / "run.cfg";
        write_config(config_path, corpus.path, out.path, overrides);
    }

    PipelineConfig config() const { return PipelineConfig::from_file(config_path); }
};

}  // namespace

TEST_CASE("pipeline produces exactly k words per level and consistent artifacts") {
    Fixture fx;
    auto out = run_pipeline(fx.config());

    CHECK(distinct_clusters(fx.out.path / "food_assign.csv").size() == 3);
    CHECK(distinct_clusters(fx.out.path / "meal_assign.csv").size() == 4);
    CHECK(distinct_clusters(fx.out.path / "diet_assign.csv").size() == 2);

    const auto& stages = out.manifest["stages"];
    CHECK(stages["parse"]["rejected_foods"] == 0);
    CHECK(stages["parse"]["rejected_logs"] == 0);

    // conservation: one diet document per user with accepted entries
    CHECK(stages["diet-docs"]["documents"] == stages["parse"]["users"]);

    // meal items conserve accepted log entries
    std::ifstream meals(fx.out.path / "meals.tsv");
    std::size_t item_total = 0, meal_count = 0;
    std::string line;
    while (std::getline(meals, line)) {
        if (trim(line).empty()) continue;
        ++meal_count;
        std::size_t tab = line.rfind('\t');
        std::istringstream items(line.substr(tab + 1));
        std::string tok;
        while (items >> tok) ++item_total;
    }
    CHECK(item_total == stages["parse"]["accepted_logs"].get<std::size_t>());
    CHECK(meal_count == stages["parse"]["meals"].get<std::size_t>());

    // level consistency: meal documents use exactly the food-word vocabulary
    std::set<std::string> food_words = distinct_clusters(fx.out.path / "food_assign.csv");
    std::set<std::string> meal_doc_tokens;
    std::ifstream docs(fx.out.path / "meal_docs.tsv");
    while (std::getline(docs, line)) {
        if (trim(line).empty()) continue;
        const std::size_t tab = line.rfind('\t');
        std::istringstream toks(line.substr(tab + 1));
        std::string tok;
        while (toks >> tok) meal_doc_tokens.insert(tok);
    }
    CHECK(meal_doc_tokens == food_words);

    // diet documents use exactly the meal-word vocabulary
    std::set<std::string> meal_words = distinct_clusters(fx.out.path / "meal_assign.csv");
    std::set<std::string> diet_tokens;
    std::ifstream ddocs(fx.out.path / "diet_docs.tsv");
    while (std::getline(ddocs, line)) {
        if (trim(line).empty()) continue;
        const std::size_t tab = line.rfind('\t');
        std::istringstream toks(line.substr(tab + 1));
        std::string tok;
        while (toks >> tok) diet_tokens.insert(tok);
    }
    CHECK(diet_tokens == meal_words);

    // every numeric default in use is visible in the manifest
    for (const auto& [key, value] : fx.config().canonical()) {
        REQUIRE(out.manifest["config"].contains(key));
        CHECK(out.manifest["config"][key].get<std::string>() == value);
    }

    // report files exist with the documented headers
    std::ifstream profiles(fx.out.path / "reports" / "profiles.csv");
    std::getline(profiles, line);
    CHECK(line == "cluster_id,name,members,fat,carbs,protein,saturated_fat,cholesterol,sodium,fiber,sugar");
    std::ifstream summary(fx.out.path / "reports" / "diet_macros_summary.csv");
    std::getline(summary, line);
    CHECK(line == "diet_word,macro,p10,p50,p90");
}

TEST_CASE("pipeline is byte-identical across reruns and across resume at every stage") {
    Fixture fx;
    run_pipeline(fx.config());
    auto baseline = snapshot(fx.out.path);

    SECTION("second run reproduces every artifact") {
        run_pipeline(fx.config());
        auto again = snapshot(fx.out.path);
        REQUIRE(again.size() == baseline.size());
        for (const auto& [rel, bytes] : baseline) {
            INFO(rel);
            CHECK(again.at(rel) == bytes);
        }
    }
    SECTION("resume at every stage leaves all artifacts unchanged") {
        for (int s = 0; s < kStageCount; ++s) {
            resume_pipeline(static_cast<Stage>(s), fx.config());
            auto resumed = snapshot(fx.out.path);
            INFO("stage " << kStageNames[static_cast<std::size_t>(s)]);
            REQUIRE(resumed.size() == baseline.size());
            for (const auto& [rel, bytes] : baseline) {
                INFO(rel);
                CHECK(resumed.at(rel) == bytes);
            }
        }
    }
    SECTION("regenerated reports are byte-identical") {
        std::filesystem::remove_all(fx.out.path / "reports");
        Pipeline::regenerate_reports(fx.out.path);
        auto regenerated = snapshot(fx.out.path);
        for (const char* rel : {"reports/profiles.csv", "reports/diet_macros.csv",
                                "reports/diet_macros_summary.csv", "reports/meal_words.csv"}) {
            CHECK(regenerated.at(rel) == baseline.at(rel));
        }
    }
}

TEST_CASE("resume honours the staging contract") {
    Fixture fx;
    run_pipeline(fx.config());

    SECTION("touching only k_meal allows resume at meal-clustering and reuses food artifacts") {
        auto before_food = testsupport::read_file(fx.out.path / "food_assign.csv");
        write_config(fx.config_path, fx.corpus.path, fx.out.path, {{"k_meal", "3"}});
        auto out = resume_pipeline(Stage::meal_clustering, fx.config());
        CHECK(testsupport::read_file(fx.out.path / "food_assign.csv") == before_food);
        CHECK(out.manifest["stages"]["meal-clustering"]["k"] == 3);
        CHECK(distinct_clusters(fx.out.path / "meal_assign.csv").size() == 3);
    }
    SECTION("changing an upstream seed refuses the resume with a diff summary") {
        write_config(fx.config_path, fx.corpus.path, fx.out.path, {{"name_embed.seed", "777"}});
        CHECK_THROWS_AS(resume_pipeline(Stage::meal_clustering, fx.config()), ResumeRefused);
        CHECK_THROWS_WITH(resume_pipeline(Stage::meal_clustering, fx.config()),
                          Catch::Matchers::ContainsSubstring("name_embed.seed"));
    }
    SECTION("changing the input bytes refuses the resume") {
        std::ofstream(fx.corpus.path / "logs.csv", std::ios::app) << "u0000,2024-01-01,lunch,f000000,1\n";
        CHECK_THROWS_AS(resume_pipeline(Stage::food_vectors, fx.config()), ResumeRefused);
    }
    SECTION("resume without a prior run refuses") {
        testsupport::TempDir fresh("pipe_fresh");
        write_config(fx.config_path, fx.corpus.path, fresh.path, {});
        CHECK_THROWS_AS(resume_pipeline(Stage::meal_docs, fx.config()), ResumeRefused);
    }
}

TEST_CASE("stage failures carry the stage name") {
    Fixture fx(std::map<std::string, std::string>{{"k_food", "100000"}});  // more clusters than foods
    try {
        run_pipeline(fx.config());
        FAIL("expected a stage failure");
    } catch (const StageError& e) {
        CHECK(std::string(e.what()).find("food-clustering") != std::string::npos);
        CHECK(e.stage == Stage::food_clustering);
    }
    // artifacts of completed stages persist
    CHECK(std::filesystem::exists(fx.out.path / "foods.jsonl"));
    CHECK(std::filesystem::exists(fx.out.path / "food_vectors.nvec"));
}
