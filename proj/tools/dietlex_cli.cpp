// Command-line front end: generate synthetic corpora, run the full pipeline,
// resume from a stage, or regenerate the report files.
//
// Exit codes: 0 success, 2 validation failure (bad config, refused resume),
// 3 stage failure.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dietlex/pipeline.hpp"
#include "dietlex/synthetic.hpp"

namespace {

void print_summary(const dietlex::PipelineOutput& out) {
    const auto& stages = out.manifest["stages"];
    std::cout << "pipeline complete: " << out.out_dir.string() << "\n";
    if (stages.contains("parse")) {
        const auto& p = stages["parse"];
        std::cout << "  foods " << p["accepted_foods"] << " (+" << p["rejected_foods"]
                  << " rejected), logs " << p["accepted_logs"] << " (+" << p["rejected_logs"]
                  << " rejected), meals " << p["meals"] << ", users " << p["users"] << "\n";
    }
    for (const char* level : {"food-clustering", "meal-clustering", "diet-clustering"}) {
        if (!stages.contains(level)) continue;
        const auto& c = stages[level];
        std::cout << "  " << level << ": k=" << c["k"] << " objective=" << c["objective"]
                  << " iterations=" << c["iterations"] << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dietlex: food/meal/diet embedding and clustering pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string stage_name;
    std::string spec_path;
    std::string out_dir;

    auto* run = app.add_subcommand("run", "run the full pipeline from a config file");
    run->add_option("--config", config_path, "pipeline config file")->required();

    auto* resume = app.add_subcommand("resume", "recompute from a named stage forward");
    resume->add_option("--stage", stage_name, "stage to resume from")->required();
    resume->add_option("--config", config_path, "pipeline config file")->required();

    auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic corpus with planted labels");
    gen->add_option("--spec", spec_path, "synthetic spec file")->required();
    gen->add_option("--out", out_dir, "output directory")->required();

    auto* report = app.add_subcommand("report", "regenerate report files from existing artifacts");
    report->add_option("--output", out_dir, "pipeline output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            auto cfg = dietlex::PipelineConfig::from_file(config_path);
            print_summary(dietlex::run_pipeline(cfg));
        } else if (resume->parsed()) {
            auto stage = dietlex::parse_stage(stage_name);
            if (!stage) {
                std::cerr << "unknown stage '" << stage_name << "'; stages are:";
                for (const char* s : dietlex::kStageNames) std::cerr << " " << s;
                std::cerr << "\n";
                return 2;
            }
            auto cfg = dietlex::PipelineConfig::from_file(config_path);
            print_summary(dietlex::resume_pipeline(*stage, cfg));
        } else if (gen->parsed()) {
            auto spec = dietlex::SyntheticSpec::from_file(spec_path);
            auto corpus = dietlex::generate_synthetic_corpus(spec);
            dietlex::write_corpus(corpus, out_dir);
            std::cout << "synthetic corpus: " << corpus.foods.size() << " foods, "
                      << corpus.logs.size() << " log entries, "
                      << corpus.labels.meal_template.size() << " meals, "
                      << corpus.labels.user_group.size() << " users -> " << out_dir << "\n";
        } else if (report->parsed()) {
            dietlex::Pipeline::regenerate_reports(out_dir);
            std::cout << "reports regenerated in " << out_dir << "/reports\n";
        }
    } catch (const dietlex::StageError& e) {
        std::cerr << "stage failed: " << e.what() << "\n";
        return 3;
    } catch (const dietlex::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    return 0;
}
