// Command-line front end. Everything goes through the C interface.

#include "meerkit/meerkit.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

int exit_code(meerkit_status s) {
    switch (s) {
        case MEERKIT_OK: return 0;
        case MEERKIT_ERR_CONFIG:
        case MEERKIT_ERR_INVALID_ARGUMENT: return 2;
        case MEERKIT_ERR_DATA:
        case MEERKIT_ERR_IO: return 3;
        case MEERKIT_ERR_NUMERICAL: return 4;
        default: return 1;
    }
}

int report_failure(meerkit_status s) {
    std::cerr << "meerkit: error: " << meerkit_last_error() << "\n";
    return exit_code(s);
}

void log_line(const char* message, void* user) {
    if (!*static_cast<bool*>(user)) std::cerr << "meerkit: " << message << "\n";
}

std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

std::string absolute(const std::string& p) { return std::filesystem::absolute(p).lexically_normal().string(); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Meerkat call-type classification toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(meerkit_version()));

    std::string config_path, workdir, manifest, grid_score, model;
    std::optional<unsigned long long> seed;
    std::optional<int> folds;
    std::optional<unsigned> threads;
    bool no_standardize = false, skip_bad = false, dry_run = false, quiet = false, print_json = false;

    app.add_option("-c,--config", config_path, "run configuration (JSON)");
    app.add_option("--workdir", workdir, "override the workdir");
    app.add_option("--manifest", manifest, "override the manifest CSV");
    app.add_option("--seed", seed, "override the master seed (wins over MEERKIT_SEED)");
    app.add_option("--folds", folds, "number of outer folds")->check(CLI::Range(2, 1000));
    app.add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 1024));
    app.add_option("--grid-score", grid_score, "hyperparameter scoring")->check(CLI::IsMember({"inner-cv", "train"}));
    app.add_flag("--no-standardize", no_standardize, "disable per-fold z-scoring");
    app.add_flag("--skip-bad", skip_bad, "prepare: skip unreadable clips instead of aborting");
    app.add_flag("--dry-run", dry_run, "print the plan and touch no files");
    app.add_option("--model", model, "analyze-filters: CNN model file");
    app.add_flag("-q,--quiet", quiet, "suppress progress messages");
    app.add_flag("--json", print_json, "print the command summary as JSON");

    std::string target;
    auto* prepare = app.add_subcommand("prepare", "resample, replicate and store clips");
    auto* extract = app.add_subcommand("extract", "write features/<id>.csv");
    extract->add_option("feature_set_id", target, "configured feature set")->required();
    auto* train = app.add_subcommand("train-cnn", "train fold CNNs and keep the best");
    auto* classify = app.add_subcommand("classify", "cross-validated SVM evaluation of a feature set");
    classify->add_option("feature_set_id", target, "configured feature set")->required();
    auto* filters = app.add_subcommand("analyze-filters", "first-layer cumulative frequency response");
    auto* render = app.add_subcommand("render", "PPM heatmaps of confusion matrices or the filter response");
    render->add_option("target", target, "feature set id or 'filters'")->required();
    auto* report = app.add_subcommand("report", "collect report summaries");
    for (auto* s : {prepare, extract, train, classify, filters, render, report}) s->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    meerkit_config* config = nullptr;
    meerkit_status s;
    if (!config_path.empty()) {
        s = meerkit_config_load(config_path.c_str(), &config);
    } else {
        if (workdir.empty() || manifest.empty()) {
            std::cerr << "meerkit: error: --config, or both --manifest and --workdir, are required\n";
            return 2;
        }
        const nlohmann::json doc = {{"manifest", absolute(manifest)}, {"workdir", absolute(workdir)}};
        s = meerkit_config_from_json(doc.dump().c_str(), nullptr, &config);
    }
    if (s != MEERKIT_OK) return report_failure(s);

    auto apply = [&](const char* key, const std::string& value_json) {
        if (s == MEERKIT_OK) s = meerkit_config_override(config, key, value_json.c_str());
    };
    if (!workdir.empty()) apply("workdir", json_string(absolute(workdir)));
    if (!manifest.empty()) apply("manifest", json_string(absolute(manifest)));
    if (seed) apply("seed", std::to_string(*seed));
    if (folds) apply("folds", std::to_string(*folds));
    if (threads) apply("threads", std::to_string(*threads));
    if (!grid_score.empty()) apply("grid_score", json_string(grid_score));
    if (no_standardize) apply("standardize", "false");
    if (s != MEERKIT_OK) {
        meerkit_config_free(config);
        return report_failure(s);
    }

    if (dry_run) {
        char* resolved = nullptr;
        s = meerkit_config_resolved_json(config, &resolved);
        if (s != MEERKIT_OK) {
            meerkit_config_free(config);
            return report_failure(s);
        }
        std::cout << "resolved config:\n" << resolved << "\n";
        meerkit_string_free(resolved);
    }

    const CLI::App* chosen = app.get_subcommands().front();
    nlohmann::json options = {{"dry_run", dry_run}, {"skip_bad", skip_bad}};
    if (!model.empty()) options["model"] = absolute(model);

    char* summary = nullptr;
    s = meerkit_run_command(config, chosen->get_name().c_str(), target.empty() ? nullptr : target.c_str(),
                            options.dump().c_str(), log_line, &quiet, &summary);
    meerkit_config_free(config);
    if (s != MEERKIT_OK) return report_failure(s);

    const auto result = nlohmann::json::parse(summary);
    meerkit_string_free(summary);
    if (print_json) {
        std::cout << result.dump(2) << "\n";
    } else {
        for (const auto& line : result["plan"]) std::cout << line.get<std::string>() << "\n";
        for (const auto& out : result["outputs"]) std::cout << "wrote " << out.get<std::string>() << "\n";
    }
    return 0;
}
