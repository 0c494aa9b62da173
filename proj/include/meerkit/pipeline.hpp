#pragma once

#include "meerkit/cnn.hpp"
#include "meerkit/svm.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace meerkit::pipeline {

enum class SourceKind { Catch24, CnnCrafted, ExternalCsv };

std::string source_kind_name(SourceKind kind);

struct FeatureSource {
    std::string feature_set_id;
    SourceKind kind = SourceKind::Catch24;
    std::filesystem::path path;                 // external-csv only
    std::optional<std::size_t> dimension;       // external-csv only; checked on ingest
};

struct RunConfig {
    std::filesystem::path manifest;
    std::filesystem::path workdir;
    int target_rate_hz = 16000;
    double min_ms = 100.0;
    int folds = 5;
    std::uint64_t seed = 0;
    bool standardize = true;
    svm::GridScore grid_score = svm::GridScore::InnerCv;
    int inner_folds = 3;
    unsigned threads = 1;
    svm::GridSpec grid;
    double svm_tol = 1e-3;
    cnn::TrainConfig cnn;
    std::vector<FeatureSource> sources;

    const FeatureSource& source(const std::string& feature_set_id) const;
};

/// Validates a config document; unknown keys and out-of-range values are
/// config errors. Relative paths resolve against base_dir.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);
/// Applies MEERKIT_SEED when it is set.
void apply_environment(RunConfig& config);
/// Fully resolved config, every default spelled out.
nlohmann::json config_to_json(const RunConfig& config);
/// Hex digest of the settings that influence results (paths excluded).
std::string config_hash(const RunConfig& config);

/// Fixed workdir layout.
struct Workdir {
    std::filesystem::path root;
    std::filesystem::path processed() const { return root / "processed"; }
    std::filesystem::path clips() const { return root / "processed" / "clips"; }
    std::filesystem::path prepare_log() const { return root / "processed" / "prepare_log.csv"; }
    std::filesystem::path features(const std::string& id) const { return root / "features" / (id + ".csv"); }
    std::filesystem::path models() const { return root / "models"; }
    std::filesystem::path cnn_model() const { return root / "models" / "cnn.json"; }
    std::filesystem::path cnn_selection() const { return root / "models" / "cnn_selection.json"; }
    std::filesystem::path reports() const { return root / "reports"; }
    std::filesystem::path report_dir(const std::string& id) const { return root / "reports" / id; }
    std::filesystem::path filters_dir() const { return root / "reports" / "filters"; }
    std::filesystem::path lock() const { return root / ".meerkit.lock"; }
};

using Logger = std::function<void(const std::string&)>;

struct CommandOptions {
    bool dry_run = false;
    bool skip_bad = false;
    /// analyze-filters: model file instead of models/cnn.json.
    std::optional<std::filesystem::path> model_path;
    Logger log;
};

struct CommandResult {
    std::vector<std::string> plan;  // filled by dry runs
    std::vector<std::filesystem::path> outputs;
    nlohmann::json summary = nlohmann::json::object();
};

CommandResult cmd_prepare(const RunConfig& config, const CommandOptions& options);
CommandResult cmd_extract(const RunConfig& config, const std::string& feature_set_id, const CommandOptions& options);
CommandResult cmd_train_cnn(const RunConfig& config, const CommandOptions& options);
CommandResult cmd_classify(const RunConfig& config, const std::string& feature_set_id, const CommandOptions& options);
CommandResult cmd_analyze_filters(const RunConfig& config, const CommandOptions& options);
/// Heatmap images (binary PPM) of a feature set's confusion matrices, or
/// of the filter response when target is "filters".
CommandResult cmd_render(const RunConfig& config, const std::string& target, const CommandOptions& options);
/// Collects every reports/<id>/report.json into reports/summary.csv.
CommandResult cmd_report(const RunConfig& config, const CommandOptions& options);

}  // namespace meerkit::pipeline
