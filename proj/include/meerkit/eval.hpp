#pragma once

#include "meerkit/audio.hpp"
#include "meerkit/features.hpp"
#include "meerkit/metrics.hpp"
#include "meerkit/svm.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace meerkit::eval {

struct ExperimentOptions {
    int folds = 5;
    svm::GridSpec grid;
    std::uint64_t seed = 0;  // master seed
    bool standardize = true;
    int inner_folds = 3;
    svm::GridScore grid_score = svm::GridScore::InnerCv;
    svm::SolverOptions solver;
    unsigned threads = 1;
    /// Recorded verbatim in the report.
    std::string config_hash;
};

struct FoldResult {
    int fold = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    svm::KernelSpec kernel;
    double C = 1.0;
    double grid_score = 0.0;
    int inner_folds_used = 0;
    bool train_score_fallback = false;
    bool solver_converged = true;
    /// Classes present in the training split (absent ones are never predicted).
    std::vector<std::string> train_classes;
    std::vector<svm::GridPoint> grid_table;
    features::StandardizationParams standardization;  // empty when disabled
    double test_uar = 0.0;
    ConfusionMatrix confusion;
};

struct EvalReport {
    int format_version = 1;
    std::string toolkit_version;
    std::string config_hash;
    std::string feature_set_id;
    std::size_t dimension = 0;
    std::vector<std::string> class_labels;
    std::map<std::string, std::uint64_t> seeds;
    int folds = 0;
    bool standardized = true;
    std::string grid_score_mode;
    std::vector<int> fold_assignment;  // manifest order
    std::vector<FoldResult> per_fold;
    /// Headline: arithmetic mean of the per-fold UARs.
    double mean_uar = 0.0;
    /// UAR of the summed confusion matrix.
    double pooled_uar = 0.0;
    ConfusionMatrix aggregate_confusion;
};

/// Seeds derived from the master seed; the fold plan depends on the "folds"
/// entry only, so every feature set sees the same split.
std::map<std::string, std::uint64_t> derive_experiment_seeds(std::uint64_t master, int folds);

/// Fold plan over the manifest's labels in manifest order.
FoldPlan plan_folds(const audio::DatasetManifest& manifest, int folds, std::uint64_t master_seed);

/// One outer fold: standardization fitted on the training rows, grid search on
/// the training rows, final fit and test-split evaluation.
FoldResult run_fold(const features::LabeledDataset& data, const FoldPlan& plan, int fold,
                    const ExperimentOptions& options);

EvalReport run_experiment(const features::FeatureTable& table, const audio::DatasetManifest& manifest,
                          const ExperimentOptions& options);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

/// Confusion matrix as CSV: label header row, then one row per true class.
std::string confusion_csv(const ConfusionMatrix& m);

/// Writes report.json, confusion_fold{i}.csv (i = 0-based fold index),
/// confusion_aggregate.csv and uar_summary.csv into dir.
std::vector<std::filesystem::path> export_report(const EvalReport& report, const std::filesystem::path& dir);
EvalReport load_report(const std::filesystem::path& report_json);

}  // namespace meerkit::eval
