#pragma once

#include "meerkit/audio.hpp"
#include "meerkit/cnn.hpp"
#include "meerkit/eval.hpp"

#include <functional>
#include <string>
#include <vector>

namespace meerkit::eval {

struct CnnFoldOutcome {
    int fold = 0;
    std::uint64_t seed = 0;
    double test_uar = 0.0;
    std::vector<cnn::EpochStats> history;
    int best_epoch = 0;
};

struct CnnSelection {
    std::vector<CnnFoldOutcome> folds;
    std::size_t selected_fold = 0;
    cnn::CnnModel model;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Trains one CNN per outer fold on that fold's training split, scores it by
/// its own test-split UAR and keeps the best (lowest fold on ties). Fold
/// seeds derive from the master seed. `clips` follow manifest order.
CnnSelection train_cnn_folds(const audio::DatasetManifest& manifest, const std::vector<std::vector<double>>& clips,
                             int folds, const cnn::TrainConfig& config, std::uint64_t master_seed,
                             unsigned threads = 1, const ProgressFn& progress = {});

struct CnnProtocolResult {
    CnnSelection selection;
    features::FeatureTable features;
    EvalReport report;
};

/// Fold-wise CNN training and selection, 80-dimensional features for every
/// call from the selected model, then the standard SVM experiment on them.
CnnProtocolResult run_cnn_protocol(const audio::DatasetManifest& manifest, const std::vector<std::vector<double>>& clips,
                                   const cnn::TrainConfig& config, const ExperimentOptions& options,
                                   const ProgressFn& progress = {});

nlohmann::json selection_to_json(const CnnSelection& s);

}  // namespace meerkit::eval
