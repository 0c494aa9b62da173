#include "meerkit/protocol.hpp"
#include "meerkit/error.hpp"
#include "meerkit/rng.hpp"
#include "../common/parallel.hpp"

#include <cmath>
#include <mutex>

namespace meerkit::eval {

CnnSelection train_cnn_folds(const audio::DatasetManifest& manifest, const std::vector<std::vector<double>>& clips,
                             int folds, const cnn::TrainConfig& config, std::uint64_t master_seed, unsigned threads,
                             const ProgressFn& progress) {
    if (clips.size() != manifest.entries.size()) throw invalid_argument("one clip per manifest entry is required");
    const int n_classes = static_cast<int>(manifest.label_set.size());
    std::vector<int> labels;
    for (const auto& e : manifest.entries) labels.push_back(static_cast<int>(manifest.class_index(e.label)));
    const FoldPlan plan = plan_folds(manifest, folds, master_seed);

    std::vector<CnnFoldOutcome> outcomes(folds);
    std::vector<cnn::CnnModel> models(folds);
    std::mutex log_mutex;
    detail::parallel_for(static_cast<std::size_t>(folds), threads, [&](std::size_t f) {
        std::vector<std::vector<double>> xs;
        std::vector<int> ys;
        for (std::size_t i : plan.train_indices(static_cast<int>(f))) {
            xs.push_back(clips[i]);
            ys.push_back(labels[i]);
        }
        // Classes absent from this training split stay in the head but get no clips.
        std::vector<int> present(n_classes, 0);
        for (int y : ys) present[y] = 1;
        std::vector<int> remap(n_classes, -1), back;
        for (int c = 0; c < n_classes; ++c)
            if (present[c]) {
                remap[c] = static_cast<int>(back.size());
                back.push_back(c);
            }
        if (back.size() < 2) throw data_error("fold " + std::to_string(f) + ": training split holds fewer than two classes");
        for (int& y : ys) y = remap[y];

        cnn::TrainConfig cfg = config;
        cfg.seed = derive_seed(master_seed, "cnn/" + std::to_string(f));
        auto trained = cnn::train(xs, ys, static_cast<int>(back.size()), cfg);

        std::vector<int> truth, pred;
        for (std::size_t i : plan.test_indices(static_cast<int>(f))) {
            truth.push_back(labels[i]);
            pred.push_back(back[cnn::predict(trained.model, {clips[i]}).front()]);
        }
        CnnFoldOutcome& o = outcomes[f];
        o.fold = static_cast<int>(f);
        o.seed = cfg.seed;
        o.test_uar = uar(confusion(truth, pred, static_cast<std::size_t>(n_classes)));
        o.history = std::move(trained.history);
        o.best_epoch = trained.best_epoch;
        if (back.size() != static_cast<std::size_t>(n_classes)) o.test_uar = -1.0;  // never selected
        models[f] = std::move(trained.model);
        if (progress) {
            std::lock_guard<std::mutex> lock(log_mutex);
            progress("cnn fold " + std::to_string(f) + ": test UAR " + std::to_string(o.test_uar) + " after " +
                     std::to_string(o.history.size()) + " epochs");
        }
    });

    CnnSelection s;
    std::vector<double> uars;
    for (const auto& o : outcomes) uars.push_back(o.test_uar);
    s.selected_fold = cnn::select_feature_extractor(uars);
    if (uars[s.selected_fold] < 0) throw data_error("no fold saw every class during CNN training");
    s.model = std::move(models[s.selected_fold]);
    s.folds = std::move(outcomes);
    return s;
}

CnnProtocolResult run_cnn_protocol(const audio::DatasetManifest& manifest, const std::vector<std::vector<double>>& clips,
                                   const cnn::TrainConfig& config, const ExperimentOptions& options,
                                   const ProgressFn& progress) {
    CnnProtocolResult r;
    r.selection = train_cnn_folds(manifest, clips, options.folds, config, options.seed, options.threads, progress);
    std::vector<std::string> ids;
    for (const auto& e : manifest.entries) ids.push_back(e.call_id);
    r.features = cnn::extract_features(r.selection.model, ids, clips, options.threads);
    r.report = run_experiment(r.features, manifest, options);
    return r;
}

nlohmann::json selection_to_json(const CnnSelection& s) {
    nlohmann::json j;
    j["selected_fold"] = s.selected_fold;
    auto folds = nlohmann::json::array();
    for (const auto& o : s.folds) {
        auto history = nlohmann::json::array();
        for (const auto& e : o.history) {
            auto nan_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
            history.push_back({{"epoch", e.epoch},
                               {"train_loss", e.train_loss},
                               {"train_uar", e.train_uar},
                               {"validation_loss", nan_null(e.validation_loss)},
                               {"validation_uar", nan_null(e.validation_uar)}});
        }
        folds.push_back({{"fold", o.fold},
                         {"seed", o.seed},
                         {"test_uar", o.test_uar},
                         {"best_epoch", o.best_epoch},
                         {"history", std::move(history)}});
    }
    j["folds"] = std::move(folds);
    return j;
}

}  // namespace meerkit::eval
