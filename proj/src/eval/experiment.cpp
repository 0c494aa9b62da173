#include "meerkit/eval.hpp"
#include "meerkit/error.hpp"
#include "meerkit/rng.hpp"
#include "../common/fsutil.hpp"
#include "../common/text.hpp"

#include <algorithm>
#include <sstream>

namespace meerkit::eval {

namespace {

std::string fold_seed_key(int fold) { return "grid_inner_fold" + std::to_string(fold); }

nlohmann::json kernel_json(const svm::KernelSpec& k, double C) {
    return {{"kernel", svm::kernel_name(k.kind)}, {"C", C}, {"gamma", k.gamma}, {"degree", k.degree}, {"coef0", k.coef0}};
}

svm::KernelSpec kernel_from(const nlohmann::json& j) {
    svm::KernelSpec k;
    k.kind = svm::parse_kernel(j.at("kernel").get<std::string>());
    k.gamma = j.at("gamma").get<double>();
    k.degree = j.at("degree").get<int>();
    k.coef0 = j.at("coef0").get<double>();
    return k;
}

nlohmann::json confusion_json(const ConfusionMatrix& m) {
    return {{"class_labels", m.class_labels()}, {"counts", m.counts()}};
}

ConfusionMatrix confusion_from(const nlohmann::json& j) {
    return ConfusionMatrix(j.at("class_labels").get<std::vector<std::string>>(),
                           j.at("counts").get<std::vector<std::vector<long>>>());
}

}  // namespace

std::map<std::string, std::uint64_t> derive_experiment_seeds(std::uint64_t master, int folds) {
    std::map<std::string, std::uint64_t> seeds;
    seeds["master"] = master;
    seeds["folds"] = derive_seed(master, "folds");
    for (int f = 0; f < folds; ++f) seeds[fold_seed_key(f)] = derive_seed(master, "grid-inner/" + std::to_string(f));
    return seeds;
}

FoldPlan plan_folds(const audio::DatasetManifest& manifest, int folds, std::uint64_t master_seed) {
    std::vector<int> labels;
    labels.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) labels.push_back(static_cast<int>(manifest.class_index(e.label)));
    return stratified_kfold(labels, folds, derive_seed(master_seed, "folds"));
}

FoldResult run_fold(const features::LabeledDataset& data, const FoldPlan& plan, int fold,
                    const ExperimentOptions& options) {
    if (plan.assignment.size() != data.size()) throw invalid_argument("fold plan does not match the dataset");
    const auto train_idx = plan.train_indices(fold);
    const auto test_idx = plan.test_indices(fold);
    const std::size_t n_classes = data.classes.size();

    FoldResult r;
    r.fold = fold;
    r.n_train = train_idx.size();
    r.n_test = test_idx.size();

    svm::Matrix xtrain, xtest;
    for (std::size_t i : train_idx) xtrain.push_back(data.x[i]);
    for (std::size_t i : test_idx) xtest.push_back(data.x[i]);
    if (options.standardize) {
        r.standardization = features::fit_moments(data.x, train_idx);
        for (auto& v : xtrain) features::standardize_in_place(v, r.standardization);
        for (auto& v : xtest) features::standardize_in_place(v, r.standardization);
    }

    // Classes absent from the training split are dropped from the SVM.
    std::vector<int> compact(n_classes, -1);
    std::vector<int> original;
    for (std::size_t i : train_idx) compact[data.y[i]] = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (compact[c] == 0) {
            compact[c] = static_cast<int>(original.size());
            original.push_back(static_cast<int>(c));
            r.train_classes.push_back(data.classes[c]);
        }
    }
    if (original.size() < 2)
        throw data_error("fold " + std::to_string(fold) + ": training split holds fewer than two classes");
    std::vector<int> ytrain;
    for (std::size_t i : train_idx) ytrain.push_back(compact[data.y[i]]);

    svm::GridOptions grid_options;
    grid_options.inner_folds = options.inner_folds;
    grid_options.score = options.grid_score;
    grid_options.seed = derive_seed(options.seed, "grid-inner/" + std::to_string(fold));
    grid_options.solver = options.solver;
    grid_options.threads = options.threads;
    const auto grid = svm::grid_search(xtrain, ytrain, original.size(), options.grid, grid_options);
    const auto& best = grid.best_point();
    r.kernel = best.kernel;
    r.C = best.C;
    r.grid_score = best.score;
    r.inner_folds_used = grid.inner_folds_used;
    r.train_score_fallback = grid.train_score_fallback;
    r.grid_table = grid.table;

    const auto model = svm::train_multiclass(xtrain, ytrain, original.size(), best.C, best.kernel, options.solver);
    r.solver_converged = model.all_converged();

    r.confusion = ConfusionMatrix(data.classes);
    for (std::size_t t = 0; t < test_idx.size(); ++t)
        r.confusion.add(data.y[test_idx[t]], original[model.predict(xtest[t])]);
    r.test_uar = uar(r.confusion);
    return r;
}

EvalReport run_experiment(const features::FeatureTable& table, const audio::DatasetManifest& manifest,
                          const ExperimentOptions& options) {
    const auto data = features::join(table, manifest, true);
    const auto plan = plan_folds(manifest, options.folds, options.seed);

    EvalReport report;
    report.toolkit_version = MEERKIT_VERSION_STRING;
    report.config_hash = options.config_hash;
    report.feature_set_id = table.feature_set_id();
    report.dimension = table.dimension();
    report.class_labels = data.classes;
    report.seeds = derive_experiment_seeds(options.seed, options.folds);
    report.folds = options.folds;
    report.standardized = options.standardize;
    report.grid_score_mode = options.grid_score == svm::GridScore::InnerCv ? "inner-cv" : "train";
    report.fold_assignment = plan.assignment;
    report.aggregate_confusion = ConfusionMatrix(data.classes);

    double sum = 0.0;
    for (int f = 0; f < options.folds; ++f) {
        report.per_fold.push_back(run_fold(data, plan, f, options));
        sum += report.per_fold.back().test_uar;
        report.aggregate_confusion += report.per_fold.back().confusion;
    }
    report.mean_uar = sum / options.folds;
    report.pooled_uar = uar(report.aggregate_confusion);
    return report;
}

nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["format"] = "meerkit-eval-report";
    j["format_version"] = r.format_version;
    j["toolkit_version"] = r.toolkit_version;
    j["config_hash"] = r.config_hash;
    j["feature_set_id"] = r.feature_set_id;
    j["dimension"] = r.dimension;
    j["class_labels"] = r.class_labels;
    j["seeds"] = r.seeds;
    j["folds"] = r.folds;
    j["standardized"] = r.standardized;
    j["grid_score_mode"] = r.grid_score_mode;
    j["fold_assignment"] = r.fold_assignment;
    auto folds = nlohmann::json::array();
    for (const auto& f : r.per_fold) {
        nlohmann::json fj;
        fj["fold"] = f.fold;
        fj["n_train"] = f.n_train;
        fj["n_test"] = f.n_test;
        fj["hyperparameters"] = kernel_json(f.kernel, f.C);
        fj["grid_score"] = f.grid_score;
        fj["inner_folds_used"] = f.inner_folds_used;
        fj["train_score_fallback"] = f.train_score_fallback;
        fj["solver_converged"] = f.solver_converged;
        fj["train_classes"] = f.train_classes;
        auto table = nlohmann::json::array();
        for (const auto& p : f.grid_table) {
            auto pj = kernel_json(p.kernel, p.C);
            pj["score"] = p.score;
            table.push_back(std::move(pj));
        }
        fj["grid"] = std::move(table);
        fj["standardization"] = {{"means", f.standardization.means}, {"stds", f.standardization.stds}};
        fj["test_uar"] = f.test_uar;
        fj["confusion"] = confusion_json(f.confusion);
        folds.push_back(std::move(fj));
    }
    j["per_fold"] = std::move(folds);
    j["mean_uar"] = r.mean_uar;
    j["pooled_uar"] = r.pooled_uar;
    j["aggregate_confusion"] = confusion_json(r.aggregate_confusion);
    return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "meerkit-eval-report") throw data_error("not an evaluation report");
        EvalReport r;
        r.format_version = j.at("format_version").get<int>();
        if (r.format_version != 1) throw data_error("unsupported report version");
        r.toolkit_version = j.at("toolkit_version").get<std::string>();
        r.config_hash = j.at("config_hash").get<std::string>();
        r.feature_set_id = j.at("feature_set_id").get<std::string>();
        r.dimension = j.at("dimension").get<std::size_t>();
        r.class_labels = j.at("class_labels").get<std::vector<std::string>>();
        r.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
        r.folds = j.at("folds").get<int>();
        r.standardized = j.at("standardized").get<bool>();
        r.grid_score_mode = j.at("grid_score_mode").get<std::string>();
        r.fold_assignment = j.at("fold_assignment").get<std::vector<int>>();
        for (const auto& fj : j.at("per_fold")) {
            FoldResult f;
            f.fold = fj.at("fold").get<int>();
            f.n_train = fj.at("n_train").get<std::size_t>();
            f.n_test = fj.at("n_test").get<std::size_t>();
            f.kernel = kernel_from(fj.at("hyperparameters"));
            f.C = fj.at("hyperparameters").at("C").get<double>();
            f.grid_score = fj.at("grid_score").get<double>();
            f.inner_folds_used = fj.at("inner_folds_used").get<int>();
            f.train_score_fallback = fj.at("train_score_fallback").get<bool>();
            f.solver_converged = fj.at("solver_converged").get<bool>();
            f.train_classes = fj.at("train_classes").get<std::vector<std::string>>();
            for (const auto& pj : fj.at("grid")) {
                svm::GridPoint p;
                p.kernel = kernel_from(pj);
                p.C = pj.at("C").get<double>();
                p.score = pj.at("score").get<double>();
                f.grid_table.push_back(p);
            }
            f.standardization.means = fj.at("standardization").at("means").get<std::vector<double>>();
            f.standardization.stds = fj.at("standardization").at("stds").get<std::vector<double>>();
            f.test_uar = fj.at("test_uar").get<double>();
            f.confusion = confusion_from(fj.at("confusion"));
            r.per_fold.push_back(std::move(f));
        }
        r.mean_uar = j.at("mean_uar").get<double>();
        r.pooled_uar = j.at("pooled_uar").get<double>();
        r.aggregate_confusion = confusion_from(j.at("aggregate_confusion"));
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("malformed report: ") + e.what());
    }
}

std::string confusion_csv(const ConfusionMatrix& m) {
    std::ostringstream out;
    out << "true\\predicted";
    for (const auto& l : m.class_labels()) out << ',' << l;
    out << '\n';
    for (std::size_t i = 0; i < m.n_classes(); ++i) {
        out << m.class_labels()[i];
        for (std::size_t j = 0; j < m.n_classes(); ++j) out << ',' << m.at(i, j);
        out << '\n';
    }
    return out.str();
}

std::vector<std::filesystem::path> export_report(const EvalReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw io_error("cannot create report directory " + dir.string());
    std::vector<std::filesystem::path> written;
    auto emit = [&](const std::string& name, const std::string& content) {
        fsutil::write_atomic(dir / name, content);
        written.push_back(dir / name);
    };
    emit("report.json", report_to_json(report).dump(2) + "\n");
    for (const auto& f : report.per_fold) emit("confusion_fold" + std::to_string(f.fold) + ".csv", confusion_csv(f.confusion));
    emit("confusion_aggregate.csv", confusion_csv(report.aggregate_confusion));

    std::ostringstream s;
    s << "fold,uar,kernel,C,gamma,n_test\n";
    for (const auto& f : report.per_fold) {
        s << f.fold << ',' << text::format_double(f.test_uar) << ',' << svm::kernel_name(f.kernel.kind) << ','
          << text::format_double(f.C) << ',' << text::format_double(f.kernel.gamma) << ',' << f.n_test << '\n';
    }
    s << "mean," << text::format_double(report.mean_uar) << ",,,,\n";
    s << "pooled," << text::format_double(report.pooled_uar) << ",,,,\n";
    emit("uar_summary.csv", s.str());
    return written;
}

EvalReport load_report(const std::filesystem::path& report_json) {
    const std::string text = fsutil::read_text(report_json);
    try {
        return report_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error(report_json.string() + ": " + e.what());
    }
}

}  // namespace meerkit::eval
