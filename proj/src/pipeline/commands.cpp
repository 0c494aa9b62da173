#include "meerkit/pipeline.hpp"
#include "meerkit/audio.hpp"
#include "meerkit/catch22.hpp"
#include "meerkit/error.hpp"
#include "meerkit/eval.hpp"
#include "meerkit/features.hpp"
#include "meerkit/protocol.hpp"
#include "../common/fsutil.hpp"
#include "../common/parallel.hpp"
#include "../common/text.hpp"
#include "lock.hpp"

#include <algorithm>
#include <sstream>

namespace meerkit::pipeline {

namespace fs = std::filesystem;

using detail::WorkdirLock;

namespace {

void say(const CommandOptions& opt, const std::string& msg) {
    if (opt.log) opt.log(msg);
}

std::string sanitize(const std::string& id) {
    std::string out;
    for (char c : id)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
    return out;
}

fs::path effective_manifest_path(const Workdir& wd) { return wd.processed() / "manifest.csv"; }

/// Manifest of the prepared clips (skipped entries excluded).
audio::DatasetManifest prepared_manifest(const Workdir& wd) {
    const fs::path p = effective_manifest_path(wd);
    if (!fs::exists(p)) throw data_error("no prepared clips in " + wd.processed().string() + "; run `prepare` first");
    return audio::load_manifest(p);
}

/// Manifest used for evaluation: the prepared one when present, else the configured one.
audio::DatasetManifest evaluation_manifest(const RunConfig& config, const Workdir& wd) {
    if (fs::exists(effective_manifest_path(wd))) return audio::load_manifest(effective_manifest_path(wd));
    return audio::load_manifest(config.manifest);
}

std::vector<std::vector<double>> load_prepared_clips(const audio::DatasetManifest& m, unsigned threads) {
    std::vector<std::vector<double>> clips(m.entries.size());
    meerkit::detail::parallel_for(m.entries.size(), threads, [&](std::size_t i) {
        clips[i] = audio::load_wav(m.resolve(m.entries[i])).samples;
    });
    return clips;
}

cnn::CnnModel load_model(const fs::path& path) {
    if (!fs::exists(path))
        throw data_error("no trained CNN model at " + path.string() + "; run `train-cnn` first");
    try {
        return cnn::model_from_json(nlohmann::json::parse(fsutil::read_text(path)));
    } catch (const nlohmann::json::exception& e) {
        throw data_error(path.string() + ": malformed model file: " + e.what());
    }
}

eval::ExperimentOptions experiment_options(const RunConfig& c) {
    eval::ExperimentOptions o;
    o.folds = c.folds;
    o.grid = c.grid;
    o.seed = c.seed;
    o.standardize = c.standardize;
    o.inner_folds = c.inner_folds;
    o.grid_score = c.grid_score;
    o.solver.tol = c.svm_tol;
    o.threads = c.threads;
    o.config_hash = config_hash(c);
    return o;
}

features::FeatureTable catch24_table(const std::string& id, const audio::DatasetManifest& m,
                                     const std::vector<std::vector<double>>& clips, unsigned threads) {
    std::vector<std::vector<double>> rows(clips.size());
    meerkit::detail::parallel_for(clips.size(), threads, [&](std::size_t i) {
        const auto v = catch22::compute_catch24(clips[i]);
        rows[i].assign(v.values.begin(), v.values.end());
    });
    features::FeatureTable t(id, catch22::feature_names());
    for (std::size_t i = 0; i < rows.size(); ++i) t.add_row(m.entries[i].call_id, std::move(rows[i]));
    return t;
}

}  // namespace

CommandResult cmd_prepare(const RunConfig& config, const CommandOptions& options) {
    const Workdir wd{config.workdir};
    const audio::DatasetManifest manifest = audio::load_manifest(config.manifest);
    CommandResult r;
    if (options.dry_run) {
        r.plan.push_back("prepare: " + std::to_string(manifest.entries.size()) + " manifest entries from " +
                         config.manifest.string());
        r.plan.push_back("prepare: resample to " + std::to_string(config.target_rate_hz) + " Hz, replicate to at least " +
                         text::format_double(config.min_ms) + " ms");
        r.plan.push_back("prepare: write " + wd.clips().string() + "/, " + effective_manifest_path(wd).string() + ", " +
                         wd.prepare_log().string());
        return r;
    }
    WorkdirLock lock(wd);

    struct Outcome {
        bool ok = false;
        std::string file, message;
        int rate = 0;
        double ms = 0;
        std::size_t factor = 0;
        audio::AudioClip clip;
    };
    const std::size_t n = manifest.entries.size();
    std::vector<Outcome> out(n);
    meerkit::detail::parallel_for(n, config.threads, [&](std::size_t i) {
        const auto& e = manifest.entries[i];
        Outcome& o = out[i];
        char prefix[16];
        std::snprintf(prefix, sizeof prefix, "%05zu_", i);
        o.file = std::string(prefix) + sanitize(e.call_id) + ".wav";
        try {
            audio::AudioClip clip = audio::load_wav(manifest.resolve(e));
            clip.call_id = e.call_id;
            audio::validate(clip);
            o.rate = clip.sample_rate_hz;
            o.ms = clip.duration_ms();
            audio::AudioClip res = audio::resample(clip, config.target_rate_hz);
            for (auto& v : res.samples) v = std::clamp(v, -1.0, 1.0);
            o.factor = audio::replication_factor(res.samples.size(), config.min_ms, config.target_rate_hz);
            o.clip = audio::enforce_min_duration(res, config.min_ms);
            o.ok = true;
        } catch (const Error& err) {
            o.message = err.what();
        }
    });

    std::size_t skipped = 0;
    std::string bad_list;
    for (std::size_t i = 0; i < n; ++i)
        if (!out[i].ok) {
            ++skipped;
            bad_list += "\n  " + manifest.entries[i].call_id + ": " + out[i].message;
        }
    if (skipped && !options.skip_bad)
        throw data_error(std::to_string(skipped) + " unreadable or invalid clip(s); rerun with --skip-bad to skip them:" +
                         bad_list);
    if (n - skipped == 0) throw data_error("no usable clips in " + config.manifest.string());

    std::error_code ec;
    fs::remove_all(wd.clips(), ec);
    fs::create_directories(wd.clips());
    std::string log = "call_id,file,original_rate_hz,original_ms,replication_factor,status,message\n";
    std::string effective = "call_id,path,label\n";
    for (std::size_t i = 0; i < n; ++i) {
        const auto& e = manifest.entries[i];
        const Outcome& o = out[i];
        if (o.ok) {
            audio::save_wav(o.clip, wd.clips() / o.file, audio::WavEncoding::Float32);
            log += e.call_id + "," + o.file + "," + std::to_string(o.rate) + "," + text::format_double(o.ms) + "," +
                   std::to_string(o.factor) + ",ok,\n";
            effective += e.call_id + ",clips/" + o.file + "," + e.label + "\n";
        } else {
            std::string msg = o.message;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            log += e.call_id + ",,,,,skipped," + msg + "\n";
            say(options, "skipped " + e.call_id + ": " + o.message);
        }
    }
    fsutil::write_atomic(wd.prepare_log(), log);
    fsutil::write_atomic(effective_manifest_path(wd), effective);
    say(options, "prepared " + std::to_string(n - skipped) + " clips, skipped " + std::to_string(skipped));
    r.outputs = {wd.clips(), wd.prepare_log(), effective_manifest_path(wd)};
    r.summary = {{"prepared", n - skipped}, {"skipped", skipped}};
    return r;
}

CommandResult cmd_extract(const RunConfig& config, const std::string& feature_set_id, const CommandOptions& options) {
    const FeatureSource& src = config.source(feature_set_id);
    const Workdir wd{config.workdir};
    const fs::path target = wd.features(feature_set_id);
    CommandResult r;
    if (options.dry_run) {
        std::string from = src.kind == SourceKind::ExternalCsv ? src.path.string()
                           : src.kind == SourceKind::CnnCrafted ? wd.cnn_model().string() + " over prepared clips"
                                                                : "prepared clips";
        r.plan.push_back("extract: " + feature_set_id + " (" + source_kind_name(src.kind) + ") from " + from + " -> " +
                         target.string());
        return r;
    }
    WorkdirLock lock(wd);

    features::FeatureTable table;
    if (src.kind == SourceKind::ExternalCsv) {
        if (!fs::exists(src.path)) throw data_error("external feature CSV not found: " + src.path.string());
        table = features::ingest_csv(src.path, src.dimension, feature_set_id);
    } else {
        const auto manifest = prepared_manifest(wd);
        if (src.kind == SourceKind::CnnCrafted) {
            const cnn::CnnModel model = load_model(wd.cnn_model());
            const auto clips = load_prepared_clips(manifest, config.threads);
            std::vector<std::string> ids;
            for (const auto& e : manifest.entries) ids.push_back(e.call_id);
            table = cnn::extract_features(model, ids, clips, config.threads);
            table.set_feature_set_id(feature_set_id);
        } else {
            table = catch24_table(feature_set_id, manifest, load_prepared_clips(manifest, config.threads), config.threads);
        }
    }
    fs::create_directories(target.parent_path());
    features::export_csv(table, target);
    say(options, "extracted " + feature_set_id + ": " + std::to_string(table.size()) + " rows, dimension " +
                     std::to_string(table.dimension()));
    r.outputs = {target};
    r.summary = {{"feature_set_id", feature_set_id}, {"rows", table.size()}, {"dimension", table.dimension()}};
    return r;
}

CommandResult cmd_train_cnn(const RunConfig& config, const CommandOptions& options) {
    const Workdir wd{config.workdir};
    CommandResult r;
    if (options.dry_run) {
        r.plan.push_back("train-cnn: " + std::to_string(config.folds) + " fold models, up to " +
                         std::to_string(config.cnn.epochs) + " epochs each, over " + effective_manifest_path(wd).string());
        r.plan.push_back("train-cnn: write " + wd.cnn_model().string() + ", " + wd.cnn_selection().string());
        return r;
    }
    WorkdirLock lock(wd);
    const auto manifest = prepared_manifest(wd);
    const auto clips = load_prepared_clips(manifest, config.threads);
    const eval::CnnSelection sel =
        eval::train_cnn_folds(manifest, clips, config.folds, config.cnn, config.seed, config.threads, options.log);
    nlohmann::json selection = eval::selection_to_json(sel);
    selection["config_hash"] = config_hash(config);
    selection["class_labels"] = manifest.label_set;
    fsutil::write_atomic(wd.cnn_model(), cnn::to_json(sel.model).dump() + "\n");
    fsutil::write_atomic(wd.cnn_selection(), selection.dump(2) + "\n");
    say(options, "selected fold " + std::to_string(sel.selected_fold) + " (test UAR " +
                     text::format_double(sel.folds[sel.selected_fold].test_uar) + ")");
    r.outputs = {wd.cnn_model(), wd.cnn_selection()};
    r.summary = {{"selected_fold", sel.selected_fold}, {"selected_test_uar", sel.folds[sel.selected_fold].test_uar}};
    return r;
}

CommandResult cmd_classify(const RunConfig& config, const std::string& feature_set_id, const CommandOptions& options) {
    const FeatureSource& src = config.source(feature_set_id);
    const Workdir wd{config.workdir};
    const fs::path csv = wd.features(feature_set_id);
    CommandResult r;
    if (options.dry_run) {
        r.plan.push_back("classify: " + feature_set_id + " from " + csv.string() + ", " + std::to_string(config.folds) +
                         "-fold SVM evaluation, seed " + std::to_string(config.seed));
        r.plan.push_back("classify: write " + wd.report_dir(feature_set_id).string() + "/");
        return r;
    }
    if (!fs::exists(csv))
        throw data_error("feature CSV not found: expected " + csv.string() + " (run `extract " + feature_set_id + "` first)");
    WorkdirLock lock(wd);
    const auto manifest = evaluation_manifest(config, wd);
    std::optional<std::size_t> dim = src.dimension;
    if (src.kind == SourceKind::Catch24) dim = catch22::kFeatureCount;
    if (src.kind == SourceKind::CnnCrafted) dim = cnn::kHiddenUnits;
    const auto table = features::ingest_csv(csv, dim, feature_set_id);
    const eval::EvalReport report = eval::run_experiment(table, manifest, experiment_options(config));
    r.outputs = eval::export_report(report, wd.report_dir(feature_set_id));
    for (const auto& f : report.per_fold)
        say(options, "fold " + std::to_string(f.fold) + ": UAR " + text::format_double(f.test_uar) + " (" +
                         svm::kernel_name(f.kernel.kind) + ", C " + text::format_double(f.C) + ")");
    say(options, feature_set_id + ": mean UAR " + text::format_double(report.mean_uar) + ", pooled UAR " +
                     text::format_double(report.pooled_uar));
    r.summary = {{"feature_set_id", feature_set_id}, {"mean_uar", report.mean_uar}, {"pooled_uar", report.pooled_uar}};
    return r;
}

CommandResult cmd_analyze_filters(const RunConfig& config, const CommandOptions& options) {
    const Workdir wd{config.workdir};
    const fs::path model_path = options.model_path ? *options.model_path : wd.cnn_model();
    const fs::path target = wd.filters_dir() / "filter_response.csv";
    CommandResult r;
    if (options.dry_run) {
        r.plan.push_back("analyze-filters: " + model_path.string() + " -> " + target.string());
        return r;
    }
    WorkdirLock lock(wd);
    const cnn::CnnModel model = load_model(model_path);
    const auto response = cnn::filter_frequency_response(model, config.target_rate_hz);
    fsutil::write_atomic(target, cnn::filter_response_csv(response));
    say(options, "wrote " + std::to_string(response.freqs_hz.size()) + " bins to " + target.string());
    r.outputs = {target};
    r.summary = {{"bins", response.freqs_hz.size()}};
    return r;
}

CommandResult cmd_report(const RunConfig& config, const CommandOptions& options) {
    const Workdir wd{config.workdir};
    const fs::path target = wd.reports() / "summary.csv";
    CommandResult r;
    if (options.dry_run) {
        r.plan.push_back("report: collect " + wd.reports().string() + "/*/report.json -> " + target.string());
        return r;
    }
    WorkdirLock lock(wd);
    std::vector<fs::path> found;
    if (fs::is_directory(wd.reports()))
        for (const auto& d : fs::directory_iterator(wd.reports()))
            if (d.is_directory() && fs::exists(d.path() / "report.json")) found.push_back(d.path() / "report.json");
    std::sort(found.begin(), found.end());
    if (found.empty()) throw data_error("no reports under " + wd.reports().string() + "; run `classify` first");
    std::string csv = "feature_set_id,dimension,folds,mean_uar,pooled_uar,standardized,grid_score,config_hash\n";
    auto rows = nlohmann::json::array();
    for (const auto& p : found) {
        const auto rep = eval::load_report(p);
        csv += rep.feature_set_id + "," + std::to_string(rep.dimension) + "," + std::to_string(rep.folds) + "," +
               text::format_double(rep.mean_uar) + "," + text::format_double(rep.pooled_uar) + "," +
               (rep.standardized ? "true" : "false") + "," + rep.grid_score_mode + "," + rep.config_hash + "\n";
        rows.push_back({{"feature_set_id", rep.feature_set_id}, {"mean_uar", rep.mean_uar}});
        say(options, rep.feature_set_id + ": mean UAR " + text::format_double(rep.mean_uar));
    }
    fsutil::write_atomic(target, csv);
    r.outputs = {target};
    r.summary = {{"reports", rows}};
    return r;
}

}  // namespace meerkit::pipeline
