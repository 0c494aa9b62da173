#include "meerkit/meerkit.h"

#include "meerkit/catch22.hpp"
#include "meerkit/cnn.hpp"
#include "meerkit/error.hpp"
#include "meerkit/features.hpp"
#include "meerkit/metrics.hpp"
#include "meerkit/pipeline.hpp"
#include "meerkit/svm.hpp"
#include "../common/fsutil.hpp"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <set>
#include <string>

using nlohmann::json;
namespace mk = meerkit;

struct meerkit_config {
    json doc;
    std::filesystem::path base_dir;
    std::set<std::string> overridden;
};

struct meerkit_features {
    mk::features::FeatureTable table;
};

struct meerkit_svm {
    mk::svm::MultiClassSvmModel model;
};

struct meerkit_cnn {
    mk::cnn::CnnModel model;
};

namespace {

thread_local std::string g_last_error;

meerkit_status fail(meerkit_status s, const std::string& msg) {
    g_last_error = msg;
    return s;
}

/// Runs body, translating every exception into a status code.
template <typename F>
meerkit_status guarded(F&& body) {
    try {
        body();
        return MEERKIT_OK;
    } catch (const mk::Error& e) {
        return fail(static_cast<meerkit_status>(static_cast<int>(e.kind())), e.what());
    } catch (const json::exception& e) {
        return fail(MEERKIT_ERR_CONFIG, std::string("invalid JSON: ") + e.what());
    } catch (const std::bad_alloc&) {
        return fail(MEERKIT_ERR_INTERNAL, "out of memory");
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(MEERKIT_ERR_IO, e.what());
    } catch (const std::exception& e) {
        return fail(MEERKIT_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(MEERKIT_ERR_INTERNAL, "unknown failure");
    }
}

void require(bool ok, const char* what) {
    if (!ok) throw mk::invalid_argument(what);
}

char* dup_string(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (!p) throw std::bad_alloc();
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

mk::pipeline::RunConfig resolve(const meerkit_config& c) {
    auto cfg = mk::pipeline::parse_config(c.doc, c.base_dir);
    if (!c.overridden.count("seed")) mk::pipeline::apply_environment(cfg);
    return cfg;
}

json::json_pointer pointer_for(const std::string& key) {
    std::string p;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw mk::invalid_argument("malformed config key '" + key + "'");
        p += "/" + part;
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    return json::json_pointer(p);
}

mk::svm::Matrix to_matrix(const double* x, std::size_t n, std::size_t d) {
    mk::svm::Matrix m(n, std::vector<double>(d));
    for (std::size_t i = 0; i < n; ++i) std::copy(x + i * d, x + (i + 1) * d, m[i].begin());
    return m;
}

}  // namespace

extern "C" {

const char* meerkit_version(void) { return MEERKIT_VERSION_STRING; }

const char* meerkit_last_error(void) { return g_last_error.c_str(); }

void meerkit_string_free(char* s) { std::free(s); }

meerkit_status meerkit_config_load(const char* path, meerkit_config** out) {
    return guarded([&] {
        require(path && out, "path and out must not be NULL");
        *out = nullptr;
        const std::filesystem::path p(path);
        if (!std::filesystem::exists(p)) throw mk::config_error(std::string("config file not found: ") + path);
        auto c = std::make_unique<meerkit_config>();
        try {
            c->doc = json::parse(mk::fsutil::read_text(p));
        } catch (const json::parse_error& e) {
            throw mk::config_error(std::string(path) + ": invalid JSON: " + e.what());
        }
        c->base_dir = std::filesystem::absolute(p).parent_path();
        resolve(*c);
        *out = c.release();
    });
}

meerkit_status meerkit_config_from_json(const char* text, const char* base_dir, meerkit_config** out) {
    return guarded([&] {
        require(text && out, "json and out must not be NULL");
        *out = nullptr;
        auto c = std::make_unique<meerkit_config>();
        c->doc = json::parse(text);
        c->base_dir = base_dir ? std::filesystem::absolute(base_dir) : std::filesystem::current_path();
        resolve(*c);
        *out = c.release();
    });
}

meerkit_status meerkit_config_override(meerkit_config* config, const char* key, const char* value_json) {
    return guarded([&] {
        require(config && key && value_json, "config, key and value must not be NULL");
        json value;
        try {
            value = json::parse(value_json);
        } catch (const json::parse_error& e) {
            throw mk::config_error(std::string("override ") + key + ": invalid JSON value: " + e.what());
        }
        json saved = config->doc;
        try {
            config->doc[pointer_for(key)] = std::move(value);
            config->overridden.insert(key);
            resolve(*config);
        } catch (...) {
            config->doc = std::move(saved);
            config->overridden.erase(key);
            throw;
        }
    });
}

meerkit_status meerkit_config_resolved_json(const meerkit_config* config, char** out_json) {
    return guarded([&] {
        require(config && out_json, "config and out must not be NULL");
        json j = mk::pipeline::config_to_json(resolve(*config));
        j["config_hash"] = mk::pipeline::config_hash(resolve(*config));
        *out_json = dup_string(j.dump(2));
    });
}

void meerkit_config_free(meerkit_config* config) { delete config; }

meerkit_status meerkit_run_command(const meerkit_config* config, const char* command, const char* argument,
                                   const char* options_json, meerkit_log_fn log, void* log_user_data,
                                   char** out_summary) {
    return guarded([&] {
        require(config && command, "config and command must not be NULL");
        const auto cfg = resolve(*config);
        mk::pipeline::CommandOptions opt;
        if (options_json) {
            const json o = json::parse(options_json);
            if (!o.is_object()) throw mk::invalid_argument("options must be a JSON object");
            for (const auto& [k, v] : o.items()) {
                if (k == "dry_run") opt.dry_run = v.get<bool>();
                else if (k == "skip_bad") opt.skip_bad = v.get<bool>();
                else if (k == "model") opt.model_path = std::filesystem::absolute(v.get<std::string>());
                else throw mk::invalid_argument("unknown command option '" + k + "'");
            }
        }
        if (log) opt.log = [log, log_user_data](const std::string& m) { log(m.c_str(), log_user_data); };

        const std::string cmd = command;
        const bool needs_arg = cmd == "extract" || cmd == "classify" || cmd == "render";
        if (needs_arg && (!argument || !*argument)) throw mk::config_error("command '" + cmd + "' needs a target");
        const std::string arg = argument ? argument : "";

        mk::pipeline::CommandResult r;
        if (cmd == "prepare") r = mk::pipeline::cmd_prepare(cfg, opt);
        else if (cmd == "extract") r = mk::pipeline::cmd_extract(cfg, arg, opt);
        else if (cmd == "train-cnn") r = mk::pipeline::cmd_train_cnn(cfg, opt);
        else if (cmd == "classify") r = mk::pipeline::cmd_classify(cfg, arg, opt);
        else if (cmd == "analyze-filters") r = mk::pipeline::cmd_analyze_filters(cfg, opt);
        else if (cmd == "render") r = mk::pipeline::cmd_render(cfg, arg, opt);
        else if (cmd == "report") r = mk::pipeline::cmd_report(cfg, opt);
        else throw mk::invalid_argument("unknown command '" + cmd + "'");

        if (out_summary) {
            json s;
            s["plan"] = r.plan;
            auto outputs = json::array();
            for (const auto& p : r.outputs) outputs.push_back(p.string());
            s["outputs"] = std::move(outputs);
            s["summary"] = r.summary;
            *out_summary = dup_string(s.dump());
        }
    });
}

meerkit_status meerkit_features_load(const char* csv_path, size_t expected_dimension, meerkit_features** out) {
    return guarded([&] {
        require(csv_path && out, "path and out must not be NULL");
        *out = nullptr;
        auto t = std::make_unique<meerkit_features>();
        t->table = mk::features::ingest_csv(
            csv_path, expected_dimension ? std::optional<std::size_t>(expected_dimension) : std::nullopt);
        *out = t.release();
    });
}

size_t meerkit_features_rows(const meerkit_features* t) { return t ? t->table.size() : 0; }

size_t meerkit_features_dimension(const meerkit_features* t) { return t ? t->table.dimension() : 0; }

const char* meerkit_features_call_id(const meerkit_features* t, size_t row) {
    if (!t || row >= t->table.size()) return nullptr;
    return t->table.call_ids()[row].c_str();
}

meerkit_status meerkit_features_row(const meerkit_features* t, size_t row, double* out, size_t out_len) {
    return guarded([&] {
        require(t && out, "table and out must not be NULL");
        require(row < t->table.size(), "row index out of range");
        require(out_len >= t->table.dimension(), "output buffer is shorter than the dimension");
        const auto& r = t->table.row(row);
        std::copy(r.begin(), r.end(), out);
    });
}

void meerkit_features_free(meerkit_features* t) { delete t; }

meerkit_status meerkit_catch24(const double* series, size_t length, double out[MEERKIT_CATCH24_DIM]) {
    return guarded([&] {
        require(series && out, "series and out must not be NULL");
        const auto v = mk::catch22::compute_catch24(std::span<const double>(series, length));
        std::copy(v.values.begin(), v.values.end(), out);
    });
}

meerkit_status meerkit_svm_train(const double* x, size_t n, size_t d, const int* labels, size_t n_classes,
                                 const char* params_json, meerkit_svm** out) {
    return guarded([&] {
        require(x && labels && out, "x, labels and out must not be NULL");
        require(n > 0 && d > 0, "n and d must be positive");
        *out = nullptr;
        mk::svm::KernelSpec spec;
        double C = 1.0;
        mk::svm::SolverOptions solver;
        if (params_json) {
            const json p = json::parse(params_json);
            if (!p.is_object()) throw mk::invalid_argument("params must be a JSON object");
            for (const auto& [k, v] : p.items()) {
                if (k == "kernel") spec.kind = mk::svm::parse_kernel(v.get<std::string>());
                else if (k == "C") C = v.get<double>();
                else if (k == "gamma") spec.gamma = v.get<double>();
                else if (k == "degree") spec.degree = v.get<int>();
                else if (k == "coef0") spec.coef0 = v.get<double>();
                else if (k == "tol") solver.tol = v.get<double>();
                else throw mk::invalid_argument("unknown SVM parameter '" + k + "'");
            }
        }
        std::vector<int> y(labels, labels + n);
        auto m = std::make_unique<meerkit_svm>();
        m->model = mk::svm::train_multiclass(to_matrix(x, n, d), y, n_classes, C, spec, solver);
        *out = m.release();
    });
}

meerkit_status meerkit_svm_predict(const meerkit_svm* model, const double* x, size_t n, size_t d, int* out_labels) {
    return guarded([&] {
        require(model && x && out_labels, "model, x and out must not be NULL");
        if (d != model->model.dimension)
            throw mk::invalid_argument("dimension " + std::to_string(d) + " does not match the model's " +
                                       std::to_string(model->model.dimension));
        for (std::size_t i = 0; i < n; ++i) out_labels[i] = model->model.predict(std::span<const double>(x + i * d, d));
    });
}

meerkit_status meerkit_svm_save(const meerkit_svm* model, const char* path) {
    return guarded([&] {
        require(model && path, "model and path must not be NULL");
        mk::fsutil::write_atomic(path, mk::svm::to_json(model->model).dump() + "\n");
    });
}

meerkit_status meerkit_svm_load(const char* path, meerkit_svm** out) {
    return guarded([&] {
        require(path && out, "path and out must not be NULL");
        *out = nullptr;
        auto m = std::make_unique<meerkit_svm>();
        try {
            m->model = mk::svm::from_json(json::parse(mk::fsutil::read_text(path)));
        } catch (const json::exception& e) {
            throw mk::data_error(std::string(path) + ": malformed SVM model: " + e.what());
        }
        *out = m.release();
    });
}

void meerkit_svm_free(meerkit_svm* model) { delete model; }

meerkit_status meerkit_cnn_load(const char* path, meerkit_cnn** out) {
    return guarded([&] {
        require(path && out, "path and out must not be NULL");
        *out = nullptr;
        auto m = std::make_unique<meerkit_cnn>();
        try {
            m->model = mk::cnn::model_from_json(json::parse(mk::fsutil::read_text(path)));
        } catch (const json::exception& e) {
            throw mk::data_error(std::string(path) + ": malformed CNN model: " + e.what());
        }
        *out = m.release();
    });
}

size_t meerkit_cnn_n_classes(const meerkit_cnn* model) {
    return model ? static_cast<size_t>(model->model.n_classes()) : 0;
}

meerkit_status meerkit_cnn_forward(const meerkit_cnn* model, const double* waveform, size_t length,
                                   double hidden[MEERKIT_CNN_HIDDEN_DIM], double* logits) {
    return guarded([&] {
        require(model && waveform && hidden, "model, waveform and hidden must not be NULL");
        const auto r = mk::cnn::forward(model->model, std::span<const double>(waveform, length));
        std::copy(r.hidden.begin(), r.hidden.end(), hidden);
        if (logits) std::copy(r.logits.begin(), r.logits.end(), logits);
    });
}

meerkit_status meerkit_cnn_filter_response(const meerkit_cnn* model, double sample_rate_hz,
                                           double freqs_hz[MEERKIT_FILTER_BINS],
                                           double log_cumulative_magnitude[MEERKIT_FILTER_BINS]) {
    return guarded([&] {
        require(model && freqs_hz && log_cumulative_magnitude, "model and outputs must not be NULL");
        require(sample_rate_hz > 0, "sample rate must be positive");
        const auto r = mk::cnn::filter_frequency_response(model->model, sample_rate_hz);
        std::copy(r.freqs_hz.begin(), r.freqs_hz.end(), freqs_hz);
        std::copy(r.log_cumulative_magnitude.begin(), r.log_cumulative_magnitude.end(), log_cumulative_magnitude);
    });
}

void meerkit_cnn_free(meerkit_cnn* model) { delete model; }

meerkit_status meerkit_uar(const long* counts, size_t k, double* out) {
    return guarded([&] {
        require(counts && out && k > 0, "counts and out must not be NULL and k positive");
        std::vector<std::string> labels;
        std::vector<std::vector<long>> m(k, std::vector<long>(k));
        for (std::size_t i = 0; i < k; ++i) {
            labels.push_back(std::to_string(i));
            for (std::size_t j = 0; j < k; ++j) {
                require(counts[i * k + j] >= 0, "counts must be non-negative");
                m[i][j] = counts[i * k + j];
            }
        }
        *out = mk::eval::uar(mk::eval::ConfusionMatrix(std::move(labels), std::move(m)));
    });
}

}  // extern "C"
