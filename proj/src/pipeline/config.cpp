#include "meerkit/pipeline.hpp"
#include "meerkit/error.hpp"
#include "meerkit/rng.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

namespace meerkit::pipeline {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& key, const std::string& why) {
    throw config_error("config key '" + key + "': " + why);
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!known.count(key)) throw config_error("unknown config key '" + where + key + "'");
    }
}

const json& object_at(const json& j, const std::string& key) {
    if (!j.at(key).is_object()) bad(key, "must be an object");
    return j.at(key);
}

int get_int(const json& j, const std::string& key, int lo) {
    const json& v = j.at(key);
    if (!v.is_number_integer()) bad(key, "must be an integer");
    const auto x = v.get<long long>();
    if (x < lo || x > 1'000'000'000) bad(key, "must be at least " + std::to_string(lo));
    return static_cast<int>(x);
}

double get_positive(const json& j, const std::string& key) {
    const json& v = j.at(key);
    if (!v.is_number()) bad(key, "must be a number");
    const double x = v.get<double>();
    if (!(x > 0) || !std::isfinite(x)) bad(key, "must be positive");
    return x;
}

std::vector<double> get_positive_list(const json& j, const std::string& key) {
    const json& v = j.at(key);
    if (!v.is_array() || v.empty()) bad(key, "must be a non-empty array");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number() || !(e.get<double>() > 0) || !std::isfinite(e.get<double>())) bad(key, "entries must be positive numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative()) path = base / path;
    return path.lexically_normal();
}

bool valid_id(const std::string& id) {
    if (id.empty() || id == "." || id == ".." || id == "filters") return false;
    for (char c : id)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' || c == '+')) return false;
    return true;
}

SourceKind parse_kind(const std::string& s) {
    if (s == "catch24") return SourceKind::Catch24;
    if (s == "cnn-crafted") return SourceKind::CnnCrafted;
    if (s == "external-csv") return SourceKind::ExternalCsv;
    throw config_error("unknown feature source kind '" + s + "' (expected catch24, cnn-crafted or external-csv)");
}

}  // namespace

std::string source_kind_name(SourceKind kind) {
    switch (kind) {
        case SourceKind::Catch24: return "catch24";
        case SourceKind::CnnCrafted: return "cnn-crafted";
        case SourceKind::ExternalCsv: return "external-csv";
    }
    return "unknown";
}

const FeatureSource& RunConfig::source(const std::string& id) const {
    for (const auto& s : sources)
        if (s.feature_set_id == id) return s;
    std::string known;
    for (const auto& s : sources) known += (known.empty() ? "" : ", ") + s.feature_set_id;
    throw config_error("unknown feature set '" + id + "' (configured: " + known + ")");
}

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw config_error("config must be a JSON object");
    reject_unknown(doc,
                   {"manifest", "workdir", "target_rate_hz", "min_ms", "folds", "seed", "standardize", "grid_score",
                    "inner_folds", "threads", "svm", "cnn", "feature_sources"},
                   "");
    RunConfig c;
    for (const char* key : {"manifest", "workdir"}) {
        if (!doc.contains(key)) throw config_error(std::string("config key '") + key + "' is required");
        if (!doc.at(key).is_string() || doc.at(key).get<std::string>().empty()) bad(key, "must be a non-empty string");
    }
    c.manifest = resolve(base_dir, doc.at("manifest").get<std::string>());
    c.workdir = resolve(base_dir, doc.at("workdir").get<std::string>());
    if (doc.contains("target_rate_hz")) c.target_rate_hz = get_int(doc, "target_rate_hz", 1000);
    if (doc.contains("min_ms")) c.min_ms = get_positive(doc, "min_ms");
    if (doc.contains("folds")) c.folds = get_int(doc, "folds", 2);
    if (doc.contains("seed")) {
        const json& v = doc.at("seed");
        if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0))
            bad("seed", "must be a non-negative integer");
        c.seed = doc.at("seed").get<std::uint64_t>();
    }
    if (doc.contains("standardize")) {
        if (!doc.at("standardize").is_boolean()) bad("standardize", "must be true or false");
        c.standardize = doc.at("standardize").get<bool>();
    }
    if (doc.contains("grid_score")) {
        const auto& v = doc.at("grid_score");
        if (v == "inner-cv") c.grid_score = svm::GridScore::InnerCv;
        else if (v == "train") c.grid_score = svm::GridScore::Train;
        else bad("grid_score", "must be \"inner-cv\" or \"train\"");
    }
    if (doc.contains("inner_folds")) c.inner_folds = get_int(doc, "inner_folds", 2);
    if (doc.contains("threads")) c.threads = static_cast<unsigned>(get_int(doc, "threads", 1));

    if (doc.contains("svm")) {
        const json& s = object_at(doc, "svm");
        reject_unknown(s, {"C", "gamma", "kernels", "degree", "coef0", "tol"}, "svm.");
        if (s.contains("C")) c.grid.C = get_positive_list(s, "C");
        if (s.contains("gamma")) c.grid.gamma = get_positive_list(s, "gamma");
        if (s.contains("kernels")) {
            const json& k = s.at("kernels");
            if (!k.is_array() || k.empty()) bad("svm.kernels", "must be a non-empty array");
            c.grid.kernels.clear();
            for (const auto& e : k) {
                if (!e.is_string()) bad("svm.kernels", "entries must be strings");
                c.grid.kernels.push_back(svm::parse_kernel(e.get<std::string>()));
            }
        }
        if (s.contains("degree")) c.grid.degree = get_int(s, "degree", 1);
        if (s.contains("coef0")) {
            if (!s.at("coef0").is_number()) bad("svm.coef0", "must be a number");
            c.grid.coef0 = s.at("coef0").get<double>();
        }
        if (s.contains("tol")) c.svm_tol = get_positive(s, "tol");
    }
    if (doc.contains("cnn")) c.cnn = cnn::train_config_from_json(object_at(doc, "cnn"));

    if (doc.contains("feature_sources")) {
        const json& list = doc.at("feature_sources");
        if (!list.is_array() || list.empty()) bad("feature_sources", "must be a non-empty array");
        std::set<std::string> seen;
        for (const auto& e : list) {
            if (!e.is_object()) bad("feature_sources", "entries must be objects");
            reject_unknown(e, {"feature_set_id", "kind", "path", "dimension"}, "feature_sources[].");
            FeatureSource src;
            if (!e.contains("feature_set_id") || !e.at("feature_set_id").is_string())
                bad("feature_sources[].feature_set_id", "is required");
            src.feature_set_id = e.at("feature_set_id").get<std::string>();
            if (!valid_id(src.feature_set_id))
                bad("feature_sources[].feature_set_id", "'" + src.feature_set_id + "' must use letters, digits, '-', '_', '.', '+'");
            if (!seen.insert(src.feature_set_id).second) bad("feature_sources", "duplicate id '" + src.feature_set_id + "'");
            if (!e.contains("kind") || !e.at("kind").is_string()) bad("feature_sources[].kind", "is required");
            src.kind = parse_kind(e.at("kind").get<std::string>());
            if (src.kind == SourceKind::ExternalCsv) {
                if (!e.contains("path") || !e.at("path").is_string()) bad("feature_sources[].path", "is required for external-csv");
                src.path = resolve(base_dir, e.at("path").get<std::string>());
                if (e.contains("dimension")) src.dimension = static_cast<std::size_t>(get_int(e, "dimension", 1));
            } else if (e.contains("path") || e.contains("dimension")) {
                bad("feature_sources[]", "path and dimension apply to external-csv sources only");
            }
            c.sources.push_back(std::move(src));
        }
    } else {
        c.sources = {{"catch24", SourceKind::Catch24, {}, {}}, {"cnn-crafted", SourceKind::CnnCrafted, {}, {}}};
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot read config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw config_error(path.string() + ": invalid JSON: " + e.what());
    }
    return parse_config(doc, std::filesystem::absolute(path).parent_path());
}

void apply_environment(RunConfig& config) {
    const char* env = std::getenv("MEERKIT_SEED");
    if (!env || !*env) return;
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || *end != '\0' || env[0] == '-') throw config_error(std::string("MEERKIT_SEED is not a non-negative integer: ") + env);
    config.seed = v;
}

nlohmann::json config_to_json(const RunConfig& c) {
    json j;
    j["manifest"] = c.manifest.string();
    j["workdir"] = c.workdir.string();
    j["target_rate_hz"] = c.target_rate_hz;
    j["min_ms"] = c.min_ms;
    j["folds"] = c.folds;
    j["seed"] = c.seed;
    j["standardize"] = c.standardize;
    j["grid_score"] = c.grid_score == svm::GridScore::InnerCv ? "inner-cv" : "train";
    j["inner_folds"] = c.inner_folds;
    j["threads"] = c.threads;
    std::vector<std::string> kernels;
    for (auto k : c.grid.kernels) kernels.push_back(svm::kernel_name(k));
    j["svm"] = {{"C", c.grid.C}, {"gamma", c.grid.gamma}, {"kernels", kernels},
                {"degree", c.grid.degree}, {"coef0", c.grid.coef0}, {"tol", c.svm_tol}};
    j["cnn"] = cnn::to_json(c.cnn);
    auto sources = json::array();
    for (const auto& s : c.sources) {
        json e = {{"feature_set_id", s.feature_set_id}, {"kind", source_kind_name(s.kind)}};
        if (s.kind == SourceKind::ExternalCsv) {
            e["path"] = s.path.string();
            if (s.dimension) e["dimension"] = *s.dimension;
        }
        sources.push_back(std::move(e));
    }
    j["feature_sources"] = std::move(sources);
    return j;
}

std::string config_hash(const RunConfig& c) {
    json j = config_to_json(c);
    j.erase("manifest");
    j.erase("workdir");
    j.erase("threads");
    for (auto& s : j["feature_sources"]) s.erase("path");
    const std::uint64_t h = fnv1a64(j.dump());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace meerkit::pipeline
