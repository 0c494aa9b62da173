#include <doctest.h>

#include "fixtures.hpp"
#include "snapshot.hpp"
#include "synth.hpp"

#include "meerkit/cnn.hpp"
#include "meerkit/meerkit.h"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

using nlohmann::json;

namespace {

std::string take(char* s) {
    std::string out = s ? s : "";
    meerkit_string_free(s);
    return out;
}

}  // namespace

TEST_CASE("version and error reporting") {
    CHECK(std::strlen(meerkit_version()) > 0);
    meerkit_config* c = nullptr;
    CHECK(meerkit_config_from_json("{\"manifest\":\"m\",\"workdir\":\"w\",\"bogus\":1}", "/", &c) == MEERKIT_ERR_CONFIG);
    CHECK(c == nullptr);
    CHECK(std::string(meerkit_last_error()).find("bogus") != std::string::npos);
    CHECK(meerkit_config_from_json("{not json", "/", &c) == MEERKIT_ERR_CONFIG);
    CHECK(meerkit_config_load("/nonexistent/config.json", &c) == MEERKIT_ERR_CONFIG);
    CHECK(meerkit_config_from_json(nullptr, "/", &c) == MEERKIT_ERR_INVALID_ARGUMENT);
    meerkit_config_free(nullptr);
    meerkit_features_free(nullptr);
    meerkit_svm_free(nullptr);
    meerkit_cnn_free(nullptr);
}

TEST_CASE("config overrides are validated and rolled back") {
    meerkit_config* c = nullptr;
    REQUIRE(meerkit_config_from_json("{\"manifest\":\"m.csv\",\"workdir\":\"w\",\"seed\":1}", "/base", &c) == MEERKIT_OK);
    CHECK(meerkit_config_override(c, "folds", "7") == MEERKIT_OK);
    CHECK(meerkit_config_override(c, "svm.tol", "0.01") == MEERKIT_OK);
    CHECK(meerkit_config_override(c, "folds", "1") == MEERKIT_ERR_CONFIG);
    CHECK(meerkit_config_override(c, "svm.whatever", "1") == MEERKIT_ERR_CONFIG);
    CHECK(meerkit_config_override(c, "grid_score", "train") == MEERKIT_ERR_CONFIG);  // not JSON
    char* text = nullptr;
    REQUIRE(meerkit_config_resolved_json(c, &text) == MEERKIT_OK);
    const auto j = json::parse(take(text));
    CHECK(j["folds"] == 7);
    CHECK(j["svm"]["tol"] == 0.01);
    CHECK(j["svm"].count("whatever") == 0);
    CHECK(j["manifest"] == "/base/m.csv");
    CHECK(j["config_hash"].get<std::string>().size() == 16);

    ::setenv("MEERKIT_SEED", "42", 1);
    REQUIRE(meerkit_config_resolved_json(c, &text) == MEERKIT_OK);
    CHECK(json::parse(take(text))["seed"] == 42);
    CHECK(meerkit_config_override(c, "seed", "9") == MEERKIT_OK);
    REQUIRE(meerkit_config_resolved_json(c, &text) == MEERKIT_OK);
    CHECK(json::parse(take(text))["seed"] == 9);
    ::unsetenv("MEERKIT_SEED");
    meerkit_config_free(c);
}

TEST_CASE("commands run through the C interface") {
    testsupport::TempDir dir("capi");
    const auto corpus = testsupport::write_synth_corpus(dir.path(), 5, 80, 160, 16000, 2);
    const json doc = {{"manifest", corpus.manifest.string()},
                      {"workdir", (dir.path() / "work").string()},
                      {"folds", 2},
                      {"svm", {{"C", {1}}, {"gamma", {0.1}}, {"kernels", {"rbf"}}}}};
    meerkit_config* c = nullptr;
    REQUIRE(meerkit_config_from_json(doc.dump().c_str(), nullptr, &c) == MEERKIT_OK);

    std::vector<std::string> messages;
    auto log = [](const char* m, void* user) { static_cast<std::vector<std::string>*>(user)->push_back(m); };
    char* out = nullptr;
    CHECK(meerkit_run_command(c, "prepare", nullptr, "{\"dry_run\":true}", log, &messages, &out) == MEERKIT_OK);
    CHECK(!json::parse(take(out))["plan"].empty());
    CHECK(!std::filesystem::exists(dir.path() / "work"));

    CHECK(meerkit_run_command(c, "prepare", nullptr, nullptr, log, &messages, &out) == MEERKIT_OK);
    CHECK(json::parse(take(out))["summary"]["prepared"] == 20);
    CHECK(!messages.empty());
    CHECK(meerkit_run_command(c, "extract", "catch24", nullptr, nullptr, nullptr, nullptr) == MEERKIT_OK);
    CHECK(meerkit_run_command(c, "extract", nullptr, nullptr, nullptr, nullptr, nullptr) == MEERKIT_ERR_CONFIG);
    CHECK(meerkit_run_command(c, "extract", "cnn-crafted", nullptr, nullptr, nullptr, nullptr) == MEERKIT_ERR_DATA);
    CHECK(std::string(meerkit_last_error()).find("train-cnn") != std::string::npos);
    CHECK(meerkit_run_command(c, "classify", "catch24", nullptr, nullptr, nullptr, &out) == MEERKIT_OK);
    const auto summary = json::parse(take(out));
    CHECK(summary["summary"]["mean_uar"].get<double>() >= 0.0);
    CHECK(meerkit_run_command(c, "dance", nullptr, nullptr, nullptr, nullptr, nullptr) == MEERKIT_ERR_INVALID_ARGUMENT);
    CHECK(meerkit_run_command(c, "prepare", nullptr, "{\"bogus\":1}", nullptr, nullptr, nullptr) ==
          MEERKIT_ERR_INVALID_ARGUMENT);

    meerkit_features* t = nullptr;
    const std::string csv = (dir.path() / "work/features/catch24.csv").string();
    CHECK(meerkit_features_load(csv.c_str(), 80, &t) == MEERKIT_ERR_DATA);
    REQUIRE(meerkit_features_load(csv.c_str(), MEERKIT_CATCH24_DIM, &t) == MEERKIT_OK);
    CHECK(meerkit_features_rows(t) == 20);
    CHECK(meerkit_features_dimension(t) == 24);
    CHECK(std::string(meerkit_features_call_id(t, 1)) == "chirp_0");
    CHECK(meerkit_features_call_id(t, 99) == nullptr);
    double row[24];
    CHECK(meerkit_features_row(t, 0, row, 24) == MEERKIT_OK);
    CHECK(meerkit_features_row(t, 0, row, 23) == MEERKIT_ERR_INVALID_ARGUMENT);
    meerkit_features_free(t);
    meerkit_config_free(c);
}

TEST_CASE("catch24, UAR and SVM entry points") {
    std::vector<double> x(200);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.3 * i) + 0.01 * (i % 7);
    double f[24];
    REQUIRE(meerkit_catch24(x.data(), x.size(), f) == MEERKIT_OK);
    for (double v : f) CHECK(std::isfinite(v));
    CHECK(meerkit_catch24(x.data(), 10, f) == MEERKIT_ERR_DATA);

    const long counts[] = {8, 2, 5, 5};
    double u = 0;
    REQUIRE(meerkit_uar(counts, 2, &u) == MEERKIT_OK);
    CHECK(u == 0.65);

    // Three well separated clusters on a line.
    std::vector<double> pts;
    std::vector<int> labels;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 6; ++i) {
            pts.push_back(10.0 * c + 0.1 * i);
            pts.push_back(-5.0 * c);
            labels.push_back(c);
        }
    meerkit_svm* m = nullptr;
    CHECK(meerkit_svm_train(pts.data(), 18, 2, labels.data(), 3, "{\"kernel\":\"cubic\"}", &m) == MEERKIT_ERR_CONFIG);
    CHECK(meerkit_svm_train(pts.data(), 18, 2, labels.data(), 3, "{\"shape\":1}", &m) == MEERKIT_ERR_INVALID_ARGUMENT);
    REQUIRE(meerkit_svm_train(pts.data(), 18, 2, labels.data(), 3, "{\"kernel\":\"linear\",\"C\":10}", &m) == MEERKIT_OK);
    std::vector<int> pred(18);
    REQUIRE(meerkit_svm_predict(m, pts.data(), 18, 2, pred.data()) == MEERKIT_OK);
    CHECK(pred == labels);
    CHECK(meerkit_svm_predict(m, pts.data(), 6, 3, pred.data()) == MEERKIT_ERR_INVALID_ARGUMENT);

    testsupport::TempDir dir("capi-svm");
    const std::string path = (dir.path() / "svm.json").string();
    REQUIRE(meerkit_svm_save(m, path.c_str()) == MEERKIT_OK);
    meerkit_svm* back = nullptr;
    REQUIRE(meerkit_svm_load(path.c_str(), &back) == MEERKIT_OK);
    std::vector<int> pred2(18);
    REQUIRE(meerkit_svm_predict(back, pts.data(), 18, 2, pred2.data()) == MEERKIT_OK);
    CHECK(pred2 == pred);
    meerkit_svm_free(back);
    std::ofstream(dir.path() / "broken.json") << "{\"format\":\"meerkit-svm\"";
    CHECK(meerkit_svm_load((dir.path() / "broken.json").c_str(), &back) != MEERKIT_OK);
    CHECK(back == nullptr);
    meerkit_svm_free(m);
}

TEST_CASE("CNN entry points") {
    testsupport::TempDir dir("capi-cnn");
    const auto path = dir.path() / "cnn.json";
    std::ofstream(path) << meerkit::cnn::to_json(meerkit::cnn::CnnModel::initialize(3, 4)).dump();
    meerkit_cnn* m = nullptr;
    REQUIRE(meerkit_cnn_load(path.c_str(), &m) == MEERKIT_OK);
    CHECK(meerkit_cnn_n_classes(m) == 3);
    std::vector<double> wave(1600);
    for (std::size_t i = 0; i < wave.size(); ++i) wave[i] = 0.3 * std::sin(0.05 * i);
    double hidden[80], logits[3];
    REQUIRE(meerkit_cnn_forward(m, wave.data(), wave.size(), hidden, logits) == MEERKIT_OK);
    for (double h : hidden) CHECK(h >= 0.0);
    CHECK(meerkit_cnn_forward(m, wave.data(), 729, hidden, nullptr) == MEERKIT_ERR_DATA);
    double freqs[513], values[513];
    REQUIRE(meerkit_cnn_filter_response(m, 16000, freqs, values) == MEERKIT_OK);
    CHECK(freqs[0] == 0.0);
    CHECK(freqs[512] == 8000.0);
    for (double v : values) CHECK(std::isfinite(v));
    meerkit_cnn_free(m);
    CHECK(meerkit_cnn_load((dir.path() / "missing.json").c_str(), &m) == MEERKIT_ERR_IO);
}
