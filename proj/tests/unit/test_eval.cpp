#include <doctest.h>

#include "fixtures.hpp"
#include "meerkit/error.hpp"
#include "meerkit/eval.hpp"
#include "meerkit/rng.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

using namespace meerkit;
using namespace meerkit::eval;

namespace {

struct Synthetic {
    audio::DatasetManifest manifest;
    features::FeatureTable table;
};

/// Four Gaussian blobs in `dim` dimensions; the class centres sit on the axes
/// scaled by `offset`, then an arbitrary per-column scale is applied.
Synthetic gaussian_blobs(std::size_t per_class, std::size_t dim, double offset, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::string> names;
    for (std::size_t d = 0; d < dim; ++d) names.push_back("f" + std::to_string(d));
    Synthetic s{{}, features::FeatureTable("blobs", names)};
    std::vector<audio::ManifestEntry> entries;
    const std::vector<std::string> labels = {"cc", "ld", "mo", "sn"};
    for (std::size_t i = 0; i < per_class * labels.size(); ++i) {
        const std::size_t c = i % labels.size();
        const std::string id = "call" + std::to_string(i);
        entries.push_back({id, id + ".wav", labels[c]});
        std::vector<double> v(dim);
        for (std::size_t d = 0; d < dim; ++d)
            v[d] = (rng.gaussian() + (d % labels.size() == c ? offset : 0.0)) * (1.0 + 10.0 * d) + 5.0 * d;
        s.table.add_row(id, v);
    }
    s.manifest = audio::make_manifest(entries);
    return s;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("separable blobs reach a high mean UAR") {
    const auto s = gaussian_blobs(100, 6, 4.0, 3);
    ExperimentOptions opt;
    opt.seed = 17;
    const auto report = run_experiment(s.table, s.manifest, opt);
    MESSAGE("blob mean UAR " << report.mean_uar);
    CHECK(report.mean_uar >= 0.95);
    REQUIRE(report.per_fold.size() == 5);
    double sum = 0.0;
    for (const auto& f : report.per_fold) {
        sum += f.test_uar;
        CHECK(f.grid_table.size() == 64);
        CHECK(f.inner_folds_used == 3);
        CHECK(f.n_train + f.n_test == 400);
        CHECK(f.confusion.total() == static_cast<long>(f.n_test));
    }
    CHECK(report.mean_uar == sum / 5);
    for (std::size_t c = 0; c < 4; ++c) CHECK(report.aggregate_confusion.row_sum(c) == 100);
    CHECK(report.pooled_uar == uar(report.aggregate_confusion));
}

TEST_CASE("constant features carry no information") {
    auto s = gaussian_blobs(50, 3, 0.0, 4);
    features::FeatureTable flat("flat", s.table.column_names());
    for (const auto& id : s.table.call_ids()) flat.add_row(id, {1.0, 2.0, 3.0});
    ExperimentOptions opt;
    opt.seed = 2;
    opt.grid.kernels = {svm::KernelKind::Rbf, svm::KernelKind::Linear};
    const auto report = run_experiment(flat, s.manifest, opt);
    MESSAGE("constant-feature mean UAR " << report.mean_uar);
    CHECK(report.mean_uar <= 0.5);
}

TEST_CASE("reports are deterministic and round-trip through disk") {
    const auto s = gaussian_blobs(30, 4, 2.0, 5);
    ExperimentOptions opt;
    opt.seed = 99;
    opt.grid.C = {1, 10};
    opt.grid.gamma = {0.1, 1};
    opt.config_hash = "abc123";
    const auto a = run_experiment(s.table, s.manifest, opt);
    const auto b = run_experiment(s.table, s.manifest, opt);
    testsupport::TempDir da("report-a"), db("report-b");
    const auto files_a = export_report(a, da.path());
    const auto files_b = export_report(b, db.path());
    REQUIRE(files_a.size() == 5 + 2 + 1);
    for (std::size_t i = 0; i < files_a.size(); ++i) {
        CHECK(files_a[i].filename() == files_b[i].filename());
        CHECK(slurp(files_a[i]) == slurp(files_b[i]));
    }
    const auto back = load_report(da.path() / "report.json");
    CHECK(back.mean_uar == a.mean_uar);
    CHECK(back.pooled_uar == a.pooled_uar);
    CHECK(back.config_hash == "abc123");
    CHECK(back.per_fold[2].confusion == a.per_fold[2].confusion);
    CHECK(report_to_json(back).dump() == report_to_json(a).dump());

    // Aggregate CSV row sums equal the class counts.
    std::istringstream agg(slurp(da.path() / "confusion_aggregate.csv"));
    std::string line;
    std::getline(agg, line);
    CHECK(line == "true\\predicted,cc,ld,mo,sn");
    while (std::getline(agg, line)) {
        long sum = 0;
        std::istringstream row(line);
        std::string cell;
        std::getline(row, cell, ',');
        while (std::getline(row, cell, ',')) sum += std::stol(cell);
        CHECK(sum == 30);
    }
    CHECK_THROWS_AS(load_report(da.path() / "missing.json"), Error);
}

TEST_CASE("the fold plan depends on the manifest and seed only") {
    const auto s = gaussian_blobs(20, 3, 2.0, 6);
    const auto t = gaussian_blobs(20, 5, 1.0, 7);
    ExperimentOptions opt;
    opt.seed = 1234;
    opt.grid.kernels = {svm::KernelKind::Linear};
    opt.grid.gamma = {1};
    const auto ra = run_experiment(s.table, s.manifest, opt);
    const auto rb = run_experiment(t.table, s.manifest, opt);
    CHECK(ra.fold_assignment == rb.fold_assignment);
    CHECK(ra.seeds == rb.seeds);
    opt.seed = 1235;
    CHECK(run_experiment(s.table, s.manifest, opt).fold_assignment != ra.fold_assignment);
}

TEST_CASE("test-split values never reach model selection") {
    const auto s = gaussian_blobs(25, 4, 1.5, 8);
    const auto data = features::join(s.table, s.manifest);
    ExperimentOptions opt;
    opt.seed = 31;
    opt.grid.C = {0.1, 1, 10};
    opt.grid.gamma = {0.01, 0.1, 1};
    const auto plan = plan_folds(s.manifest, opt.folds, opt.seed);
    for (int f = 0; f < opt.folds; ++f) {
        const auto base = run_fold(data, plan, f, opt);
        auto mutated = data;
        for (std::size_t i : plan.test_indices(f)) {
            for (auto& v : mutated.x[i]) v = v * -7.0 + 1e6;
        }
        const auto other = run_fold(mutated, plan, f, opt);
        CHECK(other.kernel.kind == base.kernel.kind);
        CHECK(other.kernel.gamma == base.kernel.gamma);
        CHECK(other.C == base.C);
        CHECK(other.standardization.means == base.standardization.means);
        CHECK(other.standardization.stds == base.standardization.stds);
        for (std::size_t g = 0; g < base.grid_table.size(); ++g)
            CHECK(other.grid_table[g].score == base.grid_table[g].score);
    }
}

TEST_CASE("a class missing from a training split is tolerated") {
    auto s = gaussian_blobs(20, 3, 3.0, 9);
    std::vector<audio::ManifestEntry> entries = s.manifest.entries;
    entries.push_back({"lonely", "lonely.wav", "zz"});
    s.table.add_row("lonely", {50, 50, 50});
    const auto manifest = audio::make_manifest(entries);
    ExperimentOptions opt;
    opt.seed = 5;
    opt.grid.kernels = {svm::KernelKind::Rbf};
    opt.grid.C = {10};
    opt.grid.gamma = {0.1};
    const auto report = run_experiment(s.table, manifest, opt);
    int without = 0;
    for (const auto& f : report.per_fold) {
        without += f.train_classes.size() == 4;
        CHECK(std::isfinite(f.test_uar));
    }
    CHECK(without == 1);
    CHECK(report.aggregate_confusion.row_sum(4) == 1);
}

TEST_CASE("standardization can be disabled") {
    const auto s = gaussian_blobs(20, 3, 3.0, 10);
    ExperimentOptions opt;
    opt.standardize = false;
    opt.grid.kernels = {svm::KernelKind::Linear};
    opt.grid.gamma = {1};
    const auto report = run_experiment(s.table, s.manifest, opt);
    CHECK_FALSE(report.standardized);
    CHECK(report.per_fold[0].standardization.means.empty());
}

TEST_CASE("experiment preconditions") {
    const auto s = gaussian_blobs(10, 3, 3.0, 11);
    features::FeatureTable partial("partial", s.table.column_names());
    partial.add_row("call0", s.table.row("call0"));
    CHECK_THROWS_AS(run_experiment(partial, s.manifest, {}), Error);
    ExperimentOptions opt;
    opt.folds = 1;
    CHECK_THROWS_AS(run_experiment(s.table, s.manifest, opt), Error);
}
