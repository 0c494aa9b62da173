#include "doctest.h"
#include "fixtures.hpp"

#include "meerkit/error.hpp"
#include "meerkit/features.hpp"
#include "meerkit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

using namespace meerkit::features;
using testsupport::TempDir;

namespace {

void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream f(p, std::ios::binary);
    f << s;
}

FeatureTable random_table(std::size_t rows, std::size_t dim, std::uint64_t seed) {
    meerkit::Rng rng(seed);
    std::vector<std::string> names;
    for (std::size_t k = 0; k < dim; ++k) names.push_back("f" + std::to_string(k));
    FeatureTable t("rand", names);
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<double> v(dim);
        for (std::size_t k = 0; k < dim; ++k) v[k] = rng.gaussian() * (k + 1) * 3.0 + 10.0 * k;
        t.add_row("id" + std::to_string(r), v);
    }
    return t;
}

}  // namespace

TEST_CASE("ingest a small feature file") {
    TempDir dir("feat");
    write_text(dir.path() / "tiny.csv", "call_id,f0,f1\na,1,2\nb,-3.5e2,+4\r\nc,0.1,1e-300\n");
    const FeatureTable t = ingest_csv(dir.path() / "tiny.csv");
    CHECK(t.feature_set_id() == "tiny");
    CHECK(t.dimension() == 2);
    REQUIRE(t.size() == 3);
    CHECK(t.row("b") == std::vector<double>{-350.0, 4.0});
    CHECK(t.row("c")[1] == 1e-300);
    CHECK(ingest_csv(dir.path() / "tiny.csv", 2, std::string("named")).feature_set_id() == "named");
}

TEST_CASE("ingest errors") {
    TempDir dir("feat");
    write_text(dir.path() / "ragged.csv", "call_id,f0,f1\na,1,2\nb,3\n");
    CHECK_THROWS_WITH_AS(ingest_csv(dir.path() / "ragged.csv"), doctest::Contains(":3"), meerkit::Error);
    write_text(dir.path() / "text.csv", "call_id,f0\na,hello\n");
    CHECK_THROWS_WITH_AS(ingest_csv(dir.path() / "text.csv"), doctest::Contains("non-numeric"), meerkit::Error);
    write_text(dir.path() / "nan.csv", "call_id,f0\na,nan\n");
    CHECK_THROWS_AS(ingest_csv(dir.path() / "nan.csv"), meerkit::Error);
    write_text(dir.path() / "blank.csv", "call_id,f0\na,\n");
    CHECK_THROWS_AS(ingest_csv(dir.path() / "blank.csv"), meerkit::Error);
    write_text(dir.path() / "dup.csv", "call_id,f0\na,1\na,2\n");
    CHECK_THROWS_WITH_AS(ingest_csv(dir.path() / "dup.csv"), doctest::Contains("'a'"), meerkit::Error);
    write_text(dir.path() / "dim.csv", "call_id,f0,f1\na,1,2\n");
    CHECK_THROWS_WITH_AS(ingest_csv(dir.path() / "dim.csv", 768), doctest::Contains("768"), meerkit::Error);
    write_text(dir.path() / "hdr.csv", "id,f0\na,1\n");
    CHECK_THROWS_AS(ingest_csv(dir.path() / "hdr.csv"), meerkit::Error);
    CHECK_THROWS_AS(ingest_csv(dir.path() / "none.csv"), meerkit::Error);
}

TEST_CASE("wide exports of openSMILE size") {
    TempDir dir("feat");
    for (std::size_t dim : {88u, 6373u}) {
        const FeatureTable t = random_table(3, dim, dim);
        export_csv(t, dir.path() / "wide.csv");
        const FeatureTable back = ingest_csv(dir.path() / "wide.csv", dim);
        CHECK(back.dimension() == dim);
        CHECK(back.size() == 3);
    }
}

TEST_CASE("export then ingest is lossless") {
    TempDir dir("feat");
    FeatureTable t = random_table(40, 7, 5);
    t.add_row("tiny", {1e-310, -0.0, 5e-324, 1.7976931348623157e308, 0.1, 1.0 / 3.0, -2.5e-17});
    export_csv(t, dir.path() / "rt.csv");
    const FeatureTable back = ingest_csv(dir.path() / "rt.csv", 7, std::string("rand"));
    REQUIRE(back.size() == t.size());
    CHECK(back.call_ids() == t.call_ids());
    CHECK(back.column_names() == t.column_names());
    for (std::size_t r = 0; r < t.size(); ++r)
        for (std::size_t k = 0; k < 7; ++k) CHECK(back.row(r)[k] == t.row(r)[k]);
}

TEST_CASE("standardization moments") {
    FeatureTable t("x", {"a"});
    t.add_row("p", {1.0});
    t.add_row("q", {3.0});
    const std::vector<std::string> ids = {"p", "q"};
    const auto p = standardize_fit(t, ids);
    CHECK(p.means[0] == 2.0);
    CHECK(p.stds[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

    FeatureTable c("c", {"k"});
    for (const char* id : {"u", "v", "w"}) c.add_row(id, {5.0});
    const std::vector<std::string> cids = {"u", "v", "w"};
    const auto pc = standardize_fit(c, cids);
    CHECK(pc.means[0] == 5.0);
    CHECK(pc.stds[0] == 1.0);

    const std::vector<std::string> unknown = {"p", "zzz"};
    CHECK_THROWS_AS(standardize_fit(t, unknown), meerkit::Error);
    const std::vector<std::string> one = {"p"};
    CHECK_THROWS_AS(standardize_fit(t, one), meerkit::Error);
}

TEST_CASE("standardized training rows have zero mean and unit sample std") {
    const FeatureTable t = random_table(10, 4, 77);
    const auto p = standardize_fit(t, t.call_ids());
    const FeatureTable z = standardize_apply(t, p);
    CHECK(z.feature_set_id() == "rand+z");
    for (std::size_t k = 0; k < 4; ++k) {
        double m = 0.0;
        for (std::size_t r = 0; r < 10; ++r) m += z.row(r)[k];
        m /= 10;
        double s = 0.0;
        for (std::size_t r = 0; r < 10; ++r) s += (z.row(r)[k] - m) * (z.row(r)[k] - m);
        CHECK(std::abs(m) <= 1e-12);
        CHECK(std::abs(std::sqrt(s / 9) - 1.0) <= 1e-12);
    }
    const FeatureTable back = standardize_invert(z, p);
    CHECK(back.feature_set_id() == "rand");
    for (std::size_t r = 0; r < 10; ++r)
        for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(back.row(r)[k] - t.row(r)[k]) <= 1e-12 * std::max(1.0, std::abs(t.row(r)[k])));
}

TEST_CASE("apply edge cases") {
    const FeatureTable t = random_table(5, 3, 3);
    StandardizationParams id{{0, 0, 0}, {1, 1, 1}};
    const FeatureTable same = standardize_apply(t, id);
    for (std::size_t r = 0; r < 5; ++r) CHECK(same.row(r) == t.row(r));
    const auto p = standardize_fit(t, t.call_ids());
    FeatureTable m("m", {"a", "b", "c"});
    m.add_row("mean", p.means);
    CHECK(standardize_apply(m, p).row(0) == std::vector<double>{0.0, 0.0, 0.0});
    StandardizationParams wrong{{0, 0}, {1, 1}};
    CHECK_THROWS_AS(standardize_apply(t, wrong), meerkit::Error);
}

TEST_CASE("fit ignores rows outside the training ids") {
    FeatureTable t = random_table(12, 3, 9);
    const std::vector<std::string> train = {"id0", "id2", "id4", "id6", "id8"};
    const auto before = standardize_fit(t, train);
    t.add_row("extra", {1e6, -1e6, 42.0});
    const auto after = standardize_fit(t, train);
    CHECK(before.means == after.means);
    CHECK(before.stds == after.stds);
}

TEST_CASE("join follows manifest order and label ordering") {
    const FeatureTable t = random_table(4, 2, 1);
    using meerkit::audio::ManifestEntry;
    const auto manifest = meerkit::audio::make_manifest(
        {ManifestEntry{"id3", "a.wav", "cc"}, ManifestEntry{"id1", "b.wav", "al"}});
    const LabeledDataset ds = join(t, manifest);
    REQUIRE(ds.size() == 2);
    CHECK(ds.call_ids == std::vector<std::string>{"id3", "id1"});
    CHECK(ds.y == std::vector<int>{1, 0});
    CHECK(ds.x[0] == t.row("id3"));

    const auto missing = meerkit::audio::make_manifest(
        {ManifestEntry{"id3", "a.wav", "cc"}, ManifestEntry{"ghost", "b.wav", "al"}});
    CHECK_THROWS_WITH_AS(join(t, missing), doctest::Contains("'ghost'"), meerkit::Error);
    const LabeledDataset lax = join(t, missing, false);
    CHECK(lax.size() == 1);
    CHECK(lax.dropped == 1);
}

TEST_CASE("nine-class join") {
    const char* labels[] = {"agg", "al", "cc", "ld", "mo", "sn", "soc", "s", "chat"};
    FeatureTable t("x", {"a"});
    std::vector<meerkit::audio::ManifestEntry> entries;
    for (int i = 0; i < 18; ++i) {
        t.add_row("c" + std::to_string(i), {static_cast<double>(i)});
        entries.push_back({"c" + std::to_string(i), "p.wav", labels[i % 9]});
    }
    const auto ds = join(t, meerkit::audio::make_manifest(entries));
    CHECK(ds.classes.size() == 9);
    CHECK(*std::min_element(ds.y.begin(), ds.y.end()) == 0);
    CHECK(*std::max_element(ds.y.begin(), ds.y.end()) == 8);
}
