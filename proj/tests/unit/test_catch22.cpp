#include "doctest.h"
#include "fixtures.hpp"

#include "meerkit/catch22.hpp"
#include "meerkit/error.hpp"
#include "meerkit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

using meerkit::catch22::compute_catch24;
using meerkit::catch22::compute_catch24_raw;
using meerkit::catch22::feature_names;

namespace {

std::vector<double> gaussian(std::size_t n, std::uint64_t seed) {
    meerkit::Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.gaussian();
    return v;
}

void check_fixture(const std::string& file) {
    const auto series = testsupport::load_catch24_fixture(file);
    REQUIRE(!series.empty());
    std::vector<double> worst(24, 0.0);
    for (const auto& s : series) {
        const auto got = compute_catch24(s.values).values;
        REQUIRE(s.expected.size() == 24);
        for (std::size_t k = 0; k < 24; ++k) {
            const double want = s.expected[k];
            INFO(s.name << " feature " << feature_names()[k] << " got " << got[k] << " want " << want);
            CHECK(testsupport::catch24_close(got[k], want));
            if (!std::isnan(want)) worst[k] = std::max(worst[k], std::abs(got[k] - want));
        }
    }
    for (std::size_t k = 0; k < 24; ++k)
        std::printf("  %-45s max abs diff %.3g\n", feature_names()[k].c_str(), worst[k]);
}

}  // namespace

TEST_CASE("feature names follow the reference order and are stable") {
    const auto fixture = testsupport::load_json("catch24_gaussian.json");
    const auto expected = fixture.at("names").get<std::vector<std::string>>();
    REQUIRE(feature_names().size() == 24);
    CHECK(feature_names() == expected);
    CHECK(feature_names() == feature_names());
    CHECK(feature_names()[22] == "DN_Mean");
    CHECK(feature_names()[23] == "DN_Spread_Std");
}

TEST_CASE("parity with reference outputs on Gaussian series") { check_fixture("catch24_gaussian.json"); }

TEST_CASE("parity with reference outputs on structured series") { check_fixture("catch24_structured.json"); }

TEST_CASE("repeating 1,2,3,4 pattern") {
    std::vector<double> y;
    for (int r = 0; r < 25; ++r)
        for (double v : {1.0, 2.0, 3.0, 4.0}) y.push_back(v);
    const auto v = compute_catch24(y);
    CHECK(v.mean() == doctest::Approx(2.5).epsilon(1e-15));
    // Sample standard deviation: sqrt(125 / 99).
    CHECK(v.stddev() == doctest::Approx(std::sqrt(125.0 / 99.0)).epsilon(1e-14));
    CHECK(v.values[3] == 2.0);   // first autocorrelation minimum
    CHECK(v.values[9] == 3.0);   // periodicity
}

TEST_CASE("length and finiteness preconditions") {
    CHECK_THROWS_AS(compute_catch24(gaussian(39, 1)), meerkit::Error);
    CHECK_NOTHROW(compute_catch24(gaussian(40, 1)));
    auto y = gaussian(100, 2);
    y[10] = std::nan("");
    CHECK_THROWS_AS(compute_catch24(y), meerkit::Error);
    y[10] = INFINITY;
    CHECK_THROWS_AS(compute_catch24(y), meerkit::Error);
}

TEST_CASE("constant series falls back to finite values") {
    const std::vector<double> y(500, 0.25);
    const auto raw = compute_catch24_raw(y);
    CHECK(std::isnan(raw[0]));
    const auto v = compute_catch24(y);
    for (std::size_t k = 0; k < 22; ++k) {
        CHECK(std::isfinite(v.values[k]));
        CHECK(v.values[k] == 0.0);
    }
    CHECK(v.mean() == 0.25);
    CHECK(v.stddev() == 0.0);
}

TEST_CASE("all outputs finite on assorted inputs") {
    for (std::size_t n : {40u, 41u, 64u, 100u, 1600u, 3333u}) {
        const auto v = compute_catch24(gaussian(n, n));
        for (double x : v.values) CHECK(std::isfinite(x));
    }
    // Two-valued series stresses the tie handling of every histogram.
    std::vector<double> two(200);
    for (std::size_t i = 0; i < two.size(); ++i) two[i] = (i * 7919 % 13) < 6 ? 0.0 : 1.0;
    for (double x : compute_catch24(two).values) CHECK(std::isfinite(x));
}

TEST_CASE("mean is translation equivariant") {
    const auto y = gaussian(800, 3);
    for (double c : {-3.5, 0.125, 10.0}) {
        std::vector<double> shifted(y);
        for (double& v : shifted) v += c;
        CHECK(compute_catch24(shifted).mean() ==
              doctest::Approx(compute_catch24(y).mean() + c).epsilon(1e-12));
    }
}

TEST_CASE("z-scored characteristics are affine invariant") {
    for (std::uint64_t seed : {11u, 12u, 13u, 14u}) {
        const auto y = gaussian(1000 + 250 * seed % 7, seed);
        const auto base = compute_catch24(y).values;
        for (auto [a, b] : {std::pair{2.0, 0.0}, std::pair{0.01, 5.0}, std::pair{37.0, -2.5}}) {
            std::vector<double> t(y);
            for (double& v : t) v = a * v + b;
            const auto got = compute_catch24(t).values;
            for (std::size_t k = 0; k < 22; ++k) {
                INFO("seed " << seed << " a=" << a << " feature " << feature_names()[k]);
                CHECK(std::abs(got[k] - base[k]) <= 1e-6 * std::max(1.0, std::abs(base[k])));
            }
        }
    }
}

TEST_CASE("histogram modes ignore sample order") {
    auto y = gaussian(1200, 21);
    const auto base = compute_catch24(y).values;
    meerkit::Rng rng(99);
    rng.shuffle(y);
    const auto perm = compute_catch24(y).values;
    CHECK(perm[0] == doctest::Approx(base[0]).epsilon(1e-12));
    CHECK(perm[1] == doctest::Approx(base[1]).epsilon(1e-12));
    // A sorted series is maximally autocorrelated, so the autocorrelation family must change.
    std::sort(y.begin(), y.end());
    const auto sorted = compute_catch24(y).values;
    CHECK(sorted[0] == doctest::Approx(base[0]).epsilon(1e-12));
    CHECK(sorted[2] != doctest::Approx(base[2]));
}

TEST_CASE("deterministic output") {
    const auto y = gaussian(2000, 5);
    const auto a = compute_catch24(y).values;
    const auto b = compute_catch24(y).values;
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
}
