#pragma once

#include <json.hpp>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace testsupport {

inline std::filesystem::path fixture_dir() { return MEERKIT_FIXTURE_DIR; }

inline nlohmann::json load_json(const std::string& name) {
    std::ifstream in(fixture_dir() / name);
    if (!in) throw std::runtime_error("missing fixture " + name);
    return nlohmann::json::parse(in);
}

struct ReferenceSeries {
    std::string name;
    std::vector<double> values;
    std::vector<double> expected;  // NaN where the reference reported NaN
};

inline std::vector<ReferenceSeries> load_catch24_fixture(const std::string& name) {
    const auto doc = load_json(name);
    std::vector<ReferenceSeries> out;
    for (const auto& s : doc.at("series")) {
        ReferenceSeries r;
        r.name = s.at("name").get<std::string>();
        r.values = s.at("values").get<std::vector<double>>();
        for (const auto& e : s.at("expected"))
            r.expected.push_back(e.is_null() ? std::nan("") : e.get<double>());
        out.push_back(std::move(r));
    }
    return out;
}

/// Per-feature agreement rule for catch24 parity: 1e-6 relative or 1e-8 absolute.
inline bool catch24_close(double got, double want) {
    if (std::isnan(want)) return got == 0.0;
    const double diff = std::abs(got - want);
    return diff <= 1e-8 || diff <= 1e-6 * std::abs(want);
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("meerkit_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testsupport
