#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace meerkit::catch22 {

inline constexpr std::size_t kFeatureCount = 24;
/// Shortest series for which every windowed characteristic is defined.
inline constexpr std::size_t kMinLength = 40;

/// The 22 canonical characteristics (reference identifiers, reference
/// order) followed by DN_Mean and DN_Spread_Std.
const std::vector<std::string>& feature_names();

struct Catch24Vector {
    std::array<double, kFeatureCount> values{};

    double mean() const { return values[22]; }
    double stddev() const { return values[23]; }
};

/// Values exactly as the reference pipeline defines them, NaN included
/// (e.g. for constant input).
std::array<double, kFeatureCount> compute_catch24_raw(std::span<const double> series);

/// compute_catch24_raw with non-finite results mapped to 0.
/// Throws data_error for series shorter than kMinLength or with non-finite values.
Catch24Vector compute_catch24(std::span<const double> series);

}  // namespace meerkit::catch22
