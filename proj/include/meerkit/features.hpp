#pragma once

#include "meerkit/audio.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace meerkit::features {

/// Per-call feature vectors of one feature set, kept in insertion order.
class FeatureTable {
public:
    FeatureTable() = default;
    FeatureTable(std::string feature_set_id, std::vector<std::string> column_names);

    const std::string& feature_set_id() const { return id_; }
    void set_feature_set_id(std::string id) { id_ = std::move(id); }
    std::size_t dimension() const { return columns_.size(); }
    const std::vector<std::string>& column_names() const { return columns_; }

    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& call_ids() const { return ids_; }
    const std::vector<double>& row(std::size_t i) const { return rows_[i]; }
    bool contains(const std::string& call_id) const { return index_.count(call_id) != 0; }
    /// Throws data_error for an unknown id.
    const std::vector<double>& row(const std::string& call_id) const;

    /// Appends a row; rejects duplicate ids, wrong widths and non-finite values.
    void add_row(std::string call_id, std::vector<double> values);

private:
    std::string id_;
    std::vector<std::string> columns_;
    std::vector<std::string> ids_;
    std::vector<std::vector<double>> rows_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Reads a `call_id,<name_1>,...,<name_d>` CSV. The feature set id defaults
/// to the file stem.
FeatureTable ingest_csv(const std::filesystem::path& path,
                        std::optional<std::size_t> expected_dimension = std::nullopt,
                        std::optional<std::string> feature_set_id = std::nullopt);

/// Writes the table in the same format, using shortest round-trip decimal text.
void export_csv(const FeatureTable& table, const std::filesystem::path& path);

struct StandardizationParams {
    std::vector<double> means;
    std::vector<double> stds;
};

/// Sample standard deviations below this are replaced by 1.
inline constexpr double kStdFloor = 1e-12;

/// Moments of the selected rows of a dense matrix.
StandardizationParams fit_moments(const std::vector<std::vector<double>>& rows,
                                  std::span<const std::size_t> selected);

/// Moments over the rows named in train_ids (at least two).
StandardizationParams standardize_fit(const FeatureTable& table, std::span<const std::string> train_ids);

void standardize_in_place(std::vector<double>& v, const StandardizationParams& params);

/// z-scores every row; the result's feature set id gains a "+z" suffix.
FeatureTable standardize_apply(const FeatureTable& table, const StandardizationParams& params);

/// Undoes standardize_apply (the "+z" suffix is removed when present).
FeatureTable standardize_invert(const FeatureTable& table, const StandardizationParams& params);

struct LabeledDataset {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    std::vector<std::string> call_ids;
    /// Class names; y indexes into this. Equal to the manifest label set.
    std::vector<std::string> classes;
    std::string feature_set_id;
    /// Manifest entries without a row (non-strict joins only).
    std::size_t dropped = 0;

    std::size_t size() const { return x.size(); }
    std::size_t dimension() const { return x.empty() ? 0 : x.front().size(); }
};

/// Attaches manifest labels to feature rows in manifest order. In strict
/// mode a missing call id is an error; otherwise it is dropped and counted.
LabeledDataset join(const FeatureTable& table, const audio::DatasetManifest& manifest, bool strict = true);

}  // namespace meerkit::features
