#include "meerkit/features.hpp"
#include "meerkit/error.hpp"
#include "../common/text.hpp"

#include <cmath>
#include <fstream>

namespace meerkit::features {

FeatureTable::FeatureTable(std::string feature_set_id, std::vector<std::string> column_names)
    : id_(std::move(feature_set_id)), columns_(std::move(column_names)) {
    if (columns_.empty()) throw data_error("feature table '" + id_ + "' needs at least one column");
}

const std::vector<double>& FeatureTable::row(const std::string& call_id) const {
    const auto it = index_.find(call_id);
    if (it == index_.end()) throw data_error("call_id '" + call_id + "' not in feature set '" + id_ + "'");
    return rows_[it->second];
}

void FeatureTable::add_row(std::string call_id, std::vector<double> values) {
    if (call_id.empty()) throw data_error("empty call_id in feature set '" + id_ + "'");
    if (values.size() != columns_.size())
        throw data_error("row '" + call_id + "' has " + std::to_string(values.size()) + " values, expected " +
                         std::to_string(columns_.size()));
    for (double v : values)
        if (!std::isfinite(v)) throw data_error("row '" + call_id + "' contains a non-finite value");
    if (!index_.emplace(call_id, ids_.size()).second)
        throw data_error("duplicate call_id '" + call_id + "' in feature set '" + id_ + "'");
    ids_.push_back(std::move(call_id));
    rows_.push_back(std::move(values));
}

FeatureTable ingest_csv(const std::filesystem::path& path, std::optional<std::size_t> expected_dimension,
                        std::optional<std::string> feature_set_id) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot read feature file " + path.string());
    const std::string where = path.string();
    std::string line;
    if (!std::getline(in, line)) throw data_error("feature file " + where + " is empty");
    const auto header = text::split(text::strip_cr(line));
    if (header.size() < 2 || text::trim(header[0]) != "call_id")
        throw data_error(where + ": header must be call_id followed by at least one feature name");
    std::vector<std::string> names;
    for (std::size_t i = 1; i < header.size(); ++i) names.emplace_back(text::trim(header[i]));
    if (expected_dimension && *expected_dimension != names.size())
        throw data_error(where + ": dimension " + std::to_string(names.size()) + " does not match expected " +
                         std::to_string(*expected_dimension));

    FeatureTable table(feature_set_id.value_or(path.stem().string()), std::move(names));
    std::size_t line_no = 1;
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++line_no;
        const auto row = text::strip_cr(line);
        if (text::trim(row).empty()) continue;
        const auto cells = text::split(row);
        const std::string loc = where + ":" + std::to_string(line_no);
        if (cells.size() != header.size())
            throw data_error(loc + ": expected " + std::to_string(header.size()) + " fields, found " +
                             std::to_string(cells.size()));
        values.assign(cells.size() - 1, 0.0);
        for (std::size_t i = 1; i < cells.size(); ++i) {
            const auto v = text::parse_double(cells[i]);
            if (!v || !std::isfinite(*v))
                throw data_error(loc + ": non-numeric value '" + std::string(text::trim(cells[i])) + "' in column " +
                                 table.column_names()[i - 1]);
            values[i - 1] = *v;
        }
        table.add_row(std::string(text::trim(cells[0])), values);
    }
    return table;
}

void export_csv(const FeatureTable& table, const std::filesystem::path& path) {
    std::string out = "call_id";
    for (const auto& n : table.column_names()) {
        if (n.find(',') != std::string::npos) throw data_error("column name '" + n + "' contains a comma");
        out += ',';
        out += n;
    }
    out += '\n';
    for (std::size_t r = 0; r < table.size(); ++r) {
        out += table.call_ids()[r];
        for (double v : table.row(r)) {
            out += ',';
            out += text::format_double(v);
        }
        out += '\n';
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot write feature file " + path.string());
    f << out;
    if (!f) throw io_error("failed writing feature file " + path.string());
}

StandardizationParams fit_moments(const std::vector<std::vector<double>>& rows,
                                  std::span<const std::size_t> selected) {
    if (selected.size() < 2) throw data_error("standardization needs at least two training rows");
    const std::size_t d = rows[selected[0]].size();
    StandardizationParams p;
    p.means.assign(d, 0.0);
    p.stds.assign(d, 0.0);
    for (std::size_t i : selected)
        for (std::size_t k = 0; k < d; ++k) p.means[k] += rows[i][k];
    const double n = static_cast<double>(selected.size());
    for (double& m : p.means) m /= n;
    for (std::size_t i : selected)
        for (std::size_t k = 0; k < d; ++k) {
            const double dv = rows[i][k] - p.means[k];
            p.stds[k] += dv * dv;
        }
    for (double& s : p.stds) {
        s = std::sqrt(s / (n - 1.0));
        if (s < kStdFloor) s = 1.0;
    }
    return p;
}

StandardizationParams standardize_fit(const FeatureTable& table, std::span<const std::string> train_ids) {
    std::vector<std::vector<double>> rows;
    rows.reserve(train_ids.size());
    for (const auto& id : train_ids) rows.push_back(table.row(id));
    std::vector<std::size_t> all(rows.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return fit_moments(rows, all);
}

void standardize_in_place(std::vector<double>& v, const StandardizationParams& params) {
    if (v.size() != params.means.size()) throw data_error("standardization dimension mismatch");
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = (v[k] - params.means[k]) / params.stds[k];
}

FeatureTable standardize_apply(const FeatureTable& table, const StandardizationParams& params) {
    if (table.dimension() != params.means.size() || params.stds.size() != params.means.size())
        throw data_error("standardization parameters do not match feature dimension");
    FeatureTable out(table.feature_set_id() + "+z", table.column_names());
    for (std::size_t r = 0; r < table.size(); ++r) {
        std::vector<double> v = table.row(r);
        standardize_in_place(v, params);
        out.add_row(table.call_ids()[r], std::move(v));
    }
    return out;
}

FeatureTable standardize_invert(const FeatureTable& table, const StandardizationParams& params) {
    if (table.dimension() != params.means.size()) throw data_error("standardization parameters do not match feature dimension");
    std::string id = table.feature_set_id();
    if (id.size() >= 2 && id.compare(id.size() - 2, 2, "+z") == 0) id.resize(id.size() - 2);
    FeatureTable out(id, table.column_names());
    for (std::size_t r = 0; r < table.size(); ++r) {
        std::vector<double> v = table.row(r);
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = v[k] * params.stds[k] + params.means[k];
        out.add_row(table.call_ids()[r], std::move(v));
    }
    return out;
}

LabeledDataset join(const FeatureTable& table, const audio::DatasetManifest& manifest, bool strict) {
    LabeledDataset ds;
    ds.classes = manifest.label_set;
    ds.feature_set_id = table.feature_set_id();
    for (const auto& e : manifest.entries) {
        if (!table.contains(e.call_id)) {
            if (strict)
                throw data_error("call_id '" + e.call_id + "' from the manifest is missing in feature set '" +
                                 table.feature_set_id() + "'");
            ++ds.dropped;
            continue;
        }
        ds.x.push_back(table.row(e.call_id));
        ds.y.push_back(static_cast<int>(manifest.class_index(e.label)));
        ds.call_ids.push_back(e.call_id);
    }
    return ds;
}

}  // namespace meerkit::features
