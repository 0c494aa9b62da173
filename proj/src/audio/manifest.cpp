#include "meerkit/audio.hpp"
#include "meerkit/error.hpp"
#include "../common/text.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_set>

namespace meerkit::audio {

std::size_t DatasetManifest::class_index(const std::string& label) const {
    const auto it = std::lower_bound(label_set.begin(), label_set.end(), label);
    if (it == label_set.end() || *it != label) throw data_error("unknown label '" + label + "'");
    return static_cast<std::size_t>(it - label_set.begin());
}

std::filesystem::path DatasetManifest::resolve(const ManifestEntry& entry) const {
    const std::filesystem::path p(entry.path);
    if (p.is_absolute() || base_dir.empty()) return p;
    return base_dir / p;
}

DatasetManifest make_manifest(std::vector<ManifestEntry> entries, std::filesystem::path base_dir) {
    std::unordered_set<std::string> seen;
    std::set<std::string> labels;
    for (const auto& e : entries) {
        if (e.call_id.empty()) throw data_error("manifest entry with empty call_id");
        if (e.label.empty()) throw data_error("manifest entry '" + e.call_id + "' has an empty label");
        if (!seen.insert(e.call_id).second) throw data_error("duplicate call_id '" + e.call_id + "' in manifest");
        labels.insert(e.label);
    }
    DatasetManifest m;
    m.entries = std::move(entries);
    m.label_set.assign(labels.begin(), labels.end());
    m.base_dir = std::move(base_dir);
    return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot read manifest " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw data_error("manifest " + path.string() + " is empty");

    const auto header = text::split(text::strip_cr(line));
    int col_id = -1, col_path = -1, col_label = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto name = text::trim(header[i]);
        if (name == "call_id") col_id = static_cast<int>(i);
        else if (name == "path") col_path = static_cast<int>(i);
        else if (name == "label") col_label = static_cast<int>(i);
    }
    if (col_id < 0 || col_path < 0 || col_label < 0)
        throw data_error("manifest header must contain call_id,path,label columns");

    std::vector<ManifestEntry> entries;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto row = text::strip_cr(line);
        if (text::trim(row).empty()) continue;
        const auto fields = text::split(row);
        if (fields.size() != header.size())
            throw data_error("manifest line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " columns, found " +
                             std::to_string(fields.size()));
        ManifestEntry e;
        e.call_id = std::string(text::trim(fields[col_id]));
        e.path = std::string(text::trim(fields[col_path]));
        e.label = std::string(text::trim(fields[col_label]));
        if (e.path.empty()) throw data_error("manifest line " + std::to_string(line_no) + ": empty path");
        entries.push_back(std::move(e));
    }
    return make_manifest(std::move(entries), path.parent_path());
}

}  // namespace meerkit::audio
