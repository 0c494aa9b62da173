#include "meerkit/pipeline.hpp"
#include "meerkit/error.hpp"
#include "../common/fsutil.hpp"
#include "../common/text.hpp"
#include "lock.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace meerkit::pipeline {

namespace fs = std::filesystem;

namespace {

using Rgb = std::array<unsigned char, 3>;

class Image {
public:
    Image(int w, int h, Rgb fill) : w_(w), h_(h), px_(static_cast<std::size_t>(w) * h, fill) {}

    void set(int x, int y, Rgb c) {
        if (x >= 0 && y >= 0 && x < w_ && y < h_) px_[static_cast<std::size_t>(y) * w_ + x] = c;
    }
    void rect(int x0, int y0, int w, int h, Rgb c) {
        for (int y = y0; y < y0 + h; ++y)
            for (int x = x0; x < x0 + w; ++x) set(x, y, c);
    }
    std::string ppm() const {
        std::string out = "P6\n" + std::to_string(w_) + " " + std::to_string(h_) + "\n255\n";
        for (const Rgb& c : px_) out.append(reinterpret_cast<const char*>(c.data()), 3);
        return out;
    }

private:
    int w_, h_;
    std::vector<Rgb> px_;
};

Rgb shade(double v) {
    // White at 0 to dark blue at 1.
    v = std::clamp(v, 0.0, 1.0);
    auto mix = [v](int a, int b) { return static_cast<unsigned char>(std::lround(a + (b - a) * v)); };
    return {mix(255, 8), mix(255, 48), mix(255, 107)};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
    std::istringstream in(fsutil::read_text(path));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        const auto l = text::strip_cr(line);
        if (l.empty()) continue;
        std::vector<std::string> row;
        for (auto f : text::split(l)) row.emplace_back(f);
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Row-normalised confusion heatmap; rows are true classes.
std::string render_confusion(const fs::path& csv) {
    const auto rows = read_csv(csv);
    if (rows.size() < 2) throw data_error(csv.string() + ": empty confusion matrix");
    const std::size_t k = rows.front().size() - 1;
    if (rows.size() - 1 != k) throw data_error(csv.string() + ": confusion matrix is not square");
    constexpr int cell = 32, pad = 4;
    const int side = static_cast<int>(k) * cell + 2 * pad;
    Image img(side, side, {255, 255, 255});
    for (std::size_t t = 0; t < k; ++t) {
        if (rows[t + 1].size() != k + 1) throw data_error(csv.string() + ": ragged row");
        std::vector<double> counts(k);
        double total = 0;
        for (std::size_t p = 0; p < k; ++p) {
            const auto v = text::parse_double(rows[t + 1][p + 1]);
            if (!v || *v < 0) throw data_error(csv.string() + ": bad count '" + rows[t + 1][p + 1] + "'");
            counts[p] = *v;
            total += *v;
        }
        for (std::size_t p = 0; p < k; ++p) {
            const Rgb c = total > 0 ? shade(counts[p] / total) : Rgb{220, 220, 220};
            img.rect(pad + static_cast<int>(p) * cell + 1, pad + static_cast<int>(t) * cell + 1, cell - 2, cell - 2, c);
        }
    }
    return img.ppm();
}

std::string render_filter_response(const fs::path& csv) {
    const auto rows = read_csv(csv);
    if (rows.size() < 3) throw data_error(csv.string() + ": no response data");
    std::vector<double> y;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 2) throw data_error(csv.string() + ": expected two columns");
        const auto v = text::parse_double(rows[i][1]);
        if (!v) throw data_error(csv.string() + ": bad value '" + rows[i][1] + "'");
        y.push_back(*v);
    }
    const auto [lo_it, hi_it] = std::minmax_element(y.begin(), y.end());
    const double lo = *lo_it, span = std::max(*hi_it - lo, 1e-12);
    constexpr int margin = 10, height = 240;
    const int width = static_cast<int>(y.size());
    Image img(width + 2 * margin, height + 2 * margin, {255, 255, 255});
    img.rect(margin - 1, margin, 1, height, {120, 120, 120});
    img.rect(margin - 1, margin + height, width + 1, 1, {120, 120, 120});
    auto row_of = [&](double v) { return margin + height - 1 - static_cast<int>(std::lround((v - lo) / span * (height - 1))); };
    int prev = row_of(y.front());
    for (int x = 0; x < width; ++x) {
        const int cur = row_of(y[x]);
        for (int r = std::min(prev, cur); r <= std::max(prev, cur); ++r) img.set(margin + x, r, {200, 40, 30});
        prev = cur;
    }
    return img.ppm();
}

}  // namespace

CommandResult cmd_render(const RunConfig& config, const std::string& target, const CommandOptions& options) {
    const Workdir wd{config.workdir};
    CommandResult r;
    std::vector<std::pair<fs::path, fs::path>> jobs;  // csv -> image
    const bool filters = target == "filters";
    if (filters) {
        const fs::path csv = wd.filters_dir() / "filter_response.csv";
        if (!options.dry_run && !fs::exists(csv))
            throw data_error("filter response not found: expected " + csv.string() + " (run `analyze-filters` first)");
        jobs.emplace_back(csv, wd.filters_dir() / "filter_response.ppm");
    } else {
        config.source(target);
        const fs::path dir = wd.report_dir(target);
        if (!options.dry_run && !fs::exists(dir / "confusion_aggregate.csv"))
            throw data_error("no report found: expected " + (dir / "confusion_aggregate.csv").string() +
                             " (run `classify " + target + "` first)");
        if (fs::is_directory(dir))
            for (const auto& e : fs::directory_iterator(dir)) {
                const auto name = e.path().filename().string();
                if (name.rfind("confusion_", 0) == 0 && e.path().extension() == ".csv")
                    jobs.emplace_back(e.path(), fs::path(e.path()).replace_extension(".ppm"));
            }
        std::sort(jobs.begin(), jobs.end());
    }
    if (options.dry_run) {
        if (jobs.empty()) r.plan.push_back("render: " + target + " (no inputs yet)");
        for (const auto& [csv, img] : jobs) r.plan.push_back("render: " + csv.string() + " -> " + img.string());
        return r;
    }
    detail::WorkdirLock lock(wd);
    for (const auto& [csv, img] : jobs) {
        fsutil::write_atomic(img, filters ? render_filter_response(csv) : render_confusion(csv));
        r.outputs.push_back(img);
        if (options.log) options.log("rendered " + img.string());
    }
    r.summary = {{"images", r.outputs.size()}};
    return r;
}

}  // namespace meerkit::pipeline
