// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance [--only name[,name...]] [--keep-workdir DIR]
//
// Optional check on the public recordings: set MEERKIT_SETB_MANIFEST to a
// call_id,path,label manifest; the line reads SKIP when it is unset.

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "qp_oracle.hpp"
#include "snapshot.hpp"
#include "synth.hpp"

#include "meerkit/audio.hpp"
#include "meerkit/catch22.hpp"
#include "meerkit/cnn.hpp"
#include "meerkit/eval.hpp"
#include "meerkit/features.hpp"
#include "meerkit/metrics.hpp"
#include "meerkit/pipeline.hpp"
#include "meerkit/rng.hpp"
#include "meerkit/svm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace meerkit;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances and budgets ------------------------------------------
constexpr double kCatchRel = 1e-6, kCatchAbs = 1e-8, kCatchBudgetS = 10;
constexpr double kGradRel = 1e-4, kGradAbs = 1e-6, kGradStep = 1e-4, kGradBudgetS = 60;
constexpr double kSmoObjectiveTol = 1e-6, kSmoKktTol = 1e-3, kSmoBudgetS = 30;
constexpr int kStratTrials = 100;
constexpr double kResamplerMinDb = 40.0;
constexpr double kE2eMinUar = 0.90, kE2eBudgetS = 15 * 60;
constexpr double kFilterTol = 1e-9;

struct Outcome {
    enum Status { Pass, Fail, Skip } status = Fail;
    std::string detail;
};

Outcome pass(std::string d) { return {Outcome::Pass, std::move(d)}; }
Outcome fail(std::string d) { return {Outcome::Fail, std::move(d)}; }
Outcome verdict(bool ok, std::string d) { return {ok ? Outcome::Pass : Outcome::Fail, std::move(d)}; }

std::string num(double v, int precision = 3) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

// Field i (0-based) of a comma separated line.
std::string text_field(const std::string& line, std::size_t i) {
    std::size_t start = 0;
    for (std::size_t k = 0; k < i; ++k) {
        start = line.find(',', start);
        if (start == std::string::npos) return "";
        ++start;
    }
    return line.substr(start, line.find(',', start) - start);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- catch24 ----------------------------------------------------------------
Outcome catch24_parity() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto series = testsupport::load_catch24_fixture("catch24_gaussian.json");
    std::size_t mismatches = 0, shortest = SIZE_MAX, longest = 0;
    double worst_rel = 0.0;
    std::string first;
    for (const auto& s : series) {
        shortest = std::min(shortest, s.values.size());
        longest = std::max(longest, s.values.size());
        const auto got = catch22::compute_catch24(s.values).values;
        for (std::size_t f = 0; f < catch22::kFeatureCount; ++f) {
            const double want = s.expected[f];
            const bool ok = std::isnan(want) ? got[f] == 0.0
                                             : std::abs(got[f] - want) <= kCatchAbs ||
                                                   std::abs(got[f] - want) <= kCatchRel * std::abs(want);
            if (!std::isnan(want) && want != 0.0) worst_rel = std::max(worst_rel, std::abs(got[f] - want) / std::abs(want));
            if (!ok && mismatches++ == 0) first = s.name + "/" + catch22::feature_names()[f];
        }
    }
    const double secs = seconds_since(t0);
    std::string d = std::to_string(series.size()) + " series, lengths " + std::to_string(shortest) + "-" +
                    std::to_string(longest) + ", worst relative error " + num(worst_rel) + ", " + num(secs) + " s";
    if (mismatches) d += ", " + std::to_string(mismatches) + " mismatches (first " + first + ")";
    return verdict(series.size() == 50 && mismatches == 0 && secs < kCatchBudgetS, d);
}

// ---- CNN --------------------------------------------------------------------
std::vector<double> noise_clip(std::size_t n, std::uint64_t seed, double amp) {
    Rng rng(seed);
    std::vector<double> x(n);
    for (auto& v : x) v = std::clamp(amp * rng.gaussian(), -1.0, 1.0);
    return x;
}

Outcome cnn_gradient_check() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto model = cnn::CnnModel::initialize(2, 2026);
    std::vector<std::vector<double>> clips = {noise_clip(1600, 1, 0.4), noise_clip(1600, 2, 0.6), {}};
    for (std::size_t i = 0; i < 1600; ++i) clips[2].push_back(0.5 * std::sin(2 * M_PI * 900.0 * i / 16000.0));
    const auto r = testsupport::check_gradient(model, clips, {0, 1, 0}, kGradStep, kGradRel, kGradAbs, 1);
    const double secs = seconds_since(t0);
    std::string d = std::to_string(r.checked) + " of " + std::to_string(model.parameters().size()) +
                    " parameters, worst abs diff " + num(r.worst_abs) + ", " + std::to_string(r.needed_smaller_step) +
                    " needed a smaller step, " + num(secs) + " s";
    if (r.failures) d += ", " + std::to_string(r.failures) + " failures (first " + r.first_failure + ")";
    return verdict(r.failures == 0 && r.checked == model.parameters().size() && secs < kGradBudgetS, d);
}

Outcome cnn_shape_law() {
    // Closed-form lengths written out independently of the implementation.
    auto conv = [](std::size_t n, std::size_t k, std::size_t s) { return (n - k) / s + 1; };
    auto pool = [](std::size_t n) { return n >= 2 ? n / 2 : n; };
    const auto model = cnn::CnnModel::initialize(3, 5);
    std::string d;
    bool ok = true;
    for (std::size_t len : {730u, 1600u, 4800u, 16000u}) {
        cnn::BlockFrames want;
        want.conv1 = conv(len, 40, 30);
        want.pool1 = pool(want.conv1);
        want.conv2 = conv(want.pool1, 7, 1);
        want.pool2 = pool(want.conv2);
        want.conv3 = conv(want.pool2, 3, 1);
        want.pool3 = pool(want.conv3);
        const auto got = cnn::block_frames(len);
        const auto fwd = cnn::forward(model, noise_clip(len, len, 0.3));
        const bool same = got.conv1 == want.conv1 && got.pool1 == want.pool1 && got.conv2 == want.conv2 &&
                          got.pool2 == want.pool2 && got.conv3 == want.conv3 && got.pool3 == want.pool3;
        ok = ok && same && fwd.hidden.size() == 80 && fwd.logits.size() == 3 && want.pool3 >= 1;
        d += (d.empty() ? "" : "; ") + std::to_string(len) + ": " + std::to_string(got.conv1) + "," +
             std::to_string(got.pool1) + "," + std::to_string(got.conv2) + "," + std::to_string(got.pool2) + "," +
             std::to_string(got.conv3) + "," + std::to_string(got.pool3) + " -> " + std::to_string(fwd.hidden.size());
    }
    ok = ok && cnn::block_frames(1600).conv1 == 53;
    return verdict(ok, d);
}

// ---- SVM --------------------------------------------------------------------
Outcome smo_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    const svm::KernelSpec kernels[4] = {{svm::KernelKind::Linear, 1.0, 3, 0.0},
                                        {svm::KernelKind::Rbf, 0.5, 3, 0.0},
                                        {svm::KernelKind::Polynomial, 0.3, 3, 0.0},
                                        {svm::KernelKind::Sigmoid, 0.1, 3, 0.0}};
    const double Cs[3] = {0.5, 2.0, 10.0};
    double worst_gap = 0.0, worst_kkt = 0.0;
    int failures = 0;
    for (int trial = 0; trial < 25; ++trial) {
        Rng rng(5000 + trial);
        svm::Matrix x;
        std::vector<int> y;
        for (int i = 0; i < 20; ++i) {
            const int label = i % 2 ? -1 : 1;
            x.push_back({0.8 * label + rng.gaussian(), 0.8 * label + rng.gaussian()});
            y.push_back(label);
        }
        const auto& k = kernels[trial % 4];
        const double C = Cs[trial % 3];
        std::vector<double> gram(400);
        for (int i = 0; i < 20; ++i)
            for (int j = 0; j < 20; ++j) gram[i * 20 + j] = svm::kernel_eval(k, x[i], x[j]);
        const auto oracle = testsupport::solve_svm_dual_pg(gram, y, C);

        svm::SolverOptions tight;
        tight.tol = 1e-9;
        const auto precise = svm::train_binary(x, y, C, k, tight);
        const double gap = std::abs(precise.objective - oracle.objective);

        const auto m = svm::train_binary(x, y, C, k);
        double kkt = 0.0;
        for (int i = 0; i < 20; ++i) {
            const double yf = y[i] * m.decision(x[i]);
            const double a = m.alpha[i];
            kkt = std::max(kkt, a == 0 ? 1.0 - yf : a == C ? yf - 1.0 : std::abs(yf - 1.0));
        }
        worst_gap = std::max(worst_gap, gap);
        worst_kkt = std::max(worst_kkt, kkt);
        failures += !(gap <= kSmoObjectiveTol && kkt <= kSmoKktTol && precise.converged && m.converged);
    }
    const double secs = seconds_since(t0);
    return verdict(failures == 0 && secs < kSmoBudgetS,
                   "25 instances, 4 kernels, max objective gap " + num(worst_gap) + ", max KKT violation " +
                       num(worst_kkt) + ", " + num(secs) + " s" +
                       (failures ? ", " + std::to_string(failures) + " failing instances" : ""));
}

// ---- metrics ----------------------------------------------------------------
Outcome uar_oracle() {
    const double a = eval::uar(eval::ConfusionMatrix({"a", "b"}, {{8, 2}, {5, 5}}));
    const double b = eval::uar(eval::ConfusionMatrix({"a", "b", "c"}, {{6, 0, 0}, {0, 3, 0}, {0, 0, 9}}));
    const double c = eval::uar(eval::ConfusionMatrix({"a", "b", "c"}, {{3, 1, 0}, {1, 3, 0}, {0, 0, 0}}));
    return verdict(a == 0.65 && b == 1.0 && c == 0.75,
                   "[[8,2],[5,5]] -> " + num(a, 17) + ", identity -> " + num(b, 17) + ", empty row -> " + num(c, 17));
}

Outcome stratification() {
    Rng rng(777);
    int checked = 0, violations = 0, worst = 0;
    bool saw_twelve = false;
    while (checked < kStratTrials) {
        const int k = checked == 0 ? 5 : 2 + static_cast<int>(rng.below(9));
        const int classes = 1 + static_cast<int>(rng.below(10));
        std::vector<int> labels;
        for (int c = 0; c < classes; ++c) {
            const int n = checked == 0 && c == 0 ? 12 : 1 + static_cast<int>(rng.below(60));
            labels.insert(labels.end(), n, c);
        }
        if (labels.size() < static_cast<std::size_t>(k)) continue;
        rng.shuffle(labels);
        const auto plan = eval::stratified_kfold(labels, k, rng.next());
        std::vector<std::vector<int>> per(classes, std::vector<int>(k, 0));
        for (std::size_t i = 0; i < labels.size(); ++i) ++per[labels[i]][plan.assignment[i]];
        for (const auto& row : per) {
            const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
            worst = std::max(worst, *hi - *lo);
            violations += *hi - *lo > 1;
        }
        if (checked == 0) saw_twelve = per[0][0] + per[0][1] + per[0][2] + per[0][3] + per[0][4] == 12;
        ++checked;
    }
    return verdict(violations == 0 && saw_twelve,
                   std::to_string(checked) + " multisets (first: a class of 12 over 5 folds), largest per-class spread " +
                       std::to_string(worst));
}

// ---- resampler --------------------------------------------------------------
Outcome resampler() {
    audio::AudioClip c;
    c.sample_rate_hz = 44100;
    for (int i = 0; i < 44100; ++i) c.samples.push_back(0.5 * std::sin(2 * M_PI * 1000.0 * i / 44100.0));
    const auto r = audio::resample(c, 16000);
    const std::size_t n = 4096, start = 4000;
    if (r.samples.size() < start + n) return fail("output too short: " + std::to_string(r.samples.size()));
    // Hann-windowed direct DFT over the non-negative bins.
    std::size_t peak = 0;
    double best = -1;
    for (std::size_t k = 0; k <= n / 2; ++k) {
        std::complex<double> s = 0;
        for (std::size_t t = 0; t < n; ++t) {
            const double w = 0.5 - 0.5 * std::cos(2 * M_PI * t / n);
            s += w * r.samples[start + t] * std::polar(1.0, -2 * M_PI * static_cast<double>(k * t % n) / n);
        }
        if (std::abs(s) > best) best = std::abs(s), peak = k;
    }
    const double bin_hz = 16000.0 / n;
    const double target_bin = 1000.0 / bin_hz;
    // Tone-to-residual: least-squares fit of a 1 kHz sinusoid, same window.
    double ss = 0, cc = 0, sc = 0, ys = 0, yc = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double ph = 2 * M_PI * 1000.0 * static_cast<double>(start + t) / 16000.0;
        const double s = std::sin(ph), co = std::cos(ph), y = r.samples[start + t];
        ss += s * s, cc += co * co, sc += s * co, ys += y * s, yc += y * co;
    }
    const double det = ss * cc - sc * sc;
    const double a = (ys * cc - yc * sc) / det, b = (yc * ss - ys * sc) / det;
    double tone = 0, resid = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double ph = 2 * M_PI * 1000.0 * static_cast<double>(start + t) / 16000.0;
        const double fit = a * std::sin(ph) + b * std::cos(ph);
        tone += fit * fit;
        resid += (r.samples[start + t] - fit) * (r.samples[start + t] - fit);
    }
    const double db = 10 * std::log10(tone / std::max(resid, 1e-300));
    const bool ok = std::abs(static_cast<double>(peak) - target_bin) <= 1.0 && db >= kResamplerMinDb;
    return verdict(ok, "peak at bin " + std::to_string(peak) + " (" + num(peak * bin_hz, 6) + " Hz, 1 kHz = bin " +
                           num(target_bin, 6) + "), tone-to-residual " + num(db, 4) + " dB");
}

// ---- end to end -------------------------------------------------------------
struct E2eState {
    bool ran = false;
    fs::path workdir;
    pipeline::RunConfig config;
};

pipeline::RunConfig e2e_config(const fs::path& manifest, const fs::path& workdir) {
    nlohmann::json doc = {{"manifest", manifest.string()},
                          {"workdir", workdir.string()},
                          {"seed", 20261014},
                          {"threads", std::max(1u, std::thread::hardware_concurrency())},
                          {"cnn", {{"epochs", 15}, {"patience", 5}}}};
    return pipeline::parse_config(doc, fs::current_path());
}

void run_pipeline(const pipeline::RunConfig& cfg) {
    pipeline::CommandOptions opt;
    pipeline::cmd_prepare(cfg, opt);
    pipeline::cmd_extract(cfg, "catch24", opt);
    pipeline::cmd_classify(cfg, "catch24", opt);
    pipeline::cmd_train_cnn(cfg, opt);
    pipeline::cmd_extract(cfg, "cnn-crafted", opt);
    pipeline::cmd_classify(cfg, "cnn-crafted", opt);
}

Outcome end_to_end(const fs::path& root, E2eState& state) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto corpus = testsupport::write_synth_corpus(root / "corpus", 200, 60, 400, 22050, 314159);
    const auto a = e2e_config(corpus.manifest, root / "run_a");
    const auto b = e2e_config(corpus.manifest, root / "run_b");
    run_pipeline(a);
    state = {true, a.workdir, a};
    run_pipeline(b);
    const double secs = seconds_since(t0);

    const pipeline::Workdir wa{a.workdir}, wb{b.workdir};
    const auto catch24 = eval::load_report(wa.report_dir("catch24") / "report.json");
    const auto crafted = eval::load_report(wa.report_dir("cnn-crafted") / "report.json");
    const auto reports_a = testsupport::snapshot(wa.reports()), reports_b = testsupport::snapshot(wb.reports());
    const bool identical = reports_a == reports_b && !reports_a.empty() &&
                           testsupport::snapshot(wa.root / "features") == testsupport::snapshot(wb.root / "features") &&
                           testsupport::slurp(wa.cnn_model()) == testsupport::slurp(wb.cnn_model());

    std::size_t replicated = 0;
    {
        std::istringstream log(testsupport::slurp(wa.prepare_log()));
        std::string line;
        std::getline(log, line);
        while (std::getline(log, line)) {
            const auto p = text_field(line, 4);
            replicated += p != "1";
        }
    }
    const bool ok = catch24.mean_uar >= kE2eMinUar && crafted.mean_uar >= kE2eMinUar && identical &&
                    secs < kE2eBudgetS && replicated > 0 && corpus.clips == 800;
    return verdict(ok, "800 clips (" + std::to_string(replicated) + " replicated), catch24 mean UAR " +
                           num(catch24.mean_uar, 4) + ", cnn-crafted mean UAR " + num(crafted.mean_uar, 4) +
                           ", reruns " + (identical ? "byte-identical" : "DIFFER") + " (" +
                           std::to_string(reports_a.size()) + " report files), " + num(secs, 4) + " s");
}

// ---- filter response --------------------------------------------------------
Outcome filter_response() {
    auto m = cnn::CnnModel::initialize(2, 99);
    const auto got = cnn::filter_frequency_response(m);
    double worst = 0.0;
    const auto filters = m.first_layer_filters();
    for (std::size_t k = 0; k < 513; ++k) {
        double sum = 0.0;
        for (const auto& h : filters) {
            double re = 0, im = 0;
            for (std::size_t t = 0; t < h.size(); ++t) {
                const double ang = -2 * M_PI * static_cast<double>(k * t) / 1024.0;
                re += h[t] * std::cos(ang);
                im += h[t] * std::sin(ang);
            }
            sum += std::hypot(re, im);
        }
        worst = std::max(worst, std::abs(std::log(std::max(sum, 1e-12)) - got.log_cumulative_magnitude[k]));
    }
    auto w = m.block("conv1.weight");
    std::fill(w.begin(), w.end(), 0.0);
    for (int f = 0; f < 40; ++f) w[f * 40 + (f % 40)] = 1.0;  // unit impulses at varying lags
    const auto delta = cnn::filter_frequency_response(m);
    double worst_delta = 0.0;
    for (double v : delta.log_cumulative_magnitude) worst_delta = std::max(worst_delta, std::abs(v - std::log(40.0)));
    return verdict(got.log_cumulative_magnitude.size() == 513 && worst <= kFilterTol && worst_delta <= kFilterTol,
                   "513 bins, max deviation from direct DFT " + num(worst) + ", delta filters max |v - ln 40| " +
                       num(worst_delta));
}

// ---- leakage ----------------------------------------------------------------
Outcome leakage(const E2eState& state) {
    if (!state.ran) return fail("needs the end-to-end-synthetic features; run both checks together");
    const pipeline::Workdir wd{state.workdir};
    const auto table = features::ingest_csv(wd.features("catch24"), 24, "catch24");
    const auto manifest = audio::load_manifest(wd.processed() / "manifest.csv");
    const auto data = features::join(table, manifest);
    eval::ExperimentOptions opt;
    opt.folds = state.config.folds;
    opt.grid = state.config.grid;
    opt.seed = state.config.seed;
    opt.threads = state.config.threads;
    const auto plan = eval::plan_folds(manifest, opt.folds, opt.seed);
    int changed = 0;
    for (int f = 0; f < opt.folds; ++f) {
        const auto base = eval::run_fold(data, plan, f, opt);
        auto mutated = data;
        const std::size_t victim = plan.test_indices(f).front();
        mutated.x[victim][f % 24] = mutated.x[victim][f % 24] * 1e3 + 1e6;
        const auto other = eval::run_fold(mutated, plan, f, opt);
        bool same = other.kernel.kind == base.kernel.kind && other.kernel.gamma == base.kernel.gamma &&
                    other.C == base.C && other.standardization.means == base.standardization.means &&
                    other.standardization.stds == base.standardization.stds;
        for (std::size_t g = 0; g < base.grid_table.size(); ++g) same = same && other.grid_table[g].score == base.grid_table[g].score;
        changed += !same;
    }
    return verdict(changed == 0, std::to_string(opt.folds) + " folds, one test value perturbed per fold, " +
                                     std::to_string(changed) + " folds changed hyperparameters or standardization");
}

// ---- optional public data ---------------------------------------------------
Outcome set_b(const fs::path& root) {
    const char* manifest = std::getenv("MEERKIT_SETB_MANIFEST");
    if (!manifest || !*manifest) return {Outcome::Skip, "MEERKIT_SETB_MANIFEST not set"};
    const auto t0 = std::chrono::steady_clock::now();
    nlohmann::json doc = {{"manifest", fs::absolute(manifest).string()},
                          {"workdir", (root / "setb").string()},
                          {"threads", std::max(1u, std::thread::hardware_concurrency())}};
    const auto cfg = pipeline::parse_config(doc, fs::current_path());
    pipeline::CommandOptions opt;
    opt.skip_bad = true;
    pipeline::cmd_prepare(cfg, opt);
    pipeline::cmd_extract(cfg, "catch24", opt);
    const auto r = pipeline::cmd_classify(cfg, "catch24", opt);
    return pass("informative: catch24 mean UAR " + num(r.summary["mean_uar"].get<double>(), 4) + " (reference 0.56), " +
                num(seconds_since(t0), 4) + " s");
}

}  // namespace

int main(int argc, char** argv) {
    std::set<std::string> only;
    std::optional<fs::path> keep;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--only" && i + 1 < argc) {
            std::stringstream s(argv[++i]);
            for (std::string n; std::getline(s, n, ',');) only.insert(n);
        } else if (a == "--keep-workdir" && i + 1 < argc) {
            keep = fs::absolute(argv[++i]);
        } else {
            std::cerr << "usage: acceptance [--only name[,name...]] [--keep-workdir DIR]\n";
            return 2;
        }
    }
    testsupport::TempDir scratch("acceptance");
    const fs::path root = keep ? *keep : scratch.path();
    if (keep) fs::create_directories(root);

    E2eState e2e;
    const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
        {"catch24-parity", catch24_parity},
        {"cnn-gradient-check", cnn_gradient_check},
        {"cnn-shape-law", cnn_shape_law},
        {"smo-correctness", smo_correctness},
        {"uar-oracle", uar_oracle},
        {"stratification", stratification},
        {"resampler", resampler},
        {"end-to-end-synthetic", [&] { return end_to_end(root, e2e); }},
        {"filter-response-oracle", filter_response},
        {"leakage-mutation", [&] { return leakage(e2e); }},
        {"public-set-b", [&] { return set_b(root); }},
    };
    int failures = 0;
    for (const auto& [name, check] : checks) {
        if (!only.empty() && !only.count(name)) continue;
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = fail(std::string("threw: ") + e.what());
        }
        const char* tag = o.status == Outcome::Pass ? "PASS" : o.status == Outcome::Skip ? "SKIP" : "FAIL";
        failures += o.status == Outcome::Fail;
        std::printf("%s %-24s %s\n", tag, name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
