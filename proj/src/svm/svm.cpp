#include "meerkit/svm.hpp"
#include "meerkit/error.hpp"
#include "meerkit/metrics.hpp"
#include "../common/parallel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <iterator>
#include <map>
#include <memory>

namespace meerkit::svm {

std::string kernel_name(KernelKind kind) {
    switch (kind) {
        case KernelKind::Linear: return "linear";
        case KernelKind::Rbf: return "rbf";
        case KernelKind::Polynomial: return "polynomial";
        case KernelKind::Sigmoid: return "sigmoid";
    }
    return "unknown";
}

KernelKind parse_kernel(const std::string& name) {
    std::string s;
    for (char c : name) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (s == "linear") return KernelKind::Linear;
    if (s == "rbf") return KernelKind::Rbf;
    if (s == "polynomial" || s == "poly") return KernelKind::Polynomial;
    if (s == "sigmoid") return KernelKind::Sigmoid;
    throw config_error("unknown kernel '" + name + "'");
}

double kernel_from_dot(const KernelSpec& spec, double dot, double xx, double yy) {
    switch (spec.kind) {
        case KernelKind::Linear: return dot;
        case KernelKind::Rbf: return std::exp(-spec.gamma * std::max(0.0, xx + yy - 2.0 * dot));
        case KernelKind::Polynomial: return std::pow(spec.gamma * dot + spec.coef0, spec.degree);
        case KernelKind::Sigmoid: return std::tanh(spec.gamma * dot + spec.coef0);
    }
    return 0.0;
}

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw invalid_argument("kernel arguments have different dimensions (" + std::to_string(x.size()) + " vs " +
                               std::to_string(y.size()) + ")");
    if (spec.kind == KernelKind::Rbf) {
        // Direct squared distance avoids cancellation for nearby points.
        double d2 = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - y[i]) * (x[i] - y[i]);
        return std::exp(-spec.gamma * d2);
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
    return kernel_from_dot(spec, dot, 0.0, 0.0);
}

namespace {

constexpr double kTau = 1e-12;

struct SmoResult {
    std::vector<double> alpha;
    double bias = 0.0;
    double objective = 0.0;
    std::int64_t iterations = 0;
    bool converged = false;
};

/// SMO on a dense row-major kernel matrix `k` (n x n) with labels in {-1,+1}.
SmoResult smo(const std::vector<double>& k, std::size_t n, const std::vector<int>& y, double C,
              const SolverOptions& options) {
    SmoResult r;
    r.alpha.assign(n, 0.0);
    std::vector<double> g(n, -1.0);
    auto& a = r.alpha;
    auto up = [&](std::size_t t) { return y[t] > 0 ? a[t] < C : a[t] > 0; };
    auto low = [&](std::size_t t) { return y[t] > 0 ? a[t] > 0 : a[t] < C; };

    double gmax = 0.0, gmin = 0.0;
    for (;;) {
        gmax = -std::numeric_limits<double>::infinity();
        gmin = std::numeric_limits<double>::infinity();
        std::size_t i = n, j = n;
        for (std::size_t t = 0; t < n; ++t) {
            const double v = -y[t] * g[t];
            if (up(t) && v > gmax) {
                gmax = v;
                i = t;
            }
            if (low(t) && v < gmin) {
                gmin = v;
                j = t;
            }
        }
        if (i == n || j == n || gmax - gmin < options.tol) {
            r.converged = true;
            break;
        }
        if (r.iterations >= options.max_iter) break;
        ++r.iterations;

        const double* ki = &k[i * n];
        const double* kj = &k[j * n];
        const double old_i = a[i], old_j = a[j];
        if (y[i] != y[j]) {
            double quad = ki[i] + kj[j] + 2.0 * (y[i] * y[j] * ki[j]);
            if (quad <= 0) quad = kTau;
            const double delta = (-g[i] - g[j]) / quad;
            const double diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if (diff > 0) {
                if (a[j] < 0) {
                    a[j] = 0;
                    a[i] = diff;
                }
            } else if (a[i] < 0) {
                a[i] = 0;
                a[j] = -diff;
            }
            if (diff > 0) {
                if (a[i] > C) {
                    a[i] = C;
                    a[j] = C - diff;
                }
            } else if (a[j] > C) {
                a[j] = C;
                a[i] = C + diff;
            }
        } else {
            double quad = ki[i] + kj[j] - 2.0 * (y[i] * y[j] * ki[j]);
            if (quad <= 0) quad = kTau;
            const double delta = (g[i] - g[j]) / quad;
            const double sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if (sum > C) {
                if (a[i] > C) {
                    a[i] = C;
                    a[j] = sum - C;
                }
            } else if (a[j] < 0) {
                a[j] = 0;
                a[i] = sum;
            }
            if (sum > C) {
                if (a[j] > C) {
                    a[j] = C;
                    a[i] = sum - C;
                }
            } else if (a[i] < 0) {
                a[i] = 0;
                a[j] = sum;
            }
        }
        const double di = (a[i] - old_i) * y[i];
        const double dj = (a[j] - old_j) * y[j];
        for (std::size_t t = 0; t < n; ++t) g[t] += y[t] * (ki[t] * di + kj[t] * dj);
    }

    double free_sum = 0.0;
    int free_count = 0;
    for (std::size_t t = 0; t < n; ++t) {
        if (a[t] > 0 && a[t] < C) {
            free_sum += -y[t] * g[t];
            ++free_count;
        }
    }
    r.bias = free_count > 0 ? free_sum / free_count : 0.5 * (gmax + gmin);
    if (!std::isfinite(r.bias)) r.bias = 0.0;
    double obj = 0.0;
    for (std::size_t t = 0; t < n; ++t) obj += a[t] * (g[t] - 1.0);
    r.objective = 0.5 * obj;
    return r;
}

void check_finite(const Matrix& x) {
    if (x.empty()) throw data_error("no training samples");
    const std::size_t d = x.front().size();
    for (const auto& row : x) {
        if (row.size() != d) throw data_error("training vectors have inconsistent dimensions");
        for (double v : row)
            if (!std::isfinite(v)) throw data_error("training vectors contain a non-finite value");
    }
}

std::vector<double> dot_matrix(const Matrix& x, std::vector<double>& sq) {
    const std::size_t n = x.size();
    std::vector<double> dots(n * n);
    sq.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < x[i].size(); ++k) s += x[i][k] * x[j][k];
            dots[i * n + j] = s;
            dots[j * n + i] = s;
        }
        sq[i] = dots[i * n + i];
    }
    return dots;
}

std::vector<double> cross_dots(const Matrix& a, const Matrix& b) {
    std::vector<double> out(a.size() * b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a[i].size(); ++k) s += a[i][k] * b[j][k];
            out[i * b.size() + j] = s;
        }
    return out;
}

void check_C(double C) {
    if (!(C > 0) || !std::isfinite(C)) throw invalid_argument("C must be a positive finite number");
}

/// Training samples with their Gram data, reused across grid candidates.
struct GramCache {
    std::vector<double> sq;
    std::vector<double> dots;
    std::size_t n = 0;

    explicit GramCache(const Matrix& x) : dots(dot_matrix(x, sq)), n(x.size()) {}  // sq is filled first

    std::vector<double> kernel(const KernelSpec& spec, const std::vector<std::size_t>& idx) const {
        const std::size_t m = idx.size();
        std::vector<double> k(m * m);
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b)
                k[a * m + b] = kernel_from_dot(spec, dots[idx[a] * n + idx[b]], sq[idx[a]], sq[idx[b]]);
        return k;
    }
};

struct PairSolution {
    int positive = 0, negative = 1;
    std::vector<std::size_t> sv;  // sample indices
    std::vector<double> coefs;
    double bias = 0.0;
    bool converged = true;
};

std::vector<PairSolution> solve_pairs(const GramCache& gram, const std::vector<int>& labels, std::size_t n_classes,
                                      double C, const KernelSpec& spec, const SolverOptions& options) {
    std::vector<std::vector<std::size_t>> members(n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes)
            throw invalid_argument("class index out of range");
        members[labels[i]].push_back(i);
    }
    for (std::size_t c = 0; c < n_classes; ++c)
        if (members[c].empty()) throw data_error("class " + std::to_string(c) + " has no training samples");

    std::vector<PairSolution> out;
    for (std::size_t a = 0; a < n_classes; ++a) {
        for (std::size_t b = a + 1; b < n_classes; ++b) {
            std::vector<std::size_t> idx;
            std::merge(members[a].begin(), members[a].end(), members[b].begin(), members[b].end(),
                       std::back_inserter(idx));
            std::vector<int> y(idx.size());
            for (std::size_t t = 0; t < idx.size(); ++t) y[t] = labels[idx[t]] == static_cast<int>(a) ? 1 : -1;
            const auto k = gram.kernel(spec, idx);
            const SmoResult r = smo(k, idx.size(), y, C, options);
            PairSolution p;
            p.positive = static_cast<int>(a);
            p.negative = static_cast<int>(b);
            p.bias = r.bias;
            p.converged = r.converged;
            for (std::size_t t = 0; t < idx.size(); ++t) {
                if (r.alpha[t] > 0) {
                    p.sv.push_back(idx[t]);
                    p.coefs.push_back(r.alpha[t] * y[t]);
                }
            }
            out.push_back(std::move(p));
        }
    }
    return out;
}

/// Predictions for query points given their inner products with the training samples.
std::vector<int> predict_pairs(const std::vector<PairSolution>& pairs, std::size_t n_classes, const KernelSpec& spec,
                               const std::vector<double>& qdots, const std::vector<double>& qsq,
                               const GramCache& gram) {
    const std::size_t nq = qsq.size();
    std::vector<PairwiseModel> shape(pairs.size());
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        shape[p].positive = pairs[p].positive;
        shape[p].negative = pairs[p].negative;
    }
    std::vector<int> out(nq);
    std::vector<double> dec(pairs.size());
    std::map<std::size_t, double> kcache;
    for (std::size_t q = 0; q < nq; ++q) {
        kcache.clear();
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            double s = pairs[p].bias;
            for (std::size_t t = 0; t < pairs[p].sv.size(); ++t) {
                const std::size_t i = pairs[p].sv[t];
                auto it = kcache.find(i);
                if (it == kcache.end())
                    it = kcache.emplace(i, kernel_from_dot(spec, qdots[q * gram.n + i], qsq[q], gram.sq[i])).first;
                s += pairs[p].coefs[t] * it->second;
            }
            dec[p] = s;
        }
        out[q] = vote(dec, shape, n_classes);
    }
    return out;
}

Matrix select_rows(const Matrix& x, const std::vector<std::size_t>& idx) {
    Matrix out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(x[i]);
    return out;
}

}  // namespace

double BinarySvmModel::decision(std::span<const double> x) const {
    double s = bias;
    for (std::size_t i = 0; i < support_vectors.size(); ++i)
        s += dual_coefs[i] * kernel_eval(kernel, support_vectors[i], x);
    return s;
}

BinarySvmModel train_binary(const Matrix& x, const std::vector<int>& labels, double C, const KernelSpec& kernel,
                            const SolverOptions& options) {
    check_finite(x);
    check_C(C);
    if (labels.size() != x.size()) throw invalid_argument("labels and vectors differ in length");
    bool pos = false, neg = false;
    for (int l : labels) {
        if (l == 1) pos = true;
        else if (l == -1) neg = true;
        else throw invalid_argument("binary labels must be -1 or +1");
    }
    if (!pos || !neg) throw data_error("binary SVM training needs samples of both classes");

    const std::size_t n = x.size();
    std::vector<double> k(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) k[i * n + j] = k[j * n + i] = kernel_eval(kernel, x[i], x[j]);
    const SmoResult r = smo(k, n, labels, C, options);

    BinarySvmModel m;
    m.kernel = kernel;
    m.C = C;
    m.bias = r.bias;
    m.alpha = r.alpha;
    m.objective = r.objective;
    m.iterations = r.iterations;
    m.converged = r.converged;
    for (std::size_t i = 0; i < n; ++i) {
        if (r.alpha[i] > 0) {
            m.support_vectors.push_back(x[i]);
            m.dual_coefs.push_back(r.alpha[i] * labels[i]);
        }
    }
    return m;
}

int vote(std::span<const double> decisions, const std::vector<PairwiseModel>& pairs, std::size_t n_classes) {
    std::vector<int> votes(n_classes, 0);
    std::vector<double> strength(n_classes, 0.0);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const int winner = decisions[p] > 0 ? pairs[p].positive : pairs[p].negative;
        ++votes[winner];
        strength[winner] += std::abs(decisions[p]);
    }
    int best = 0;
    for (std::size_t c = 1; c < n_classes; ++c) {
        if (votes[c] > votes[best] || (votes[c] == votes[best] && strength[c] > strength[best]))
            best = static_cast<int>(c);
    }
    return best;
}

std::vector<double> MultiClassSvmModel::decisions(std::span<const double> x) const {
    if (x.size() != dimension)
        throw invalid_argument("input has dimension " + std::to_string(x.size()) + ", model expects " +
                               std::to_string(dimension));
    std::vector<double> kv(vectors.size());
    for (std::size_t i = 0; i < vectors.size(); ++i) kv[i] = kernel_eval(kernel, vectors[i], x);
    std::vector<double> out(pairs.size());
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        double s = pairs[p].bias;
        for (std::size_t t = 0; t < pairs[p].sv.size(); ++t) s += pairs[p].dual_coefs[t] * kv[pairs[p].sv[t]];
        out[p] = s;
    }
    return out;
}

int MultiClassSvmModel::predict(std::span<const double> x) const {
    const auto d = decisions(x);
    return vote(d, pairs, n_classes());
}

bool MultiClassSvmModel::all_converged() const {
    return std::all_of(pairs.begin(), pairs.end(), [](const PairwiseModel& p) { return p.converged; });
}

MultiClassSvmModel train_multiclass(const Matrix& x, const std::vector<int>& class_indices, std::size_t n_classes,
                                    double C, const KernelSpec& kernel, const SolverOptions& options) {
    check_finite(x);
    check_C(C);
    if (class_indices.size() != x.size()) throw invalid_argument("labels and vectors differ in length");
    if (n_classes < 2) throw data_error("multi-class SVM needs at least two classes");
    const GramCache gram(x);
    const auto solutions = solve_pairs(gram, class_indices, n_classes, C, kernel, options);

    MultiClassSvmModel m;
    for (std::size_t c = 0; c < n_classes; ++c) m.class_labels.push_back(std::to_string(c));
    m.kernel = kernel;
    m.C = C;
    m.dimension = x.front().size();
    std::map<std::size_t, std::size_t> table;
    for (const auto& s : solutions)
        for (std::size_t i : s.sv) table.emplace(i, 0);
    for (auto& [sample, slot] : table) {
        slot = m.vectors.size();
        m.vectors.push_back(x[sample]);
    }
    for (const auto& s : solutions) {
        PairwiseModel p;
        p.positive = s.positive;
        p.negative = s.negative;
        p.bias = s.bias;
        p.converged = s.converged;
        p.dual_coefs = s.coefs;
        for (std::size_t i : s.sv) p.sv.push_back(table.at(i));
        m.pairs.push_back(std::move(p));
    }
    return m;
}

nlohmann::json to_json(const MultiClassSvmModel& m) {
    nlohmann::json j;
    j["format"] = "meerkit-svm";
    j["version"] = 1;
    j["class_labels"] = m.class_labels;
    j["hyperparameters"] = {{"kernel", kernel_name(m.kernel.kind)},
                            {"C", m.C},
                            {"gamma", m.kernel.gamma},
                            {"degree", m.kernel.degree},
                            {"coef0", m.kernel.coef0}};
    j["dimension"] = m.dimension;
    j["vectors"] = m.vectors;
    auto pairs = nlohmann::json::array();
    for (const auto& p : m.pairs) {
        pairs.push_back({{"positive", p.positive},
                         {"negative", p.negative},
                         {"support_vectors", p.sv},
                         {"dual_coefs", p.dual_coefs},
                         {"bias", p.bias},
                         {"converged", p.converged}});
    }
    j["pairs"] = std::move(pairs);
    return j;
}

MultiClassSvmModel from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "meerkit-svm") throw data_error("not an SVM model document");
        if (j.at("version").get<int>() != 1) throw data_error("unsupported SVM model version");
        MultiClassSvmModel m;
        m.class_labels = j.at("class_labels").get<std::vector<std::string>>();
        const auto& h = j.at("hyperparameters");
        m.kernel.kind = parse_kernel(h.at("kernel").get<std::string>());
        m.kernel.gamma = h.at("gamma").get<double>();
        m.kernel.degree = h.at("degree").get<int>();
        m.kernel.coef0 = h.at("coef0").get<double>();
        m.C = h.at("C").get<double>();
        m.dimension = j.at("dimension").get<std::size_t>();
        m.vectors = j.at("vectors").get<Matrix>();
        for (const auto& pj : j.at("pairs")) {
            PairwiseModel p;
            p.positive = pj.at("positive").get<int>();
            p.negative = pj.at("negative").get<int>();
            p.sv = pj.at("support_vectors").get<std::vector<std::size_t>>();
            p.dual_coefs = pj.at("dual_coefs").get<std::vector<double>>();
            p.bias = pj.at("bias").get<double>();
            p.converged = pj.value("converged", true);
            if (p.sv.size() != p.dual_coefs.size()) throw data_error("support vector and coefficient counts differ");
            for (std::size_t i : p.sv)
                if (i >= m.vectors.size()) throw data_error("support vector index out of range");
            m.pairs.push_back(std::move(p));
        }
        const std::size_t c = m.class_labels.size();
        if (m.pairs.size() != c * (c - 1) / 2) throw data_error("SVM model has the wrong number of pairwise models");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("malformed SVM model: ") + e.what());
    }
}

GridResult grid_search(const Matrix& x, const std::vector<int>& class_indices, std::size_t n_classes,
                       const GridSpec& grid, const GridOptions& options) {
    check_finite(x);
    if (grid.C.empty() || grid.gamma.empty() || grid.kernels.empty()) throw config_error("SVM grid is empty");
    for (double c : grid.C) check_C(c);
    for (double g : grid.gamma)
        if (!(g > 0)) throw config_error("gamma values must be positive");
    std::vector<std::size_t> counts(n_classes, 0);
    for (int c : class_indices) ++counts.at(static_cast<std::size_t>(c));
    std::size_t min_count = x.size();
    for (std::size_t c : counts) {
        if (c == 0) throw data_error("grid search: a class has no training samples");
        min_count = std::min(min_count, c);
    }

    GridResult result;
    for (KernelKind kind : grid.kernels)
        for (double C : grid.C)
            for (double gamma : grid.gamma) {
                GridPoint p;
                p.kernel = {kind, gamma, grid.degree, grid.coef0};
                p.C = C;
                result.table.push_back(p);
            }

    int folds = 0;
    if (options.score == GridScore::InnerCv) {
        folds = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(options.inner_folds), min_count));
        if (folds < 2) folds = 0;
    }
    result.inner_folds_used = folds;
    result.train_score_fallback = options.score == GridScore::InnerCv && folds == 0;

    struct Split {
        std::vector<int> train_labels, test_labels;
        std::unique_ptr<GramCache> gram;
        std::vector<double> qdots, qsq;
    };
    std::vector<Split> splits;
    auto make_split = [&](const std::vector<std::size_t>& train, const std::vector<std::size_t>& test) {
        Split s;
        const Matrix xt = select_rows(x, train);
        const Matrix xq = select_rows(x, test);
        for (std::size_t i : train) s.train_labels.push_back(class_indices[i]);
        for (std::size_t i : test) s.test_labels.push_back(class_indices[i]);
        s.gram = std::make_unique<GramCache>(xt);
        s.qdots = cross_dots(xq, xt);
        for (const auto& row : xq) {
            double q = 0.0;
            for (double v : row) q += v * v;
            s.qsq.push_back(q);
        }
        splits.push_back(std::move(s));
    };
    std::vector<std::size_t> everything(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) everything[i] = i;
    if (folds == 0) {
        make_split(everything, everything);
    } else {
        const auto plan = eval::stratified_kfold(class_indices, folds, options.seed);
        for (int f = 0; f < folds; ++f) make_split(plan.train_indices(f), plan.test_indices(f));
    }

    detail::parallel_for(result.table.size(), options.threads, [&](std::size_t c) {
        GridPoint& p = result.table[c];
        double total = 0.0;
        for (const auto& s : splits) {
            const auto pairs = solve_pairs(*s.gram, s.train_labels, n_classes, p.C, p.kernel, options.solver);
            const auto pred = predict_pairs(pairs, n_classes, p.kernel, s.qdots, s.qsq, *s.gram);
            total += eval::uar(eval::confusion(s.test_labels, pred, n_classes));
        }
        p.score = total / static_cast<double>(splits.size());
    });

    result.best = 0;
    for (std::size_t c = 1; c < result.table.size(); ++c)
        if (result.table[c].score > result.table[result.best].score) result.best = c;
    return result;
}

}  // namespace meerkit::svm
