#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace meerkit::svm {

enum class KernelKind { Linear, Rbf, Polynomial, Sigmoid };

std::string kernel_name(KernelKind kind);
/// Accepts linear, rbf, polynomial (or poly) and sigmoid, any letter case.
KernelKind parse_kernel(const std::string& name);

struct KernelSpec {
    KernelKind kind = KernelKind::Rbf;
    double gamma = 1.0;
    int degree = 3;
    double coef0 = 0.0;
};

/// linear x.y, rbf exp(-gamma |x-y|^2), polynomial (gamma x.y + coef0)^degree,
/// sigmoid tanh(gamma x.y + coef0).
double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> y);

/// Kernel value from the inner product and the two squared norms.
double kernel_from_dot(const KernelSpec& spec, double dot, double xx, double yy);

struct SolverOptions {
    /// Stopping threshold on the maximal KKT violation.
    double tol = 1e-3;
    std::int64_t max_iter = 10'000'000;
};

using Matrix = std::vector<std::vector<double>>;

struct BinarySvmModel {
    KernelSpec kernel;
    double C = 1.0;
    Matrix support_vectors;
    /// alpha_i * y_i for each support vector.
    std::vector<double> dual_coefs;
    double bias = 0.0;

    // Solver diagnostics.
    std::vector<double> alpha;  // one per training sample
    double objective = 0.0;     // 0.5 a'Qa - sum(a), minimised
    std::int64_t iterations = 0;
    bool converged = false;

    double decision(std::span<const double> x) const;
    int predict(std::span<const double> x) const { return decision(x) > 0 ? 1 : -1; }
};

/// Soft-margin C-SVM by SMO with maximal-violating-pair selection.
BinarySvmModel train_binary(const Matrix& x, const std::vector<int>& labels, double C, const KernelSpec& kernel,
                            const SolverOptions& options = {});

struct PairwiseModel {
    int positive = 0;  // class index voted for when decision > 0
    int negative = 1;
    std::vector<std::size_t> sv;  // indices into MultiClassSvmModel::vectors
    std::vector<double> dual_coefs;
    double bias = 0.0;
    bool converged = true;
};

struct MultiClassSvmModel {
    /// Class names when known; otherwise "0", "1", ...
    std::vector<std::string> class_labels;
    KernelSpec kernel;
    double C = 1.0;
    std::size_t dimension = 0;
    Matrix vectors;  // support vectors shared by all pairs
    std::vector<PairwiseModel> pairs;

    std::size_t n_classes() const { return class_labels.size(); }
    /// Decision value of every pair, in pair order.
    std::vector<double> decisions(std::span<const double> x) const;
    int predict(std::span<const double> x) const;
    bool all_converged() const;
};

/// One-vs-one combination. class_indices take values 0..n_classes-1 and
/// every class must occur.
MultiClassSvmModel train_multiclass(const Matrix& x, const std::vector<int>& class_indices, std::size_t n_classes,
                                    double C, const KernelSpec& kernel, const SolverOptions& options = {});

/// Majority vote; ties go to the larger summed |decision| over the pairs each
/// tied class won, then to the lower class index.
int vote(std::span<const double> decisions, const std::vector<PairwiseModel>& pairs, std::size_t n_classes);

nlohmann::json to_json(const MultiClassSvmModel& model);
MultiClassSvmModel from_json(const nlohmann::json& j);

struct GridSpec {
    std::vector<double> C = {0.1, 1, 10, 100};
    std::vector<double> gamma = {0.001, 0.01, 0.1, 1};
    std::vector<KernelKind> kernels = {KernelKind::Linear, KernelKind::Rbf, KernelKind::Polynomial,
                                       KernelKind::Sigmoid};
    int degree = 3;
    double coef0 = 0.0;
};

enum class GridScore { InnerCv, Train };

struct GridPoint {
    KernelSpec kernel;
    double C = 1.0;
    double score = 0.0;
};

struct GridResult {
    std::vector<GridPoint> table;  // enumeration order: kernel, then C, then gamma
    std::size_t best = 0;
    int inner_folds_used = 0;  // 0 when scored on the training split
    /// True when scoring fell back to training-set UAR.
    bool train_score_fallback = false;

    const GridPoint& best_point() const { return table[best]; }
};

struct GridOptions {
    int inner_folds = 3;
    GridScore score = GridScore::InnerCv;
    std::uint64_t seed = 0;
    SolverOptions solver;
    unsigned threads = 1;
};

GridResult grid_search(const Matrix& x, const std::vector<int>& class_indices, std::size_t n_classes,
                       const GridSpec& grid, const GridOptions& options);

}  // namespace meerkit::svm
