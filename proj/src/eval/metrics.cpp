#include "meerkit/metrics.hpp"
#include "meerkit/error.hpp"
#include "meerkit/rng.hpp"

#include <algorithm>
#include <map>

namespace meerkit::eval {

std::vector<std::size_t> FoldPlan::test_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] == fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldPlan::train_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] != fold) out.push_back(i);
    return out;
}

FoldPlan stratified_kfold(const std::vector<int>& labels, int k, std::uint64_t seed) {
    if (k < 2) throw invalid_argument("number of folds must be at least 2");
    if (static_cast<std::size_t>(k) > labels.size())
        throw data_error("cannot split " + std::to_string(labels.size()) + " samples into " + std::to_string(k) +
                         " folds");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    Rng rng(seed);
    FoldPlan plan;
    plan.k = k;
    plan.assignment.assign(labels.size(), -1);
    auto position = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(k)));
    for (auto& [label, members] : by_class) {
        rng.shuffle(members);
        for (std::size_t j = 0; j < members.size(); ++j)
            plan.assignment[members[j]] = static_cast<int>((position + j) % static_cast<std::size_t>(k));
        position = (position + members.size()) % static_cast<std::size_t>(k);
    }
    return plan;
}

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> class_labels)
    : labels_(std::move(class_labels)), counts_(labels_.size(), std::vector<long>(labels_.size(), 0)) {}

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> class_labels, std::vector<std::vector<long>> counts)
    : labels_(std::move(class_labels)), counts_(std::move(counts)) {
    if (counts_.size() != labels_.size()) throw data_error("confusion matrix shape does not match its labels");
    for (const auto& row : counts_) {
        if (row.size() != labels_.size()) throw data_error("confusion matrix is not square");
        for (long c : row)
            if (c < 0) throw data_error("confusion matrix has a negative count");
    }
}

void ConfusionMatrix::add(int truth, int predicted, long n) {
    const auto c = static_cast<int>(labels_.size());
    if (truth < 0 || truth >= c || predicted < 0 || predicted >= c)
        throw invalid_argument("class index outside the confusion matrix");
    counts_[truth][predicted] += n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    if (other.labels_ != labels_) throw invalid_argument("cannot add confusion matrices over different classes");
    for (std::size_t i = 0; i < counts_.size(); ++i)
        for (std::size_t j = 0; j < counts_.size(); ++j) counts_[i][j] += other.counts_[i][j];
    return *this;
}

long ConfusionMatrix::row_sum(std::size_t truth) const {
    long s = 0;
    for (long c : counts_[truth]) s += c;
    return s;
}

long ConfusionMatrix::total() const {
    long s = 0;
    for (std::size_t i = 0; i < counts_.size(); ++i) s += row_sum(i);
    return s;
}

double uar(const ConfusionMatrix& m) {
    double sum = 0.0;
    int present = 0;
    for (std::size_t i = 0; i < m.n_classes(); ++i) {
        const long n = m.row_sum(i);
        if (n == 0) continue;
        sum += static_cast<double>(m.at(i, i)) / static_cast<double>(n);
        ++present;
    }
    if (present == 0) throw data_error("UAR of an empty confusion matrix is undefined");
    return sum / present;
}

ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& predicted, std::size_t n_classes) {
    if (truth.size() != predicted.size()) throw invalid_argument("truth and prediction lengths differ");
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n_classes; ++i) names.push_back(std::to_string(i));
    ConfusionMatrix m(std::move(names));
    for (std::size_t i = 0; i < truth.size(); ++i) m.add(truth[i], predicted[i]);
    return m;
}

}  // namespace meerkit::eval
