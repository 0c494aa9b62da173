#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace meerkit::eval {

/// Fold index per sample, in sample order.
struct FoldPlan {
    int k = 0;
    std::vector<int> assignment;

    std::vector<std::size_t> test_indices(int fold) const;
    std::vector<std::size_t> train_indices(int fold) const;
};

/// Stratified k-fold split of class indices. Within each class the samples
/// are shuffled and dealt round-robin; the dealing position carries over from
/// one class to the next, starting at a seeded fold, so fold sizes also stay
/// balanced.
FoldPlan stratified_kfold(const std::vector<int>& labels, int k, std::uint64_t seed);

class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::vector<std::string> class_labels);
    ConfusionMatrix(std::vector<std::string> class_labels, std::vector<std::vector<long>> counts);

    void add(int truth, int predicted, long n = 1);
    ConfusionMatrix& operator+=(const ConfusionMatrix& other);

    std::size_t n_classes() const { return labels_.size(); }
    const std::vector<std::string>& class_labels() const { return labels_; }
    const std::vector<std::vector<long>>& counts() const { return counts_; }
    long at(std::size_t truth, std::size_t predicted) const { return counts_[truth][predicted]; }
    long row_sum(std::size_t truth) const;
    long total() const;

    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::vector<std::string> labels_;
    std::vector<std::vector<long>> counts_;
};

/// Unweighted average recall over classes that have at least one true sample.
double uar(const ConfusionMatrix& m);

/// Convenience: builds the confusion matrix of truth/prediction pairs.
ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& predicted, std::size_t n_classes);

}  // namespace meerkit::eval
