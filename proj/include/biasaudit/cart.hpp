#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "biasaudit/data.hpp"
#include "biasaudit/rng.hpp"

namespace biasaudit {

// ---------------------------------------------------------------------------
// Impurity measures

// -sum p log2 p with 0 log 0 = 0. Throws DomainError unless probs sum to 1.
double entropy(std::span<const double> class_probs);

// sum p (1 - p).
double gini(std::span<const double> class_probs);

struct WeightedImpurity {
    double weight;
    double impurity;
};

// parent - sum w_i E_i. Throws DomainError unless weights sum to 1.
double information_gain(double parent_impurity, std::span<const WeightedImpurity> children);

// Population variance (divisor n). Throws DomainError on empty input.
double node_variance(std::span<const double> scores);

// Decrease in variance from splitting parent into left and right, with
// child weights n(child) / n(parent). The children must partition the
// parent as multisets.
double variance_reduction(std::span<const double> parent, std::span<const double> left,
                          std::span<const double> right);

// Mean absolute deviation around the median.
double median_absolute_deviation(std::span<const double> scores);

// ---------------------------------------------------------------------------
// Regression trees

enum class Criterion { squared_error, absolute_error };
enum class MaxFeatures { all, sqrt, log2 };

std::string to_string(Criterion criterion);
std::string to_string(MaxFeatures max_features);
Criterion parse_criterion(const std::string& text);
MaxFeatures parse_max_features(const std::string& text);

struct HyperParams {
    Criterion criterion = Criterion::squared_error;
    int max_depth = 3;
    std::size_t min_samples_split = 2;
    std::size_t min_samples_leaf = 1;
    double ccp_alpha = 0.0;
    MaxFeatures max_features = MaxFeatures::all;

    // Throws DomainError on violated invariants.
    void validate() const;

    bool operator==(const HyperParams&) const = default;
};

// Number of features examined per node for p columns.
std::size_t candidate_feature_count(MaxFeatures max_features, std::size_t p);

// Rows with x[feature] <= threshold go left.
struct SplitRule {
    std::size_t feature = 0;
    double threshold = 0.0;

    bool goes_left(std::span<const double> x) const { return x[feature] <= threshold; }
    bool operator==(const SplitRule&) const = default;
};

struct TreeNode {
    std::size_t id = 0;
    std::optional<SplitRule> rule;
    double prediction = 0.0;   // mean score of the node's samples
    std::size_t n_samples = 0;
    double dispersion = 0.0;   // population standard deviation of scores
    double impurity = 0.0;     // criterion impurity (variance or MAD)
    int depth = 0;
    std::vector<std::size_t> sample_indices;  // dataset rows; repeats for bootstrap fits
    std::optional<std::pair<std::size_t, std::size_t>> children;

    bool is_leaf() const noexcept { return !children.has_value(); }
    bool operator==(const TreeNode&) const = default;
};

// Fitted CART regression tree. Node ids follow depth-first preorder and the
// root is node 0.
class RegressionTree {
public:
    RegressionTree() = default;
    RegressionTree(std::vector<TreeNode> nodes, HyperParams params, std::size_t n_features,
                   std::vector<std::string> feature_names = {});

    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    const TreeNode& node(std::size_t id) const;
    const TreeNode& root() const { return node(0); }
    std::size_t root_id() const noexcept { return 0; }
    const HyperParams& hyperparams() const noexcept { return params_; }
    std::size_t n_features() const noexcept { return n_features_; }
    const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
    int depth() const noexcept { return depth_; }

    std::vector<std::size_t> leaf_ids() const;
    std::size_t leaf_count() const;

    // Root-to-node path as (ancestor id, went_left) steps.
    std::vector<std::pair<std::size_t, bool>> path_to(std::size_t id) const;

    // Leaf reached by x.
    std::size_t route(std::span<const double> x) const;

    bool operator==(const RegressionTree&) const = default;

private:
    std::vector<TreeNode> nodes_;
    HyperParams params_;
    std::size_t n_features_ = 0;
    std::vector<std::string> feature_names_;
    int depth_ = 0;
};

struct SplitCandidate {
    SplitRule rule;
    double gain = 0.0;
};

// Best axis-aligned split of `rows`. Thresholds are midpoints between
// consecutive distinct values; both children must hold min_samples_leaf rows.
// Equal gains resolve to the lowest feature, then the lowest threshold.
// Returns nullopt when no candidate has strictly positive gain.
std::optional<SplitCandidate> best_split(std::span<const std::size_t> rows, const AuditDataset& dataset,
                                         const HyperParams& params, Rng& rng);

// Grows a tree over every dataset row, then applies cost-complexity pruning.
RegressionTree fit(const AuditDataset& dataset, const HyperParams& params, std::uint64_t seed);

// Same, on a row multiset (e.g. a bootstrap draw or a CV training fold).
RegressionTree fit_rows(const AuditDataset& dataset, std::span<const std::size_t> rows, const HyperParams& params,
                        std::uint64_t seed);

// Minimal cost-complexity pruning: repeatedly collapses the weakest link
// while its effective alpha is <= ccp_alpha.
RegressionTree prune(const RegressionTree& tree, double ccp_alpha);

// Effective alphas of the weakest-link sequence (ascending), ending with the
// alpha that collapses the root.
std::vector<double> pruning_path(const RegressionTree& tree);

// Collapses every node at depth max_depth into a leaf.
RegressionTree truncate(const RegressionTree& tree, int max_depth);

double predict(const RegressionTree& tree, std::span<const double> x);

// Mean held-out squared error of each grid point over contiguous folds.
std::vector<double> cross_validation_errors(const AuditDataset& dataset, std::span<const HyperParams> grid,
                                            std::size_t folds, std::uint64_t seed);

// Grid point with minimal mean held-out squared error; ties go to the earliest.
HyperParams grid_search_cv(const AuditDataset& dataset, std::span<const HyperParams> grid, std::size_t folds,
                           std::uint64_t seed);

// ---------------------------------------------------------------------------
// Classification trees

enum class ClassCriterion { entropy, gini };

struct ClassificationParams {
    ClassCriterion criterion = ClassCriterion::gini;
    int max_depth = 3;
    std::size_t min_samples_split = 2;
    std::size_t min_samples_leaf = 1;
};

struct ClassNode {
    std::optional<SplitRule> rule;
    int label = 0;  // majority class; lowest label on ties
    std::size_t n_samples = 0;
    double impurity = 0.0;
    std::optional<std::pair<std::size_t, std::size_t>> children;
};

class ClassificationTree {
public:
    // Labels are class indices in [0, n_classes).
    static ClassificationTree fit(const Matrix& features, std::span<const int> labels,
                                  const ClassificationParams& params);

    int predict(std::span<const double> x) const;
    const std::vector<ClassNode>& nodes() const noexcept { return nodes_; }

private:
    std::vector<ClassNode> nodes_;
};

}  // namespace biasaudit
