#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "biasaudit/cart.hpp"
#include "biasaudit/data.hpp"

namespace biasaudit {

// Nominal error levels tested for every terminal node: 0.1, 0.2, ..., 1.0.
inline constexpr std::size_t kAlphaGridSize = 10;
std::array<double, kAlphaGridSize> alpha_grid();

// inf { x : q <= P(X <= x) } under the empirical distribution of values:
// the ceil(q n)-th smallest element (1-based), the minimum for q = 0.
double empirical_quantile(std::span<const double> values, double q);

struct NodeInterval {
    std::size_t node_id = 0;
    double lower = 0.0;
    double upper = 0.0;
    double alpha = 1.0;

    bool operator==(const NodeInterval&) const = default;
};

// Conformal interval of one node from the residuals y_i - prediction of the
// node's own samples.
NodeInterval node_interval(const TreeNode& node, std::span<const double> scores, double alpha);

// Intervals for every node (branch and terminal), indexed by node id.
std::vector<NodeInterval> node_intervals(const RegressionTree& tree, std::span<const double> scores, double alpha);
std::vector<NodeInterval> node_intervals(const RegressionTree& tree, const AuditDataset& dataset, double alpha);

// Terminal nodes whose interval separates from every other terminal node:
// upper <= min of other lowers (performance) or lower >= max of other uppers
// (residual).
std::set<std::size_t> detect_bias_at_alpha(std::span<const NodeInterval> terminal_intervals,
                                           Orientation orientation);

// Smallest alpha of the grid at which each terminal node is flagged
// (nullopt when never flagged).
std::map<std::size_t, std::optional<double>> alpha_sweep(const RegressionTree& tree, std::span<const double> scores,
                                                         Orientation orientation);
std::map<std::size_t, std::optional<double>> alpha_sweep(const RegressionTree& tree, const AuditDataset& dataset);

struct BiasVerdict {
    std::size_t node_id = 0;
    bool detected = false;
    std::optional<double> optimized_alpha;
    std::optional<double> confidence_level;  // 1 - optimized_alpha

    bool operator==(const BiasVerdict&) const = default;
};

struct DetectionOptions {
    double alpha_star = 0.20;
    std::size_t epochs = 1;
    std::size_t bag_size = 1;  // 1 disables bootstrap voting
    std::size_t folds = 5;
    std::uint64_t seed = 0;
};

struct EpochSummary {
    HyperParams params;
    std::size_t votes = 0;  // estimators with a node flagged at some alpha <= alpha_star
    bool detected = false;
};

struct BiasReport {
    std::vector<BiasVerdict> verdicts;  // terminal nodes of `tree`, ascending id
    bool global_detected = false;
    double alpha_star = 0.20;
    std::size_t epochs = 1;
    std::size_t bag_size = 1;
    Orientation orientation = Orientation::performance;
    std::vector<EpochSummary> epoch_summaries;
    // Tree behind the per-node table: the final epoch's first estimator, with
    // sample indices referring to rows of the input dataset.
    RegressionTree tree;
    std::vector<NodeInterval> intervals;  // every node of `tree`, at alpha_star

    std::vector<std::size_t> flagged_nodes() const;
};

// Shuffle, cross-validated grid search, fit (optionally bagged), and alpha
// sweep per epoch. Bias is reported when any epoch has a strict majority of
// its estimators flagging a node at some alpha <= alpha_star.
BiasReport run_bias_detection(const AuditDataset& dataset, std::span<const HyperParams> grid,
                              const DetectionOptions& options);

}  // namespace biasaudit
