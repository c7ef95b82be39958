#include "biasaudit/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "biasaudit/error.hpp"
#include "biasaudit/rng.hpp"

namespace biasaudit {

namespace {

constexpr double kAlphaTolerance = 1e-9;

// ceil(q * n) with q * n values that are integers up to rounding (0.7 * 10)
// snapped to that integer.
std::size_t quantile_rank(double q, std::size_t n) {
    const double t = q * static_cast<double>(n);
    const double nearest = std::round(t);
    const double k = std::abs(t - nearest) <= 1e-9 * std::max(1.0, t) ? nearest : std::ceil(t);
    return std::clamp<std::size_t>(static_cast<std::size_t>(k), 1, n);
}

}  // namespace

std::array<double, kAlphaGridSize> alpha_grid() {
    std::array<double, kAlphaGridSize> grid{};
    for (std::size_t i = 0; i < kAlphaGridSize; ++i) grid[i] = static_cast<double>(i + 1) / 10.0;
    return grid;
}

double empirical_quantile(std::span<const double> values, double q) {
    if (values.empty()) throw DomainError("quantile of an empty vector");
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level outside [0, 1]");
    std::vector<double> v(values.begin(), values.end());
    const auto k = quantile_rank(q, v.size());
    const auto it = v.begin() + static_cast<std::ptrdiff_t>(k - 1);
    std::nth_element(v.begin(), it, v.end());
    return *it;
}

NodeInterval node_interval(const TreeNode& node, std::span<const double> scores, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
    if (node.sample_indices.empty()) throw DomainError("node " + std::to_string(node.id) + " has no samples");
    // Residuals y - f share the order of the scores, so f + Q(q; r) is the
    // matching order statistic of the scores. Reading it directly avoids the
    // rounding of f + (y - f).
    std::vector<double> ys;
    ys.reserve(node.sample_indices.size());
    for (auto i : node.sample_indices) {
        if (i >= scores.size()) throw LookupError("sample index outside the score vector");
        ys.push_back(scores[i]);
    }
    std::sort(ys.begin(), ys.end());
    const auto n = ys.size();
    return {node.id, ys[quantile_rank(alpha / 2.0, n) - 1], ys[quantile_rank(1.0 - alpha / 2.0, n) - 1], alpha};
}

std::vector<NodeInterval> node_intervals(const RegressionTree& tree, std::span<const double> scores, double alpha) {
    std::vector<NodeInterval> out;
    out.reserve(tree.nodes().size());
    for (const auto& nd : tree.nodes()) out.push_back(node_interval(nd, scores, alpha));
    return out;
}

std::vector<NodeInterval> node_intervals(const RegressionTree& tree, const AuditDataset& dataset, double alpha) {
    return node_intervals(tree, dataset.scores(), alpha);
}

std::set<std::size_t> detect_bias_at_alpha(std::span<const NodeInterval> terminal_intervals,
                                           Orientation orientation) {
    std::set<std::size_t> flagged;
    const auto n = terminal_intervals.size();
    if (n < 2) return flagged;
    for (std::size_t j = 0; j < n; ++j) {
        bool separated = true;
        for (std::size_t k = 0; k < n && separated; ++k) {
            if (k == j) continue;
            separated = orientation == Orientation::performance
                            ? terminal_intervals[j].upper <= terminal_intervals[k].lower
                            : terminal_intervals[j].lower >= terminal_intervals[k].upper;
        }
        if (separated) flagged.insert(terminal_intervals[j].node_id);
    }
    return flagged;
}

std::map<std::size_t, std::optional<double>> alpha_sweep(const RegressionTree& tree, std::span<const double> scores,
                                                         Orientation orientation) {
    std::map<std::size_t, std::optional<double>> result;
    const auto leaves = tree.leaf_ids();
    for (auto id : leaves) result[id] = std::nullopt;
    if (leaves.size() < 2) return result;

    for (double alpha : alpha_grid()) {
        std::vector<NodeInterval> intervals;
        intervals.reserve(leaves.size());
        for (auto id : leaves) intervals.push_back(node_interval(tree.node(id), scores, alpha));
        for (auto id : detect_bias_at_alpha(intervals, orientation))
            if (!result[id]) result[id] = alpha;
    }
    return result;
}

std::map<std::size_t, std::optional<double>> alpha_sweep(const RegressionTree& tree, const AuditDataset& dataset) {
    return alpha_sweep(tree, dataset.scores(), dataset.orientation());
}

std::vector<std::size_t> BiasReport::flagged_nodes() const {
    std::vector<std::size_t> ids;
    for (const auto& v : verdicts)
        if (v.detected) ids.push_back(v.node_id);
    return ids;
}

namespace {

bool flagged_within(const std::map<std::size_t, std::optional<double>>& sweep, double alpha_star) {
    return std::any_of(sweep.begin(), sweep.end(),
                       [&](const auto& kv) { return kv.second && *kv.second <= alpha_star + kAlphaTolerance; });
}

RegressionTree remap_samples(const RegressionTree& tree, std::span<const std::size_t> to_original) {
    auto nodes = tree.nodes();
    for (auto& nd : nodes)
        for (auto& i : nd.sample_indices) i = to_original[i];
    return RegressionTree(std::move(nodes), tree.hyperparams(), tree.n_features(), tree.feature_names());
}

}  // namespace

BiasReport run_bias_detection(const AuditDataset& dataset, std::span<const HyperParams> grid,
                              const DetectionOptions& options) {
    if (!(options.alpha_star > 0.0 && options.alpha_star < 1.0)) throw DomainError("alpha_star must lie in (0, 1)");
    if (options.epochs < 1) throw DomainError("epochs must be >= 1");
    if (options.bag_size < 1) throw DomainError("bag_size must be >= 1");
    if (grid.empty()) throw DomainError("hyperparameter grid is empty");

    const std::size_t n = dataset.size();
    const Orientation orientation = dataset.orientation();

    BiasReport report;
    report.alpha_star = options.alpha_star;
    report.epochs = options.epochs;
    report.bag_size = options.bag_size;
    report.orientation = orientation;

    std::optional<RegressionTree> primary;
    std::map<std::size_t, std::optional<double>> primary_sweep;
    std::vector<std::size_t> primary_perm;

    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        const std::uint64_t epoch_seed = derive_seed(options.seed, epoch);
        const auto perm = shuffle_permutation(n, derive_seed(epoch_seed, 1));
        const auto shuffled = dataset.select(perm);
        const auto params = grid_search_cv(shuffled, grid, options.folds, derive_seed(epoch_seed, 2));

        EpochSummary summary{params, 0, false};
        for (std::size_t b = 0; b < options.bag_size; ++b) {
            std::vector<std::size_t> rows(n);
            if (options.bag_size == 1) {
                for (std::size_t i = 0; i < n; ++i) rows[i] = i;
            } else {
                Rng rng(derive_seed(epoch_seed, 3, b));
                for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
            }
            auto tree = fit_rows(shuffled, rows, params, derive_seed(epoch_seed, 4, b));
            auto sweep = alpha_sweep(tree, shuffled.scores(), orientation);
            if (flagged_within(sweep, options.alpha_star)) ++summary.votes;
            if (epoch + 1 == options.epochs && b == 0) {
                primary = std::move(tree);
                primary_sweep = std::move(sweep);
                primary_perm = perm;
            }
        }
        summary.detected = 2 * summary.votes > options.bag_size;
        report.global_detected = report.global_detected || summary.detected;
        report.epoch_summaries.push_back(summary);
    }

    report.tree = remap_samples(*primary, primary_perm);
    report.intervals = node_intervals(report.tree, dataset.scores(), options.alpha_star);
    for (const auto& [id, alpha] : primary_sweep) {
        BiasVerdict v;
        v.node_id = id;
        v.optimized_alpha = alpha;
        if (alpha) v.confidence_level = 1.0 - *alpha;
        v.detected = alpha && *alpha <= options.alpha_star + kAlphaTolerance;
        report.verdicts.push_back(v);
    }
    return report;
}

}  // namespace biasaudit
