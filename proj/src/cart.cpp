#include "biasaudit/cart.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <tuple>

#include "biasaudit/error.hpp"

namespace biasaudit {

std::string to_string(Criterion criterion) {
    return criterion == Criterion::squared_error ? "squared_error" : "absolute_error";
}

std::string to_string(MaxFeatures max_features) {
    switch (max_features) {
        case MaxFeatures::all: return "all";
        case MaxFeatures::sqrt: return "sqrt";
        case MaxFeatures::log2: return "log2";
    }
    return "all";
}

Criterion parse_criterion(const std::string& text) {
    if (text == "squared_error") return Criterion::squared_error;
    if (text == "absolute_error") return Criterion::absolute_error;
    throw UsageError("unknown criterion '" + text + "'");
}

MaxFeatures parse_max_features(const std::string& text) {
    if (text == "all" || text == "None" || text == "none") return MaxFeatures::all;
    if (text == "sqrt") return MaxFeatures::sqrt;
    if (text == "log2") return MaxFeatures::log2;
    throw UsageError("unknown max_features '" + text + "'");
}

void HyperParams::validate() const {
    if (max_depth < 1) throw DomainError("max_depth must be >= 1");
    if (min_samples_split < 2) throw DomainError("min_samples_split must be >= 2");
    if (min_samples_leaf < 1) throw DomainError("min_samples_leaf must be >= 1");
    if (!(ccp_alpha >= 0.0) || !std::isfinite(ccp_alpha)) throw DomainError("ccp_alpha must be finite and >= 0");
}

std::size_t candidate_feature_count(MaxFeatures max_features, std::size_t p) {
    if (p == 0) return 0;
    switch (max_features) {
        case MaxFeatures::all: return p;
        case MaxFeatures::sqrt:
            return std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p)))), 1, p);
        case MaxFeatures::log2:
            return std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(p)))), 1, p);
    }
    return p;
}

// ---------------------------------------------------------------------------
// RegressionTree

RegressionTree::RegressionTree(std::vector<TreeNode> nodes, HyperParams params, std::size_t n_features,
                               std::vector<std::string> feature_names)
    : nodes_(std::move(nodes)),
      params_(params),
      n_features_(n_features),
      feature_names_(std::move(feature_names)) {
    if (nodes_.empty()) throw DomainError("tree has no nodes");
    if (!feature_names_.empty() && feature_names_.size() != n_features_)
        throw ShapeError("feature name count does not match feature count");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& nd = nodes_[i];
        if (nd.id != i) throw DomainError("node ids must equal their position");
        if (nd.rule.has_value() != nd.children.has_value()) throw DomainError("internal nodes need a rule and children");
        if (nd.children) {
            const auto [l, r] = *nd.children;
            if (l <= i || r <= i || l >= nodes_.size() || r >= nodes_.size())
                throw DomainError("children must follow their parent in preorder");
            if (nd.rule->feature >= n_features_) throw DomainError("split feature out of range");
        }
        depth_ = std::max(depth_, nd.depth);
    }
}

const TreeNode& RegressionTree::node(std::size_t id) const {
    if (id >= nodes_.size()) throw LookupError("no node with id " + std::to_string(id));
    return nodes_[id];
}

std::vector<std::size_t> RegressionTree::leaf_ids() const {
    std::vector<std::size_t> ids;
    for (const auto& nd : nodes_)
        if (nd.is_leaf()) ids.push_back(nd.id);
    return ids;
}

std::size_t RegressionTree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::vector<std::pair<std::size_t, bool>> RegressionTree::path_to(std::size_t id) const {
    node(id);
    std::vector<std::pair<std::size_t, bool>> path;
    std::size_t cur = 0;
    while (cur != id) {
        const auto& nd = nodes_[cur];
        if (!nd.children) throw LookupError("node " + std::to_string(id) + " is unreachable");
        const auto [l, r] = *nd.children;
        // Preorder: the right subtree starts at r, so ids in [l, r) are on the left.
        const bool left = id < r;
        path.emplace_back(cur, left);
        cur = left ? l : r;
    }
    return path;
}

std::size_t RegressionTree::route(std::span<const double> x) const {
    if (x.size() != n_features_)
        throw ShapeError("expected " + std::to_string(n_features_) + " features, got " + std::to_string(x.size()));
    std::size_t cur = 0;
    while (nodes_[cur].children) {
        const auto [l, r] = *nodes_[cur].children;
        cur = nodes_[cur].rule->goes_left(x) ? l : r;
    }
    return cur;
}

double predict(const RegressionTree& tree, std::span<const double> x) { return tree.node(tree.route(x)).prediction; }

// ---------------------------------------------------------------------------
// Split search

namespace {

struct NodeStats {
    double mean = 0.0;
    double variance = 0.0;
    double impurity = 0.0;
    bool constant = true;
};

NodeStats node_stats(std::span<const double> ys, Criterion criterion) {
    NodeStats s;
    const double n = static_cast<double>(ys.size());
    s.mean = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double ss = 0.0;
    for (double y : ys) {
        ss += (y - s.mean) * (y - s.mean);
        if (y != ys.front()) s.constant = false;
    }
    s.variance = ss / n;
    s.impurity = criterion == Criterion::squared_error ? s.variance : median_absolute_deviation(ys);
    return s;
}

// Keeps the best candidate seen so far; a later candidate must beat it by
// more than `tol` so near-equal gains resolve to the earliest one.
struct BestTracker {
    double tol;
    std::optional<SplitCandidate> best;

    void offer(std::size_t feature, double threshold, double gain) {
        if (!(gain > tol)) return;
        if (!best || gain > best->gain + tol) best = SplitCandidate{{feature, threshold}, gain};
    }
};

double midpoint(double lo, double hi) {
    const double mid = lo + (hi - lo) / 2.0;
    return mid < hi ? mid : lo;
}

// Working memory for scanning one sorted feature.
struct ScanScratch {
    std::vector<double> prefix;
    std::vector<double> suffix;
};

void scan_squared(std::span<const double> xs, std::span<const double> ys, std::size_t min_leaf, double mean,
                  std::size_t feature, BestTracker& tracker) {
    const std::size_t n = xs.size();
    double st = 0.0, qt = 0.0;
    for (double y : ys) {
        const double c = y - mean;
        st += c;
        qt += c * c;
    }
    const double nd = static_cast<double>(n);
    const double sse_parent = qt - st * st / nd;
    double sl = 0.0, ql = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
        const double c = ys[k - 1] - mean;
        sl += c;
        ql += c * c;
        if (k < min_leaf || n - k < min_leaf) continue;
        if (!(xs[k - 1] < xs[k])) continue;
        const double kl = static_cast<double>(k);
        const double kr = nd - kl;
        const double sr = st - sl;
        const double sse_left = ql - sl * sl / kl;
        const double sse_right = (qt - ql) - sr * sr / kr;
        tracker.offer(feature, midpoint(xs[k - 1], xs[k]), (sse_parent - sse_left - sse_right) / nd);
    }
}

// Running sum of absolute deviations around the median of a growing multiset.
class RunningMedianDeviation {
public:
    void push(double y) {
        if (lo_.empty() || y <= lo_.top()) {
            lo_.push(y);
            sum_lo_ += y;
        } else {
            hi_.push(y);
            sum_hi_ += y;
        }
        if (lo_.size() > hi_.size() + 1) {
            const double v = lo_.top();
            lo_.pop();
            sum_lo_ -= v;
            hi_.push(v);
            sum_hi_ += v;
        } else if (hi_.size() > lo_.size()) {
            const double v = hi_.top();
            hi_.pop();
            sum_hi_ -= v;
            lo_.push(v);
            sum_lo_ += v;
        }
    }

    double sad() const {
        const double odd = lo_.size() > hi_.size() ? lo_.top() : 0.0;
        return std::max(0.0, sum_hi_ - sum_lo_ + odd);
    }

private:
    std::priority_queue<double> lo_;
    std::priority_queue<double, std::vector<double>, std::greater<>> hi_;
    double sum_lo_ = 0.0;
    double sum_hi_ = 0.0;
};

void scan_absolute(std::span<const double> xs, std::span<const double> ys, std::size_t min_leaf, std::size_t feature,
                   BestTracker& tracker, ScanScratch& scratch) {
    const std::size_t n = xs.size();
    scratch.prefix.assign(n + 1, 0.0);
    scratch.suffix.assign(n + 1, 0.0);
    {
        RunningMedianDeviation acc;
        for (std::size_t k = 0; k < n; ++k) {
            acc.push(ys[k]);
            scratch.prefix[k + 1] = acc.sad();
        }
    }
    {
        RunningMedianDeviation acc;
        for (std::size_t k = n; k-- > 0;) {
            acc.push(ys[k]);
            scratch.suffix[k] = acc.sad();
        }
    }
    const double total = scratch.prefix[n];
    const double nd = static_cast<double>(n);
    for (std::size_t k = 1; k < n; ++k) {
        if (k < min_leaf || n - k < min_leaf) continue;
        if (!(xs[k - 1] < xs[k])) continue;
        tracker.offer(feature, midpoint(xs[k - 1], xs[k]), (total - scratch.prefix[k] - scratch.suffix[k]) / nd);
    }
}

void scan_feature(std::span<const double> xs, std::span<const double> ys, const HyperParams& params,
                  const NodeStats& stats, std::size_t feature, BestTracker& tracker, ScanScratch& scratch) {
    if (params.criterion == Criterion::squared_error)
        scan_squared(xs, ys, params.min_samples_leaf, stats.mean, feature, tracker);
    else
        scan_absolute(xs, ys, params.min_samples_leaf, feature, tracker, scratch);
}

// Ascending feature indices examined at one node.
std::vector<std::size_t> draw_features(std::size_t p, MaxFeatures max_features, Rng& rng) {
    std::vector<std::size_t> idx(p);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const std::size_t k = candidate_feature_count(max_features, p);
    if (k >= p) return idx;
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(p - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

std::optional<SplitCandidate> best_split(std::span<const std::size_t> rows, const AuditDataset& dataset,
                                         const HyperParams& params, Rng& rng) {
    if (rows.size() < 2) return std::nullopt;
    const auto& x = dataset.features();
    std::vector<double> ys;
    ys.reserve(rows.size());
    for (auto r : rows) ys.push_back(dataset.scores().at(r));
    const auto stats = node_stats(ys, params.criterion);
    if (stats.constant) return std::nullopt;

    BestTracker tracker{1e-12 * stats.impurity, std::nullopt};
    ScanScratch scratch;
    std::vector<std::size_t> order(rows.size());
    std::vector<double> xs(rows.size()), sorted_ys(rows.size());
    for (auto f : draw_features(dataset.width(), params.max_features, rng)) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return x(rows[a], f) < x(rows[b], f); });
        for (std::size_t i = 0; i < order.size(); ++i) {
            xs[i] = x(rows[order[i]], f);
            sorted_ys[i] = ys[order[i]];
        }
        scan_feature(xs, sorted_ys, params, stats, f, tracker, scratch);
    }
    return tracker.best;
}

// ---------------------------------------------------------------------------
// Growth

namespace {

// Column-major copy of a row multiset with every feature presorted once.
// Growing partitions the sorted orders stably, so each node sees its rows
// already in feature order.
class PresortedRows {
public:
    PresortedRows(const AuditDataset& dataset, std::span<const std::size_t> rows)
        : m_(rows.size()), p_(dataset.width()), rows_(rows.begin(), rows.end()) {
        if (m_ == 0) throw DomainError("cannot fit a tree on zero rows");
        cols_.resize(p_ * m_);
        ys_.resize(m_);
        for (std::size_t i = 0; i < m_; ++i) {
            const auto r = rows_[i];
            if (r >= dataset.size()) throw LookupError("row index out of range");
            ys_[i] = dataset.scores()[r];
            for (std::size_t f = 0; f < p_; ++f) cols_[f * m_ + i] = dataset.features()(r, f);
        }
        // One extra order (index p) stays in local-id order and drives sample_indices.
        orders_.resize((p_ + 1) * m_);
        for (std::size_t f = 0; f <= p_; ++f) {
            auto* ord = orders_.data() + f * m_;
            std::iota(ord, ord + m_, std::uint32_t{0});
            if (f < p_) {
                const double* col = cols_.data() + f * m_;
                std::stable_sort(ord, ord + m_, [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
            }
        }
        names_ = dataset.column_names();
    }

    RegressionTree grow(const HyperParams& params, std::uint64_t seed) const {
        params.validate();
        GrowState st{params, orders_, std::vector<char>(m_, 0), {}, {}, {}, {}, {}};
        build(st, 0, m_, 0, seed);
        return RegressionTree(std::move(st.nodes), params, p_, names_);
    }

private:
    struct GrowState {
        const HyperParams& params;
        std::vector<std::uint32_t> orders;
        std::vector<char> goes_left;
        std::vector<TreeNode> nodes;
        std::vector<double> xs, ys;
        std::vector<std::uint32_t> buffer;
        ScanScratch scratch;
    };

    std::size_t build(GrowState& st, std::size_t begin, std::size_t end, int depth, std::uint64_t seed) const {
        const std::size_t n = end - begin;
        const std::uint32_t* ids = st.orders.data() + p_ * m_ + begin;

        st.ys.resize(n);
        for (std::size_t i = 0; i < n; ++i) st.ys[i] = ys_[ids[i]];
        const auto stats = node_stats(st.ys, st.params.criterion);

        const std::size_t id = st.nodes.size();
        {
            TreeNode nd;
            nd.id = id;
            nd.prediction = stats.mean;
            nd.n_samples = n;
            nd.dispersion = std::sqrt(stats.variance);
            nd.impurity = stats.impurity;
            nd.depth = depth;
            nd.sample_indices.reserve(n);
            for (std::size_t i = 0; i < n; ++i) nd.sample_indices.push_back(rows_[ids[i]]);
            st.nodes.push_back(std::move(nd));
        }

        if (depth >= st.params.max_depth || n < st.params.min_samples_split || stats.constant) return id;

        Rng rng(seed);
        BestTracker tracker{1e-12 * stats.impurity, std::nullopt};
        st.xs.resize(n);
        for (auto f : draw_features(p_, st.params.max_features, rng)) {
            const std::uint32_t* ord = st.orders.data() + f * m_ + begin;
            const double* col = cols_.data() + f * m_;
            for (std::size_t i = 0; i < n; ++i) {
                st.xs[i] = col[ord[i]];
                st.ys[i] = ys_[ord[i]];
            }
            scan_feature(st.xs, st.ys, st.params, stats, f, tracker, st.scratch);
        }
        if (!tracker.best) return id;
        const SplitRule rule = tracker.best->rule;

        const double* split_col = cols_.data() + rule.feature * m_;
        std::size_t n_left = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool left = split_col[ids[i]] <= rule.threshold;
            st.goes_left[ids[i]] = left;
            n_left += left;
        }
        st.buffer.resize(n);
        for (std::size_t f = 0; f <= p_; ++f) {
            std::uint32_t* ord = st.orders.data() + f * m_ + begin;
            std::size_t l = 0, r = n_left;
            for (std::size_t i = 0; i < n; ++i) {
                const auto v = ord[i];
                if (st.goes_left[v])
                    st.buffer[l++] = v;
                else
                    st.buffer[r++] = v;
            }
            std::copy(st.buffer.begin(), st.buffer.begin() + static_cast<std::ptrdiff_t>(n), ord);
        }

        const auto left = build(st, begin, begin + n_left, depth + 1, mix64(seed ^ 0x1ULL));
        const auto right = build(st, begin + n_left, end, depth + 1, mix64(seed ^ 0x2ULL));
        st.nodes[id].rule = rule;
        st.nodes[id].children = std::make_pair(left, right);
        return id;
    }

    std::size_t m_;
    std::size_t p_;
    std::vector<std::size_t> rows_;
    std::vector<double> cols_;
    std::vector<double> ys_;
    std::vector<std::uint32_t> orders_;
    std::vector<std::string> names_;
};

// Copies the tree in preorder, turning every node for which collapse(old)
// holds into a leaf.
RegressionTree rebuild(const RegressionTree& tree, const std::function<bool(const TreeNode&)>& collapse,
                       const HyperParams& params) {
    std::vector<TreeNode> out;
    out.reserve(tree.nodes().size());
    std::function<std::size_t(std::size_t)> copy = [&](std::size_t old_id) -> std::size_t {
        const auto& src = tree.node(old_id);
        const std::size_t id = out.size();
        TreeNode nd = src;
        nd.id = id;
        nd.rule.reset();
        nd.children.reset();
        out.push_back(std::move(nd));
        if (src.children && !collapse(src)) {
            const auto l = copy(src.children->first);
            const auto r = copy(src.children->second);
            out[id].rule = src.rule;
            out[id].children = std::make_pair(l, r);
        }
        return id;
    };
    copy(0);
    return RegressionTree(std::move(out), params, tree.n_features(), tree.feature_names());
}

struct WeakestLink {
    std::size_t node;
    double alpha;
};

// Weakest link of the tree with the given nodes already collapsed.
std::optional<WeakestLink> weakest_link(const RegressionTree& tree, const std::vector<char>& collapsed) {
    const auto& nodes = tree.nodes();
    const double total = static_cast<double>(tree.root().n_samples);
    std::vector<double> risk(nodes.size()), subtree_risk(nodes.size());
    std::vector<std::size_t> leaves(nodes.size());
    // Children have larger ids than parents, so a reverse sweep is a postorder.
    for (std::size_t i = nodes.size(); i-- > 0;) {
        const auto& nd = nodes[i];
        risk[i] = static_cast<double>(nd.n_samples) / total * nd.impurity;
        if (nd.is_leaf() || collapsed[i]) {
            subtree_risk[i] = risk[i];
            leaves[i] = 1;
        } else {
            const auto [l, r] = *nd.children;
            subtree_risk[i] = subtree_risk[l] + subtree_risk[r];
            leaves[i] = leaves[l] + leaves[r];
        }
    }
    std::optional<WeakestLink> best;
    std::function<void(std::size_t)> visit = [&](std::size_t i) {
        const auto& nd = nodes[i];
        if (nd.is_leaf() || collapsed[i]) return;
        const double g = (risk[i] - subtree_risk[i]) / static_cast<double>(leaves[i] - 1);
        if (!best || g < best->alpha) best = WeakestLink{i, g};
        visit(nd.children->first);
        visit(nd.children->second);
    };
    visit(0);
    return best;
}

}  // namespace

RegressionTree fit_rows(const AuditDataset& dataset, std::span<const std::size_t> rows, const HyperParams& params,
                        std::uint64_t seed) {
    params.validate();
    if (rows.empty()) throw DomainError("cannot fit a tree on an empty dataset");
    const PresortedRows presorted(dataset, rows);
    return prune(presorted.grow(params, seed), params.ccp_alpha);
}

RegressionTree fit(const AuditDataset& dataset, const HyperParams& params, std::uint64_t seed) {
    std::vector<std::size_t> rows(dataset.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return fit_rows(dataset, rows, params, seed);
}

RegressionTree prune(const RegressionTree& tree, double ccp_alpha) {
    if (!(ccp_alpha >= 0.0)) throw DomainError("ccp_alpha must be >= 0");
    HyperParams params = tree.hyperparams();
    params.ccp_alpha = ccp_alpha;
    std::vector<char> collapsed(tree.nodes().size(), 0);
    bool changed = false;
    if (ccp_alpha > 0.0) {
        while (auto link = weakest_link(tree, collapsed)) {
            if (link->alpha > ccp_alpha) break;
            collapsed[link->node] = 1;
            changed = true;
        }
    }
    if (!changed) return RegressionTree(tree.nodes(), params, tree.n_features(), tree.feature_names());
    return rebuild(tree, [&](const TreeNode& n) { return collapsed[n.id] != 0; }, params);
}

std::vector<double> pruning_path(const RegressionTree& tree) {
    std::vector<char> collapsed(tree.nodes().size(), 0);
    std::vector<double> path;
    while (auto link = weakest_link(tree, collapsed)) {
        collapsed[link->node] = 1;
        path.push_back(path.empty() ? link->alpha : std::max(path.back(), link->alpha));
    }
    return path;
}

RegressionTree truncate(const RegressionTree& tree, int max_depth) {
    if (max_depth < 0) throw DomainError("max_depth must be >= 0");
    HyperParams params = tree.hyperparams();
    params.max_depth = std::min(params.max_depth, std::max(max_depth, 1));
    return rebuild(tree, [&](const TreeNode& n) { return n.depth >= max_depth; }, params);
}

// ---------------------------------------------------------------------------
// Cross-validation

std::vector<double> cross_validation_errors(const AuditDataset& dataset, std::span<const HyperParams> grid,
                                            std::size_t folds, std::uint64_t seed) {
    if (grid.empty()) throw DomainError("hyperparameter grid is empty");
    if (folds < 2) throw DomainError("cross-validation needs at least 2 folds");
    const std::size_t n = dataset.size();
    if (n < folds) throw DomainError("fewer rows than folds");
    for (const auto& hp : grid) hp.validate();

    // Grid points that differ only in max_depth and ccp_alpha share one grown
    // tree: shallower trees are truncations of the deepest (node seeds depend
    // only on the path), and pruning is applied afterwards. A node with fewer
    // than 2 * min_samples_leaf rows can never split, so min_samples_split
    // below that bound is equivalent to the bound itself.
    using GroupKey = std::tuple<Criterion, MaxFeatures, std::size_t, std::size_t>;
    std::map<GroupKey, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& hp = grid[i];
        const std::size_t effective_split = std::max(hp.min_samples_split, 2 * hp.min_samples_leaf);
        groups[{hp.criterion, hp.max_features, hp.min_samples_leaf, effective_split}].push_back(i);
    }

    std::vector<double> errors(grid.size(), 0.0);
    for (std::size_t k = 0; k < folds; ++k) {
        const std::size_t lo = k * n / folds;
        const std::size_t hi = (k + 1) * n / folds;
        std::vector<std::size_t> train;
        train.reserve(n - (hi - lo));
        for (std::size_t i = 0; i < n; ++i)
            if (i < lo || i >= hi) train.push_back(i);
        if (train.empty()) throw DomainError("empty training fold");
        const PresortedRows presorted(dataset, train);
        const std::uint64_t fold_seed = derive_seed(seed, k);

        for (const auto& [key, members] : groups) {
            HyperParams base = grid[members.front()];
            base.min_samples_split = std::get<3>(key);
            base.ccp_alpha = 0.0;
            base.max_depth = 1;
            for (auto i : members) base.max_depth = std::max(base.max_depth, grid[i].max_depth);
            const auto full = presorted.grow(base, fold_seed);

            for (auto i : members) {
                const auto& hp = grid[i];
                const RegressionTree shaped = hp.max_depth < full.depth() ? truncate(full, hp.max_depth) : full;
                const RegressionTree model = hp.ccp_alpha > 0.0 ? prune(shaped, hp.ccp_alpha) : shaped;
                double sse = 0.0;
                for (std::size_t r = lo; r < hi; ++r) {
                    const double e = predict(model, dataset.features().row(r)) - dataset.scores()[r];
                    sse += e * e;
                }
                errors[i] += sse / static_cast<double>(hi - lo);
            }
        }
    }
    for (auto& e : errors) e /= static_cast<double>(folds);
    return errors;
}

HyperParams grid_search_cv(const AuditDataset& dataset, std::span<const HyperParams> grid, std::size_t folds,
                           std::uint64_t seed) {
    const auto errors = cross_validation_errors(dataset, grid, folds, seed);
    std::size_t best = 0;
    for (std::size_t i = 1; i < errors.size(); ++i)
        if (errors[i] < errors[best]) best = i;
    return grid[best];
}

// ---------------------------------------------------------------------------
// Classification

namespace {

double class_impurity(std::span<const std::size_t> counts, std::size_t n, ClassCriterion criterion) {
    std::vector<double> probs;
    probs.reserve(counts.size());
    for (auto c : counts) probs.push_back(static_cast<double>(c) / static_cast<double>(n));
    return criterion == ClassCriterion::entropy ? entropy(probs) : gini(probs);
}

int majority(std::span<const std::size_t> counts) {
    return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

}  // namespace

ClassificationTree ClassificationTree::fit(const Matrix& features, std::span<const int> labels,
                                           const ClassificationParams& params) {
    if (labels.empty()) throw DomainError("cannot fit a tree on an empty dataset");
    if (features.rows() != labels.size()) throw ShapeError("feature rows and label count differ");
    if (params.max_depth < 1 || params.min_samples_split < 2 || params.min_samples_leaf < 1)
        throw DomainError("invalid classification parameters");
    int n_classes = 0;
    for (int y : labels) {
        if (y < 0) throw DomainError("class labels must be non-negative");
        n_classes = std::max(n_classes, y + 1);
    }
    const auto k = static_cast<std::size_t>(n_classes);

    ClassificationTree tree;
    std::function<std::size_t(std::vector<std::size_t>, int)> build = [&](std::vector<std::size_t> rows,
                                                                          int depth) -> std::size_t {
        std::vector<std::size_t> counts(k, 0);
        for (auto r : rows) ++counts[static_cast<std::size_t>(labels[r])];
        const std::size_t id = tree.nodes_.size();
        ClassNode nd;
        nd.label = majority(counts);
        nd.n_samples = rows.size();
        nd.impurity = class_impurity(counts, rows.size(), params.criterion);
        tree.nodes_.push_back(nd);
        if (depth >= params.max_depth || rows.size() < params.min_samples_split || nd.impurity <= 0.0) return id;

        std::optional<SplitCandidate> best;
        const double tol = 1e-12;
        for (std::size_t f = 0; f < features.cols(); ++f) {
            std::stable_sort(rows.begin(), rows.end(),
                             [&](std::size_t a, std::size_t b) { return features(a, f) < features(b, f); });
            std::vector<std::size_t> left(k, 0), right = counts;
            for (std::size_t i = 1; i < rows.size(); ++i) {
                const auto y = static_cast<std::size_t>(labels[rows[i - 1]]);
                ++left[y];
                --right[y];
                const std::size_t nl = i, nr = rows.size() - i;
                if (nl < params.min_samples_leaf || nr < params.min_samples_leaf) continue;
                const double lo = features(rows[i - 1], f), hi = features(rows[i], f);
                if (!(lo < hi)) continue;
                const double n = static_cast<double>(rows.size());
                const WeightedImpurity children[] = {
                    {static_cast<double>(nl) / n, class_impurity(left, nl, params.criterion)},
                    {static_cast<double>(nr) / n, class_impurity(right, nr, params.criterion)}};
                const double ig = information_gain(nd.impurity, children);
                if (ig > tol && (!best || ig > best->gain + tol)) best = SplitCandidate{{f, midpoint(lo, hi)}, ig};
            }
        }
        if (!best) return id;
        std::vector<std::size_t> lrows, rrows;
        for (auto r : rows) (features(r, best->rule.feature) <= best->rule.threshold ? lrows : rrows).push_back(r);
        const auto l = build(std::move(lrows), depth + 1);
        const auto r = build(std::move(rrows), depth + 1);
        tree.nodes_[id].rule = best->rule;
        tree.nodes_[id].children = std::make_pair(l, r);
        return id;
    };
    std::vector<std::size_t> all(labels.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    build(std::move(all), 0);
    return tree;
}

int ClassificationTree::predict(std::span<const double> x) const {
    std::size_t cur = 0;
    while (nodes_[cur].children) {
        const auto& nd = nodes_[cur];
        if (nd.rule->feature >= x.size()) throw ShapeError("feature vector too short");
        cur = nd.rule->goes_left(x) ? nd.children->first : nd.children->second;
    }
    return nodes_[cur].label;
}

}  // namespace biasaudit
