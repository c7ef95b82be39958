#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "biasaudit/cart.hpp"
#include "biasaudit/error.hpp"

namespace biasaudit {

namespace {

constexpr double kSumTolerance = 1e-9;

void check_distribution(std::span<const double> probs) {
    if (probs.empty()) throw DomainError("probability vector is empty");
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) throw DomainError("probability outside [0, 1]");
        total += p;
    }
    if (std::abs(total - 1.0) > kSumTolerance) throw DomainError("probabilities do not sum to 1");
}

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double entropy(std::span<const double> class_probs) {
    check_distribution(class_probs);
    double e = 0.0;
    for (double p : class_probs)
        if (p > 0.0) e -= p * std::log2(p);
    return e;
}

double gini(std::span<const double> class_probs) {
    check_distribution(class_probs);
    double g = 0.0;
    for (double p : class_probs) g += p * (1.0 - p);
    return g;
}

double information_gain(double parent_impurity, std::span<const WeightedImpurity> children) {
    double total = 0.0;
    double weighted = 0.0;
    for (const auto& c : children) {
        if (c.weight < 0.0) throw DomainError("negative child weight");
        total += c.weight;
        weighted += c.weight * c.impurity;
    }
    if (std::abs(total - 1.0) > kSumTolerance) throw DomainError("child weights do not sum to 1");
    return parent_impurity - weighted;
}

double node_variance(std::span<const double> scores) {
    if (scores.empty()) throw DomainError("variance of an empty node");
    const double mean = mean_of(scores);
    double ss = 0.0;
    for (double y : scores) ss += (y - mean) * (y - mean);
    return ss / static_cast<double>(scores.size());
}

double variance_reduction(std::span<const double> parent, std::span<const double> left,
                          std::span<const double> right) {
    if (left.empty() || right.empty()) throw DomainError("split children must be non-empty");
    if (left.size() + right.size() != parent.size()) throw DomainError("children do not partition the parent");
    std::vector<double> a(parent.begin(), parent.end());
    std::vector<double> b(left.begin(), left.end());
    b.insert(b.end(), right.begin(), right.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) throw DomainError("children do not partition the parent");

    const double n = static_cast<double>(parent.size());
    const double wl = static_cast<double>(left.size()) / n;
    const double wr = static_cast<double>(right.size()) / n;
    return node_variance(parent) - (wl * node_variance(left) + wr * node_variance(right));
}

double median_absolute_deviation(std::span<const double> scores) {
    if (scores.empty()) throw DomainError("deviation of an empty node");
    std::vector<double> v(scores.begin(), scores.end());
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
    std::nth_element(v.begin(), mid, v.end());
    const double median = *mid;
    double sad = 0.0;
    for (double y : scores) sad += std::abs(y - median);
    return sad / static_cast<double>(scores.size());
}

}  // namespace biasaudit
