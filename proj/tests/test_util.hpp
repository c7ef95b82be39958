#pragma once

// Shared fixtures and brute-force oracles for the unit tests. Nothing here
// calls into the library's split search or quantile code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "biasaudit/data.hpp"

namespace biasaudit::oracle {

inline AuditDataset make_dataset(const std::vector<std::vector<double>>& rows, const std::vector<double>& scores,
                                 Orientation orientation = Orientation::performance) {
    const std::size_t p = rows.empty() ? 0 : rows.front().size();
    Matrix x(rows.size(), p);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < p; ++j) x(i, j) = rows[i][j];
    return AuditDataset::continuous(std::move(x), scores, orientation);
}

inline AuditDataset one_d(const std::vector<double>& xs, const std::vector<double>& ys) {
    std::vector<std::vector<double>> rows;
    for (double v : xs) rows.push_back({v});
    return make_dataset(rows, ys);
}

inline AuditDataset random_dataset(std::mt19937_64& gen, std::size_t n, std::size_t p, bool integer_features,
                                   bool integer_scores = false) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> k(0, 4);
    std::vector<std::vector<double>> rows(n, std::vector<double>(p));
    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : rows[i]) v = integer_features ? k(gen) : u(gen) * 10.0;
        ys[i] = integer_scores ? (k(gen) % 2) : u(gen);
    }
    return make_dataset(rows, ys);
}

inline double oracle_variance(const std::vector<double>& v) {
    double m = 0.0;
    for (double y : v) m += y;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double y : v) ss += (y - m) * (y - m);
    return ss / static_cast<double>(v.size());
}

inline double oracle_mad(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const double med = v[(v.size() - 1) / 2];
    double s = 0.0;
    for (double y : v) s += std::abs(y - med);
    return s / static_cast<double>(v.size());
}

struct OracleSplit {
    std::size_t feature;
    double threshold;
    double gain;
};

// Exhaustive enumeration of every (feature, midpoint) pair; gains recomputed
// from scratch per candidate. Ties keep the first (lowest feature, then
// lowest threshold) unless beaten by more than tol.
inline std::optional<OracleSplit> brute_force_split(const AuditDataset& d, std::size_t min_leaf, bool absolute) {
    const auto n = d.size();
    const auto& y = d.scores();
    const double parent = absolute ? oracle_mad(y) : oracle_variance(y);
    const double tol = 1e-12 * parent;
    std::optional<OracleSplit> best;
    for (std::size_t f = 0; f < d.width(); ++f) {
        std::vector<double> vals;
        for (std::size_t i = 0; i < n; ++i) vals.push_back(d.features()(i, f));
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        for (std::size_t k = 1; k < vals.size(); ++k) {
            const double thr = vals[k - 1] + (vals[k] - vals[k - 1]) / 2.0;
            std::vector<double> l, r;
            for (std::size_t i = 0; i < n; ++i) (d.features()(i, f) <= thr ? l : r).push_back(y[i]);
            if (l.size() < min_leaf || r.size() < min_leaf) continue;
            const double wl = static_cast<double>(l.size()) / static_cast<double>(n);
            const double wr = static_cast<double>(r.size()) / static_cast<double>(n);
            const double gain = absolute ? parent - (wl * oracle_mad(l) + wr * oracle_mad(r))
                                         : parent - (wl * oracle_variance(l) + wr * oracle_variance(r));
            if (!(gain > tol)) continue;
            if (!best || gain > best->gain + tol) best = OracleSplit{f, thr, gain};
        }
    }
    return best;
}

// Sort-and-index reading of inf{x : a/b <= P(X <= x)} with exact integer
// arithmetic: rank ceil(a n / b), at least 1.
inline double oracle_quantile(std::vector<double> v, long a, long b) {
    std::sort(v.begin(), v.end());
    const long n = static_cast<long>(v.size());
    long rank = (a * n + b - 1) / b;
    rank = std::max(1L, rank);
    return v[static_cast<std::size_t>(rank - 1)];
}

}  // namespace biasaudit::oracle
