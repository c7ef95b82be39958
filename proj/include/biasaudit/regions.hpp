#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "biasaudit/cart.hpp"
#include "biasaudit/data.hpp"

namespace biasaudit {

// One original (pre-one-hot) feature dimension of the audited space.
struct Dimension {
    std::string name;
    FeatureKind kind = FeatureKind::continuous;
    double low = 0.0;   // continuous bounds
    double high = 0.0;
    std::vector<std::string> categories;

    bool operator==(const Dimension&) const = default;
};

// The ambient feature space together with the map from expanded matrix
// columns back to dimensions.
class FeatureSpace {
public:
    FeatureSpace() = default;
    FeatureSpace(std::vector<Dimension> dims, std::vector<EncodedColumn> columns);

    // Continuous bounds taken from the observed data range.
    static FeatureSpace from_dataset(const AuditDataset& dataset);
    // [low, high]^p with dimensions named x1..xp.
    static FeatureSpace box(std::size_t p, double low, double high);

    const std::vector<Dimension>& dims() const noexcept { return dims_; }
    const std::vector<EncodedColumn>& columns() const noexcept { return columns_; }

    bool operator==(const FeatureSpace&) const = default;

private:
    std::vector<Dimension> dims_;
    std::vector<EncodedColumn> columns_;
};

// [low, high], or (low, high] when low_open (a lower bound set by a right
// branch of a <= split).
struct Interval {
    double low = 0.0;
    double high = 0.0;
    bool low_open = false;

    double width() const { return high - low; }
    bool operator==(const Interval&) const = default;
};

// Sorted indices into Dimension::categories.
struct CategorySet {
    std::vector<std::size_t> members;
    bool operator==(const CategorySet&) const = default;
};

using DimensionBound = std::variant<Interval, CategorySet>;

// Axis-aligned region: one bound per dimension; unconstrained dimensions
// carry the ambient bound.
class Region {
public:
    Region(FeatureSpace space, std::vector<DimensionBound> bounds);

    static Region ambient(const FeatureSpace& space);
    // Continuous-only region from per-dimension [low, high].
    static Region box(const FeatureSpace& space, std::span<const double> lows, std::span<const double> highs);

    const FeatureSpace& space() const noexcept { return space_; }
    const std::vector<DimensionBound>& bounds() const noexcept { return bounds_; }

    bool contains(std::span<const double> encoded_x) const;

    bool operator==(const Region&) const = default;

private:
    FeatureSpace space_;
    std::vector<DimensionBound> bounds_;
};

// Intersection of the ambient box with every split condition on the path
// from the root to node_id.
Region region_from_path(const RegressionTree& tree, std::size_t node_id, const FeatureSpace& space);

// Product of interval widths, with categorical dimensions contributing
// |C| / |categories|.
double hypervolume(const Region& region);

std::optional<Region> intersect(const Region& a, const Region& b);

// 1/2 (|S n S^| / |S| + |S n S^| / |S^|).
double coverage_ratio(const Region& true_region, const Region& estimated);

// Coverage ratio with S^ the union of pairwise-disjoint estimated regions.
double estimated_region_union_cvr(const Region& true_region, std::span<const Region> estimated);

// Conjunction of the constrained dimensions, e.g. "x1 > 3.35 AND x2 <= 45".
std::string describe(const Region& region);

}  // namespace biasaudit
