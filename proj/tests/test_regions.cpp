#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "biasaudit/cart.hpp"
#include "biasaudit/error.hpp"
#include "biasaudit/regions.hpp"
#include "test_util.hpp"

using namespace biasaudit;

namespace {

Region box2(const FeatureSpace& s, double x0, double x1, double y0, double y1) {
    const std::vector<double> lo{x0, y0}, hi{x1, y1};
    return Region::box(s, lo, hi);
}

TreeNode make_node(std::size_t id, int depth, std::optional<SplitRule> rule = std::nullopt,
                   std::optional<std::pair<std::size_t, std::size_t>> children = std::nullopt) {
    TreeNode nd;
    nd.id = id;
    nd.depth = depth;
    nd.rule = rule;
    nd.children = children;
    nd.n_samples = 1;
    nd.sample_indices = {0};
    return nd;
}

// x1 <= 3.35 ? leaf : (x2 <= 45 ? leaf : leaf)
RegressionTree distance_age_tree() {
    std::vector<TreeNode> nodes{make_node(0, 0, SplitRule{0, 3.35}, std::make_pair(1, 2)), make_node(1, 1),
                                make_node(2, 1, SplitRule{1, 45.0}, std::make_pair(3, 4)), make_node(3, 2),
                                make_node(4, 2)};
    return RegressionTree(std::move(nodes), HyperParams{}, 2);
}

FeatureSpace mixed_space() {
    return FeatureSpace({{"age", FeatureKind::continuous, 0.0, 2.0, {}},
                         {"site", FeatureKind::categorical, 0.0, 0.0, {"a", "b", "c", "d"}}},
                        {{0, std::nullopt}, {1, 0}, {1, 1}, {1, 2}, {1, 3}});
}

}  // namespace

TEST(RegionFromPath, RootIsAmbient) {
    const auto s = FeatureSpace::box(2, 0.0, 100.0);
    EXPECT_EQ(region_from_path(distance_age_tree(), 0, s), Region::ambient(s));
    EXPECT_EQ(describe(Region::ambient(s)), "(entire feature space)");
}

TEST(RegionFromPath, RightThenLeft) {
    const auto s = FeatureSpace::box(2, 0.0, 100.0);
    const auto r = region_from_path(distance_age_tree(), 3, s);
    EXPECT_EQ(std::get<Interval>(r.bounds()[0]), (Interval{3.35, 100.0, true}));
    EXPECT_EQ(std::get<Interval>(r.bounds()[1]), (Interval{0.0, 45.0, false}));
    EXPECT_EQ(describe(r), "x1 > 3.35 AND x2 <= 45");
    EXPECT_EQ(describe(region_from_path(distance_age_tree(), 4, s)), "x1 > 3.35 AND x2 > 45");
    EXPECT_EQ(describe(region_from_path(distance_age_tree(), 1, s)), "x1 <= 3.35");
    EXPECT_THROW(region_from_path(distance_age_tree(), 9, s), LookupError);
}

TEST(RegionFromPath, LeavesPartitionTheAmbientVolume) {
    std::mt19937_64 gen(61);
    for (int trial = 0; trial < 20; ++trial) {
        const auto d = oracle::random_dataset(gen, 300, 3, false);
        HyperParams hp;
        hp.max_depth = 4;
        hp.min_samples_leaf = 5;
        const auto t = fit(d, hp, 0);
        const auto s = FeatureSpace::from_dataset(d);
        double total = 0.0;
        for (auto leaf : t.leaf_ids()) {
            const auto r = region_from_path(t, leaf, s);
            total += hypervolume(r);
            for (auto i : t.node(leaf).sample_indices) EXPECT_TRUE(r.contains(d.features().row(i)));
            for (const auto& b : r.bounds()) EXPECT_LE(std::get<Interval>(b).low, std::get<Interval>(b).high);
        }
        EXPECT_NEAR(total, hypervolume(Region::ambient(s)), 1e-9 * hypervolume(Region::ambient(s)));
        // Sibling leaves never overlap with positive volume.
        const auto leaves = t.leaf_ids();
        for (std::size_t a = 0; a < leaves.size(); ++a)
            for (std::size_t b = a + 1; b < leaves.size(); ++b)
                EXPECT_FALSE(intersect(region_from_path(t, leaves[a], s), region_from_path(t, leaves[b], s)));
    }
}

TEST(RegionFromPath, CategoricalIndicatorSplits) {
    const auto s = mixed_space();
    // site=b <= 0.5 (not b) on the left; then site=c > 0.5 on the right.
    std::vector<TreeNode> nodes{make_node(0, 0, SplitRule{2, 0.5}, std::make_pair(1, 4)),
                                make_node(1, 1, SplitRule{3, 0.5}, std::make_pair(2, 3)), make_node(2, 2),
                                make_node(3, 2), make_node(4, 1)};
    const RegressionTree t(std::move(nodes), HyperParams{}, 5);
    EXPECT_EQ(describe(region_from_path(t, 4, s)), "site = b");
    EXPECT_EQ(describe(region_from_path(t, 3, s)), "site = c");
    EXPECT_EQ(describe(region_from_path(t, 2, s)), "site in {a, d}");
    EXPECT_DOUBLE_EQ(hypervolume(region_from_path(t, 2, s)), 2.0 * 0.5);
}

TEST(Hypervolume, Examples) {
    EXPECT_EQ(hypervolume(Region::ambient(FeatureSpace::box(2, 0.0, 1.0))), 1.0);
    const auto s = FeatureSpace::box(2, 0.0, 10.0);
    EXPECT_EQ(hypervolume(box2(s, 0, 2, 0, 3)), 6.0);
    const auto m = mixed_space();
    const Region r(m, {Interval{0.0, 2.0, false}, CategorySet{{1}}});
    EXPECT_EQ(hypervolume(r), 0.5);
}

TEST(Intersect, Examples) {
    const auto s = FeatureSpace::box(2, 0.0, 10.0);
    const auto a = box2(s, 0, 2, 0, 2);
    EXPECT_EQ(intersect(a, a), a);
    EXPECT_FALSE(intersect(box2(s, 0, 1, 0, 1), box2(s, 2, 3, 0, 1)));
    EXPECT_EQ(intersect(a, box2(s, 1, 3, 1, 3)), box2(s, 1, 2, 1, 2));
    EXPECT_THROW(intersect(a, Region::ambient(FeatureSpace::box(2, 0.0, 5.0))), DomainError);
}

TEST(CoverageRatio, Examples) {
    const auto s = FeatureSpace::box(2, 0.0, 10.0);
    const auto truth = box2(s, 0, 2, 0, 2);
    EXPECT_EQ(coverage_ratio(truth, truth), 1.0);
    EXPECT_EQ(coverage_ratio(truth, box2(s, 0, 1, 0, 2)), 0.75);
    EXPECT_EQ(coverage_ratio(truth, box2(s, 5, 6, 5, 6)), 0.0);
    EXPECT_THROW(coverage_ratio(truth, box2(s, 1, 1, 0, 2)), DomainError);
}

TEST(CoverageRatio, SymmetricOnRandomBoxes) {
    std::mt19937_64 gen(71);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    const auto s = FeatureSpace::box(3, -10.0, 10.0);
    for (int trial = 0; trial < 1000; ++trial) {
        auto random_box = [&] {
            std::vector<double> lo(3), hi(3);
            for (std::size_t j = 0; j < 3; ++j) {
                const double a = u(gen), b = u(gen);
                lo[j] = std::min(a, b);
                hi[j] = std::max(a, b);
            }
            return Region::box(s, lo, hi);
        };
        const auto a = random_box(), b = random_box();
        const double ab = coverage_ratio(a, b);
        EXPECT_EQ(ab, coverage_ratio(b, a));
        EXPECT_GE(ab, 0.0);
        EXPECT_LE(ab, 1.0);
    }
}

TEST(UnionCvr, Examples) {
    const auto s = FeatureSpace::box(2, 0.0, 10.0);
    const auto truth = box2(s, 0, 2, 0, 2);
    const std::vector<Region> single{box2(s, 1, 3, 0, 2)};
    EXPECT_EQ(estimated_region_union_cvr(truth, single), coverage_ratio(truth, single[0]));
    const std::vector<Region> tiles{box2(s, 0, 1, 0, 2), box2(s, 1, 2, 0, 2)};
    EXPECT_EQ(estimated_region_union_cvr(truth, tiles), 1.0);
    const std::vector<Region> cover_plus{truth, box2(s, 5, 7, 5, 7)};
    EXPECT_EQ(estimated_region_union_cvr(truth, cover_plus), 0.75);
    const std::vector<Region> overlapping{box2(s, 0, 2, 0, 2), box2(s, 1, 3, 1, 3)};
    EXPECT_THROW(estimated_region_union_cvr(truth, overlapping), DomainError);
}

TEST(Region, Invariants) {
    const auto s = FeatureSpace::box(2, 0.0, 10.0);
    EXPECT_THROW(Region(s, {Interval{3.0, 1.0, false}, Interval{0.0, 1.0, false}}), DomainError);
    EXPECT_THROW(Region(mixed_space(), {Interval{0.0, 1.0, false}, CategorySet{{}}}), DomainError);
    const auto r = box2(s, 1, 2, 1, 2);
    EXPECT_TRUE(r.contains(std::vector<double>{1.5, 2.0}));
    EXPECT_FALSE(r.contains(std::vector<double>{2.5, 1.5}));
}
