#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "biasaudit/cart.hpp"
#include "biasaudit/error.hpp"
#include "test_util.hpp"

using namespace biasaudit;

TEST(Entropy, Examples) {
    EXPECT_EQ(entropy(std::vector<double>{1.0, 0.0}), 0.0);
    EXPECT_EQ(entropy(std::vector<double>{0.5, 0.5}), 1.0);
    EXPECT_EQ(entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}), 2.0);
}

TEST(Entropy, RejectsUnnormalized) {
    EXPECT_THROW(entropy(std::vector<double>{0.5, 0.6}), DomainError);
    EXPECT_THROW(entropy(std::vector<double>{-0.5, 1.5}), DomainError);
}

TEST(Gini, Examples) {
    EXPECT_EQ(gini(std::vector<double>{1.0, 0.0}), 0.0);
    EXPECT_EQ(gini(std::vector<double>{0.5, 0.5}), 0.5);
    EXPECT_EQ(gini(std::vector<double>{0.25, 0.75}), 0.375);
    EXPECT_THROW(gini(std::vector<double>{0.2, 0.2}), DomainError);
}

TEST(InformationGain, Examples) {
    EXPECT_EQ(information_gain(1.0, std::vector<WeightedImpurity>{{0.5, 0.0}, {0.5, 0.0}}), 1.0);
    EXPECT_EQ(information_gain(1.0, std::vector<WeightedImpurity>{{1.0, 1.0}}), 0.0);
    EXPECT_NEAR(information_gain(0.5, std::vector<WeightedImpurity>{{0.4, 0.0}, {0.6, 0.5}}), 0.2, 1e-15);
    EXPECT_THROW(information_gain(1.0, std::vector<WeightedImpurity>{{0.5, 0.0}}), DomainError);
}

TEST(Impurity, MatchesDirectFormulaOnRandomVectors) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> k(1, 8);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> p(static_cast<std::size_t>(k(gen)));
        double s = 0.0;
        for (auto& v : p) s += (v = u(gen));
        for (auto& v : p) v /= s;
        double h = 0.0, g = 0.0;
        for (double v : p) {
            if (v > 0) h -= v * std::log2(v);
            g += v * (1.0 - v);
        }
        EXPECT_NEAR(entropy(p), h, 1e-12);
        EXPECT_NEAR(gini(p), g, 1e-12);
        const double w = u(gen);
        const double e1 = u(gen), e2 = u(gen), parent = u(gen);
        EXPECT_NEAR(information_gain(parent, std::vector<WeightedImpurity>{{w, e1}, {1.0 - w, e2}}),
                    parent - (w * e1 + (1.0 - w) * e2), 1e-12);
    }
}

TEST(NodeVariance, Examples) {
    EXPECT_EQ(node_variance(std::vector<double>{0.5, 0.5, 0.5}), 0.0);
    EXPECT_EQ(node_variance(std::vector<double>{0.0, 1.0}), 0.25);
    EXPECT_NEAR(node_variance(std::vector<double>{0.3, 0.6, 0.9}), 0.06, 1e-15);
    EXPECT_THROW(node_variance(std::vector<double>{}), DomainError);
}

TEST(VarianceReduction, Examples) {
    EXPECT_EQ(variance_reduction(std::vector<double>{0, 1}, std::vector<double>{0}, std::vector<double>{1}), 0.25);
    EXPECT_EQ(variance_reduction(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5}, std::vector<double>{0.5}),
              0.0);
    EXPECT_NEAR(variance_reduction(std::vector<double>{0.3, 0.6, 0.9}, std::vector<double>{0.3},
                                   std::vector<double>{0.6, 0.9}),
                0.045, 1e-15);
}

TEST(VarianceReduction, RejectsNonPartition) {
    EXPECT_THROW(variance_reduction(std::vector<double>{0, 1}, std::vector<double>{0}, std::vector<double>{0}),
                 DomainError);
    EXPECT_THROW(variance_reduction(std::vector<double>{0, 1, 2}, std::vector<double>{0}, std::vector<double>{1}),
                 DomainError);
}

TEST(VarianceReduction, IdentityOnRandomPartitions) {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> parent, left, right;
        for (int i = 0; i < 20; ++i) {
            const double y = u(gen);
            parent.push_back(y);
            (i < 7 ? left : right).push_back(y);
        }
        const double expected = oracle::oracle_variance(parent) -
                                (7.0 / 20.0) * oracle::oracle_variance(left) -
                                (13.0 / 20.0) * oracle::oracle_variance(right);
        EXPECT_NEAR(variance_reduction(parent, left, right), expected, 1e-12);
        EXPECT_GE(variance_reduction(parent, left, right), -1e-15);
    }
}

TEST(MedianAbsoluteDeviation, MatchesOracle) {
    EXPECT_EQ(median_absolute_deviation(std::vector<double>{1.0, 1.0}), 0.0);
    EXPECT_NEAR(median_absolute_deviation(std::vector<double>{0.0, 1.0, 5.0}), 5.0 / 3.0, 1e-15);
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v(1 + trial % 17);
        for (auto& x : v) x = u(gen);
        EXPECT_NEAR(median_absolute_deviation(v), oracle::oracle_mad(v), 1e-12);
    }
}
