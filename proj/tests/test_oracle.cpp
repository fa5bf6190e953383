#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace scgm;
using scgm_test::layout;

TEST(Oracle, PlantedDistributionsSatisfyTheStatementDirectly) {
    const auto l = layout({2, 3, 3, 2});
    const std::vector<Statement> stmts{
        Statement::conditional(bit(0), bit(1), bit(2) | bit(3)),
        Statement::cells(bit(0), bit(1), bit(2) | bit(3), {{1, 0}}),
        Statement::geq(bit(0), bit(1), bit(2) | bit(3), {2, 2}),
    };
    for (const auto& s : stmts)
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto pv = plant_distribution(PlantSpec{l.variables(), s, seed});
            EXPECT_TRUE(pv.strictly_positive());
            EXPECT_NEAR(pv.sum(), 1.0, 1e-12);
            EXPECT_LT(verify_cs_direct(pv, s), 1e-12);
        }
}

TEST(Oracle, ViolatingSamplesCarryAssociationInEveryContext) {
    const auto l = layout({2, 2, 3});
    const auto s = Statement::cells(bit(0), bit(1), bit(2), {{1}, {3}});
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto pv = sample_violating(l.variables(), s, seed);
        EXPECT_GT(weakest_context_association(pv, s), 0.1);
        EXPECT_GT(verify_cs_direct(pv, s), 1e-4);
    }
}

TEST(Oracle, PlantingIsDeterministicPerSeed) {
    const auto l = layout({2, 2, 2});
    const auto s = Statement::conditional(bit(0), bit(1), bit(2));
    EXPECT_EQ(plant_distribution(PlantSpec{l.variables(), s, 9}).probs,
              plant_distribution(PlantSpec{l.variables(), s, 9}).probs);
    EXPECT_NE(plant_distribution(PlantSpec{l.variables(), s, 9}).probs,
              plant_distribution(PlantSpec{l.variables(), s, 10}).probs);
}

TEST(Oracle, PlantRequiresFullCoverage) {
    const auto l = layout({2, 2, 2});
    EXPECT_THROW(plant_distribution(PlantSpec{l.variables(), Statement::conditional(bit(0), bit(1), 0), 1}), Error);
}

TEST(Oracle, BruteForceEtaLimitedToFourVariables) {
    std::mt19937_64 rng(1);
    const auto l = layout({2, 2, 2, 2, 2});
    const auto pv = scgm_test::random_pv(l, rng);
    EXPECT_THROW(brute_force_eta(pv, EtaIndex{l.all(), bit(0), {1}}), Error);
}

TEST(Oracle, SelftestReportsEveryFamily) {
    const auto lines = oracle_selftest(1, 3);
    ASSERT_GE(lines.size(), 6u);
    std::map<std::string, bool> by_name;
    for (const auto& l : lines) by_name[l.name] = l.pass;
    EXPECT_TRUE(by_name.at("baseline list context"));
    EXPECT_TRUE(by_name.at("local list context"));
    EXPECT_TRUE(by_name.at("local threshold"));
    // Pooled continuation slices are not independent under slice-wise planting.
    EXPECT_FALSE(by_name.at("continuation threshold"));
    EXPECT_FALSE(by_name.at("mixed threshold"));
}
