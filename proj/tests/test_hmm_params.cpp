#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"

using namespace scgm;
using scgm_test::layout;
using scgm_test::random_pv;

namespace {

const std::vector<Coding> kCodings{Coding::Baseline, Coding::Local, Coding::Continuation, Coding::ReverseContinuation};

}  // namespace

TEST(Eta, FirstOrderClosedForms) {
    std::mt19937_64 rng(11);
    for (Coding c : kCodings) {
        const auto l = layout({4}, {c});
        const auto pv = random_pv(l, rng);
        const auto& p = pv.probs;
        for (int i = 1; i <= 3; ++i) {
            const double got = eta_value(pv, EtaIndex{bit(0), bit(0), {i}});
            double want = 0.0;
            const int k = i - 1;
            switch (c) {
                case Coding::Baseline: want = std::log(p[3] / p[k]); break;
                case Coding::Local: want = std::log(p[k + 1] / p[k]); break;
                case Coding::Continuation: {
                    double tail = 0.0;
                    for (int j = i; j < 4; ++j) tail += p[j];
                    want = std::log(tail / p[k]);
                    break;
                }
                case Coding::ReverseContinuation: {
                    // coded level i is original level 5-i; reference is original levels below it
                    const int orig = 4 - i;  // zero-based
                    double head = 0.0;
                    for (int j = 0; j < orig; ++j) head += p[j];
                    want = std::log(head / p[orig]);
                    break;
                }
            }
            EXPECT_NEAR(got, want, 1e-13) << to_string(c) << " level " << i;
        }
    }
}

TEST(Eta, TopLevelParameterIsZero) {
    std::mt19937_64 rng(12);
    const auto l = layout({3, 2});
    const auto pv = random_pv(l, rng);
    EXPECT_DOUBLE_EQ(eta_value(pv, EtaIndex{l.all(), bit(0), {3}}), 0.0);
}

TEST(Eta, BaselineInteractionIsLogOddsRatio) {
    std::mt19937_64 rng(13);
    const auto l = layout({2, 2});
    const auto pv = random_pv(l, rng);
    const auto& p = pv.probs;
    const double lor = std::log(p[0] * p[3] / (p[1] * p[2]));
    EXPECT_NEAR(eta_value(pv, EtaIndex{l.all(), l.all(), {1, 1}}), lor, 1e-13);
}

TEST(Eta, MatchesBruteForceOracle) {
    std::mt19937_64 rng(14);
    double worst = 0.0;
    for (int draw = 0; draw < 60; ++draw) {
        std::vector<int> cards;
        std::vector<Coding> cods;
        const int q = 2 + static_cast<int>(rng() % 3);
        for (int j = 0; j < q; ++j) {
            cards.push_back(2 + static_cast<int>(rng() % 3));
            cods.push_back(kCodings[rng() % 4]);
        }
        const auto l = layout(cards, cods);
        const auto pv = random_pv(l, rng);
        const VarSet m = 1 + static_cast<VarSet>(rng() % ((1u << q) - 1));
        for (VarSet eff = m; eff; eff = (eff - 1) & m) {
            for_each_cell_below_top(l.cardinalities(eff), [&](const CellIndex& c) {
                const EtaIndex idx{m, eff, c};
                worst = std::max(worst, std::abs(eta_value(pv, idx) - brute_force_eta(pv, idx)));
            });
        }
    }
    EXPECT_LT(worst, 1e-12);
}

TEST(Eta, IndependenceKillsInteractions) {
    std::mt19937_64 rng(15);
    for (Coding c : kCodings) {
        const auto l = layout({3, 4}, {c, c});
        const auto a = random_pv(layout({3}), rng), b = random_pv(layout({4}), rng);
        std::vector<double> w;
        for (double x : a.probs)
            for (double y : b.probs) w.push_back(x * y);
        const auto pv = normalized(l, w);
        for_each_cell_below_top({3, 4}, [&](const CellIndex& cell) {
            EXPECT_NEAR(eta_value(pv, EtaIndex{l.all(), l.all(), cell}), 0.0, 1e-13);
        });
    }
}

TEST(Identities, DecompositionsHoldOnRandomDistributions) {
    std::mt19937_64 rng(16);
    double worst = 0.0;
    for (int draw = 0; draw < 25; ++draw) {
        std::vector<int> cards;
        std::vector<Coding> cods;
        for (int j = 0; j < 4; ++j) {
            cards.push_back(2 + static_cast<int>(rng() % 2));
            cods.push_back(kCodings[rng() % 4]);
        }
        const auto l = layout(cards, cods);
        const auto pv = random_pv(l, rng);
        const VarSet m = l.all();
        for (VarSet eff = m; eff; eff = (eff - 1) & m) {
            const VarSet rest = m & ~eff;
            for (VarSet c = rest;; c = (c - 1) & rest) {
                for_each_cell_below_top(l.cardinalities(eff | c), [&](const CellIndex& cell) {
                    worst = std::max(worst, decompose_block(pv, m, eff, c, cell).residual());
                    worst = std::max(worst, decompose_conditional(pv, m, eff, c, cell).residual());
                });
                if (!c) break;
            }
        }
    }
    EXPECT_LT(worst, 1e-10);
}

TEST(Identities, RejectOverlappingSets) {
    std::mt19937_64 rng(17);
    const auto l = layout({2, 2, 2});
    const auto pv = random_pv(l, rng);
    EXPECT_THROW(decompose_block(pv, l.all(), bit(0), bit(0), {1, 1}), Error);
    EXPECT_THROW(decompose_conditional(pv, bit(0) | bit(1), bit(0), bit(2), {1, 1}), Error);
}

TEST(Allocation, FirstContainingMarginalOwnsEachEffect) {
    const auto a = allocate_effects({bit(0) | bit(1), bit(1) | bit(2), bit(0) | bit(1) | bit(2)});
    EXPECT_EQ(a.marginal_of(bit(0)), bit(0) | bit(1));
    EXPECT_EQ(a.marginal_of(bit(1)), bit(0) | bit(1));
    EXPECT_EQ(a.marginal_of(bit(2)), bit(1) | bit(2));
    EXPECT_EQ(a.marginal_of(bit(0) | bit(2)), bit(0) | bit(1) | bit(2));
    EXPECT_TRUE(a.contains_marginal(bit(1) | bit(2)));
    EXPECT_FALSE(a.contains_marginal(bit(2)));
}

TEST(Allocation, RejectsNonHierarchicalOrder) {
    try {
        allocate_effects({bit(0) | bit(1), bit(0)});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::OrderingViolation);
    }
    EXPECT_THROW(allocate_effects({}), Error);
}

TEST(EtaVectorTest, CompleteAllocationHasCellsMinusOneParameters) {
    std::mt19937_64 rng(18);
    const auto l = layout({2, 3, 2}, {Coding::Baseline, Coding::Local, Coding::Continuation});
    const auto pv = random_pv(l, rng);
    const auto a = allocate_effects({bit(0) | bit(1), l.all()});
    const auto v = eta_vector(pv, a);
    EXPECT_EQ(v.size(), l.n_cells() - 1);
    for (std::size_t k = 0; k < v.size(); ++k) EXPECT_NEAR(v.values[k], eta_value(pv, v.index[k]), 1e-14);
    EXPECT_FALSE(v.find(EtaIndex{l.all(), bit(0), {1}}).has_value());
    EXPECT_TRUE(v.find(EtaIndex{bit(0) | bit(1), bit(0), {1}}).has_value());
}

TEST(EtaVectorTest, BaselineFromLocalMatchesDirectBaseline) {
    std::mt19937_64 rng(19);
    const auto ll = layout({3, 4}, {Coding::Local, Coding::Local});
    const auto lb = layout({3, 4});
    const auto pl = random_pv(ll, rng);
    const ProbabilityVector pb(lb, pl.probs);
    const auto a = allocate_effects({ll.all()});
    const auto conv = baseline_from_local(eta_vector(pl, a));
    const auto direct = eta_vector(pb, a);
    ASSERT_EQ(conv.size(), direct.size());
    for (std::size_t k = 0; k < direct.size(); ++k) EXPECT_NEAR(conv.at(direct.index[k]), direct.values[k], 1e-10);
}

TEST(EtaVectorTest, JsonListsEveryParameter) {
    std::mt19937_64 rng(20);
    const auto l = layout({2, 2});
    const auto v = eta_vector(random_pv(l, rng), allocate_effects({l.all()}));
    EXPECT_EQ(to_json(v).size(), 3u);
}
