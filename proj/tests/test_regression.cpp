#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace scgm;
using scgm_test::data_path;
using scgm_test::layout;

namespace {

struct Case {
    std::vector<int> cards;
    std::vector<Coding> codings;
};

void round_trip(const ChainGraph& g, const Case& c, std::uint64_t seed, double& worst_eta, double& worst_cond) {
    std::mt19937_64 rng(seed);
    const auto l = layout(c.cards, c.codings);
    const auto alloc = allocate_effects(marginal_sets(g));
    const auto pv = scgm_test::random_pv(l, rng);
    const auto eta = eta_vector(pv, alloc);
    const auto sys = beta_from_eta(eta, g);
    EXPECT_EQ(sys.dimension(), eta.size());
    const auto back = eta_from_regression(sys, alloc);
    for (std::size_t k = 0; k < eta.size(); ++k)
        worst_eta = std::max(worst_eta, std::abs(back.values[k] - eta.values[k]));
    for (const auto& f : sys.families) {
        for_each_cell_below_top(l.cardinalities(f.response), [&](const CellIndex& ia) {
            for_each_cell(l.cardinalities(f.parents), [&](const CellIndex& ip) {
                // Marginal variables outside the parents sit at their top level.
                CellIndex ctx;
                std::size_t q = 0;
                for (int j : members(f.marginal & ~f.response))
                    ctx.push_back((f.parents & bit(j)) ? ip[q++] : l.cardinality(j));
                const double direct = conditional_eta(pv, f.marginal, f.response, ia, ctx);
                worst_cond = std::max(worst_cond, std::abs(direct - eta_conditional_from_beta(sys, f.response, ia, ip)));
            });
        });
    }
}

}  // namespace

TEST(Regression, RoundTripOnFivePointChain) {
    const auto g = load_graph(data_path("chain5.graph"));
    double we = 0.0, wc = 0.0;
    const std::vector<Case> cases{
        {{2, 2, 2, 2, 2}, std::vector<Coding>(5, Coding::Baseline)},
        {{3, 2, 3, 2, 3}, std::vector<Coding>(5, Coding::Baseline)},
        {{3, 3, 2, 3, 2}, {Coding::Local, Coding::Local, Coding::Baseline, Coding::Local, Coding::Baseline}},
        {{2, 3, 3, 2, 2}, {Coding::Baseline, Coding::Local, Coding::Continuation, Coding::Baseline, Coding::Local}},
    };
    for (std::uint64_t s = 0; s < 12; ++s) round_trip(g, cases[s % cases.size()], 100 + s, we, wc);
    EXPECT_LT(we, 1e-10);
    EXPECT_LT(wc, 1e-10);
}

TEST(Regression, RoundTripOnSevenVertexSkeleton) {
    const auto g = load_graph(data_path("skeleton7.graph"));
    double we = 0.0, wc = 0.0;
    round_trip(g, {{2, 2, 2, 3, 2, 2, 3}, {Coding::Baseline, Coding::Baseline, Coding::Baseline, Coding::Local,
                                           Coding::Baseline, Coding::Baseline, Coding::Local}},
               7, we, wc);
    EXPECT_LT(we, 1e-10);
    EXPECT_LT(wc, 1e-10);
}

TEST(Regression, FamiliesFollowComponents) {
    const auto g = load_graph(data_path("chain5.graph"));
    const auto alloc = allocate_effects(marginal_sets(g));
    const auto fam = response_families(g, alloc);
    // one family per nonempty response subset of each component
    ASSERT_EQ(fam.size(), 3u + 7u);
    for (const auto& f : fam) {
        if (is_subset(f.response, bit(0) | bit(1))) EXPECT_EQ(f.parents, 0u);
        else EXPECT_EQ(f.parents, bit(0) | bit(1));
        EXPECT_TRUE(is_subset(f.response | f.parents, f.marginal));
    }
}

TEST(Regression, MixedIndicesFillTheGap) {
    const auto g = load_graph(data_path("chain5.graph"));
    const auto l = layout({2, 2, 2, 2, 2});
    const auto alloc = allocate_effects(marginal_sets(g));
    const auto mixed = mixed_eta_indices(g, l, alloc);
    std::mt19937_64 rng(3);
    const auto sys = beta_from_eta(eta_vector(scgm_test::random_pv(l, rng), alloc), g);
    EXPECT_EQ(sys.betas.size() + mixed.size(), l.n_cells() - 1);
}

TEST(Regression, MultiLevelContinuationCovariateRejected) {
    const auto g = load_graph(data_path("chain5.graph"));
    const auto l = layout({3, 2, 2, 2, 2}, {Coding::Continuation, Coding::Baseline, Coding::Baseline,
                                            Coding::Baseline, Coding::Baseline});
    std::mt19937_64 rng(4);
    const auto alloc = allocate_effects(marginal_sets(g));
    try {
        beta_from_eta(eta_vector(scgm_test::random_pv(l, rng), alloc), g);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::CodingMismatch);
    }
}

TEST(Regression, ConstraintsVanishOnPlantedGraphDistribution) {
    // Build a distribution satisfying the graph by fitting the graph to random counts.
    const auto g = load_graph(data_path("chain5_stratified.graph"));
    const auto l = layout({2, 2, 2, 2, 2});
    const auto sys = scgm_constraints(g, l);
    EXPECT_EQ(sys.statements.size(), 3u);
    std::mt19937_64 rng(5);
    std::vector<double> counts(l.n_cells());
    for (double& c : counts) c = 20.0 + static_cast<double>(rng() % 50);
    const auto fit = fit_constrained(ContingencyTable(l, counts), sys);
    ASSERT_TRUE(fit.converged);
    EXPECT_LT(max_violation(sys, fit.pi_hat), 1e-8);
    for (const auto& s : sys.statements) EXPECT_LT(verify_cs_direct(fit.pi_hat, s), 1e-8);
}

TEST(Regression, ReportsCarrySchemaAndRows) {
    const auto g = load_graph(data_path("chain5.graph"));
    const auto l = layout({2, 2, 2, 2, 2});
    std::mt19937_64 rng(6);
    const auto sys = beta_from_eta(eta_vector(scgm_test::random_pv(l, rng), allocate_effects(marginal_sets(g))), g);
    EXPECT_EQ(report_json(sys).at("schema"), "scgm-report/1");
    const auto csv = report_csv(sys);
    EXPECT_GT(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), sys.betas.size());
}
