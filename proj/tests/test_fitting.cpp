#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>

#include "helpers.hpp"

using namespace scgm;
using scgm_test::layout;

namespace {

ContingencyTable random_counts(const Layout& l, std::mt19937_64& rng, int lo = 5, int span = 60) {
    std::vector<double> c(l.n_cells());
    for (double& x : c) x = lo + static_cast<double>(rng() % static_cast<unsigned>(span));
    return ContingencyTable(l, c);
}

// Iterative proportional fitting to the margins in `sets`.
std::vector<double> ipf(const ContingencyTable& t, const std::vector<VarSet>& sets) {
    std::vector<double> m(t.counts.size(), 1.0);
    for (int it = 0; it < 2000; ++it) {
        for (VarSet s : sets) {
            const auto obs = marginal_sums(t.layout, t.counts, s);
            const auto fit = marginal_sums(t.layout, m, s);
            const Layout sub = sub_layout(t.layout, s);
            for (std::size_t k = 0; k < m.size(); ++k) {
                const auto cell = t.layout.decode(k);
                CellIndex sc;
                for (int j : members(s)) sc.push_back(cell[static_cast<std::size_t>(j)]);
                const auto q = sub.encode(sc);
                m[k] *= obs[q] / fit[q];
            }
        }
    }
    return m;
}

}  // namespace

TEST(ChiSquare, MatchesBoostOracle) {
    for (double df : {1.0, 2.0, 5.0, 17.0, 120.0, 288.0})
        for (double x : {0.01, 0.5, 1.0, 3.0, 10.0, 50.0, 141.34, 300.0}) {
            const double want = boost::math::gamma_q(df / 2.0, x / 2.0);
            EXPECT_NEAR(chisq_sf(x, df), want, 1e-12 + 1e-10 * want) << "x=" << x << " df=" << df;
        }
    EXPECT_DOUBLE_EQ(chisq_sf(0.0, 3.0), 1.0);
    EXPECT_DOUBLE_EQ(chisq_sf(0.0, 0.0), 1.0);
}

TEST(InformationCriteriaTest, Formulas) {
    const auto ic = information_criteria(141.34, 120, 288, 18697);
    EXPECT_NEAR(ic.aic, 141.34 - 2.0 * (288 - 120), 1e-12);
    EXPECT_NEAR(ic.bic, 141.34 - std::log(18697.0) * (288 - 120), 1e-9);
}

TEST(Fit, SaturatedReturnsObservedProportions) {
    std::mt19937_64 rng(1);
    const auto l = layout({2, 3, 2});
    const auto t = random_counts(l, rng);
    const auto r = fit_constrained(t, ConstraintSystem{});
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.g2, 0.0);
    EXPECT_EQ(r.df, 0);
    for (std::size_t k = 0; k < t.counts.size(); ++k) EXPECT_NEAR(r.pi_hat.probs[k], t.counts[k] / t.total(), 1e-12);
}

TEST(Fit, TwoWayIndependenceMatchesIpf) {
    std::mt19937_64 rng(2);
    const auto l = layout({3, 4});
    const auto t = random_counts(l, rng);
    const auto r = fit_constrained(t, generate_constraints(l, Statement::conditional(bit(0), bit(1), 0)));
    ASSERT_TRUE(r.converged);
    const auto m = ipf(t, {bit(0), bit(1)});
    for (std::size_t k = 0; k < m.size(); ++k) EXPECT_NEAR(r.pi_hat.probs[k] * t.total(), m[k], 1e-8);
    EXPECT_EQ(r.df, 6);
}

TEST(Fit, ConditionalIndependenceMatchesIpf) {
    std::mt19937_64 rng(3);
    for (Coding c : {Coding::Baseline, Coding::Local, Coding::Continuation}) {
        const auto l = layout({2, 3, 3}, {c, c, c});
        const auto t = random_counts(l, rng);
        const auto r = fit_constrained(t, generate_constraints(l, Statement::conditional(bit(1), bit(2), bit(0))));
        ASSERT_TRUE(r.converged);
        const auto m = ipf(t, {bit(0) | bit(1), bit(0) | bit(2)});
        for (std::size_t k = 0; k < m.size(); ++k) EXPECT_NEAR(r.pi_hat.probs[k] * t.total(), m[k], 1e-8);
        EXPECT_EQ(r.df, 8);
    }
}

TEST(Fit, ExactModelDataFitsPerfectly) {
    const auto l = layout({2, 2, 4}, {Coding::Local, Coding::Local, Coding::Local});
    const auto s = Statement::geq(bit(0), bit(1), bit(2), {2});
    const auto pv = plant_distribution(PlantSpec{l.variables(), s, 77});
    std::vector<double> counts(pv.probs);
    for (double& x : counts) x *= 10000.0;
    const auto r = fit_constrained(ContingencyTable(l, counts), generate_constraints(l, s));
    ASSERT_TRUE(r.converged);
    EXPECT_LT(r.g2, 1e-6);
    EXPECT_EQ(r.df, 3);
}

TEST(Fit, NestedSystemsGiveMonotoneDeviance) {
    std::mt19937_64 rng(4);
    const auto l = layout({2, 2, 3});
    const auto t = random_counts(l, rng);
    const std::vector<Statement> chain{
        Statement::cells(bit(0), bit(1), bit(2), {{1}}),
        Statement::cells(bit(0), bit(1), bit(2), {{1}, {2}}),
        Statement::conditional(bit(0), bit(1), bit(2)),
    };
    double prev = -1.0;
    int prev_df = -1;
    for (const auto& s : chain) {
        const auto r = fit_constrained(t, generate_constraints(l, s));
        ASSERT_TRUE(r.converged);
        EXPECT_GE(r.g2, prev - 1e-9);
        EXPECT_GT(r.df, prev_df);
        prev = r.g2;
        prev_df = r.df;
    }
}

TEST(Fit, RedundantRowsDoNotInflateDegreesOfFreedom) {
    std::mt19937_64 rng(5);
    const auto l = layout({2, 2, 2});
    const auto t = random_counts(l, rng);
    auto sys = generate_constraints(l, Statement::conditional(bit(0), bit(1), bit(2)));
    const auto once = fit_constrained(t, sys);
    auto twice = merge({sys, sys}, false);
    const auto r = fit_constrained(t, twice);
    EXPECT_EQ(once.df, r.df);
    EXPECT_NEAR(once.g2, r.g2, 1e-8);
}

TEST(Fit, ZeroCountsAreHandled) {
    const auto l = layout({2, 2});
    const ContingencyTable t(l, {10, 0, 5, 7});
    const auto r = fit_constrained(t, generate_constraints(l, Statement::conditional(bit(0), bit(1), 0)));
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.pi_hat.probs[1] * 22.0, 10.0 * 7.0 / 22.0, 1e-6);
}

TEST(Fit, IterationCapReportsNonConvergence) {
    std::mt19937_64 rng(6);
    const auto l = layout({3, 3, 3});
    const auto t = random_counts(l, rng, 1, 200);
    FitOptions o;
    o.max_iterations = 1;
    const auto r = fit_constrained(t, generate_constraints(l, Statement::cells(bit(0), bit(1), bit(2), {{1}, {3}})), o);
    EXPECT_FALSE(r.converged);
}

TEST(Fit, OptionValidationAndJson) {
    const auto l = layout({2, 2});
    const ContingencyTable t(l, {1, 2, 3, 4});
    FitOptions bad;
    bad.max_iterations = 0;
    EXPECT_THROW(fit_constrained(t, ConstraintSystem{}, bad), Error);
    EXPECT_THROW(fit_constrained(ContingencyTable(l, {0, 0, 0, 0}), ConstraintSystem{}), Error);
    const auto j = to_json(fit_constrained(t, ConstraintSystem{}), l);
    EXPECT_EQ(j.at("schema"), "scgm-fit/1");
}
