#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace scgm;
using scgm_test::layout;

TEST(Layout, EncodeDecodeLastVariableFastest) {
    const auto l = layout({2, 3, 4});
    EXPECT_EQ(l.n_cells(), 24u);
    EXPECT_EQ(l.encode({1, 1, 1}), 0u);
    EXPECT_EQ(l.encode({1, 1, 2}), 1u);
    EXPECT_EQ(l.encode({1, 2, 1}), 4u);
    EXPECT_EQ(l.encode({2, 3, 4}), 23u);
    for (std::size_t k = 0; k < l.n_cells(); ++k) EXPECT_EQ(l.encode(l.decode(k)), k);
}

TEST(Layout, RejectsBadInput) {
    EXPECT_THROW(layout({1, 2}), Error);
    EXPECT_THROW(Layout({{"a", 2, Coding::Baseline, {}}, {"a", 2, Coding::Baseline, {}}}), Error);
    const auto l = layout({2, 2});
    EXPECT_THROW(l.encode({3, 1}), Error);
    EXPECT_THROW(l.encode({1}), Error);
}

TEST(Odometer, VisitsEveryCellOnceInOrder) {
    std::vector<CellIndex> seen;
    for_each_cell({2, 3}, [&](const CellIndex& c) { seen.push_back(c); });
    ASSERT_EQ(seen.size(), 6u);
    EXPECT_EQ(seen.front(), (CellIndex{1, 1}));
    EXPECT_EQ(seen[1], (CellIndex{1, 2}));
    EXPECT_EQ(seen.back(), (CellIndex{2, 3}));
    int n = 0;
    for_each_cell({}, [&](const CellIndex& c) {
        EXPECT_TRUE(c.empty());
        ++n;
    });
    EXPECT_EQ(n, 1);
    n = 0;
    for_each_cell_below_top({3, 4}, [&](const CellIndex&) { ++n; });
    EXPECT_EQ(n, 6);
}

TEST(Tables, MarginalizePreservesMassAndMatchesSums) {
    std::mt19937_64 rng(3);
    const auto l = layout({2, 3, 2});
    const auto pv = scgm_test::random_pv(l, rng);
    const auto m = marginalize(pv, bit(0) | bit(2));
    EXPECT_NEAR(m.sum(), 1.0, 1e-14);
    double direct = 0.0;
    for (int b = 1; b <= 3; ++b) direct += pv.at({2, b, 1});
    EXPECT_NEAR(m.at({2, 1}), direct, 1e-15);
}

TEST(Tables, SliceConditionalNormalizes) {
    std::mt19937_64 rng(4);
    const auto l = layout({2, 3, 2});
    const auto pv = scgm_test::random_pv(l, rng);
    const auto s = slice_conditional(pv, bit(1), {2});
    EXPECT_NEAR(s.sum(), 1.0, 1e-14);
    const double denom = pv.at({1, 2, 1}) + pv.at({1, 2, 2}) + pv.at({2, 2, 1}) + pv.at({2, 2, 2});
    EXPECT_NEAR(s.at({2, 1}), pv.at({2, 2, 1}) / denom, 1e-14);
}

TEST(Tables, ToProbabilitiesSmoothingAndZeroCells) {
    ContingencyTable t(layout({2, 2}), {0, 1, 2, 3});
    EXPECT_THROW(to_probabilities(t), Error);
    const auto p = to_probabilities(t, 0.5);
    EXPECT_NEAR(p.probs[0], 0.5 / 8.0, 1e-15);
    EXPECT_NEAR(p.sum(), 1.0, 1e-15);
    EXPECT_THROW(ContingencyTable(layout({2, 2}), {1, -1, 0, 0}), Error);
    EXPECT_THROW(ContingencyTable(layout({2, 2}), {1, 1, 1}), Error);
}

TEST(TableIo, CsvRoundTrip) {
    std::vector<VariableSpec> v{{"A", 2, Coding::Baseline, {"no", "yes"}}, {"B", 3, Coding::Local, {}}};
    ContingencyTable t(Layout(v), {1, 2, 3, 4, 5, 6.5});
    std::istringstream in(serialize_csv(t));
    const auto back = load_table_csv(in);
    EXPECT_EQ(back.layout, t.layout);
    EXPECT_EQ(back.counts, t.counts);
}

TEST(TableIo, JsonRoundTrip) {
    ContingencyTable t(layout({2, 2}, {Coding::Continuation, Coding::ReverseContinuation}), {4, 3, 2, 1});
    const auto back = table_from_json(to_json(t));
    EXPECT_EQ(back.layout, t.layout);
    EXPECT_EQ(back.counts, t.counts);
}

TEST(TableIo, CsvErrors) {
    auto load = [](const std::string& s) {
        std::istringstream in(s);
        return load_table_csv(in);
    };
    EXPECT_NO_THROW(load("variable,cardinality,coding\nA,2,baseline\ncell:1,5\n"));
    try {
        load("variable,cardinality,coding\nA,2,baseline\ncell:1,5\ncell:1,2\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DuplicateCell);
    }
    try {
        load("variable,cardinality,coding\nA,2,baseline\ncell:3,5\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::LevelOutOfRange);
    }
    try {
        load("variable,cardinality,coding\nA,2,weird\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UnknownCoding);
    }
    try {
        load("A,2,baseline\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Parse);
    }
    try {
        load("variable,cardinality,coding\nA,2,baseline\ncell:1,-2\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NegativeCount);
    }
}

TEST(TableIo, MissingCellsCountZero) {
    std::istringstream in("variable,cardinality,coding\nA,2,baseline\nB,2,baseline\ncell:2,2,7\n");
    const auto t = load_table_csv(in);
    EXPECT_EQ(t.counts, (std::vector<double>{0, 0, 0, 7}));
}

TEST(Coding, ReverseLevelIsInvolution) {
    for (int i = 1; i <= 5; ++i) EXPECT_EQ(reverse_level(reverse_level(i, 5), 5), i);
    EXPECT_EQ(parse_coding("local"), Coding::Local);
    EXPECT_THROW(parse_coding("nope"), Error);
}
