#pragma once

// Brute-force reference machinery for tests and the selftest command:
// planting independencies, checking them on conditional tables, and a naive
// evaluation of HMM parameters written without the hmm_params machinery.

#include <random>

#include "scgm/cs_constraints.hpp"

namespace scgm {

struct PlantSpec {
    std::vector<VariableSpec> variables;
    Statement statement;
    std::uint64_t seed = 1;
};

namespace oracle_detail {

// Row-major decode, last variable fastest; levels are 1-based.
inline std::vector<int> decode(const std::vector<int>& cards, std::size_t k) {
    std::vector<int> cell(cards.size());
    for (std::size_t j = cards.size(); j-- > 0;) {
        cell[j] = static_cast<int>(k % static_cast<std::size_t>(cards[j])) + 1;
        k /= static_cast<std::size_t>(cards[j]);
    }
    return cell;
}

inline std::size_t product(const std::vector<int>& cards) {
    std::size_t n = 1;
    for (int c : cards) n *= static_cast<std::size_t>(c);
    return n;
}

inline std::vector<int> cards_of(const std::vector<VariableSpec>& vars) {
    std::vector<int> out;
    for (const auto& v : vars) out.push_back(v.cardinality);
    return out;
}

inline bool in_set(std::uint32_t set, std::size_t j) { return (set >> j) & 1u; }

// Levels of the variables in `set` (ascending) taken from a full cell.
inline std::vector<int> project(const std::vector<int>& cell, std::uint32_t set) {
    std::vector<int> out;
    for (std::size_t j = 0; j < cell.size(); ++j)
        if (in_set(set, j)) out.push_back(cell[j]);
    return out;
}

inline std::vector<double> random_weights(std::size_t n, std::mt19937_64& rng, double spread) {
    std::normal_distribution<double> z(0.0, spread);
    std::vector<double> w(n);
    for (auto& x : w) x = std::exp(z(rng));
    return w;
}

// Largest |log odds ratio| over 2x2 sub-blocks of a two-way slice.
inline double max_log_odds_ratio(const std::map<std::vector<int>, std::map<std::vector<int>, double>>& joint) {
    double best = 0.0;
    std::vector<std::vector<int>> as, bs;
    for (const auto& [a, row] : joint) {
        as.push_back(a);
        if (bs.empty())
            for (const auto& [b, x] : row) bs.push_back(b);
    }
    for (std::size_t a1 = 0; a1 < as.size(); ++a1)
        for (std::size_t a2 = a1 + 1; a2 < as.size(); ++a2)
            for (std::size_t b1 = 0; b1 < bs.size(); ++b1)
                for (std::size_t b2 = b1 + 1; b2 < bs.size(); ++b2) {
                    const auto& r1 = joint.at(as[a1]);
                    const auto& r2 = joint.at(as[a2]);
                    const double lor = std::log(r1.at(bs[b1])) + std::log(r2.at(bs[b2])) - std::log(r1.at(bs[b2])) -
                                       std::log(r2.at(bs[b1]));
                    best = std::max(best, std::abs(lor));
                }
    return best;
}

// Joint of (A, B) given C = ctx (summing any other variables), keyed by levels.
inline std::map<std::vector<int>, std::map<std::vector<int>, double>> slice(const std::vector<int>& cards,
                                                                            const std::vector<double>& p,
                                                                            const Statement& s,
                                                                            const std::vector<int>& ctx) {
    std::map<std::vector<int>, std::map<std::vector<int>, double>> out;
    double mass = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const auto cell = decode(cards, k);
        if (project(cell, s.c) != ctx) continue;
        out[project(cell, s.a)][project(cell, s.b)] += p[k];
        mass += p[k];
    }
    if (!(mass > 0.0)) throw Error(ErrorKind::ZeroMass, "context has zero probability");
    for (auto& [a, row] : out)
        for (auto& [b, x] : row) x /= mass;
    return out;
}

}  // namespace oracle_detail

// Context cells of a statement in original levels.
inline std::vector<CellIndex> statement_contexts(const std::vector<VariableSpec>& vars, const Statement& s) {
    std::vector<int> cc;
    for (int j : members(s.c)) cc.push_back(vars.at(static_cast<std::size_t>(j)).cardinality);
    return context_cells(s, cc);
}

// Max over context cells of |p(a,b|c) - p(a|c) p(b|c)|.
inline double verify_cs_direct(const ProbabilityVector& pv, const Statement& s) {
    const auto cards = oracle_detail::cards_of(pv.layout.variables());
    double worst = 0.0;
    for (const auto& ctx : statement_contexts(pv.layout.variables(), s)) {
        const auto joint = oracle_detail::slice(cards, pv.probs, s, ctx);
        std::map<std::vector<int>, double> pa, pb;
        for (const auto& [a, row] : joint)
            for (const auto& [b, x] : row) {
                pa[a] += x;
                pb[b] += x;
            }
        for (const auto& [a, row] : joint)
            for (const auto& [b, x] : row) worst = std::max(worst, std::abs(x - pa[a] * pb[b]));
    }
    return worst;
}

// Smallest, over contexts, of the largest |log odds ratio| in the A-B slice.
inline double weakest_context_association(const ProbabilityVector& pv, const Statement& s) {
    const auto cards = oracle_detail::cards_of(pv.layout.variables());
    double weakest = std::numeric_limits<double>::infinity();
    for (const auto& ctx : statement_contexts(pv.layout.variables(), s))
        weakest = std::min(weakest, oracle_detail::max_log_odds_ratio(oracle_detail::slice(cards, pv.probs, s, ctx)));
    return weakest;
}

inline ProbabilityVector random_distribution(const std::vector<VariableSpec>& vars, std::mt19937_64& rng,
                                             double spread = 0.6) {
    Layout l(vars);
    return normalized(l, oracle_detail::random_weights(l.n_cells(), rng, spread));
}

// Positive joint with the statement planted: each context slice of (A, B) is
// replaced by the product of its margins, other slices stay generic (log odds
// ratio above 0.1 somewhere, resampled otherwise).
inline ProbabilityVector plant_distribution(const PlantSpec& spec) {
    const Layout l(spec.variables);
    const Statement& s = spec.statement;
    if (s.vars() != l.all()) throw Error(ErrorKind::InvalidArgument, "statement must cover every variable");
    validate_statement(s, l.cardinalities(s.c));
    const auto cards = oracle_detail::cards_of(spec.variables);
    const auto contexts = statement_contexts(spec.variables, s);
    std::vector<int> cc = l.cardinalities(s.c);
    std::vector<CellIndex> others;
    for_each_cell(cc, [&](const CellIndex& c) {
        if (!std::binary_search(contexts.begin(), contexts.end(), c)) others.push_back(c);
    });
    std::mt19937_64 rng(spec.seed);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        auto p = oracle_detail::random_weights(l.n_cells(), rng, 0.6);
        double total = 0.0;
        for (double x : p) total += x;
        for (double& x : p) x /= total;
        // Product structure at every context cell.
        for (const auto& ctx : contexts) {
            std::map<std::vector<int>, double> pa, pb;
            double pc = 0.0;
            for (std::size_t k = 0; k < p.size(); ++k) {
                const auto cell = oracle_detail::decode(cards, k);
                if (oracle_detail::project(cell, s.c) != ctx) continue;
                pa[oracle_detail::project(cell, s.a)] += p[k];
                pb[oracle_detail::project(cell, s.b)] += p[k];
                pc += p[k];
            }
            for (std::size_t k = 0; k < p.size(); ++k) {
                const auto cell = oracle_detail::decode(cards, k);
                if (oracle_detail::project(cell, s.c) != ctx) continue;
                p[k] = pa[oracle_detail::project(cell, s.a)] * pb[oracle_detail::project(cell, s.b)] / pc;
            }
        }
        bool generic = true;
        for (const auto& ctx : others)
            if (oracle_detail::max_log_odds_ratio(oracle_detail::slice(cards, p, s, ctx)) <= 0.1) generic = false;
        if (generic) return normalized(l, std::move(p));
    }
    throw Error(ErrorKind::InvalidArgument, "could not sample a generic planted distribution");
}

// Positive joint where every context slice carries association (log odds ratio > 0.1).
inline ProbabilityVector sample_violating(const std::vector<VariableSpec>& vars, const Statement& s, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        auto pv = random_distribution(vars, rng);
        if (weakest_context_association(pv, s) > 0.1) return pv;
    }
    throw Error(ErrorKind::InvalidArgument, "could not sample an associated distribution");
}

// Naive HMM parameter from explicit subset enumeration over the full table.
// Levels in `idx.cell` and the default conditioning are coded levels.
inline double brute_force_eta(const ProbabilityVector& pv, const EtaIndex& idx) {
    const auto& vars = pv.layout.variables();
    const std::size_t q = vars.size();
    if (q > 4) throw Error(ErrorKind::InvalidArgument, "oracle limited to four variables");
    std::vector<int> eff_vars, cards = oracle_detail::cards_of(vars);
    for (std::size_t j = 0; j < q; ++j)
        if (oracle_detail::in_set(idx.effect, j)) eff_vars.push_back(static_cast<int>(j));
    for (std::size_t a = 0; a < eff_vars.size(); ++a)
        if (idx.cell[a] == cards[static_cast<std::size_t>(eff_vars[a])]) return 0.0;

    // Original-level range of coded range [lo, hi] for variable j.
    auto to_orig = [&](std::size_t j, int lo, int hi) {
        if (vars[j].coding != Coding::ReverseContinuation) return std::make_pair(lo, hi);
        const int card = cards[j];
        return std::make_pair(card + 1 - hi, card + 1 - lo);
    };
    auto reference = [&](std::size_t j, int i) {
        switch (vars[j].coding) {
            case Coding::Baseline: return std::make_pair(cards[j], cards[j]);
            case Coding::Local: return std::make_pair(i + 1, i + 1);
            default: return std::make_pair(i + 1, cards[j]);
        }
    };

    const std::size_t ne = eff_vars.size();
    double eta = 0.0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << ne); ++mask) {
        // Allowed original range per variable; variables outside M are free.
        std::vector<std::pair<int, int>> range(q);
        for (std::size_t j = 0; j < q; ++j) {
            if (!oracle_detail::in_set(idx.marginal, j)) range[j] = {1, cards[j]};
            else range[j] = to_orig(j, cards[j], cards[j]);
        }
        int excluded = 0;
        for (std::size_t a = 0; a < ne; ++a) {
            const auto j = static_cast<std::size_t>(eff_vars[a]);
            const int i = idx.cell[a];
            if (mask & (std::size_t{1} << a)) {
                const auto r = reference(j, i);
                range[j] = to_orig(j, r.first, r.second);
            } else {
                range[j] = to_orig(j, i, i);
                ++excluded;
            }
        }
        double mass = 0.0;
        for (std::size_t k = 0; k < pv.probs.size(); ++k) {
            const auto cell = oracle_detail::decode(cards, k);
            bool inside = true;
            for (std::size_t j = 0; j < q && inside; ++j) inside = cell[j] >= range[j].first && cell[j] <= range[j].second;
            if (inside) mass += pv.probs[k];
        }
        eta += ((excluded % 2) ? -1.0 : 1.0) * std::log(mass);
    }
    return eta;
}

// ---------------------------------------------------------------------------
// Selftest

struct SelftestLine {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace oracle_detail {

inline std::vector<VariableSpec> specs(std::vector<int> cards, std::vector<Coding> codings) {
    std::vector<VariableSpec> v;
    for (std::size_t j = 0; j < cards.size(); ++j)
        v.push_back(VariableSpec{std::to_string(j + 1), cards[j], codings[j], {}});
    return v;
}

inline std::string fmt(double x) {
    std::ostringstream os;
    os.precision(3);
    os << x;
    return os.str();
}

}  // namespace oracle_detail

// A quick self-check battery: (planted: max row residual, generic: min worst residual).
inline std::vector<SelftestLine> oracle_selftest(std::uint64_t seed = 1, int draws = 10) {
    using oracle_detail::specs;
    std::vector<SelftestLine> out;

    {
        std::mt19937_64 rng(seed);
        double worst = 0.0;
        const std::vector<Coding> all{Coding::Baseline, Coding::Local, Coding::Continuation, Coding::ReverseContinuation};
        for (int d = 0; d < 20 * draws; ++d) {
            std::vector<int> cards;
            std::vector<Coding> cods;
            const int q = 2 + static_cast<int>(rng() % 3);
            for (int j = 0; j < q; ++j) {
                cards.push_back(2 + static_cast<int>(rng() % 3));
                cods.push_back(all[rng() % 4]);
            }
            const auto pv = random_distribution(specs(cards, cods), rng);
            const VarSet m = 1 + static_cast<VarSet>(rng() % ((1u << q) - 1));
            const auto mm = members(m);
            VarSet eff = 0;
            while (eff == 0)
                for (int j : mm)
                    if (rng() % 2) eff |= bit(j);
            CellIndex cell;
            for (int j : members(eff)) cell.push_back(1 + static_cast<int>(rng() % static_cast<unsigned>(cards[static_cast<std::size_t>(j)])));
            const EtaIndex idx{m, eff, cell};
            worst = std::max(worst, std::abs(brute_force_eta(pv, idx) - eta_value(pv, idx)));
        }
        out.push_back({"brute-force eta agrees with eta_value", worst < 1e-10, "max |diff| = " + oracle_detail::fmt(worst)});
    }

    struct Case {
        std::string name;
        std::vector<int> cards;
        std::vector<Coding> codings;
        Statement statement;
    };
    const Coding B = Coding::Baseline, L = Coding::Local, C = Coding::Continuation;
    const std::vector<Case> cases{
        {"baseline list context", {3, 3, 3, 3}, {B, B, B, B}, Statement::cells(bit(0), bit(1), bit(2) | bit(3), {{1, 1}, {1, 3}})},
        {"local list context", {2, 2, 4}, {L, L, L}, Statement::cells(bit(0), bit(1), bit(2), {{2}})},
        {"local threshold", {2, 2, 4}, {L, L, L}, Statement::geq(bit(0), bit(1), bit(2), {2})},
        {"continuation threshold", {2, 2, 4}, {C, C, C}, Statement::geq(bit(0), bit(1), bit(2), {2})},
        {"mixed threshold", {2, 2, 4, 4}, {B, B, L, C}, Statement::geq(bit(0), bit(1), bit(2) | bit(3), {2, 2})},
    };
    for (const auto& cs : cases) {
        const auto vars = specs(cs.cards, cs.codings);
        const Layout l(vars);
        const auto sys = generate_constraints(l, cs.statement);
        double planted = 0.0, generic = std::numeric_limits<double>::infinity();
        for (int d = 0; d < draws; ++d) {
            const auto pv = plant_distribution(PlantSpec{vars, cs.statement, seed * 1000 + static_cast<std::uint64_t>(d)});
            planted = std::max(planted, max_violation(sys, pv));
            const auto gv = sample_violating(vars, cs.statement, seed * 7919 + static_cast<std::uint64_t>(d));
            generic = std::min(generic, max_violation(sys, gv));
        }
        out.push_back({cs.name, planted < 1e-8 && generic > 1e-3,
                       "planted max = " + oracle_detail::fmt(planted) + ", generic min = " + oracle_detail::fmt(generic)});
    }
    return out;
}

}  // namespace scgm
