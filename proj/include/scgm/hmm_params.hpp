#pragma once

// Hierarchical multinomial marginal (HMM) parameters.
//
// eta^M_L(i_L | cond) = sum_{J subset L} (-1)^{|L\J|} log pi_M(i_{L\J}, ref_J(i_J), cond_{M\L})
//
// Per-variable reference events (coded levels):
//   baseline      {I}
//   local         {i+1}
//   continuation  {i+1, ..., I}
// Reverse-continuation is continuation on the relabelled levels i -> I+1-i.
// EtaIndex cells and conditioning contexts are expressed in coded levels; the
// default conditioning pins every variable of M\L at its top coded level.

#include <map>
#include <optional>
#include <sstream>

#include "scgm/tables.hpp"

namespace scgm {

struct LevelRange {
    int lo = 1;
    int hi = 1;
    bool operator==(const LevelRange&) const = default;
};

struct EtaIndex {
    VarSet marginal = 0;
    VarSet effect = 0;
    CellIndex cell;  // coded levels of members(effect), ascending variable order

    bool operator==(const EtaIndex&) const = default;
    auto operator<=>(const EtaIndex&) const = default;
};

inline std::string set_to_string(const Layout& l, VarSet s) {
    std::string out = "{";
    bool first = true;
    for (int j : members(s)) {
        out += (first ? "" : ",") + l.variable(j).name;
        first = false;
    }
    return out + "}";
}

inline std::string to_string(const Layout& l, const EtaIndex& idx) {
    std::ostringstream os;
    os << "eta^" << set_to_string(l, idx.marginal) << "_" << set_to_string(l, idx.effect) << "(";
    for (std::size_t a = 0; a < idx.cell.size(); ++a) os << (a ? "," : "") << idx.cell[a];
    os << ")";
    return os.str();
}

namespace detail {

inline LevelRange reference_range(Coding coding, int level, int card) {
    switch (coding) {
        case Coding::Baseline: return {card, card};
        case Coding::Local: return {level + 1, level + 1};
        case Coding::Continuation:
        case Coding::ReverseContinuation: return {level + 1, card};
    }
    return {card, card};
}

inline LevelRange to_original(LevelRange r, Coding coding, int card) {
    if (coding == Coding::ReverseContinuation) return {reverse_level(r.hi, card), reverse_level(r.lo, card)};
    return r;
}

inline void check_effect(const Layout& l, VarSet m, VarSet eff, const CellIndex& cell) {
    if (eff == 0) throw Error(ErrorKind::InvalidArgument, "effect set must be nonempty");
    if (!is_subset(m, l.all())) throw Error(ErrorKind::InvalidArgument, "marginal names unknown variables");
    if (!is_subset(eff, m)) throw Error(ErrorKind::InvalidArgument, "effect must be a subset of the marginal");
    const auto ev = members(eff);
    if (cell.size() != ev.size()) throw Error(ErrorKind::InvalidArgument, "effect cell arity mismatch");
    for (std::size_t a = 0; a < ev.size(); ++a)
        if (cell[a] < 1 || cell[a] > l.cardinality(ev[a]))
            throw Error(ErrorKind::LevelOutOfRange, "effect level out of range for '" + l.variable(ev[a]).name + "'");
}

}  // namespace detail

// One signed log-probability term of a contrast. `ranges` holds a coded level
// range for every member of the marginal, ascending variable order.
struct ContrastTerm {
    VarSet reference = 0;  // J: effect variables sitting at their reference event
    int sign = 1;
    std::vector<LevelRange> ranges;
};

// Conditioning of M\L given as ranges (coded levels), one per member of M\L.
using Conditioning = std::vector<LevelRange>;

inline Conditioning top_conditioning(const Layout& l, VarSet rest) {
    Conditioning c;
    for (int j : members(rest)) c.push_back({l.cardinality(j), l.cardinality(j)});
    return c;
}

inline Conditioning point_conditioning(const CellIndex& context) {
    Conditioning c;
    for (int lev : context) c.push_back({lev, lev});
    return c;
}

// Conditioning on the reference events of `ref` (given their levels) and on
// concrete levels for the rest of M\L. `levels` covers members(M\L).
inline Conditioning mixed_conditioning(const Layout& l, VarSet rest, VarSet ref, const CellIndex& levels) {
    Conditioning c;
    const auto rv = members(rest);
    if (levels.size() != rv.size()) throw Error(ErrorKind::InvalidArgument, "conditioning arity mismatch");
    for (std::size_t a = 0; a < rv.size(); ++a) {
        const int j = rv[a];
        if (ref & bit(j)) c.push_back(detail::reference_range(l.coding(j), levels[a], l.cardinality(j)));
        else c.push_back({levels[a], levels[a]});
    }
    return c;
}

// Events entering eta^M_L(cell | cond). Empty when some effect coordinate sits at
// its top level (the parameter is identically zero there).
inline std::vector<ContrastTerm> reference_descriptor(const Layout& l, VarSet m, VarSet eff, const CellIndex& cell,
                                                      const std::optional<Conditioning>& cond = std::nullopt) {
    detail::check_effect(l, m, eff, cell);
    const auto ev = members(eff);
    for (std::size_t a = 0; a < ev.size(); ++a)
        if (cell[a] == l.cardinality(ev[a])) return {};
    const VarSet rest = m & ~eff;
    const Conditioning cd = cond ? *cond : top_conditioning(l, rest);
    if (cd.size() != static_cast<std::size_t>(popcount(rest)))
        throw Error(ErrorKind::InvalidArgument, "conditioning arity mismatch");
    const auto mv = members(m);
    std::vector<ContrastTerm> out;
    for (VarSet jset : subsets(eff)) {
        ContrastTerm t;
        t.reference = jset;
        t.sign = sign_of_size(popcount(eff & ~jset));
        std::size_t ie = 0, ir = 0;
        for (int j : mv) {
            if (eff & bit(j)) {
                const int lev = cell[ie++];
                t.ranges.push_back((jset & bit(j)) ? detail::reference_range(l.coding(j), lev, l.cardinality(j))
                                                   : LevelRange{lev, lev});
            } else {
                const LevelRange r = cd[ir++];
                if (r.lo < 1 || r.hi > l.cardinality(j) || r.lo > r.hi)
                    throw Error(ErrorKind::LevelOutOfRange, "conditioning level out of range");
                t.ranges.push_back(r);
            }
        }
        out.push_back(std::move(t));
    }
    return out;
}

// A contrast compiled against the full table: each term lists the full-table
// cells whose probabilities are summed before taking the log.
struct CompiledContrast {
    struct Term {
        double sign = 1.0;
        std::vector<std::uint32_t> cells;
    };
    std::vector<Term> terms;

    template <class Vec>
    double evaluate(const Vec& p) const {
        double v = 0.0;
        for (const auto& t : terms) {
            double s = 0.0;
            for (auto k : t.cells) s += p[k];
            if (!(s > 0.0)) throw Error(ErrorKind::ZeroCell, "zero-probability event in contrast");
            v += t.sign * std::log(s);
        }
        return v;
    }
};

inline CompiledContrast compile_contrast(const Layout& l, VarSet m, const std::vector<ContrastTerm>& terms) {
    CompiledContrast out;
    const auto mv = members(m);
    for (const auto& t : terms) {
        std::vector<int> lo(static_cast<std::size_t>(l.size())), hi(static_cast<std::size_t>(l.size()));
        for (int j = 0; j < l.size(); ++j) {
            lo[static_cast<std::size_t>(j)] = 1;
            hi[static_cast<std::size_t>(j)] = l.cardinality(j);
        }
        for (std::size_t a = 0; a < mv.size(); ++a) {
            const int j = mv[a];
            const LevelRange r = detail::to_original(t.ranges[a], l.coding(j), l.cardinality(j));
            lo[static_cast<std::size_t>(j)] = r.lo;
            hi[static_cast<std::size_t>(j)] = r.hi;
        }
        CompiledContrast::Term ct;
        ct.sign = t.sign;
        for (CellOdometer it(lo, hi); !it.done(); it.next())
            ct.cells.push_back(static_cast<std::uint32_t>(l.encode(*it)));
        out.terms.push_back(std::move(ct));
    }
    return out;
}

inline CompiledContrast compile_eta(const Layout& l, const EtaIndex& idx,
                                    const std::optional<Conditioning>& cond = std::nullopt) {
    return compile_contrast(l, idx.marginal, reference_descriptor(l, idx.marginal, idx.effect, idx.cell, cond));
}

namespace detail {

inline void require_positive(const ProbabilityVector& pv) {
    if (!pv.strictly_positive())
        throw Error(ErrorKind::ZeroCell, "HMM parameters need a strictly positive distribution");
}

// Evaluates a contrast on the marginal table of M (cheaper than full-table cell lists).
inline double evaluate_on_marginal(const Layout& l, VarSet m, const std::vector<double>& marg,
                                   const std::vector<ContrastTerm>& terms) {
    const Layout sub = sub_layout(l, m);
    const auto mv = members(m);
    double v = 0.0;
    for (const auto& t : terms) {
        std::vector<int> lo, hi;
        for (std::size_t a = 0; a < mv.size(); ++a) {
            const LevelRange r = to_original(t.ranges[a], l.coding(mv[a]), l.cardinality(mv[a]));
            lo.push_back(r.lo);
            hi.push_back(r.hi);
        }
        double s = 0.0;
        for (CellOdometer it(lo, hi); !it.done(); it.next()) s += marg[sub.encode(*it)];
        if (!(s > 0.0)) throw Error(ErrorKind::ZeroCell, "zero-probability event in contrast");
        v += t.sign * std::log(s);
    }
    return v;
}

}  // namespace detail

// eta with an arbitrary conditioning of M\L (ranges in coded levels).
inline double eta_with_conditioning(const ProbabilityVector& pv, VarSet m, VarSet eff, const CellIndex& cell,
                                    const Conditioning& cond) {
    detail::require_positive(pv);
    const auto terms = reference_descriptor(pv.layout, m, eff, cell, cond);
    if (terms.empty()) return 0.0;
    return detail::evaluate_on_marginal(pv.layout, m, marginal_sums(pv.layout, pv.probs, m), terms);
}

// `conditioning` gives coded levels of members(M\L); defaults to the top cell.
inline double eta_value(const ProbabilityVector& pv, const EtaIndex& idx,
                        const std::optional<CellIndex>& conditioning = std::nullopt) {
    const VarSet rest = idx.marginal & ~idx.effect;
    const Conditioning cond = conditioning ? point_conditioning(*conditioning) : top_conditioning(pv.layout, rest);
    return eta_with_conditioning(pv, idx.marginal, idx.effect, idx.cell, cond);
}

inline double conditional_eta(const ProbabilityVector& pv, VarSet m, VarSet eff, const CellIndex& cell,
                              const CellIndex& context) {
    return eta_value(pv, EtaIndex{m, eff, cell}, context);
}

// ---------------------------------------------------------------------------
// Decomposition identities

struct IdentitySides {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual() const { return std::abs(lhs - rhs); }
};

namespace detail {

// Splits a cell on `whole` into the coordinates belonging to `part`.
inline CellIndex restrict_cell(VarSet whole, const CellIndex& cell, VarSet part) {
    CellIndex out;
    std::size_t a = 0;
    for (int j : members(whole)) {
        if (part & bit(j)) out.push_back(cell[a]);
        ++a;
    }
    return out;
}

// Levels for members(rest) where variables of `from` take their value from
// (from, from_cell) and everything else sits at the top level.
inline CellIndex levels_with_top(const Layout& l, VarSet rest, VarSet from, const CellIndex& from_cell) {
    CellIndex out;
    for (int j : members(rest)) {
        if (from & bit(j)) out.push_back(restrict_cell(from, from_cell, bit(j))[0]);
        else out.push_back(l.cardinality(j));
    }
    return out;
}

}  // namespace detail

// Splits eta_{L u C}(i_{LC}) into lower-order parameters conditioned on the
// reference events of subsets of C plus the parameter of L at C = i_C.
// `cell` is indexed over members(L u C).
inline IdentitySides decompose_block(const ProbabilityVector& pv, VarSet m, VarSet eff, VarSet c,
                                      const CellIndex& cell) {
    const Layout& l = pv.layout;
    if ((eff & c) != 0) throw Error(ErrorKind::InvalidArgument, "L and C must be disjoint");
    if (eff == 0 || !is_subset(eff | c, m)) throw Error(ErrorKind::InvalidArgument, "L, C must lie in M");
    const VarSet lc = eff | c;
    IdentitySides out;
    out.lhs = eta_value(pv, EtaIndex{m, lc, cell});
    for (VarSet jset : subsets(c)) {
        if (jset == 0) continue;
        const VarSet effj = eff | (c & ~jset);
        const VarSet rest = m & ~effj;
        // jset conditions on its reference events, M\(L u C) on the top level.
        const CellIndex levels = detail::levels_with_top(l, rest, lc, cell);
        const Conditioning cond = mixed_conditioning(l, rest, jset, levels);
        out.rhs += -sign_of_size(popcount(jset)) *
                   eta_with_conditioning(pv, m, effj, detail::restrict_cell(lc, cell, effj), cond);
    }
    const VarSet rest = m & ~eff;
    const CellIndex levels = detail::levels_with_top(l, rest, lc, cell);
    out.rhs += sign_of_size(popcount(c)) *
               eta_with_conditioning(pv, m, eff, detail::restrict_cell(lc, cell, eff), point_conditioning(levels));
    return out;
}

// eta_L(i_L | C = i_C) expressed through higher-order parameters:
//   sum_{J subset C} (-1)^{|J|} eta_{L u J}(i_{LJ} | ref events of C\J)
// `cell` is indexed over members(L u C); M\(L u C) sits at the top level.
inline IdentitySides decompose_conditional(const ProbabilityVector& pv, VarSet m, VarSet eff, VarSet c,
                                           const CellIndex& cell) {
    const Layout& l = pv.layout;
    if ((eff & c) != 0) throw Error(ErrorKind::InvalidArgument, "L and C must be disjoint");
    if (eff == 0 || !is_subset(eff | c, m)) throw Error(ErrorKind::InvalidArgument, "L, C must lie in M");
    const VarSet lc = eff | c;
    IdentitySides out;
    {
        const VarSet rest = m & ~eff;
        out.lhs = eta_with_conditioning(pv, m, eff, detail::restrict_cell(lc, cell, eff),
                                        point_conditioning(detail::levels_with_top(l, rest, lc, cell)));
    }
    for (VarSet jset : subsets(c)) {
        const VarSet effj = eff | jset;
        const VarSet rest = m & ~effj;
        const CellIndex levels = detail::levels_with_top(l, rest, lc, cell);
        const Conditioning cond = mixed_conditioning(l, rest, c & ~jset, levels);
        out.rhs += sign_of_size(popcount(jset)) *
                   eta_with_conditioning(pv, m, effj, detail::restrict_cell(lc, cell, effj), cond);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Allocation of effects to marginals

struct EffectAllocation {
    std::vector<VarSet> marginals;
    std::map<VarSet, std::size_t> assignment;  // effect -> position in marginals

    VarSet universe() const {
        VarSet u = 0;
        for (VarSet m : marginals) u |= m;
        return u;
    }
    VarSet marginal_of(VarSet effect) const {
        auto it = assignment.find(effect);
        if (it == assignment.end()) throw Error(ErrorKind::InvalidArgument, "effect not allocated");
        return marginals[it->second];
    }
    bool contains_marginal(VarSet m) const {
        return std::find(marginals.begin(), marginals.end(), m) != marginals.end();
    }
    // Effects assigned to marginal position `i`, in effect order.
    std::vector<VarSet> effects_of(std::size_t i) const {
        std::vector<VarSet> out;
        for (const auto& [e, pos] : assignment)
            if (pos == i) out.push_back(e);
        std::sort(out.begin(), out.end(), set_order_less);
        return out;
    }
};

// Assigns every effect to the first listed marginal containing it.
inline EffectAllocation allocate_effects(const std::vector<VarSet>& h) {
    if (h.empty()) throw Error(ErrorKind::InvalidArgument, "marginal list is empty");
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (h[i] == 0) throw Error(ErrorKind::InvalidArgument, "empty marginal set");
        for (std::size_t j = 0; j < i; ++j)
            if (is_subset(h[i], h[j]))
                throw Error(ErrorKind::OrderingViolation, "marginal " + std::to_string(i + 1) +
                                                               " is contained in earlier marginal " +
                                                               std::to_string(j + 1));
    }
    EffectAllocation a;
    a.marginals = h;
    const VarSet u = a.universe();
    std::vector<VarSet> uncovered;
    for (VarSet eff : subsets(u)) {
        if (eff == 0) continue;
        bool done = false;
        for (std::size_t i = 0; i < h.size() && !done; ++i)
            if (is_subset(eff, h[i])) {
                a.assignment[eff] = i;
                done = true;
            }
        if (!done) uncovered.push_back(eff);
    }
    if (!uncovered.empty())
        throw Error(ErrorKind::IncompleteCoverage,
                    std::to_string(uncovered.size()) + " effect(s) are not contained in any marginal");
    return a;
}

// All parameter indices of an allocation: allocation order, then effect order,
// then lexicographic cell below the top level.
inline std::vector<EtaIndex> eta_indices(const Layout& l, const EffectAllocation& a) {
    std::vector<EtaIndex> out;
    for (std::size_t i = 0; i < a.marginals.size(); ++i)
        for (VarSet eff : a.effects_of(i))
            for_each_cell_below_top(l.cardinalities(eff),
                                    [&](const CellIndex& c) { out.push_back(EtaIndex{a.marginals[i], eff, c}); });
    return out;
}

struct EtaVector {
    Layout layout;
    EffectAllocation allocation;
    std::vector<EtaIndex> index;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }

    std::optional<double> find(const EtaIndex& idx) const {
        auto it = std::lower_bound(sorted_.begin(), sorted_.end(), idx,
                                   [&](std::size_t k, const EtaIndex& x) { return index[k] < x; });
        if (it == sorted_.end() || !(index[*it] == idx)) return std::nullopt;
        return values[*it];
    }
    double at(const EtaIndex& idx) const {
        auto v = find(idx);
        if (!v) throw Error(ErrorKind::InvalidArgument, "parameter not in vector: " + to_string(layout, idx));
        return *v;
    }
    void build_lookup() {
        sorted_.resize(index.size());
        std::iota(sorted_.begin(), sorted_.end(), std::size_t{0});
        std::sort(sorted_.begin(), sorted_.end(), [&](std::size_t a, std::size_t b) { return index[a] < index[b]; });
    }

private:
    std::vector<std::size_t> sorted_;
};

inline EtaVector eta_vector(const ProbabilityVector& pv, const EffectAllocation& a) {
    detail::require_positive(pv);
    if (!is_subset(a.universe(), pv.layout.all()))
        throw Error(ErrorKind::InvalidArgument, "allocation names unknown variables");
    EtaVector out;
    out.layout = pv.layout;
    out.allocation = a;
    out.index = eta_indices(pv.layout, a);
    out.values.reserve(out.index.size());
    std::map<VarSet, std::vector<double>> marg;
    for (const auto& idx : out.index) {
        auto it = marg.find(idx.marginal);
        if (it == marg.end()) it = marg.emplace(idx.marginal, marginal_sums(pv.layout, pv.probs, idx.marginal)).first;
        const auto terms = reference_descriptor(pv.layout, idx.marginal, idx.effect, idx.cell);
        out.values.push_back(detail::evaluate_on_marginal(pv.layout, idx.marginal, it->second, terms));
    }
    out.build_lookup();
    return out;
}

// Baseline parameters from local ones: eta_b(i_L) = sum_{i' >= i} eta_l(i').
// Every effect variable must be local-coded (binary variables of any coding
// qualify, their codings coincide). The result is labelled baseline.
inline EtaVector baseline_from_local(const EtaVector& local) {
    const Layout& l = local.layout;
    std::vector<VariableSpec> vars = l.variables();
    for (const auto& idx : local.index)
        for (int j : members(idx.effect))
            if (l.coding(j) != Coding::Local && l.cardinality(j) > 2)
                throw Error(ErrorKind::CodingMismatch,
                            "variable '" + l.variable(j).name + "' is not local-coded; mixed coding unsupported here");
    for (auto& v : vars) v.coding = Coding::Baseline;
    EtaVector out;
    out.layout = Layout(std::move(vars));
    out.allocation = local.allocation;
    out.index = local.index;
    out.values.assign(local.values.size(), 0.0);
    for (std::size_t k = 0; k < local.index.size(); ++k) {
        const auto& idx = local.index[k];
        const auto cards = l.cardinalities(idx.effect);
        std::vector<int> hi(cards);
        for (int& h : hi) --h;
        double s = 0.0;
        for (CellOdometer it(idx.cell, hi); !it.done(); it.next())
            s += local.at(EtaIndex{idx.marginal, idx.effect, *it});
        out.values[k] = s;
    }
    out.build_lookup();
    return out;
}

inline nlohmann::json to_json(const EtaVector& v) {
    auto names = [&](VarSet s) {
        std::vector<std::string> out;
        for (int j : members(s)) out.push_back(v.layout.variable(j).name);
        return out;
    };
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t k = 0; k < v.index.size(); ++k)
        j.push_back({{"marginal", names(v.index[k].marginal)},
                     {"effect", names(v.index[k].effect)},
                     {"cell", v.index[k].cell},
                     {"value", v.values[k]}});
    return j;
}

}  // namespace scgm
