#pragma once

// Linear constraints on HMM parameters implied by independence statements.
//
// Every row is sum_k coef_k * eta_k = 0 with coef_k = +-1. Parameters of the
// statement marginal M = A u B u C are used; cells are in coded levels.

#include <set>

#include "scgm/hmm_params.hpp"
#include "scgm/statements.hpp"

namespace scgm {

struct LinearConstraint {
    std::vector<std::pair<EtaIndex, int>> terms;

    bool operator==(const LinearConstraint&) const = default;
};

struct ConstraintSystem {
    std::vector<LinearConstraint> constraints;
    std::vector<std::size_t> provenance;  // constraint -> position in `statements`
    std::vector<Statement> statements;

    std::size_t size() const { return constraints.size(); }
    bool empty() const { return constraints.empty(); }
};

enum class InteractionVersion {
    Proof,      // a u b with a, b nonempty
    Statement,  // nonempty subsets of A plus nonempty subsets of B
};

struct ConstraintOptions {
    InteractionVersion version = InteractionVersion::Proof;
    bool deduplicate = true;
};

inline std::vector<VarSet> interaction_sets(VarSet a, VarSet b,
                                            InteractionVersion version = InteractionVersion::Proof) {
    if (a == 0 || b == 0 || (a & b)) throw Error(ErrorKind::InvalidArgument, "A and B must be nonempty and disjoint");
    std::set<VarSet> out;
    if (version == InteractionVersion::Proof) {
        for (VarSet x : subsets(a))
            for (VarSet y : subsets(b))
                if (x && y) out.insert(x | y);
    } else {
        for (VarSet x : subsets(a))
            if (x) out.insert(x);
        for (VarSet y : subsets(b))
            if (y) out.insert(y);
    }
    std::vector<VarSet> v(out.begin(), out.end());
    std::sort(v.begin(), v.end(), set_order_less);
    return v;
}

// Row count announced for list contexts: (prod_{A u B} I_j - 1) * |K|.
inline std::size_t expected_constraint_count(const Layout& l, const Statement& s) {
    if (s.context != ContextKind::Cells) throw Error(ErrorKind::InvalidArgument, "count defined for list contexts");
    const auto k = context_cells(s, l.cardinalities(s.c)).size();
    return (l.n_cells(s.a | s.b) - 1) * k;
}

// Pre-deduplication row count actually produced for a list context under the
// proof reading: (prod_A I_j - 1)(prod_B I_j - 1) * |K|.
inline std::size_t generated_constraint_count(const Layout& l, const Statement& s) {
    if (s.context != ContextKind::Cells) throw Error(ErrorKind::InvalidArgument, "count defined for list contexts");
    const auto k = context_cells(s, l.cardinalities(s.c)).size();
    return (l.n_cells(s.a) - 1) * (l.n_cells(s.b) - 1) * k;
}

namespace detail {

inline void check_statement(const Layout& l, const Statement& s, const EffectAllocation* alloc) {
    if (!is_subset(s.vars(), l.all())) throw Error(ErrorKind::InvalidArgument, "statement variable out of range");
    validate_statement(s, l.cardinalities(s.c));
    if (alloc && !is_subset(s.vars(), alloc->universe()))
        throw Error(ErrorKind::InvalidArgument, "statement variables outside the allocation");
}

// Per C-variable, in member order: the coded levels each term may take.
using LevelChoice = std::vector<std::vector<int>>;

// Generic row: sum_{c subset C} (-1)^{|C\c|} sum_{i_c in prod_{j in c} S_j} eta_{v u c}(i_v, i_c).
inline LinearConstraint signed_row(VarSet m, VarSet v, const CellIndex& iv, VarSet cset, const LevelChoice& choice) {
    LinearConstraint row;
    const auto cm = members(cset);
    for (VarSet c : subsets(cset)) {
        const int sign = sign_of_size(popcount(cset & ~c));
        std::vector<std::size_t> pos;
        bool empty = false;
        for (std::size_t k = 0; k < cm.size(); ++k) {
            if (!(c & bit(cm[k]))) continue;
            if (choice[k].empty()) empty = true;
            pos.push_back(k);
        }
        if (empty) continue;
        // Odometer over positions into each choice list.
        std::vector<int> plo(pos.size(), 0), phi;
        for (auto k : pos) phi.push_back(static_cast<int>(choice[k].size()) - 1);
        const VarSet eff = v | c;
        const auto em = members(eff);
        for (CellOdometer it(plo, phi); !it.done(); it.next()) {
            CellIndex cell;
            cell.reserve(em.size());
            std::size_t vi = 0, ci = 0;
            for (int j : em) {
                if (v & bit(j)) {
                    cell.push_back(iv[vi++]);
                } else {
                    const auto k = pos[ci];
                    cell.push_back(choice[k][static_cast<std::size_t>((*it)[ci])]);
                    ++ci;
                }
            }
            row.terms.emplace_back(EtaIndex{m, eff, std::move(cell)}, sign);
        }
    }
    return row;
}

inline int coded_level(const Layout& l, int j, int original) {
    return l.coding(j) == Coding::ReverseContinuation ? reverse_level(original, l.cardinality(j)) : original;
}

// Level choices for one list-context cell (original levels).
inline LevelChoice list_choice(const Layout& l, VarSet cset, const CellIndex& ctx) {
    LevelChoice out;
    const auto cm = members(cset);
    for (std::size_t k = 0; k < cm.size(); ++k) {
        const int j = cm[k];
        const int card = l.cardinality(j);
        const int lev = coded_level(l, j, ctx[k]);
        std::vector<int> s;
        if (card == 2 || l.coding(j) == Coding::Baseline) {
            if (lev < card) s.push_back(lev);
        } else if (l.coding(j) == Coding::Local) {
            for (int x = lev; x < card; ++x) s.push_back(x);
        } else {
            throw Error(ErrorKind::Unsupported, "list context on continuation-coded variable '" + l.variable(j).name + "'");
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline void append(ConstraintSystem& sys, LinearConstraint row, std::size_t origin) {
    if (row.terms.empty()) return;
    sys.constraints.push_back(std::move(row));
    sys.provenance.push_back(origin);
}

inline std::vector<std::pair<VarSet, CellIndex>> effect_cells(const Layout& l, const std::vector<VarSet>& vs) {
    std::vector<std::pair<VarSet, CellIndex>> out;
    for (VarSet v : vs) for_each_cell_below_top(l.cardinalities(v), [&](const CellIndex& c) { out.emplace_back(v, c); });
    return out;
}

// Canonical form up to global sign: terms sorted, first coefficient positive.
inline LinearConstraint canonical(LinearConstraint r) {
    std::sort(r.terms.begin(), r.terms.end());
    if (!r.terms.empty() && r.terms.front().second < 0)
        for (auto& t : r.terms) t.second = -t.second;
    return r;
}

}  // namespace detail

// Collapses rows equal up to global sign, keeping the first occurrence.
inline ConstraintSystem deduplicate(const ConstraintSystem& in) {
    ConstraintSystem out;
    out.statements = in.statements;
    std::set<std::vector<std::pair<EtaIndex, int>>> seen;
    for (std::size_t r = 0; r < in.constraints.size(); ++r) {
        auto key = detail::canonical(in.constraints[r]);
        if (!seen.insert(key.terms).second) continue;
        out.constraints.push_back(in.constraints[r]);
        out.provenance.push_back(in.provenance[r]);
    }
    return out;
}

// List contexts with any mix of baseline and local coded C-variables (binary
// variables of any coding behave as baseline).
inline ConstraintSystem constraints_list(const Layout& l, const Statement& s, const EffectAllocation* alloc = nullptr,
                                         const ConstraintOptions& opt = {}) {
    detail::check_statement(l, s, alloc);
    if (s.context != ContextKind::Cells) throw Error(ErrorKind::InvalidArgument, "list context required");
    ConstraintSystem sys;
    sys.statements.push_back(s);
    const VarSet m = s.vars();
    const auto ctx = context_cells(s, l.cardinalities(s.c));
    std::vector<detail::LevelChoice> choices;
    for (const auto& k : ctx) choices.push_back(detail::list_choice(l, s.c, k));
    for (const auto& [v, iv] : detail::effect_cells(l, interaction_sets(s.a, s.b, opt.version)))
        for (const auto& ch : choices) detail::append(sys, detail::signed_row(m, v, iv, s.c, ch), 0);
    return opt.deduplicate ? deduplicate(sys) : sys;
}

inline void require_coding(const Layout& l, VarSet c, Coding want, const char* what) {
    for (int j : members(c))
        if (l.cardinality(j) > 2 && l.coding(j) != want)
            throw Error(ErrorKind::CodingMismatch,
                        std::string(what) + " form needs '" + l.variable(j).name + "' coded " +
                            std::string(to_string(want)));
}

inline ConstraintSystem constraints_baseline(const Layout& l, const Statement& s,
                                             const EffectAllocation* alloc = nullptr,
                                             const ConstraintOptions& opt = {}) {
    require_coding(l, s.c, Coding::Baseline, "baseline");
    return constraints_list(l, s, alloc, opt);
}

inline ConstraintSystem constraints_local(const Layout& l, const Statement& s, const EffectAllocation* alloc = nullptr,
                                          const ConstraintOptions& opt = {}) {
    require_coding(l, s.c, Coding::Local, "local");
    return constraints_list(l, s, alloc, opt);
}

// Coded threshold per C-variable so that the context becomes the upper set
// {coded level >= t}.
inline CellIndex coded_threshold(const Layout& l, const Statement& s) {
    const bool geq = s.context == ContextKind::Geq;
    if (!geq && s.context != ContextKind::Leq) throw Error(ErrorKind::InvalidArgument, "threshold context required");
    CellIndex t;
    const auto cm = members(s.c);
    for (std::size_t k = 0; k < cm.size(); ++k) {
        const int j = cm[k];
        const int card = l.cardinality(j);
        const int x = s.threshold[k];
        const Coding cod = l.coding(j);
        const bool all_levels = geq ? x == 1 : x == card;
        const bool reversed = cod == Coding::ReverseContinuation;
        if (card == 2) {
            // Original level set {lo..hi} must map to a coded upper set.
            const int lo = geq ? x : 1, hi = geq ? card : x;
            const bool rev = l.coding(j) == Coding::ReverseContinuation;
            const int clo = rev ? reverse_level(hi, card) : lo;
            const int chi = rev ? reverse_level(lo, card) : hi;
            if (chi != card)
                throw Error(ErrorKind::CodingMismatch, "threshold on binary '" + l.variable(j).name + "' is a list context");
            t.push_back(clo);
            continue;
        }
        if (all_levels) {
            t.push_back(1);
        } else if (cod == Coding::Baseline) {
            throw Error(ErrorKind::CodingMismatch, "baseline-coded '" + l.variable(j).name + "' in a threshold context");
        } else if (geq && !reversed) {
            t.push_back(x);
        } else if (!geq && reversed) {
            t.push_back(reverse_level(x, card));
        } else {
            throw Error(ErrorKind::CodingMismatch, "threshold direction does not match the coding of '" +
                                                       l.variable(j).name + "'");
        }
    }
    return t;
}

// Threshold contexts: eta_{v u c}(i_v, i_c) = 0 for c nonempty and coded i_c >= t
// (below top), plus eta_v(i_v) = 0.
inline ConstraintSystem constraints_threshold(const Layout& l, const Statement& s,
                                              const EffectAllocation* alloc = nullptr,
                                              const ConstraintOptions& opt = {}) {
    detail::check_statement(l, s, alloc);
    const CellIndex t = coded_threshold(l, s);
    ConstraintSystem sys;
    sys.statements.push_back(s);
    const VarSet m = s.vars();
    const auto cm = members(s.c);
    for (const auto& [v, iv] : detail::effect_cells(l, interaction_sets(s.a, s.b, opt.version))) {
        for (VarSet c : subsets(s.c)) {
            std::vector<int> lo, hi;
            for (std::size_t k = 0; k < cm.size(); ++k)
                if (c & bit(cm[k])) {
                    lo.push_back(t[k]);
                    hi.push_back(l.cardinality(cm[k]) - 1);
                }
            const VarSet eff = v | c;
            const auto em = members(eff);
            for (CellOdometer it(lo, hi); !it.done(); it.next()) {
                CellIndex cell;
                std::size_t vi = 0, ci = 0;
                for (int j : em) cell.push_back((v & bit(j)) ? iv[vi++] : (*it)[ci++]);
                LinearConstraint row;
                row.terms.emplace_back(EtaIndex{m, eff, std::move(cell)}, 1);
                detail::append(sys, std::move(row), 0);
            }
        }
    }
    return opt.deduplicate ? deduplicate(sys) : sys;
}

// Plain (conditional or marginal) independence: every eta_{a u b u c} is zero.
inline ConstraintSystem constraints_conditional(const Layout& l, const Statement& s,
                                                const EffectAllocation* alloc = nullptr,
                                                const ConstraintOptions& opt = {}) {
    detail::check_statement(l, s, alloc);
    if (alloc && !alloc->contains_marginal(s.vars()))
        throw Error(ErrorKind::InvalidArgument, "marginal " + set_to_string(l, s.vars()) + " absent from the allocation");
    ConstraintSystem sys;
    sys.statements.push_back(s);
    const VarSet m = s.vars();
    std::set<VarSet> effs;
    for (VarSet v : interaction_sets(s.a, s.b, opt.version))
        for (VarSet c : subsets(s.c)) effs.insert(v | c);
    std::vector<VarSet> ordered(effs.begin(), effs.end());
    std::sort(ordered.begin(), ordered.end(), set_order_less);
    for (const auto& [eff, cell] : detail::effect_cells(l, ordered)) {
        LinearConstraint row;
        row.terms.emplace_back(EtaIndex{m, eff, cell}, 1);
        detail::append(sys, std::move(row), 0);
    }
    return opt.deduplicate ? deduplicate(sys) : sys;
}

// Dispatch on the context kind and the coding of the conditioning variables.
inline ConstraintSystem generate_constraints(const Layout& l, const Statement& s,
                                             const EffectAllocation* alloc = nullptr,
                                             const ConstraintOptions& opt = {}) {
    switch (s.context) {
        case ContextKind::All: return constraints_conditional(l, s, alloc, opt);
        case ContextKind::Cells: {
            // A list covering all of I_C is plain conditional independence.
            const auto cards = l.cardinalities(s.c);
            if (canonical_key(s, cards).cells.empty() && !(alloc && !alloc->contains_marginal(s.vars())))
                return constraints_conditional(l, Statement::conditional(s.a, s.b, s.c), alloc, opt);
            return constraints_list(l, s, alloc, opt);
        }
        case ContextKind::Geq:
        case ContextKind::Leq: return constraints_threshold(l, s, alloc, opt);
    }
    return {};
}

// Concatenates systems, re-basing provenance, then deduplicates.
inline ConstraintSystem merge(const std::vector<ConstraintSystem>& parts, bool dedup = true) {
    ConstraintSystem out;
    for (const auto& p : parts) {
        const std::size_t base = out.statements.size();
        out.statements.insert(out.statements.end(), p.statements.begin(), p.statements.end());
        for (std::size_t r = 0; r < p.constraints.size(); ++r) {
            out.constraints.push_back(p.constraints[r]);
            out.provenance.push_back(base + p.provenance[r]);
        }
    }
    return dedup ? deduplicate(out) : out;
}

inline double evaluate(const LinearConstraint& row, const ProbabilityVector& pv) {
    double s = 0.0;
    for (const auto& [idx, coef] : row.terms) s += coef * eta_value(pv, idx);
    return s;
}

inline double max_violation(const ConstraintSystem& sys, const ProbabilityVector& pv) {
    double worst = 0.0;
    for (const auto& r : sys.constraints) worst = std::max(worst, std::abs(evaluate(r, pv)));
    return worst;
}

inline std::string to_string(const Layout& l, const LinearConstraint& row) {
    std::string out;
    for (std::size_t k = 0; k < row.terms.size(); ++k) {
        const auto& [idx, coef] = row.terms[k];
        out += k == 0 ? (coef < 0 ? "-" : "") : (coef < 0 ? " - " : " + ");
        out += to_string(l, idx);
    }
    return out + " = 0";
}

inline nlohmann::json to_json(const Layout& l, const ConstraintSystem& sys) {
    const auto ns = NameSpace::of(l);
    auto names = [&](VarSet s) {
        std::vector<std::string> out;
        for (int j : members(s)) out.push_back(l.variable(j).name);
        return out;
    };
    nlohmann::json st = nlohmann::json::array();
    for (const auto& s : sys.statements) st.push_back(to_json(ns, s));
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < sys.constraints.size(); ++r) {
        nlohmann::json terms = nlohmann::json::array();
        for (const auto& [idx, coef] : sys.constraints[r].terms)
            terms.push_back({{"marginal", names(idx.marginal)},
                             {"effect", names(idx.effect)},
                             {"cell", idx.cell},
                             {"coefficient", coef}});
        rows.push_back({{"terms", terms}, {"statement", sys.provenance[r]}, {"text", to_string(l, sys.constraints[r])}});
    }
    return {{"schema", "scgm-constraints/1"}, {"statements", st}, {"constraints", rows}};
}

}  // namespace scgm
