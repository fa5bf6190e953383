#pragma once

// Regression parameters of a chain graph model and the graph's constraint system.
//
// For a response set A inside component T with parent set P = pa_D(T):
//   eta_A(i_A | i_P) = sum_{t subset P} beta^A_t(i_{tA})
//   beta^A_t(i_{tA}) = (-1)^{|t|} eta^{A u P}_{t u A}(i_{tA})   (covariates t in baseline form)
// Local-coded covariates are brought to baseline form by cumulative sums over
// their levels; the inverse is the finite difference.

#include <map>

#include "scgm/chain_graph.hpp"
#include "scgm/cs_constraints.hpp"

namespace scgm {

struct RegressionParam {
    VarSet response = 0;
    VarSet covariates = 0;  // t
    CellIndex cell;         // coded levels over members(t | response)
    double value = 0.0;
};

struct ResponseFamily {
    VarSet response = 0;
    VarSet parents = 0;   // pa_D of the component
    VarSet marginal = 0;  // marginal holding the family's parameters
    int component = 0;
};

struct RegressionSystem {
    Layout layout;
    std::vector<ResponseFamily> families;
    std::vector<RegressionParam> betas;
    std::vector<EtaIndex> mixed_index;
    std::vector<double> mixed_values;
    bool continuation_response = false;  // some response uses continuation coding

    const ResponseFamily& family(VarSet response) const {
        for (const auto& f : families)
            if (f.response == response) return f;
        throw Error(ErrorKind::InvalidArgument, "unknown response set");
    }
    std::optional<double> beta(VarSet response, VarSet t, const CellIndex& cell) const {
        const auto it = lookup_.find(std::make_tuple(response, t, cell));
        if (it == lookup_.end()) return std::nullopt;
        return betas[it->second].value;
    }
    void build_lookup() {
        lookup_.clear();
        for (std::size_t k = 0; k < betas.size(); ++k)
            lookup_[std::make_tuple(betas[k].response, betas[k].covariates, betas[k].cell)] = k;
    }
    std::size_t dimension() const { return betas.size() + mixed_index.size(); }

private:
    std::map<std::tuple<VarSet, VarSet, CellIndex>, std::size_t> lookup_;
};

namespace detail {

// Vertices of components strictly before `c` in topological order.
inline VarSet predecessors(const GraphInfo& info, std::size_t c) {
    VarSet out = 0;
    for (std::size_t k = 0; k < c; ++k) out |= info.components[k];
    return out;
}

inline void require_same_vertices(const ChainGraph& g, const Layout& l) {
    if (g.size() != l.size()) throw Error(ErrorKind::InvalidArgument, "graph and table have different variables");
    for (int j = 0; j < l.size(); ++j)
        if (g.names[static_cast<std::size_t>(j)] != l.variable(j).name)
            throw Error(ErrorKind::InvalidArgument, "graph vertex order differs from the table; align it first");
}

inline void require_cumulative_coding(const Layout& l, VarSet covariates) {
    for (int j : members(covariates))
        if (l.cardinality(j) > 2 && is_continuation_family(l.coding(j)))
            throw Error(ErrorKind::CodingMismatch,
                        "covariate '" + l.variable(j).name + "' is continuation coded; regression form needs baseline or local");
}

// Positions (within members(eff)) of local-coded covariates with more than two levels.
inline std::vector<std::size_t> local_positions(const Layout& l, VarSet eff, VarSet covariates) {
    std::vector<std::size_t> out;
    const auto em = members(eff);
    for (std::size_t k = 0; k < em.size(); ++k)
        if ((covariates & bit(em[k])) && l.coding(em[k]) == Coding::Local && l.cardinality(em[k]) > 2) out.push_back(k);
    return out;
}

}  // namespace detail

// Effects A u B with A in a component, B among earlier components and reaching
// beyond the component's parents.
inline std::vector<EtaIndex> mixed_eta_indices(const ChainGraph& g, const Layout& l, const EffectAllocation& alloc) {
    const auto info = analyze(g);
    std::vector<EtaIndex> out;
    std::vector<VarSet> effs;
    for (std::size_t c = 0; c < info.components.size(); ++c) {
        const VarSet pred = detail::predecessors(info, c);
        for (VarSet a : subsets(info.components[c]))
            for (VarSet b : subsets(pred))
                if (a && (b & ~info.pa_d[c])) effs.push_back(a | b);
    }
    std::sort(effs.begin(), effs.end(), set_order_less);
    for (VarSet e : effs)
        for_each_cell_below_top(l.cardinalities(e),
                                [&](const CellIndex& cell) { out.push_back(EtaIndex{alloc.marginal_of(e), e, cell}); });
    return out;
}

inline std::vector<ResponseFamily> response_families(const ChainGraph& g, const EffectAllocation& alloc) {
    const auto info = analyze(g);
    std::vector<ResponseFamily> out;
    for (std::size_t c = 0; c < info.components.size(); ++c)
        for (VarSet a : subsets(info.components[c])) {
            if (!a) continue;
            ResponseFamily f;
            f.response = a;
            f.parents = info.pa_d[c];
            f.component = static_cast<int>(c);
            f.marginal = info.pa_d[c] ? (a | info.pa_d[c]) : alloc.marginal_of(a);
            for (VarSet t : subsets(f.parents))
                if (alloc.marginal_of(a | t) != f.marginal)
                    throw Error(ErrorKind::InvalidArgument, "effect " + std::to_string(a | t) +
                                                                " is not allocated to its regression marginal");
            out.push_back(f);
        }
    std::sort(out.begin(), out.end(), [](const ResponseFamily& x, const ResponseFamily& y) {
        if (x.component != y.component) return x.component < y.component;
        return set_order_less(x.response, y.response);
    });
    return out;
}

inline RegressionSystem beta_from_eta(const EtaVector& eta, const ChainGraph& g) {
    const Layout& l = eta.layout;
    detail::require_same_vertices(g, l);
    RegressionSystem sys;
    sys.layout = l;
    sys.families = response_families(g, eta.allocation);
    for (const auto& f : sys.families) {
        detail::require_cumulative_coding(l, f.parents);
        for (int j : members(f.response))
            if (l.cardinality(j) > 2 && is_continuation_family(l.coding(j))) sys.continuation_response = true;
        for (VarSet t : subsets(f.parents)) {
            const VarSet eff = t | f.response;
            const auto cards = l.cardinalities(eff);
            const auto loc = detail::local_positions(l, eff, t);
            const int sign = sign_of_size(popcount(t));
            for_each_cell_below_top(cards, [&](const CellIndex& cell) {
                // Cumulative sum over local covariate coordinates: levels >= cell.
                std::vector<int> lo(cell), hi(cell);
                for (auto k : loc) hi[k] = cards[k] - 1;
                double s = 0.0;
                for (CellOdometer it(lo, hi); !it.done(); it.next()) s += eta.at(EtaIndex{f.marginal, eff, *it});
                sys.betas.push_back(RegressionParam{f.response, t, cell, sign * s});
            });
        }
    }
    sys.mixed_index = mixed_eta_indices(g, l, eta.allocation);
    for (const auto& idx : sys.mixed_index) sys.mixed_values.push_back(eta.at(idx));
    sys.build_lookup();
    return sys;
}

// sum_t beta^A_t(i_t) at covariate context i_P (coded levels over members(P)).
inline double eta_conditional_from_beta(const RegressionSystem& sys, VarSet response, const CellIndex& i_a,
                                        const CellIndex& i_p) {
    const auto& f = sys.family(response);
    if (i_a.size() != static_cast<std::size_t>(popcount(response)) ||
        i_p.size() != static_cast<std::size_t>(popcount(f.parents)))
        throw Error(ErrorKind::InvalidArgument, "cell arity mismatch");
    const VarSet all = response | f.parents;
    CellIndex full;
    {
        std::size_t ia = 0, ip = 0;
        for (int j : members(all)) full.push_back((response & bit(j)) ? i_a[ia++] : i_p[ip++]);
    }
    double s = 0.0;
    for (VarSet t : subsets(f.parents)) {
        const CellIndex cell = detail::restrict_cell(all, full, t | response);
        bool top = false;
        const auto em = members(t | response);
        for (std::size_t k = 0; k < em.size(); ++k) top = top || cell[k] >= sys.layout.cardinality(em[k]);
        if (top) continue;
        s += sys.beta(response, t, cell).value_or(0.0);
    }
    return s;
}

// Inverse map: rebuilds the full EtaVector from betas and mixed parameters.
inline EtaVector eta_from_regression(const RegressionSystem& sys, const EffectAllocation& alloc) {
    const Layout& l = sys.layout;
    EtaVector out;
    out.layout = l;
    out.allocation = alloc;
    out.index = eta_indices(l, alloc);
    out.values.assign(out.index.size(), std::numeric_limits<double>::quiet_NaN());
    out.build_lookup();
    std::map<EtaIndex, double> known;
    for (std::size_t k = 0; k < sys.mixed_index.size(); ++k) known[sys.mixed_index[k]] = sys.mixed_values[k];
    for (const auto& f : sys.families)
        for (VarSet t : subsets(f.parents)) {
            const VarSet eff = t | f.response;
            const auto cards = l.cardinalities(eff);
            const auto loc = detail::local_positions(l, eff, t);
            const int sign = sign_of_size(popcount(t));
            for_each_cell_below_top(cards, [&](const CellIndex& cell) {
                // Finite difference over local coordinates: sum over subsets S of
                // local positions of (-1)^{|S|} b(cell + 1_S), zero at the top.
                double v = 0.0;
                for (std::size_t mask = 0; mask < (std::size_t{1} << loc.size()); ++mask) {
                    CellIndex c = cell;
                    bool top = false;
                    int flips = 0;
                    for (std::size_t q = 0; q < loc.size(); ++q)
                        if (mask & (std::size_t{1} << q)) {
                            ++c[loc[q]];
                            ++flips;
                            top = top || c[loc[q]] >= cards[loc[q]];
                        }
                    if (top) continue;
                    v += sign_of_size(flips) * sys.beta(f.response, t, c).value_or(0.0);
                }
                known[EtaIndex{f.marginal, eff, cell}] = sign * v;
            });
        }
    for (std::size_t k = 0; k < out.index.size(); ++k) {
        const auto it = known.find(out.index[k]);
        if (it == known.end())
            throw Error(ErrorKind::IncompleteCoverage, "parameter " + to_string(l, out.index[k]) + " not recoverable");
        out.values[k] = it->second;
    }
    return out;
}

// Constraint system of a stratified chain graph: every statement read off the
// graph translated in its own marginal.
inline ConstraintSystem scgm_constraints(const ChainGraph& g, const Layout& l, const EffectAllocation* alloc = nullptr,
                                         const ConstraintOptions& opt = {}) {
    detail::require_same_vertices(g, l);
    std::vector<int> cards;
    for (int j = 0; j < l.size(); ++j) cards.push_back(l.cardinality(j));
    const auto statements = stratified_markov(g, &cards);
    std::vector<ConstraintSystem> parts;
    for (const auto& s : statements) {
        ConstraintOptions o = opt;
        o.deduplicate = false;
        auto sys = generate_constraints(l, s, nullptr, o);
        if (alloc && !is_subset(s.vars(), alloc->universe()))
            throw Error(ErrorKind::InvalidArgument, "statement variables outside the allocation");
        if (sys.statements.empty()) sys.statements.push_back(s);
        parts.push_back(std::move(sys));
    }
    auto out = merge(parts, opt.deduplicate);
    // Keep the statement list even for statements whose rows all collapsed.
    out.statements = statements;
    return out;
}

// ---------------------------------------------------------------------------
// Reports

inline std::string report_csv(const RegressionSystem& sys) {
    const Layout& l = sys.layout;
    std::ostringstream os;
    os << "response_set,covariate_subset,cell,beta\n";
    for (const auto& b : sys.betas) {
        os << '"' << set_to_string(l, b.response) << "\",\"" << set_to_string(l, b.covariates) << "\",\"(";
        for (std::size_t k = 0; k < b.cell.size(); ++k) os << (k ? "," : "") << b.cell[k];
        os << ")\"," << detail::format_double(b.value) << "\n";
    }
    // Conditional eta per covariate context, one block per response set.
    for (const auto& f : sys.families) {
        if (!f.parents) continue;
        os << "\n# eta" << set_to_string(l, f.response) << " given " << set_to_string(l, f.parents) << "\n";
        os << "context";
        const auto acards = l.cardinalities(f.response);
        std::vector<CellIndex> resp;
        for_each_cell_below_top(acards, [&](const CellIndex& c) { resp.push_back(c); });
        for (const auto& c : resp) {
            os << ",\"(";
            for (std::size_t k = 0; k < c.size(); ++k) os << (k ? "," : "") << c[k];
            os << ")\"";
        }
        os << "\n";
        for_each_cell(l.cardinalities(f.parents), [&](const CellIndex& ctx) {
            os << "\"(";
            for (std::size_t k = 0; k < ctx.size(); ++k) os << (k ? "," : "") << ctx[k];
            os << ")\"";
            for (const auto& c : resp) os << "," << detail::format_double(eta_conditional_from_beta(sys, f.response, c, ctx));
            os << "\n";
        });
    }
    return os.str();
}

inline nlohmann::json report_json(const RegressionSystem& sys) {
    const Layout& l = sys.layout;
    auto names = [&](VarSet s) {
        std::vector<std::string> out;
        for (int j : members(s)) out.push_back(l.variable(j).name);
        return out;
    };
    nlohmann::json fams = nlohmann::json::array();
    for (const auto& f : sys.families) {
        nlohmann::json betas = nlohmann::json::array();
        for (const auto& b : sys.betas)
            if (b.response == f.response)
                betas.push_back({{"covariates", names(b.covariates)}, {"cell", b.cell}, {"beta", b.value}});
        nlohmann::json contexts = nlohmann::json::array();
        if (f.parents) {
            std::vector<CellIndex> resp;
            for_each_cell_below_top(l.cardinalities(f.response), [&](const CellIndex& c) { resp.push_back(c); });
            for_each_cell(l.cardinalities(f.parents), [&](const CellIndex& ctx) {
                nlohmann::json vals = nlohmann::json::array();
                for (const auto& c : resp)
                    vals.push_back({{"cell", c}, {"eta", eta_conditional_from_beta(sys, f.response, c, ctx)}});
                contexts.push_back({{"context", ctx}, {"values", vals}});
            });
        }
        fams.push_back({{"response", names(f.response)},
                        {"covariates", names(f.parents)},
                        {"marginal", names(f.marginal)},
                        {"betas", betas},
                        {"conditional_eta", contexts}});
    }
    nlohmann::json mixed = nlohmann::json::array();
    for (std::size_t k = 0; k < sys.mixed_index.size(); ++k)
        mixed.push_back({{"marginal", names(sys.mixed_index[k].marginal)},
                         {"effect", names(sys.mixed_index[k].effect)},
                         {"cell", sys.mixed_index[k].cell},
                         {"value", sys.mixed_values[k]}});
    return {{"schema", "scgm-report/1"},
            {"continuation_response", sys.continuation_response},
            {"families", fams},
            {"mixed", mixed}};
}

}  // namespace scgm
