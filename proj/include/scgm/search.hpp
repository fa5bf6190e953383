#pragma once

// Three-step model search over a chain graph skeleton.
//
//   1. fit the skeleton with each single edge/arc removed;
//   2. drop every pair whose removal is not rejected, then try adding each
//      dropped pair back; select among non-rejected candidates;
//   3. for each remaining pair, try context-specific strata (asterisk
//      patterns over the admissible conditioning set), growing the context
//      greedily while the model is not rejected and the criterion improves;
//      '>=' threshold contexts compete with the grown list.

#include "scgm/fitting.hpp"
#include "scgm/regression.hpp"

namespace scgm {

enum class Criterion {
    MaxAic,  // greatest AIC among non-rejected models
    MinAic,       // smallest AIC among non-rejected models
};

inline Criterion parse_criterion(std::string_view s) {
    if (s == "paper-max-aic") return Criterion::MaxAic;
    if (s == "min-aic") return Criterion::MinAic;
    throw Error(ErrorKind::InvalidArgument, "unknown criterion '" + std::string(s) + "'");
}

inline std::string_view to_string(Criterion c) { return c == Criterion::MaxAic ? "paper-max-aic" : "min-aic"; }

struct SearchOptions {
    FitOptions fit;
    Criterion criterion = Criterion::MaxAic;
    double alpha = 0.05;
    bool stratify = true;  // run step 3
    int max_context_rounds = 8;
};

struct ModelSummary {
    int step = 0;
    std::string change;  // human-readable description of the candidate
    ChainGraph graph;
    std::vector<std::string> statements;
    double g2 = 0.0;
    int df = 0;
    double p_value = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    bool converged = false;
    bool selected = false;
    std::string error;
};

struct SearchTrace {
    std::vector<ModelSummary> models;
    ChainGraph selected;
    std::vector<Statement> selected_statements;
    std::optional<FitResult> selected_fit;
};

namespace detail {

inline std::string pair_name(const ChainGraph& g, int a, int b) {
    return g.names[static_cast<std::size_t>(a)] + "," + g.names[static_cast<std::size_t>(b)];
}

// Present pairs in a fixed order: edges, then arcs, by vertex indices.
inline std::vector<std::pair<int, int>> present_pairs(const ChainGraph& g) {
    std::vector<std::pair<int, int>> out;
    for (int a = 0; a < g.size(); ++a)
        for (int b = a + 1; b < g.size(); ++b)
            if (g.has_edge(a, b) || g.has_arc(a, b) || g.has_arc(b, a)) out.emplace_back(a, b);
    return out;
}

inline void restore_pair(ChainGraph& g, const ChainGraph& skeleton, int a, int b) {
    if (skeleton.has_edge(a, b)) g.add_edge(a, b);
    if (skeleton.has_arc(a, b)) g.arcs.emplace_back(a, b);
    if (skeleton.has_arc(b, a)) g.arcs.emplace_back(b, a);
}

class Evaluator {
public:
    Evaluator(const ContingencyTable& t, const SearchOptions& o) : table_(t), opt_(o) {}

    ModelSummary evaluate(int step, std::string change, const ChainGraph& g, FitResult* keep = nullptr) const {
        ModelSummary s;
        s.step = step;
        s.change = std::move(change);
        s.graph = g;
        try {
            std::vector<int> cards;
            for (int j = 0; j < table_.layout.size(); ++j) cards.push_back(table_.layout.cardinality(j));
            const auto stmts = stratified_markov(g, &cards);
            for (const auto& st : stmts) s.statements.push_back(to_string(g.name_space(), st));
            const auto sys = scgm_constraints(g, table_.layout);
            auto fit = fit_constrained(table_, sys, opt_.fit);
            s.g2 = fit.g2;
            s.df = fit.df;
            s.p_value = fit.p_value;
            s.aic = fit.aic;
            s.bic = fit.bic;
            s.converged = fit.converged;
            if (keep) *keep = std::move(fit);
        } catch (const Error& e) {
            s.error = e.what();
        }
        return s;
    }

    bool acceptable(const ModelSummary& m) const {
        return m.error.empty() && m.converged && m.p_value > opt_.alpha;
    }
    // Strictly better by the configured criterion.
    bool better(const ModelSummary& a, const ModelSummary& b) const {
        return opt_.criterion == Criterion::MaxAic ? a.aic > b.aic + 1e-9 : a.aic < b.aic - 1e-9;
    }

private:
    const ContingencyTable& table_;
    const SearchOptions& opt_;
};

// All asterisk patterns over `cards` except the all-asterisk one.
inline std::vector<CellIndex> asterisk_patterns(const std::vector<int>& cards) {
    std::vector<CellIndex> out;
    std::vector<int> lo(cards.size(), 0);
    for (CellOdometer it(lo, cards); !it.done(); it.next()) {
        const auto& p = *it;
        if (std::all_of(p.begin(), p.end(), [](int x) { return x == 0; })) continue;
        out.push_back(p);
    }
    return out;
}

}  // namespace detail

inline SearchTrace model_search(const ContingencyTable& table, const ChainGraph& skeleton_in,
                                const SearchOptions& opt = {}) {
    const ChainGraph skeleton = align_to(skeleton_in, table.layout);
    if (!skeleton.strata.empty()) throw Error(ErrorKind::InvalidArgument, "skeleton must not carry strata");
    analyze(skeleton);
    const auto pairs = detail::present_pairs(skeleton);
    if (pairs.empty()) throw Error(ErrorKind::InvalidArgument, "skeleton has no edges or arcs to test");
    SearchTrace trace;
    const detail::Evaluator ev(table, opt);

    // Step 1.
    std::vector<std::pair<int, int>> dropped;
    for (auto [a, b] : pairs) {
        ChainGraph g = skeleton;
        g.remove_pair(a, b);
        auto m = ev.evaluate(1, "remove " + detail::pair_name(g, a, b), g);
        if (ev.acceptable(m)) dropped.emplace_back(a, b);
        trace.models.push_back(std::move(m));
    }

    // Step 2.
    ChainGraph reduced = skeleton;
    for (auto [a, b] : dropped) reduced.remove_pair(a, b);
    std::vector<ModelSummary> cands;
    cands.push_back(ev.evaluate(2, "reduced", reduced));
    for (auto [a, b] : dropped) {
        ChainGraph g = reduced;
        detail::restore_pair(g, skeleton, a, b);
        cands.push_back(ev.evaluate(2, "reduced + " + detail::pair_name(g, a, b), g));
    }
    std::size_t best = cands.size();
    for (std::size_t k = 0; k < cands.size(); ++k)
        if (ev.acceptable(cands[k]) && (best == cands.size() || ev.better(cands[k], cands[best]))) best = k;
    ModelSummary current;
    if (best == cands.size()) {
        current = ev.evaluate(2, "skeleton (no candidate accepted)", skeleton);
        cands.push_back(current);
        best = cands.size() - 1;
    } else {
        current = cands[best];
    }
    cands[best].selected = true;
    for (auto& c : cands) trace.models.push_back(std::move(c));

    // Step 3.
    if (opt.stratify) {
        for (auto [a, b] : detail::present_pairs(current.graph)) {
            const auto info = analyze(current.graph);
            const auto ca = static_cast<std::size_t>(info.component_of[static_cast<std::size_t>(a)]);
            const auto cb = static_cast<std::size_t>(info.component_of[static_cast<std::size_t>(b)]);
            Stratum base;
            base.gamma = cb >= ca ? b : a;
            base.delta = cb >= ca ? a : b;
            const auto cg = static_cast<std::size_t>(info.component_of[static_cast<std::size_t>(base.gamma)]);
            base.given = info.pa_d[cg] & ~bit(base.delta);
            if (!base.given) continue;
            const auto cards = table.layout.cardinalities(base.given);
            const auto patterns = detail::asterisk_patterns(cards);
            std::vector<CellIndex> chosen;
            ModelSummary pair_best = current;
            bool improved = true;
            for (int round = 0; round < opt.max_context_rounds && improved; ++round) {
                improved = false;
                std::optional<ModelSummary> round_best;
                CellIndex round_pattern;
                Statement probe;
                probe.a = bit(base.gamma);
                probe.b = bit(base.delta);
                probe.c = base.given;
                probe.context = ContextKind::Cells;
                probe.patterns = chosen;
                const auto have = chosen.empty() ? std::vector<CellIndex>{} : context_cells(probe, cards);
                for (const auto& p : patterns) {
                    Statement grown = probe;
                    grown.patterns.push_back(p);
                    const auto cells = context_cells(grown, cards);
                    if (cells.size() == have.size()) continue;  // adds nothing
                    ChainGraph g = current.graph;
                    g.remove_pair(a, b);
                    Stratum s = base;
                    s.patterns = grown.patterns;
                    g.strata.push_back(s);
                    if (!validate(g).empty()) continue;
                    auto m = ev.evaluate(3, "stratum (" + detail::pair_name(g, s.gamma, s.delta) + ")", g);
                    const bool ok = ev.acceptable(m) && ev.better(m, pair_best) &&
                                    (!round_best || ev.better(m, *round_best));
                    trace.models.push_back(m);
                    if (ok) {
                        round_best = m;
                        round_pattern = p;
                    }
                }
                if (round_best) {
                    chosen.push_back(round_pattern);
                    pair_best = *round_best;
                    improved = true;
                }
            }
            // Threshold contexts compete with the greedy list.
            std::optional<ModelSummary> thr_best;
            for_each_cell(cards, [&](const CellIndex& t) {
                if (std::all_of(t.begin(), t.end(), [](int x) { return x == 1; })) return;  // every cell
                ChainGraph g = current.graph;
                g.remove_pair(a, b);
                Stratum s = base;
                s.context = ContextKind::Geq;
                s.threshold = t;
                g.strata.push_back(s);
                if (!validate(g).empty()) return;
                auto m = ev.evaluate(3, "threshold (" + detail::pair_name(g, s.gamma, s.delta) + ")", g);
                trace.models.push_back(m);
                if (ev.acceptable(m) && ev.better(m, current) && (!thr_best || ev.better(m, *thr_best))) thr_best = m;
            });
            if (thr_best && (chosen.empty() || ev.better(*thr_best, pair_best))) {
                current = *thr_best;
                continue;
            }
            if (!chosen.empty()) {
                // A context covering every cell is a missing pair.
                Statement full;
                full.a = bit(base.gamma);
                full.b = bit(base.delta);
                full.c = base.given;
                full.context = ContextKind::Cells;
                full.patterns = chosen;
                if (canonical_key(full, cards).cells.empty()) {
                    ChainGraph g = current.graph;
                    g.remove_pair(a, b);
                    pair_best = ev.evaluate(3, "remove " + detail::pair_name(g, a, b), g);
                    trace.models.push_back(pair_best);
                }
                current = pair_best;
            }
        }
    }

    // Final refit of the selected model.
    FitResult fit;
    auto final_model = ev.evaluate(0, "selected", current.graph, &fit);
    final_model.selected = true;
    trace.models.push_back(final_model);
    trace.selected = current.graph;
    std::vector<int> cards;
    for (int j = 0; j < table.layout.size(); ++j) cards.push_back(table.layout.cardinality(j));
    trace.selected_statements = stratified_markov(current.graph, &cards);
    if (final_model.error.empty()) trace.selected_fit = std::move(fit);
    return trace;
}

inline nlohmann::json to_json(const SearchTrace& t) {
    nlohmann::json models = nlohmann::json::array();
    for (const auto& m : t.models) {
        nlohmann::json j{{"step", m.step},           {"change", m.change},     {"statements", m.statements},
                         {"G2", m.g2},               {"df", m.df},             {"p_value", m.p_value},
                         {"AIC", m.aic},             {"BIC", m.bic},           {"converged", m.converged},
                         {"selected", m.selected}};
        if (!m.error.empty()) j["error"] = m.error;
        models.push_back(j);
    }
    nlohmann::json stmts = nlohmann::json::array();
    for (const auto& s : t.selected_statements) stmts.push_back(to_string(t.selected.name_space(), s));
    return {{"schema", "scgm-search/1"},
            {"aic_formula", kAicFormula},
            {"bic_formula", kBicFormula},
            {"models", models},
            {"selected_graph", to_json(t.selected)},
            {"selected_statements", stmts}};
}

// Plain-text table: one line per evaluated model.
inline std::string search_table(const SearchTrace& t) {
    std::ostringstream os;
    os << "step  sel  G2          df    p         AIC          BIC          change / statements\n";
    for (const auto& m : t.models) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-5d %-4s %-11.3f %-5d %-9.4f %-12.3f %-12.3f ", m.step, m.selected ? "*" : "",
                      m.g2, m.df, m.p_value, m.aic, m.bic);
        os << buf << m.change;
        if (!m.error.empty()) os << "  [" << m.error << "]";
        os << "\n";
    }
    os << "\nselected statements:\n";
    for (const auto& s : t.selected_statements) os << "  " << to_string(t.selected.name_space(), s) << "\n";
    return os.str();
}

}  // namespace scgm
