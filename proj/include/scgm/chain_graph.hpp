#pragma once

// Stratified chain graphs (multivariate regression / type IV reading).
//
// Text format, one declaration per line, '#' starts a comment:
//   vertices = {1,2,3,4,5}               optional; fixes the variable order
//   component T1 = {1,2}
//   edge 1 -- 2
//   arc 1 -> 3
//   stratum (3,4) | {1,2} = {(1,*)}      also '= (1,*)', '>= (2,2)', '<= (1,1)'
//
// A stratum marks a partially missing edge or arc: the pair is treated as
// joined when reading off the remaining statements, and contributes its own
// context-specific statement.

#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>

#include "scgm/statements.hpp"

namespace scgm {

struct Stratum {
    int gamma = 0;  // later vertex (child when the pair crosses components)
    int delta = 0;
    VarSet given = 0;
    ContextKind context = ContextKind::Cells;
    std::vector<CellIndex> patterns;  // over members(given); 0 is '*'
    CellIndex threshold;
};

struct ChainGraph {
    std::vector<std::string> names;
    std::vector<std::string> component_names;
    std::vector<VarSet> components;  // as declared (or inferred)
    std::vector<std::pair<int, int>> edges;  // a < b
    std::vector<std::pair<int, int>> arcs;   // from, to
    std::vector<Stratum> strata;

    int size() const { return static_cast<int>(names.size()); }
    VarSet all() const { return all_vars(size()); }
    NameSpace name_space() const { return NameSpace{names}; }
    int index_of(std::string_view n) const { return name_space().index_of(n); }

    bool has_edge(int a, int b) const {
        if (a > b) std::swap(a, b);
        return std::find(edges.begin(), edges.end(), std::make_pair(a, b)) != edges.end();
    }
    bool has_arc(int from, int to) const {
        return std::find(arcs.begin(), arcs.end(), std::make_pair(from, to)) != arcs.end();
    }
    const Stratum* stratum_on(int a, int b) const {
        for (const auto& s : strata)
            if ((s.gamma == a && s.delta == b) || (s.gamma == b && s.delta == a)) return &s;
        return nullptr;
    }
    void add_edge(int a, int b) {
        if (a > b) std::swap(a, b);
        if (!has_edge(a, b)) edges.emplace_back(a, b);
    }
    // Drops any edge, arc or stratum between a and b.
    void remove_pair(int a, int b) {
        if (a > b) std::swap(a, b);
        std::erase(edges, std::make_pair(a, b));
        std::erase(arcs, std::make_pair(a, b));
        std::erase(arcs, std::make_pair(b, a));
        std::erase_if(strata, [&](const Stratum& s) {
            return (s.gamma == a && s.delta == b) || (s.gamma == b && s.delta == a);
        });
    }
};

struct GraphIssue {
    std::string kind;  // cycle | component | edge | arc | stratum | inadmissible
    std::string message;
};

// Derived structure of a valid graph.
struct GraphInfo {
    std::vector<VarSet> components;  // topological order
    std::vector<int> component_of;   // vertex -> position in `components`
    std::vector<VarSet> pa_d;        // per component
    std::vector<VarSet> nd;          // per component, excludes the component itself
    std::vector<VarSet> parents;     // per vertex, arcs and cross-component strata
    std::vector<VarSet> neighbours;  // per vertex, edges and within-component strata
};

namespace detail {

inline bool joined(const ChainGraph& g, int a, int b) {
    return g.has_edge(a, b) || g.has_arc(a, b) || g.has_arc(b, a) || g.stratum_on(a, b) != nullptr;
}

// Components in topological order (declaration order breaks ties); empty when
// the component graph has a cycle.
inline std::vector<std::size_t> component_order(const ChainGraph& g, const std::vector<int>& comp_of) {
    const std::size_t n = g.components.size();
    std::vector<std::set<std::size_t>> succ(n);
    auto link = [&](int from, int to) {
        const auto a = static_cast<std::size_t>(comp_of[static_cast<std::size_t>(from)]);
        const auto b = static_cast<std::size_t>(comp_of[static_cast<std::size_t>(to)]);
        if (a != b) succ[a].insert(b);
    };
    for (auto [f, t] : g.arcs) link(f, t);
    for (const auto& s : g.strata) link(s.delta, s.gamma);
    std::vector<int> indeg(n, 0);
    for (const auto& s : succ)
        for (auto b : s) ++indeg[b];
    std::vector<std::size_t> order;
    std::vector<bool> used(n, false);
    for (std::size_t step = 0; step < n; ++step) {
        std::size_t pick = n;
        for (std::size_t c = 0; c < n; ++c)
            if (!used[c] && indeg[c] == 0) {
                pick = c;
                break;
            }
        if (pick == n) return {};
        used[pick] = true;
        order.push_back(pick);
        for (auto b : succ[pick]) --indeg[b];
    }
    return order;
}

inline std::vector<int> membership(const ChainGraph& g, std::vector<GraphIssue>* issues) {
    std::vector<int> comp_of(static_cast<std::size_t>(g.size()), -1);
    for (std::size_t c = 0; c < g.components.size(); ++c)
        for (int v : members(g.components[c])) {
            if (v >= g.size()) {
                if (issues) issues->push_back({"component", "component references unknown vertex"});
                continue;
            }
            if (comp_of[static_cast<std::size_t>(v)] >= 0 && issues)
                issues->push_back({"component", "vertex '" + g.names[static_cast<std::size_t>(v)] +
                                                    "' belongs to two components"});
            comp_of[static_cast<std::size_t>(v)] = static_cast<int>(c);
        }
    if (issues)
        for (int v = 0; v < g.size(); ++v)
            if (comp_of[static_cast<std::size_t>(v)] < 0)
                issues->push_back({"component", "vertex '" + g.names[static_cast<std::size_t>(v)] +
                                                    "' is in no component"});
    return comp_of;
}

// Structure assuming membership is a partition and the order exists.
inline GraphInfo build_info(const ChainGraph& g, const std::vector<int>& comp_of, const std::vector<std::size_t>& order) {
    GraphInfo info;
    const std::size_t n = order.size();
    std::vector<std::size_t> rank(n);
    for (std::size_t k = 0; k < n; ++k) {
        rank[order[k]] = k;
        info.components.push_back(g.components[order[k]]);
    }
    info.component_of.resize(static_cast<std::size_t>(g.size()));
    for (int v = 0; v < g.size(); ++v)
        info.component_of[static_cast<std::size_t>(v)] =
            static_cast<int>(rank[static_cast<std::size_t>(comp_of[static_cast<std::size_t>(v)])]);
    info.parents.assign(static_cast<std::size_t>(g.size()), 0);
    info.neighbours.assign(static_cast<std::size_t>(g.size()), 0);
    for (auto [a, b] : g.edges) {
        info.neighbours[static_cast<std::size_t>(a)] |= bit(b);
        info.neighbours[static_cast<std::size_t>(b)] |= bit(a);
    }
    for (auto [f, t] : g.arcs) info.parents[static_cast<std::size_t>(t)] |= bit(f);
    for (const auto& s : g.strata) {
        if (info.component_of[static_cast<std::size_t>(s.gamma)] == info.component_of[static_cast<std::size_t>(s.delta)]) {
            info.neighbours[static_cast<std::size_t>(s.gamma)] |= bit(s.delta);
            info.neighbours[static_cast<std::size_t>(s.delta)] |= bit(s.gamma);
        } else {
            info.parents[static_cast<std::size_t>(s.gamma)] |= bit(s.delta);
        }
    }
    info.pa_d.assign(n, 0);
    for (std::size_t c = 0; c < n; ++c)
        for (int v : members(info.components[c])) info.pa_d[c] |= info.parents[static_cast<std::size_t>(v)];
    // Descendants via directed paths between components.
    std::vector<VarSet> desc(n, 0);
    for (std::size_t k = n; k-- > 0;) {
        for (std::size_t later = k + 1; later < n; ++later)
            if (info.pa_d[later] & info.components[k]) desc[k] |= info.components[later] | desc[later];
    }
    info.nd.assign(n, 0);
    for (std::size_t c = 0; c < n; ++c) info.nd[c] = g.all() & ~desc[c] & ~info.components[c];
    return info;
}

inline bool non_asterisk(const Stratum& s, std::size_t k) {
    if (s.context == ContextKind::Cells) {
        for (const auto& p : s.patterns)
            if (p[k] != 0) return true;
        return false;
    }
    if (s.context == ContextKind::Geq) return s.threshold[k] > 1;
    return true;  // Leq: without cardinalities every bound counts as fixed
}

}  // namespace detail

// Conditioning set and variables fixed by a stratum's statement.
inline VarSet stratum_fixed(const Stratum& s) {
    VarSet out = 0;
    const auto gm = members(s.given);
    for (std::size_t k = 0; k < gm.size(); ++k)
        if (detail::non_asterisk(s, k)) out |= bit(gm[k]);
    return out;
}

inline bool admissible_context_variable(const GraphInfo& info, int x, int gamma, int delta) {
    auto touches = [&](int v) {
        const auto u = static_cast<std::size_t>(v);
        return (info.neighbours[u] & bit(x)) || (info.parents[u] & bit(x));
    };
    return touches(gamma) && touches(delta);
}

// All violations; empty when the graph is valid.
inline std::vector<GraphIssue> validate(const ChainGraph& g, const std::vector<int>* cards = nullptr) {
    std::vector<GraphIssue> issues;
    auto name = [&](int v) {
        return (v >= 0 && v < g.size()) ? g.names[static_cast<std::size_t>(v)] : std::string("?");
    };
    if (g.size() == 0) issues.push_back({"component", "graph has no vertices"});
    const auto comp_of = detail::membership(g, &issues);
    auto in_range = [&](int v) { return v >= 0 && v < g.size(); };
    for (auto [a, b] : g.edges) {
        if (!in_range(a) || !in_range(b) || a == b) {
            issues.push_back({"edge", "malformed edge"});
            continue;
        }
        if (comp_of[static_cast<std::size_t>(a)] != comp_of[static_cast<std::size_t>(b)])
            issues.push_back({"edge", "edge " + name(a) + " -- " + name(b) + " joins different components"});
    }
    for (auto [f, t] : g.arcs) {
        if (!in_range(f) || !in_range(t) || f == t) {
            issues.push_back({"arc", "malformed arc"});
            continue;
        }
        if (comp_of[static_cast<std::size_t>(f)] == comp_of[static_cast<std::size_t>(t)])
            issues.push_back({"arc", "arc " + name(f) + " -> " + name(t) + " lies inside a component"});
        if (g.has_edge(f, t) || g.has_arc(t, f))
            issues.push_back({"arc", "pair " + name(f) + ", " + name(t) + " is joined twice"});
    }
    std::set<std::pair<int, int>> seen_pairs;
    for (const auto& s : g.strata) {
        if (!in_range(s.gamma) || !in_range(s.delta) || s.gamma == s.delta) {
            issues.push_back({"stratum", "malformed stratum pair"});
            continue;
        }
        const std::string pair = "(" + name(s.gamma) + "," + name(s.delta) + ")";
        if (!seen_pairs.insert(std::minmax(s.gamma, s.delta)).second)
            issues.push_back({"stratum", "pair " + pair + " carries two strata"});
        if (g.has_edge(s.gamma, s.delta) || g.has_arc(s.gamma, s.delta) || g.has_arc(s.delta, s.gamma))
            issues.push_back({"stratum", "stratum " + pair + " sits on a present edge"});
        if (s.given & (bit(s.gamma) | bit(s.delta)))
            issues.push_back({"stratum", "stratum " + pair + " conditions on its own pair"});
        if (!is_subset(s.given, g.all())) issues.push_back({"stratum", "stratum " + pair + " names unknown vertices"});
        const std::size_t nc = static_cast<std::size_t>(popcount(s.given));
        bool shape_ok = true;
        if (s.context == ContextKind::Cells) {
            if (s.patterns.empty()) shape_ok = false;
            for (const auto& p : s.patterns) shape_ok = shape_ok && p.size() == nc;
        } else if (s.context == ContextKind::Geq || s.context == ContextKind::Leq) {
            shape_ok = s.threshold.size() == nc;
        } else {
            shape_ok = false;
        }
        if (!shape_ok) {
            issues.push_back({"stratum", "stratum " + pair + " has a malformed context"});
            continue;
        }
        if (cards) {
            const auto gm = members(s.given);
            for (std::size_t k = 0; k < nc; ++k) {
                const int card = (*cards)[static_cast<std::size_t>(gm[k])];
                for (const auto& p : s.patterns)
                    if (p[k] < 0 || p[k] > card) issues.push_back({"stratum", "stratum " + pair + " level out of range"});
                if (!s.threshold.empty() && (s.threshold[k] < 1 || s.threshold[k] > card))
                    issues.push_back({"stratum", "stratum " + pair + " threshold out of range"});
            }
        }
    }
    if (!issues.empty()) return issues;

    const auto order = detail::component_order(g, comp_of);
    if (order.empty()) {
        issues.push_back({"cycle", "arcs form a directed or semi-directed cycle"});
        return issues;
    }
    const auto info = detail::build_info(g, comp_of, order);
    for (const auto& s : g.strata) {
        const std::string pair = "(" + name(s.gamma) + "," + name(s.delta) + ")";
        const auto cg = static_cast<std::size_t>(info.component_of[static_cast<std::size_t>(s.gamma)]);
        const auto cd = static_cast<std::size_t>(info.component_of[static_cast<std::size_t>(s.delta)]);
        if (cd > cg) {
            issues.push_back({"stratum", "stratum " + pair + " must list the later vertex first"});
            continue;
        }
        if (!is_subset(s.given, info.nd[cg] & ~bit(s.delta)))
            issues.push_back({"stratum", "stratum " + pair + " conditions on descendants of its component"});
        for (int x : members(stratum_fixed(s)))
            if (!admissible_context_variable(info, x, s.gamma, s.delta))
                issues.push_back({"inadmissible", "stratum " + pair + ": '" + name(x) +
                                                      "' is neither adjacent to nor a parent of both vertices"});
    }
    return issues;
}

inline GraphInfo analyze(const ChainGraph& g, const std::vector<int>* cards = nullptr) {
    const auto issues = validate(g, cards);
    if (!issues.empty()) {
        const bool inadmissible = std::any_of(issues.begin(), issues.end(), [](const GraphIssue& i) {
            return i.kind == "inadmissible";
        });
        throw Error(inadmissible ? ErrorKind::InadmissibleStratum : ErrorKind::InvalidGraph, issues.front().message);
    }
    const auto comp_of = detail::membership(g, nullptr);
    return detail::build_info(g, comp_of, detail::component_order(g, comp_of));
}

// ---------------------------------------------------------------------------
// Statements

namespace detail {

inline void push_unique(std::vector<Statement>& out, std::set<StatementKey>& seen, Statement s) {
    if (seen.insert(canonical_key(s, std::vector<int>(static_cast<std::size_t>(popcount(s.c)), 0))).second)
        out.push_back(std::move(s));
}

// Stratum statement; conditioning widened to the component's parents (minus
// delta) with '*' for the added variables.
inline Statement stratum_statement(const GraphInfo& info, const Stratum& s, const std::vector<int>* cards) {
    const auto c = static_cast<std::size_t>(info.component_of[static_cast<std::size_t>(s.gamma)]);
    const VarSet cset = (info.pa_d[c] & ~bit(s.delta)) | s.given;
    const auto cm = members(cset);
    auto widen = [&](const CellIndex& p, int fill) {
        CellIndex out;
        const auto gm = members(s.given);
        for (int j : cm) {
            const auto it = std::find(gm.begin(), gm.end(), j);
            out.push_back(it == gm.end() ? fill : p[static_cast<std::size_t>(it - gm.begin())]);
        }
        return out;
    };
    Statement st;
    st.a = bit(s.gamma);
    st.b = bit(s.delta);
    st.c = cset;
    st.context = s.context;
    for (const auto& p : s.patterns) st.patterns.push_back(widen(p, 0));
    if (s.context == ContextKind::Geq) st.threshold = widen(s.threshold, 1);
    if (s.context == ContextKind::Leq) {
        if (!cards) throw Error(ErrorKind::InvalidArgument, "'<=' strata need cardinalities");
        CellIndex t;
        const auto gm = members(s.given);
        for (int j : cm) {
            const auto it = std::find(gm.begin(), gm.end(), j);
            t.push_back(it == gm.end() ? (*cards)[static_cast<std::size_t>(j)]
                                       : s.threshold[static_cast<std::size_t>(it - gm.begin())]);
        }
        st.threshold = t;
    }
    const bool all_star = s.context == ContextKind::Cells &&
                          std::all_of(st.patterns.begin(), st.patterns.end(), [](const CellIndex& p) {
                              return std::all_of(p.begin(), p.end(), [](int x) { return x == 0; });
                          });
    bool covers_all = all_star;
    if (!covers_all && cards) {
        std::vector<int> cc;
        for (int j : cm) cc.push_back((*cards)[static_cast<std::size_t>(j)]);
        covers_all = canonical_key(st, cc).cells.empty();
    }
    if (covers_all) return Statement::conditional(st.a, st.b, st.c);
    return st;
}

}  // namespace detail

// Per component: C1 (component against its remaining non-descendants), C2 per
// vertex (against non-neighbours in the component given the parent set), C3
// per vertex (against the missing parents given its own parents), then one
// statement per stratum. Duplicates up to symmetry are removed.
inline std::vector<Statement> stratified_markov(const ChainGraph& g, const std::vector<int>* cards = nullptr) {
    const auto info = analyze(g, cards);
    std::vector<Statement> out;
    std::set<StatementKey> seen;
    for (std::size_t c = 0; c < info.components.size(); ++c) {
        const VarSet t = info.components[c];
        const VarSet pa = info.pa_d[c];
        const VarSet rest = info.nd[c] & ~pa;
        if (rest) detail::push_unique(out, seen, Statement::conditional(t, rest, pa));
        for (int v : members(t)) {
            const VarSet rhs = t & ~bit(v) & ~info.neighbours[static_cast<std::size_t>(v)];
            if (rhs) detail::push_unique(out, seen, Statement::conditional(bit(v), rhs, pa));
        }
        for (int v : members(t)) {
            const VarSet pg = info.parents[static_cast<std::size_t>(v)];
            const VarSet rhs = pa & ~pg;
            if (rhs) detail::push_unique(out, seen, Statement::conditional(bit(v), rhs, pg));
        }
        for (const auto& s : g.strata)
            if (info.component_of[static_cast<std::size_t>(s.gamma)] == static_cast<int>(c)) {
                auto st = detail::stratum_statement(info, s, cards);
                if (st.is_context_specific()) out.push_back(std::move(st));
                else detail::push_unique(out, seen, std::move(st));
            }
    }
    return out;
}

inline std::vector<Statement> markov_type_iv(const ChainGraph& g) {
    if (!g.strata.empty()) throw Error(ErrorKind::InvalidArgument, "graph has strata; use stratified_markov");
    return stratified_markov(g);
}

// pa_D(T) u A for nonempty A within components that have parents, plus
// nd(T) u T for every component; the full vertex set closes the list.
inline std::vector<VarSet> marginal_sets(const ChainGraph& g) {
    const auto info = analyze(g);
    std::set<VarSet> sets;
    for (std::size_t c = 0; c < info.components.size(); ++c) {
        if (info.pa_d[c])
            for (VarSet a : subsets(info.components[c]))
                if (a) sets.insert(info.pa_d[c] | a);
        sets.insert(info.nd[c] | info.components[c]);
    }
    sets.insert(g.all());
    std::vector<VarSet> out(sets.begin(), sets.end());
    std::sort(out.begin(), out.end(), set_order_less);
    return out;
}

// ---------------------------------------------------------------------------
// Parsing and serialization

namespace detail {

inline bool all_numeric(const std::vector<std::string>& v) {
    return std::all_of(v.begin(), v.end(), [](const std::string& s) {
        return !s.empty() && std::all_of(s.begin(), s.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); });
    });
}

// Graph under construction with vertex names collected in appearance order.
struct GraphDraft {
    std::vector<std::string> declared;  // from 'vertices = {...}'
    std::vector<std::string> seen;
    std::vector<std::pair<std::string, std::vector<std::string>>> components;
    std::vector<std::pair<std::string, std::string>> edges, arcs;
    struct RawStratum {
        std::string a, b;
        std::vector<std::string> given;
        ContextKind context;
        std::vector<CellIndex> patterns;
        CellIndex threshold;
    };
    std::vector<RawStratum> strata;

    void note(const std::string& v) {
        if (std::find(seen.begin(), seen.end(), v) == seen.end()) seen.push_back(v);
    }

    ChainGraph finish() const {
        ChainGraph g;
        if (!declared.empty()) {
            g.names = declared;
            for (const auto& v : seen)
                if (std::find(declared.begin(), declared.end(), v) == declared.end())
                    throw Error(ErrorKind::Parse, "vertex '" + v + "' not in the vertex list");
        } else {
            g.names = seen;
            if (all_numeric(g.names))
                std::sort(g.names.begin(), g.names.end(),
                          [](const std::string& x, const std::string& y) { return std::stoll(x) < std::stoll(y); });
        }
        if (g.names.size() > static_cast<std::size_t>(kMaxVariables)) throw Error(ErrorKind::Parse, "too many vertices");
        auto idx = [&](const std::string& n) {
            const int j = g.index_of(n);
            if (j < 0) throw Error(ErrorKind::Parse, "unknown vertex '" + n + "'");
            return j;
        };
        for (const auto& [name, vs] : components) {
            VarSet s = 0;
            for (const auto& v : vs) s |= bit(idx(v));
            g.component_names.push_back(name);
            g.components.push_back(s);
        }
        for (const auto& [a, b] : edges) g.add_edge(idx(a), idx(b));
        for (const auto& [a, b] : arcs)
            if (!g.has_arc(idx(a), idx(b))) g.arcs.emplace_back(idx(a), idx(b));
        for (const auto& r : strata) {
            Stratum s;
            s.gamma = idx(r.a);
            s.delta = idx(r.b);
            s.context = r.context;
            // Reorder context positions to ascending vertex order.
            std::vector<std::pair<int, std::size_t>> pos;
            for (std::size_t k = 0; k < r.given.size(); ++k) pos.emplace_back(idx(r.given[k]), k);
            std::sort(pos.begin(), pos.end());
            for (std::size_t k = 1; k < pos.size(); ++k)
                if (pos[k].first == pos[k - 1].first) throw Error(ErrorKind::Parse, "repeated stratum variable");
            for (const auto& [j, k] : pos) s.given |= bit(j);
            auto reorder = [&](const CellIndex& p) {
                if (p.size() != pos.size()) throw Error(ErrorKind::Parse, "stratum context arity mismatch");
                CellIndex out;
                for (const auto& pk : pos) out.push_back(p[pk.second]);
                return out;
            };
            for (const auto& p : r.patterns) s.patterns.push_back(reorder(p));
            if (!r.threshold.empty() || r.context != ContextKind::Cells) s.threshold = reorder(r.threshold);
            g.strata.push_back(std::move(s));
        }
        if (g.components.empty()) infer_components(g);
        orient_strata(g);
        return g;
    }

    // Connected components of the undirected edges, in vertex order.
    static void infer_components(ChainGraph& g) {
        std::vector<int> comp(static_cast<std::size_t>(g.size()), -1);
        int next = 0;
        for (int v = 0; v < g.size(); ++v) {
            if (comp[static_cast<std::size_t>(v)] >= 0) continue;
            std::vector<int> stack{v};
            comp[static_cast<std::size_t>(v)] = next;
            VarSet s = 0;
            while (!stack.empty()) {
                const int u = stack.back();
                stack.pop_back();
                s |= bit(u);
                for (auto [a, b] : g.edges) {
                    const int w = a == u ? b : (b == u ? a : -1);
                    if (w >= 0 && comp[static_cast<std::size_t>(w)] < 0) {
                        comp[static_cast<std::size_t>(w)] = next;
                        stack.push_back(w);
                    }
                }
            }
            g.components.push_back(s);
            g.component_names.push_back("T" + std::to_string(++next));
        }
    }

    // Cross-component strata list the later vertex first.
    static void orient_strata(ChainGraph& g) {
        const auto comp_of = membership(g, nullptr);
        if (std::find(comp_of.begin(), comp_of.end(), -1) != comp_of.end()) return;
        const auto order = component_order(g, comp_of);
        if (order.empty()) return;
        std::vector<std::size_t> rank(order.size());
        for (std::size_t k = 0; k < order.size(); ++k) rank[order[k]] = k;
        for (auto& s : g.strata) {
            if (s.gamma < 0 || s.delta < 0 || s.gamma >= g.size() || s.delta >= g.size()) continue;
            const auto rg = rank[static_cast<std::size_t>(comp_of[static_cast<std::size_t>(s.gamma)])];
            const auto rd = rank[static_cast<std::size_t>(comp_of[static_cast<std::size_t>(s.delta)])];
            if (rd > rg) std::swap(s.gamma, s.delta);
        }
    }
};

inline std::vector<std::string> parse_list(std::string_view body, int line) {
    std::vector<std::string> out;
    if (trim(body).empty()) return out;
    for (const auto& part : split(body, ',')) {
        auto t = trim(part);
        if (t.empty()) throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": empty list entry");
        out.push_back(t);
    }
    return out;
}

// Text between the first `open` at or after `from` and its matching `close`.
inline std::string_view enclosed(std::string_view s, char open, char close, std::size_t& from, int line) {
    const auto a = s.find(open, from);
    const auto b = a == std::string_view::npos ? a : s.find(close, a + 1);
    if (a == std::string_view::npos || b == std::string_view::npos)
        throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": expected '" + open + "..." + close + "'");
    from = b + 1;
    return s.substr(a + 1, b - a - 1);
}

inline CellIndex parse_levels(std::string_view body, bool allow_star, int line) {
    CellIndex out;
    for (const auto& t : parse_list(body, line)) {
        if (t == "*") {
            if (!allow_star) throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": '*' in a threshold");
            out.push_back(0);
        } else {
            const int v = parse_int(t, line);
            if (v < 1) throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": level must be >= 1");
            out.push_back(v);
        }
    }
    return out;
}

inline bool starts_with_word(std::string_view s, std::string_view w) {
    return s.substr(0, w.size()) == w && (s.size() == w.size() || std::isspace(static_cast<unsigned char>(s[w.size()])));
}

}  // namespace detail

inline ChainGraph parse_graph_text(std::istream& in) {
    detail::GraphDraft d;
    std::string raw;
    int line = 0;
    auto err = [&](const std::string& m) { return Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + m); };
    while (std::getline(in, raw)) {
        ++line;
        if (auto h = raw.find('#'); h != std::string::npos) raw.resize(h);
        const std::string s = detail::trim(raw);
        if (s.empty()) continue;
        std::string_view sv(s);
        std::size_t pos = 0;
        if (detail::starts_with_word(sv, "vertices")) {
            d.declared = detail::parse_list(detail::enclosed(sv, '{', '}', pos, line), line);
            for (const auto& v : d.declared) d.note(v);
        } else if (detail::starts_with_word(sv, "component")) {
            const auto eq = sv.find('=');
            if (eq == std::string_view::npos) throw err("expected 'component NAME = {...}'");
            std::string name = detail::trim(sv.substr(9, eq - 9));
            if (name.empty()) name = "T" + std::to_string(d.components.size() + 1);
            pos = eq;
            auto vs = detail::parse_list(detail::enclosed(sv, '{', '}', pos, line), line);
            if (vs.empty()) throw err("empty component");
            for (const auto& v : vs) d.note(v);
            d.components.emplace_back(name, vs);
        } else if (detail::starts_with_word(sv, "edge")) {
            const auto body = sv.substr(4);
            const auto dash = body.find("--");
            if (dash == std::string_view::npos) throw err("expected 'edge a -- b'");
            auto a = detail::trim(body.substr(0, dash)), b = detail::trim(body.substr(dash + 2));
            if (a.empty() || b.empty()) throw err("expected 'edge a -- b'");
            d.note(a);
            d.note(b);
            d.edges.emplace_back(a, b);
        } else if (detail::starts_with_word(sv, "arc")) {
            const auto body = sv.substr(3);
            const auto arrow = body.find("->");
            if (arrow == std::string_view::npos) throw err("expected 'arc a -> b'");
            auto a = detail::trim(body.substr(0, arrow)), b = detail::trim(body.substr(arrow + 2));
            if (a.empty() || b.empty()) throw err("expected 'arc a -> b'");
            d.note(a);
            d.note(b);
            d.arcs.emplace_back(a, b);
        } else if (detail::starts_with_word(sv, "stratum")) {
            detail::GraphDraft::RawStratum r;
            const auto pair = detail::parse_list(detail::enclosed(sv, '(', ')', pos, line), line);
            if (pair.size() != 2) throw err("stratum pair needs two vertices");
            r.a = pair[0];
            r.b = pair[1];
            const auto bar = sv.find('|', pos);
            if (bar == std::string_view::npos) throw err("expected '|' in stratum");
            pos = bar;
            r.given = detail::parse_list(detail::enclosed(sv, '{', '}', pos, line), line);
            for (const auto& v : r.given) d.note(v);
            d.note(r.a);
            d.note(r.b);
            const auto rest = detail::trim(sv.substr(pos));
            std::string_view rv(rest);
            std::size_t p2 = 0;
            if (rv.starts_with(">=") || rv.starts_with("<=")) {
                r.context = rv[0] == '>' ? ContextKind::Geq : ContextKind::Leq;
                r.threshold = detail::parse_levels(detail::enclosed(rv, '(', ')', p2, line), false, line);
            } else if (rv.starts_with("=")) {
                r.context = ContextKind::Cells;
                while (true) {
                    const auto open = rv.find('(', p2);
                    if (open == std::string_view::npos) break;
                    r.patterns.push_back(detail::parse_levels(detail::enclosed(rv, '(', ')', p2, line), true, line));
                }
                if (r.patterns.empty()) throw err("stratum needs at least one context");
            } else {
                throw err("expected '=', '>=' or '<=' after the stratum conditioning set");
            }
            d.strata.push_back(std::move(r));
        } else {
            throw err("unknown declaration '" + s + "'");
        }
    }
    return d.finish();
}

inline ChainGraph parse_graph_text(const std::string& text) {
    std::istringstream in(text);
    return parse_graph_text(in);
}

inline ChainGraph graph_from_json(const nlohmann::json& j) {
    try {
        if (j.value("schema", std::string()) != "scgm-graph/1") throw Error(ErrorKind::Parse, "expected schema 'scgm-graph/1'");
        detail::GraphDraft d;
        auto str = [](const nlohmann::json& x) { return x.is_string() ? x.get<std::string>() : x.dump(); };
        if (j.contains("vertices"))
            for (const auto& v : j.at("vertices")) d.declared.push_back(str(v));
        for (const auto& v : d.declared) d.note(v);
        for (const auto& c : j.value("components", nlohmann::json::array())) {
            std::vector<std::string> vs;
            for (const auto& v : c.at("vertices")) {
                vs.push_back(str(v));
                d.note(vs.back());
            }
            d.components.emplace_back(c.value("name", "T" + std::to_string(d.components.size() + 1)), vs);
        }
        for (const auto& e : j.value("edges", nlohmann::json::array())) {
            d.note(str(e.at(0)));
            d.note(str(e.at(1)));
            d.edges.emplace_back(str(e.at(0)), str(e.at(1)));
        }
        for (const auto& a : j.value("arcs", nlohmann::json::array())) {
            d.note(str(a.at(0)));
            d.note(str(a.at(1)));
            d.arcs.emplace_back(str(a.at(0)), str(a.at(1)));
        }
        for (const auto& s : j.value("strata", nlohmann::json::array())) {
            detail::GraphDraft::RawStratum r;
            r.a = str(s.at("pair").at(0));
            r.b = str(s.at("pair").at(1));
            for (const auto& v : s.at("given")) r.given.push_back(str(v));
            auto levels = [](const nlohmann::json& arr) {
                CellIndex out;
                for (const auto& x : arr) out.push_back(x.is_string() && x.get<std::string>() == "*" ? 0 : x.get<int>());
                return out;
            };
            if (s.contains("geq")) {
                r.context = ContextKind::Geq;
                r.threshold = levels(s.at("geq"));
            } else if (s.contains("leq")) {
                r.context = ContextKind::Leq;
                r.threshold = levels(s.at("leq"));
            } else {
                r.context = ContextKind::Cells;
                for (const auto& p : s.at("context")) r.patterns.push_back(levels(p));
            }
            for (const auto& v : r.given) d.note(v);
            d.note(r.a);
            d.note(r.b);
            d.strata.push_back(std::move(r));
        }
        return d.finish();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("graph JSON: ") + e.what());
    }
}

inline ChainGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Parse, "cannot open graph file '" + path + "'");
    const bool json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
    if (json) {
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Parse, std::string("graph JSON: ") + e.what());
        }
        return graph_from_json(j);
    }
    return parse_graph_text(in);
}

inline std::string to_text(const ChainGraph& g) {
    const auto ns = g.name_space();
    std::ostringstream os;
    os << "vertices = " << ns.set_string(g.all()) << "\n";
    for (std::size_t c = 0; c < g.components.size(); ++c)
        os << "component " << g.component_names[c] << " = " << ns.set_string(g.components[c]) << "\n";
    for (auto [a, b] : g.edges) os << "edge " << g.names[static_cast<std::size_t>(a)] << " -- " << g.names[static_cast<std::size_t>(b)] << "\n";
    for (auto [a, b] : g.arcs) os << "arc " << g.names[static_cast<std::size_t>(a)] << " -> " << g.names[static_cast<std::size_t>(b)] << "\n";
    for (const auto& s : g.strata) {
        os << "stratum (" << g.names[static_cast<std::size_t>(s.gamma)] << "," << g.names[static_cast<std::size_t>(s.delta)]
           << ") | " << ns.set_string(s.given);
        if (s.context == ContextKind::Cells) {
            os << " = {";
            for (std::size_t k = 0; k < s.patterns.size(); ++k) os << (k ? "," : "") << detail::pattern_string(s.patterns[k]);
            os << "}";
        } else {
            os << (s.context == ContextKind::Geq ? " >= " : " <= ") << detail::pattern_string(s.threshold);
        }
        os << "\n";
    }
    return os.str();
}

inline nlohmann::json to_json(const ChainGraph& g) {
    auto name = [&](int v) { return g.names[static_cast<std::size_t>(v)]; };
    auto names = [&](VarSet s) {
        std::vector<std::string> out;
        for (int v : members(s)) out.push_back(name(v));
        return out;
    };
    nlohmann::json comps = nlohmann::json::array(), edges = nlohmann::json::array(), arcs = nlohmann::json::array(),
                   strata = nlohmann::json::array();
    for (std::size_t c = 0; c < g.components.size(); ++c)
        comps.push_back({{"name", g.component_names[c]}, {"vertices", names(g.components[c])}});
    for (auto [a, b] : g.edges) edges.push_back({name(a), name(b)});
    for (auto [a, b] : g.arcs) arcs.push_back({name(a), name(b)});
    auto levels = [](const CellIndex& p) {
        nlohmann::json arr = nlohmann::json::array();
        for (int x : p) arr.push_back(x == 0 ? nlohmann::json("*") : nlohmann::json(x));
        return arr;
    };
    for (const auto& s : g.strata) {
        nlohmann::json js{{"pair", {name(s.gamma), name(s.delta)}}, {"given", names(s.given)}};
        if (s.context == ContextKind::Cells) {
            js["context"] = nlohmann::json::array();
            for (const auto& p : s.patterns) js["context"].push_back(levels(p));
        } else {
            js[s.context == ContextKind::Geq ? "geq" : "leq"] = s.threshold;
        }
        strata.push_back(js);
    }
    return {{"schema", "scgm-graph/1"}, {"vertices", g.names}, {"components", comps},
            {"edges", edges},           {"arcs", arcs},         {"strata", strata}};
}

// Same graph with vertices renumbered to follow `order` (a permutation of the names).
inline ChainGraph reorder_vertices(const ChainGraph& g, const std::vector<std::string>& order) {
    if (order.size() != g.names.size()) throw Error(ErrorKind::InvalidArgument, "vertex sets differ");
    std::vector<int> to(static_cast<std::size_t>(g.size()), -1);
    for (int v = 0; v < g.size(); ++v) {
        const auto it = std::find(order.begin(), order.end(), g.names[static_cast<std::size_t>(v)]);
        if (it == order.end())
            throw Error(ErrorKind::InvalidArgument, "vertex '" + g.names[static_cast<std::size_t>(v)] + "' missing from the table");
        to[static_cast<std::size_t>(v)] = static_cast<int>(it - order.begin());
    }
    auto map_set = [&](VarSet s) {
        VarSet out = 0;
        for (int v : members(s)) out |= bit(to[static_cast<std::size_t>(v)]);
        return out;
    };
    auto m = [&](int v) { return to[static_cast<std::size_t>(v)]; };
    ChainGraph out;
    out.names = order;
    out.component_names = g.component_names;
    for (VarSet c : g.components) out.components.push_back(map_set(c));
    for (auto [a, b] : g.edges) out.add_edge(m(a), m(b));
    for (auto [a, b] : g.arcs) out.arcs.emplace_back(m(a), m(b));
    for (const auto& s : g.strata) {
        Stratum t = s;
        t.gamma = m(s.gamma);
        t.delta = m(s.delta);
        t.given = map_set(s.given);
        // Context positions follow ascending vertex order; permute accordingly.
        const auto old_members = members(s.given);
        std::vector<std::pair<int, std::size_t>> pos;
        for (std::size_t k = 0; k < old_members.size(); ++k) pos.emplace_back(m(old_members[k]), k);
        std::sort(pos.begin(), pos.end());
        auto perm = [&](const CellIndex& p) {
            CellIndex q;
            for (const auto& pk : pos) q.push_back(p[pk.second]);
            return q;
        };
        t.patterns.clear();
        for (const auto& p : s.patterns) t.patterns.push_back(perm(p));
        if (!s.threshold.empty()) t.threshold = perm(s.threshold);
        out.strata.push_back(std::move(t));
    }
    return out;
}

// Graph re-indexed to the table's variable order.
inline ChainGraph align_to(const ChainGraph& g, const Layout& l) {
    std::vector<std::string> order;
    for (const auto& v : l.variables()) order.push_back(v.name);
    return reorder_vertices(g, order);
}

}  // namespace scgm
