#pragma once

// Independence statements: marginal, conditional and context-specific.
//
// Text syntax (variable names inside braces, levels are original levels):
//   CI: {1} _||_ {2} | {3,4}
//   CI: {5} _||_ {1,2}
//   CS: {1} _||_ {2} | {3,4} = (1,*)
//   CS: {1} _||_ {2} | {3,4} = {(1,1),(2,*)}
//   CS: {1} _||_ {2} | {3,4} >= (2,2)
//   CS: {1} _||_ {2} | {3,4} <= (2,2)

#include <set>
#include <sstream>

#include "scgm/tables.hpp"

namespace scgm {

enum class ContextKind { All, Cells, Geq, Leq };

struct Statement {
    VarSet a = 0;
    VarSet b = 0;
    VarSet c = 0;
    ContextKind context = ContextKind::All;
    // Cells: one pattern per context entry over members(c); 0 stands for '*'.
    std::vector<CellIndex> patterns;
    // Geq / Leq: one threshold level per member of c.
    CellIndex threshold;

    VarSet vars() const { return a | b | c; }
    bool is_context_specific() const { return context != ContextKind::All; }

    static Statement conditional(VarSet a, VarSet b, VarSet c) { return Statement{a, b, c, ContextKind::All, {}, {}}; }
    static Statement cells(VarSet a, VarSet b, VarSet c, std::vector<CellIndex> patterns) {
        return Statement{a, b, c, ContextKind::Cells, std::move(patterns), {}};
    }
    static Statement geq(VarSet a, VarSet b, VarSet c, CellIndex t) {
        return Statement{a, b, c, ContextKind::Geq, {}, std::move(t)};
    }
    static Statement leq(VarSet a, VarSet b, VarSet c, CellIndex t) {
        return Statement{a, b, c, ContextKind::Leq, {}, std::move(t)};
    }
};

using CSStatement = Statement;
using IndependenceStatement = Statement;

inline void validate_statement(const Statement& s, const std::vector<int>& cards_of_c) {
    if (s.a == 0 || s.b == 0) throw Error(ErrorKind::InvalidArgument, "A and B must be nonempty");
    if ((s.a & s.b) || (s.a & s.c) || (s.b & s.c))
        throw Error(ErrorKind::InvalidArgument, "A, B and C must be pairwise disjoint");
    const std::size_t nc = static_cast<std::size_t>(popcount(s.c));
    if (cards_of_c.size() != nc) throw Error(ErrorKind::InvalidArgument, "cardinality list mismatch");
    if (s.context == ContextKind::Cells) {
        if (s.patterns.empty()) throw Error(ErrorKind::InvalidArgument, "context list must be nonempty");
        for (const auto& p : s.patterns) {
            if (p.size() != nc) throw Error(ErrorKind::InvalidArgument, "context arity mismatch");
            for (std::size_t k = 0; k < nc; ++k)
                if (p[k] < 0 || p[k] > cards_of_c[k])
                    throw Error(ErrorKind::LevelOutOfRange, "context level out of range");
        }
    }
    if (s.context == ContextKind::Geq || s.context == ContextKind::Leq) {
        if (s.threshold.size() != nc) throw Error(ErrorKind::InvalidArgument, "threshold arity mismatch");
        for (std::size_t k = 0; k < nc; ++k)
            if (s.threshold[k] < 1 || s.threshold[k] > cards_of_c[k])
                throw Error(ErrorKind::LevelOutOfRange, "threshold level out of range");
    }
}

// Every context cell (original levels) the statement covers, sorted and unique.
inline std::vector<CellIndex> context_cells(const Statement& s, const std::vector<int>& cards_of_c) {
    std::set<CellIndex> out;
    switch (s.context) {
        case ContextKind::All: for_each_cell(cards_of_c, [&](const CellIndex& c) { out.insert(c); }); break;
        case ContextKind::Cells:
            for (const auto& p : s.patterns) {
                std::vector<int> lo, hi;
                for (std::size_t k = 0; k < p.size(); ++k) {
                    lo.push_back(p[k] == 0 ? 1 : p[k]);
                    hi.push_back(p[k] == 0 ? cards_of_c[k] : p[k]);
                }
                for (CellOdometer it(lo, hi); !it.done(); it.next()) out.insert(*it);
            }
            break;
        case ContextKind::Geq:
            for (CellOdometer it(s.threshold, cards_of_c); !it.done(); it.next()) out.insert(*it);
            break;
        case ContextKind::Leq:
            for (CellOdometer it(std::vector<int>(cards_of_c.size(), 1), s.threshold); !it.done(); it.next())
                out.insert(*it);
            break;
    }
    return {out.begin(), out.end()};
}

// Canonical key for set comparisons: the side holding the lowest variable comes
// first; contexts are compared by their expanded cells; a context covering all
// of I_C is a plain conditional statement.
struct StatementKey {
    VarSet a = 0, b = 0, c = 0;
    std::vector<CellIndex> cells;  // empty == all of I_C
    auto operator<=>(const StatementKey&) const = default;
};

inline StatementKey canonical_key(const Statement& s, const std::vector<int>& cards_of_c) {
    StatementKey k;
    k.a = s.a;
    k.b = s.b;
    if (std::countr_zero(k.b) < std::countr_zero(k.a)) std::swap(k.a, k.b);
    k.c = s.c;
    if (s.context != ContextKind::All) {
        k.cells = context_cells(s, cards_of_c);
        std::size_t total = 1;
        for (int cd : cards_of_c) total *= static_cast<std::size_t>(cd);
        if (k.cells.size() == total) k.cells.clear();
    }
    return k;
}

// Name <-> index resolution shared by tables and graphs.
struct NameSpace {
    std::vector<std::string> names;

    int index_of(std::string_view n) const {
        for (std::size_t j = 0; j < names.size(); ++j)
            if (names[j] == n) return static_cast<int>(j);
        return -1;
    }
    std::string set_string(VarSet s) const {
        std::string out = "{";
        bool first = true;
        for (int j : members(s)) {
            out += (first ? "" : ",") + names.at(static_cast<std::size_t>(j));
            first = false;
        }
        return out + "}";
    }
    static NameSpace of(const Layout& l) {
        NameSpace ns;
        for (const auto& v : l.variables()) ns.names.push_back(v.name);
        return ns;
    }
};

namespace detail {

inline std::string pattern_string(const CellIndex& p) {
    std::string out = "(";
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (k) out += ",";
        out += p[k] == 0 ? std::string("*") : std::to_string(p[k]);
    }
    return out + ")";
}

}  // namespace detail

inline std::string to_string(const NameSpace& ns, const Statement& s) {
    std::ostringstream os;
    os << (s.is_context_specific() ? "CS: " : "CI: ") << ns.set_string(s.a) << " _||_ " << ns.set_string(s.b);
    if (s.c != 0 || s.is_context_specific()) os << " | " << ns.set_string(s.c);
    switch (s.context) {
        case ContextKind::All: break;
        case ContextKind::Cells:
            if (s.patterns.size() == 1) {
                os << " = " << detail::pattern_string(s.patterns[0]);
            } else {
                os << " = {";
                for (std::size_t k = 0; k < s.patterns.size(); ++k)
                    os << (k ? "," : "") << detail::pattern_string(s.patterns[k]);
                os << "}";
            }
            break;
        case ContextKind::Geq: os << " >= " << detail::pattern_string(s.threshold); break;
        case ContextKind::Leq: os << " <= " << detail::pattern_string(s.threshold); break;
    }
    return os.str();
}

inline std::string to_string(const Layout& l, const Statement& s) { return to_string(NameSpace::of(l), s); }

namespace detail {

class StatementParser {
public:
    StatementParser(std::string_view text, const NameSpace& ns) : s_(text), ns_(ns) {}

    Statement parse() {
        skip_ws();
        bool cs = false;
        if (accept("CS:")) cs = true;
        else if (!accept("CI:")) fail("expected 'CI:' or 'CS:'");
        Statement st;
        st.a = parse_set();
        expect("_||_");
        st.b = parse_set();
        skip_ws();
        if (accept("|")) st.c = parse_set();
        skip_ws();
        if (accept(">=")) {
            st.context = ContextKind::Geq;
            st.threshold = parse_pattern(false);
        } else if (accept("<=")) {
            st.context = ContextKind::Leq;
            st.threshold = parse_pattern(false);
        } else if (accept("=")) {
            st.context = ContextKind::Cells;
            skip_ws();
            if (accept("{")) {
                do {
                    st.patterns.push_back(parse_pattern(true));
                    skip_ws();
                } while (accept(","));
                expect("}");
            } else {
                st.patterns.push_back(parse_pattern(true));
            }
        }
        skip_ws();
        if (pos_ != s_.size()) fail("trailing characters");
        if (cs != st.is_context_specific()) fail(cs ? "CS statement needs a context" : "CI statement cannot carry a context");
        return st;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw Error(ErrorKind::Parse, msg + " at offset " + std::to_string(pos_) + " in '" + std::string(s_) + "'");
    }
    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool accept(std::string_view tok) {
        skip_ws();
        if (s_.substr(pos_, tok.size()) == tok) {
            pos_ += tok.size();
            return true;
        }
        return false;
    }
    void expect(std::string_view tok) {
        if (!accept(tok)) fail("expected '" + std::string(tok) + "'");
    }
    std::string token() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != '}' && s_[pos_] != ')' &&
               !std::isspace(static_cast<unsigned char>(s_[pos_])))
            ++pos_;
        if (start == pos_) fail("expected a name or level");
        return std::string(s_.substr(start, pos_ - start));
    }
    VarSet parse_set() {
        expect("{");
        VarSet out = 0;
        skip_ws();
        if (accept("}")) return out;
        do {
            const auto name = token();
            const int j = ns_.index_of(name);
            if (j < 0) fail("unknown variable '" + name + "'");
            out |= bit(j);
        } while (accept(","));
        expect("}");
        return out;
    }
    CellIndex parse_pattern(bool allow_star) {
        expect("(");
        CellIndex out;
        skip_ws();
        if (accept(")")) return out;
        do {
            const auto t = token();
            if (t == "*") {
                if (!allow_star) fail("'*' not allowed in a threshold");
                out.push_back(0);
            } else {
                int v = 0;
                auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
                if (ec != std::errc() || p != t.data() + t.size() || v < 1) fail("bad level '" + t + "'");
                out.push_back(v);
            }
        } while (accept(","));
        expect(")");
        return out;
    }

    std::string_view s_;
    const NameSpace& ns_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline Statement parse_statement(std::string_view text, const NameSpace& ns) {
    return detail::StatementParser(text, ns).parse();
}

inline nlohmann::json to_json(const NameSpace& ns, const Statement& s) {
    auto names = [&](VarSet v) {
        std::vector<std::string> out;
        for (int j : members(v)) out.push_back(ns.names.at(static_cast<std::size_t>(j)));
        return out;
    };
    nlohmann::json j{{"text", to_string(ns, s)}, {"A", names(s.a)}, {"B", names(s.b)}, {"C", names(s.c)}};
    switch (s.context) {
        case ContextKind::All: j["kind"] = s.c == 0 ? "marginal" : "conditional"; break;
        case ContextKind::Cells:
            j["kind"] = "context-specific";
            j["context"] = s.patterns;
            break;
        case ContextKind::Geq:
            j["kind"] = "context-specific";
            j["geq"] = s.threshold;
            break;
        case ContextKind::Leq:
            j["kind"] = "context-specific";
            j["leq"] = s.threshold;
            break;
    }
    return j;
}

}  // namespace scgm
