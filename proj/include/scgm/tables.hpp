#pragma once

// Contingency tables over ordinal variables.
//
// Cell order is lexicographic with the LAST declared variable varying fastest.
// Levels are 1-based everywhere in the public API.

#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "scgm/core.hpp"

namespace scgm {

struct VariableSpec {
    std::string name;
    int cardinality = 2;
    Coding coding = Coding::Baseline;
    std::vector<std::string> level_labels;

    bool operator==(const VariableSpec&) const = default;
};

// Level relabelling used by reverse-continuation coding. Involution.
inline int reverse_level(int level, int cardinality) { return cardinality + 1 - level; }

using CellIndex = std::vector<int>;

// Index arithmetic for a fixed variable list.
class Layout {
public:
    Layout() = default;
    explicit Layout(std::vector<VariableSpec> vars) : vars_(std::move(vars)) {
        if (vars_.empty()) throw Error(ErrorKind::InvalidArgument, "table needs at least one variable");
        if (static_cast<int>(vars_.size()) > kMaxVariables)
            throw Error(ErrorKind::InvalidArgument, "too many variables");
        for (const auto& v : vars_) {
            if (v.cardinality < 2)
                throw Error(ErrorKind::InvalidArgument, "variable '" + v.name + "' needs cardinality >= 2");
            if (!v.level_labels.empty() && static_cast<int>(v.level_labels.size()) != v.cardinality)
                throw Error(ErrorKind::InvalidArgument, "label count mismatch for '" + v.name + "'");
        }
        for (std::size_t a = 0; a < vars_.size(); ++a)
            for (std::size_t b = a + 1; b < vars_.size(); ++b)
                if (vars_[a].name == vars_[b].name)
                    throw Error(ErrorKind::InvalidArgument, "duplicate variable name '" + vars_[a].name + "'");
        strides_.assign(vars_.size(), 1);
        for (int j = static_cast<int>(vars_.size()) - 2; j >= 0; --j)
            strides_[j] = strides_[j + 1] * static_cast<std::size_t>(vars_[j + 1].cardinality);
        n_cells_ = strides_[0] * static_cast<std::size_t>(vars_[0].cardinality);
    }

    const std::vector<VariableSpec>& variables() const { return vars_; }
    const VariableSpec& variable(int j) const { return vars_.at(static_cast<std::size_t>(j)); }
    int size() const { return static_cast<int>(vars_.size()); }
    int cardinality(int j) const { return vars_[static_cast<std::size_t>(j)].cardinality; }
    Coding coding(int j) const { return vars_[static_cast<std::size_t>(j)].coding; }
    std::size_t n_cells() const { return n_cells_; }
    std::size_t stride(int j) const { return strides_[static_cast<std::size_t>(j)]; }
    VarSet all() const { return all_vars(size()); }

    int index_of(std::string_view name) const {
        for (int j = 0; j < size(); ++j)
            if (vars_[static_cast<std::size_t>(j)].name == name) return j;
        return -1;
    }

    std::size_t encode(const CellIndex& cell) const {
        if (cell.size() != vars_.size())
            throw Error(ErrorKind::InvalidArgument, "cell arity mismatch");
        std::size_t k = 0;
        for (std::size_t j = 0; j < vars_.size(); ++j) {
            if (cell[j] < 1 || cell[j] > vars_[j].cardinality)
                throw Error(ErrorKind::LevelOutOfRange,
                            "level " + std::to_string(cell[j]) + " out of range for '" + vars_[j].name + "'");
            k += static_cast<std::size_t>(cell[j] - 1) * strides_[j];
        }
        return k;
    }

    CellIndex decode(std::size_t k) const {
        CellIndex cell(vars_.size());
        for (std::size_t j = 0; j < vars_.size(); ++j) {
            cell[j] = static_cast<int>(k / strides_[j]) + 1;
            k %= strides_[j];
        }
        return cell;
    }

    // Cardinalities of the members of `s`, in ascending variable order.
    std::vector<int> cardinalities(VarSet s) const {
        std::vector<int> out;
        for (int j : members(s)) out.push_back(cardinality(j));
        return out;
    }

    std::size_t n_cells(VarSet s) const {
        std::size_t n = 1;
        for (int j : members(s)) n *= static_cast<std::size_t>(cardinality(j));
        return n;
    }

    bool operator==(const Layout& o) const { return vars_ == o.vars_; }

private:
    std::vector<VariableSpec> vars_;
    std::vector<std::size_t> strides_;
    std::size_t n_cells_ = 0;
};

// Odometer over the cells of a product of ranges [lo_j, hi_j]; last position fastest.
class CellOdometer {
public:
    CellOdometer(std::vector<int> lo, std::vector<int> hi) : lo_(std::move(lo)), hi_(std::move(hi)), cur_(lo_) {
        for (std::size_t j = 0; j < lo_.size(); ++j)
            if (lo_[j] > hi_[j]) done_ = true;
    }
    static CellOdometer full(const std::vector<int>& cards) {
        return CellOdometer(std::vector<int>(cards.size(), 1), cards);
    }
    // Every coordinate strictly below its top level.
    static CellOdometer below_top(const std::vector<int>& cards) {
        std::vector<int> hi(cards);
        for (int& h : hi) --h;
        return CellOdometer(std::vector<int>(cards.size(), 1), hi);
    }
    bool done() const { return done_; }
    const std::vector<int>& operator*() const { return cur_; }
    void next() {
        for (int j = static_cast<int>(cur_.size()) - 1; j >= 0; --j) {
            auto u = static_cast<std::size_t>(j);
            if (cur_[u] < hi_[u]) {
                ++cur_[u];
                return;
            }
            cur_[u] = lo_[u];
        }
        done_ = true;
    }

private:
    std::vector<int> lo_, hi_, cur_;
    bool done_ = false;
};

template <class F>
void for_each_cell(const std::vector<int>& cards, F&& f) {
    for (auto it = CellOdometer::full(cards); !it.done(); it.next()) f(*it);
}

template <class F>
void for_each_cell_below_top(const std::vector<int>& cards, F&& f) {
    for (auto it = CellOdometer::below_top(cards); !it.done(); it.next()) f(*it);
}

struct ContingencyTable {
    Layout layout;
    std::vector<double> counts;

    ContingencyTable() = default;
    ContingencyTable(Layout l, std::vector<double> c) : layout(std::move(l)), counts(std::move(c)) {
        if (counts.size() != layout.n_cells())
            throw Error(ErrorKind::InvalidArgument, "count vector length does not match table size");
        for (double x : counts)
            if (!(x >= 0.0) || !std::isfinite(x)) throw Error(ErrorKind::NegativeCount, "counts must be finite and >= 0");
    }

    double total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }
    const std::vector<VariableSpec>& variables() const { return layout.variables(); }
};

struct ProbabilityVector {
    Layout layout;
    std::vector<double> probs;

    ProbabilityVector() = default;
    ProbabilityVector(Layout l, std::vector<double> p) : layout(std::move(l)), probs(std::move(p)) {
        if (probs.size() != layout.n_cells())
            throw Error(ErrorKind::InvalidArgument, "probability vector length does not match table size");
    }

    bool strictly_positive() const {
        return std::all_of(probs.begin(), probs.end(), [](double x) { return x > 0.0; });
    }
    double sum() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }
    double at(const CellIndex& c) const { return probs[layout.encode(c)]; }
};

// Builds a probability vector from arbitrary nonnegative weights.
inline ProbabilityVector normalized(Layout layout, std::vector<double> w) {
    double s = std::accumulate(w.begin(), w.end(), 0.0);
    if (!(s > 0.0)) throw Error(ErrorKind::ZeroMass, "weights sum to zero");
    for (double& x : w) x /= s;
    return ProbabilityVector(std::move(layout), std::move(w));
}

inline ProbabilityVector to_probabilities(const ContingencyTable& t, double smoothing = 0.0) {
    if (smoothing < 0.0) throw Error(ErrorKind::InvalidArgument, "smoothing must be >= 0");
    const double denom = t.total() + smoothing * static_cast<double>(t.counts.size());
    if (!(denom > 0.0)) throw Error(ErrorKind::ZeroMass, "empty table");
    std::vector<double> p(t.counts.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
        p[k] = (t.counts[k] + smoothing) / denom;
        if (p[k] == 0.0)
            throw Error(ErrorKind::ZeroCell, "cell " + std::to_string(k) + " has zero probability; smooth the table");
    }
    return ProbabilityVector(t.layout, std::move(p));
}

// Sub-layout of the variables in `s`, in ascending order.
inline Layout sub_layout(const Layout& l, VarSet s) {
    std::vector<VariableSpec> vars;
    for (int j : members(s)) vars.push_back(l.variable(j));
    return Layout(std::move(vars));
}

inline std::vector<double> marginal_sums(const Layout& l, const std::vector<double>& v, VarSet m) {
    const auto keep = members(m);
    Layout sub = sub_layout(l, m);
    std::vector<double> out(sub.n_cells(), 0.0);
    std::vector<std::size_t> sub_stride(keep.size());
    for (std::size_t a = 0; a < keep.size(); ++a) sub_stride[a] = sub.stride(static_cast<int>(a));
    for (std::size_t k = 0; k < v.size(); ++k) {
        std::size_t target = 0;
        for (std::size_t a = 0; a < keep.size(); ++a) {
            const auto lev = (k / l.stride(keep[a])) % static_cast<std::size_t>(l.cardinality(keep[a]));
            target += lev * sub_stride[a];
        }
        out[target] += v[k];
    }
    return out;
}

inline ProbabilityVector marginalize(const ProbabilityVector& pv, VarSet m) {
    if (m == 0) throw Error(ErrorKind::InvalidArgument, "marginal set must be nonempty");
    if (!is_subset(m, pv.layout.all())) throw Error(ErrorKind::InvalidArgument, "marginal set names unknown variables");
    return ProbabilityVector(sub_layout(pv.layout, m), marginal_sums(pv.layout, pv.probs, m));
}

inline ContingencyTable marginalize(const ContingencyTable& t, VarSet m) {
    if (m == 0 || !is_subset(m, t.layout.all())) throw Error(ErrorKind::InvalidArgument, "bad marginal set");
    return ContingencyTable(sub_layout(t.layout, m), marginal_sums(t.layout, t.counts, m));
}

// Conditional distribution of the remaining variables given C = cell (cell ordered like members(C)).
inline ProbabilityVector slice_conditional(const ProbabilityVector& pv, VarSet c, const CellIndex& cell) {
    const auto cv = members(c);
    if (cv.size() != cell.size()) throw Error(ErrorKind::InvalidArgument, "context arity mismatch");
    const VarSet rest = pv.layout.all() & ~c;
    if (rest == 0) throw Error(ErrorKind::InvalidArgument, "nothing left after conditioning");
    for (std::size_t a = 0; a < cv.size(); ++a)
        if (cell[a] < 1 || cell[a] > pv.layout.cardinality(cv[a]))
            throw Error(ErrorKind::LevelOutOfRange, "context level out of range");
    Layout sub = sub_layout(pv.layout, rest);
    std::vector<double> out(sub.n_cells(), 0.0);
    const auto rv = members(rest);
    for (std::size_t k = 0; k < pv.probs.size(); ++k) {
        bool match = true;
        for (std::size_t a = 0; a < cv.size() && match; ++a) {
            const int lev = static_cast<int>((k / pv.layout.stride(cv[a])) % static_cast<std::size_t>(pv.layout.cardinality(cv[a]))) + 1;
            match = lev == cell[a];
        }
        if (!match) continue;
        std::size_t target = 0;
        for (std::size_t a = 0; a < rv.size(); ++a) {
            const auto lev = (k / pv.layout.stride(rv[a])) % static_cast<std::size_t>(pv.layout.cardinality(rv[a]));
            target += lev * sub.stride(static_cast<int>(a));
        }
        out[target] += pv.probs[k];
    }
    const double mass = std::accumulate(out.begin(), out.end(), 0.0);
    if (!(mass > 0.0)) throw Error(ErrorKind::ZeroMass, "conditioning slice has zero mass");
    for (double& x : out) x /= mass;
    return ProbabilityVector(std::move(sub), std::move(out));
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_double(const std::string& s, int line) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": bad number '" + s + "'");
    return v;
}

inline int parse_int(const std::string& s, int line) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": bad integer '" + s + "'");
    return v;
}

inline std::string format_double(double x) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, p);
}

inline ContingencyTable assemble(std::vector<VariableSpec> vars,
                                 const std::vector<std::pair<CellIndex, double>>& rows) {
    Layout layout(std::move(vars));
    std::vector<double> counts(layout.n_cells(), 0.0);
    std::vector<bool> seen(layout.n_cells(), false);
    for (const auto& [cell, count] : rows) {
        const auto k = layout.encode(cell);
        if (seen[k]) throw Error(ErrorKind::DuplicateCell, "cell listed twice");
        if (count < 0.0) throw Error(ErrorKind::NegativeCount, "negative count");
        seen[k] = true;
        counts[k] = count;
    }
    return ContingencyTable(std::move(layout), std::move(counts));
}

}  // namespace detail

// CSV layout:
//   variable,cardinality,coding[,labels]
//   X1,2,baseline
//   ...
//   cell:1,2,10
// Labels (optional) are separated by ';'. Missing cells count 0.
inline ContingencyTable load_table_csv(std::istream& in) {
    std::vector<VariableSpec> vars;
    std::vector<std::pair<CellIndex, double>> rows;
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.rfind("cell:", 0) == 0) {
            if (vars.empty()) throw Error(ErrorKind::Parse, "cell row before variable declarations");
            std::string body = t.substr(5);
            body.erase(std::remove(body.begin(), body.end(), '<'), body.end());
            body.erase(std::remove(body.begin(), body.end(), '>'), body.end());
            auto f = detail::split(body, ',');
            if (f.size() != vars.size() + 1)
                throw Error(ErrorKind::Parse, "line " + std::to_string(lineno) + ": expected " +
                                                  std::to_string(vars.size()) + " levels and a count");
            CellIndex cell;
            for (std::size_t j = 0; j < vars.size(); ++j) cell.push_back(detail::parse_int(f[j], lineno));
            const double c = detail::parse_double(f.back(), lineno);
            if (c < 0.0) throw Error(ErrorKind::NegativeCount, "line " + std::to_string(lineno) + ": negative count");
            rows.emplace_back(std::move(cell), c);
            continue;
        }
        auto f = detail::split(t, ',');
        if (!header_seen) {
            if (f.size() < 3 || f[0] != "variable" || f[1] != "cardinality" || f[2] != "coding")
                throw Error(ErrorKind::Parse, "missing 'variable,cardinality,coding' header");
            header_seen = true;
            continue;
        }
        if (!rows.empty()) throw Error(ErrorKind::Parse, "variable declaration after cell rows");
        if (f.size() < 3) throw Error(ErrorKind::Parse, "line " + std::to_string(lineno) + ": short variable row");
        VariableSpec v;
        v.name = f[0];
        v.cardinality = detail::parse_int(f[1], lineno);
        v.coding = parse_coding(f[2]);
        if (f.size() > 3 && !f[3].empty()) v.level_labels = detail::split(f[3], ';');
        vars.push_back(std::move(v));
    }
    if (vars.empty()) throw Error(ErrorKind::Parse, "no variables declared");
    return detail::assemble(std::move(vars), rows);
}

inline ContingencyTable table_from_json(const nlohmann::json& j) {
    try {
        if (j.value("schema", std::string()) != "scgm-table/1")
            throw Error(ErrorKind::Parse, "expected schema 'scgm-table/1'");
        std::vector<VariableSpec> vars;
        for (const auto& jv : j.at("variables")) {
            VariableSpec v;
            v.name = jv.at("name").get<std::string>();
            v.cardinality = jv.at("cardinality").get<int>();
            v.coding = parse_coding(jv.value("coding", std::string("baseline")));
            if (jv.contains("labels")) v.level_labels = jv.at("labels").get<std::vector<std::string>>();
            vars.push_back(std::move(v));
        }
        std::vector<std::pair<CellIndex, double>> rows;
        for (const auto& jc : j.at("cells")) {
            const double c = jc.at("count").get<double>();
            if (c < 0.0) throw Error(ErrorKind::NegativeCount, "negative count");
            rows.emplace_back(jc.at("cell").get<CellIndex>(), c);
        }
        return detail::assemble(std::move(vars), rows);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, e.what());
    }
}

enum class TableFormat { Csv, Json };

inline ContingencyTable load_table(std::istream& in, TableFormat fmt) {
    if (fmt == TableFormat::Csv) return load_table_csv(in);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, e.what());
    }
    return table_from_json(j);
}

inline std::string serialize_csv(const ContingencyTable& t) {
    std::ostringstream os;
    os << "variable,cardinality,coding";
    const bool labels = std::any_of(t.variables().begin(), t.variables().end(),
                                    [](const VariableSpec& v) { return !v.level_labels.empty(); });
    if (labels) os << ",labels";
    os << '\n';
    for (const auto& v : t.variables()) {
        os << v.name << ',' << v.cardinality << ',' << to_string(v.coding);
        if (labels) {
            os << ',';
            for (std::size_t i = 0; i < v.level_labels.size(); ++i) os << (i ? ";" : "") << v.level_labels[i];
        }
        os << '\n';
    }
    for (std::size_t k = 0; k < t.counts.size(); ++k) {
        const auto cell = t.layout.decode(k);
        os << "cell:";
        for (std::size_t j = 0; j < cell.size(); ++j) os << (j ? "," : "") << cell[j];
        os << ',' << detail::format_double(t.counts[k]) << '\n';
    }
    return os.str();
}

inline nlohmann::json to_json(const ContingencyTable& t) {
    nlohmann::json j;
    j["schema"] = "scgm-table/1";
    j["variables"] = nlohmann::json::array();
    for (const auto& v : t.variables()) {
        nlohmann::json jv{{"name", v.name}, {"cardinality", v.cardinality}, {"coding", std::string(to_string(v.coding))}};
        if (!v.level_labels.empty()) jv["labels"] = v.level_labels;
        j["variables"].push_back(jv);
    }
    j["cells"] = nlohmann::json::array();
    for (std::size_t k = 0; k < t.counts.size(); ++k)
        j["cells"].push_back({{"cell", t.layout.decode(k)}, {"count", t.counts[k]}});
    return j;
}

}  // namespace scgm
