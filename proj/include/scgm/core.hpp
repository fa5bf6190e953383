#pragma once

// Shared vocabulary: variable sets as bitmasks, logit codings, error type.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace scgm {

inline constexpr const char* kVersion = "0.3.0";

enum class ErrorKind {
    Parse,
    DuplicateCell,
    LevelOutOfRange,
    NegativeCount,
    UnknownCoding,
    ZeroCell,
    ZeroMass,
    InvalidArgument,
    OrderingViolation,
    IncompleteCoverage,
    CodingMismatch,
    Unsupported,
    InadmissibleStratum,
    InvalidGraph,
    NonConvergence,
    InfeasibleSystem,
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::Parse: return "Parse";
        case ErrorKind::DuplicateCell: return "DuplicateCell";
        case ErrorKind::LevelOutOfRange: return "LevelOutOfRange";
        case ErrorKind::NegativeCount: return "NegativeCount";
        case ErrorKind::UnknownCoding: return "UnknownCoding";
        case ErrorKind::ZeroCell: return "ZeroCell";
        case ErrorKind::ZeroMass: return "ZeroMass";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::OrderingViolation: return "OrderingViolation";
        case ErrorKind::IncompleteCoverage: return "IncompleteCoverage";
        case ErrorKind::CodingMismatch: return "CodingMismatch";
        case ErrorKind::Unsupported: return "Unsupported";
        case ErrorKind::InadmissibleStratum: return "InadmissibleStratum";
        case ErrorKind::InvalidGraph: return "InvalidGraph";
        case ErrorKind::NonConvergence: return "NonConvergence";
        case ErrorKind::InfeasibleSystem: return "InfeasibleSystem";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Bit j set <=> variable j (0-based position in the owning variable list).
using VarSet = std::uint32_t;
inline constexpr int kMaxVariables = 32;

constexpr VarSet bit(int j) { return VarSet{1} << j; }
constexpr int popcount(VarSet s) { return std::popcount(s); }
constexpr bool is_subset(VarSet a, VarSet b) { return (a & ~b) == 0; }
constexpr VarSet all_vars(int q) { return q >= 32 ? ~VarSet{0} : (bit(q) - 1); }

inline std::vector<int> members(VarSet s) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(popcount(s)));
    while (s) {
        out.push_back(std::countr_zero(s));
        s &= s - 1;
    }
    return out;
}

inline VarSet make_set(const std::vector<int>& idx) {
    VarSet s = 0;
    for (int j : idx) s |= bit(j);
    return s;
}

// All subsets of `s` (including empty and s itself), in increasing bitmask order.
inline std::vector<VarSet> subsets(VarSet s) {
    std::vector<VarSet> out;
    VarSet t = 0;
    while (true) {
        out.push_back(t);
        if (t == s) break;
        t = (t - s) & s;
    }
    return out;
}

// Order used for effects and marginals: by size, then lexicographic on the
// ascending member list.
inline bool set_order_less(VarSet a, VarSet b) {
    if (popcount(a) != popcount(b)) return popcount(a) < popcount(b);
    return members(a) < members(b);
}

inline int sign_of_size(int n) { return (n % 2 == 0) ? 1 : -1; }

enum class Coding { Baseline, Local, Continuation, ReverseContinuation };

inline std::string_view to_string(Coding c) {
    switch (c) {
        case Coding::Baseline: return "baseline";
        case Coding::Local: return "local";
        case Coding::Continuation: return "continuation";
        case Coding::ReverseContinuation: return "reverse-continuation";
    }
    return "baseline";
}

inline Coding parse_coding(std::string_view s) {
    if (s == "baseline" || s == "b") return Coding::Baseline;
    if (s == "local" || s == "l") return Coding::Local;
    if (s == "continuation" || s == "cont" || s == "c") return Coding::Continuation;
    if (s == "reverse-continuation" || s == "reverse" || s == "rc") return Coding::ReverseContinuation;
    throw Error(ErrorKind::UnknownCoding, "unknown coding keyword '" + std::string(s) + "'");
}

// Continuation after relabelling i -> I+1-i.
inline bool is_continuation_family(Coding c) {
    return c == Coding::Continuation || c == Coding::ReverseContinuation;
}

}  // namespace scgm
