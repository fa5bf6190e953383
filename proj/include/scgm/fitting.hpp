#pragma once

// Constrained multinomial maximum likelihood under linear constraints on HMM
// parameters.
//
// Works on theta = log m (expected counts) with Poisson kernel l = n'theta - 1'm.
// Each iteration solves the linearised Lagrange system (Fisher scoring):
//   lambda = -(H' D^-1 H)^+ (h + H' D^-1 (n - m))
//   dtheta = D^-1 (n - m + H lambda)
// with D = diag(m) and H the constraint Jacobian in theta, then halves the step
// until an exact-penalty merit decreases. The constraints are scale free, so
// the Poisson optimum has sum(m) = N.

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "scgm/cs_constraints.hpp"

namespace scgm {

// ---------------------------------------------------------------------------
// Chi-square tail

namespace detail {

// Regularized lower incomplete gamma by series; valid for x < a + 1.
inline double gamma_p_series(double a, double x) {
    double term = 1.0 / a, sum = term;
    for (int n = 1; n < 10000; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-17) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma by continued fraction (modified Lentz); x >= a + 1.
inline double gamma_q_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

// Q(a, x), the regularized upper incomplete gamma function.
inline double gamma_q(double a, double x) {
    if (!(a > 0.0) || x < 0.0 || std::isnan(x)) throw Error(ErrorKind::InvalidArgument, "gamma_q needs a > 0, x >= 0");
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_fraction(a, x);
}

// Upper tail of chi-square(df) at x. df = 0 has no tail; 1 is returned.
inline double chisq_sf(double x, double df) {
    if (df <= 0.0) return 1.0;
    if (x <= 0.0) return 1.0;
    return gamma_q(df / 2.0, x / 2.0);
}

struct InformationCriteria {
    double aic = 0.0;
    double bic = 0.0;
};

inline constexpr const char* kAicFormula = "AIC = G2 - 2*(n_cells - df)";
inline constexpr const char* kBicFormula = "BIC = G2 - ln(N)*(n_cells - df)";

inline InformationCriteria information_criteria(double g2, double df, double n_cells, double n) {
    if (df < 0) throw Error(ErrorKind::InvalidArgument, "df must be >= 0");
    const double free = n_cells - df;
    return {g2 - 2.0 * free, g2 - std::log(n) * free};
}

// ---------------------------------------------------------------------------
// Compiled constraint rows

// Rows as weighted sums of log event masses; events are full-table cell lists.
class CompiledSystem {
public:
    CompiledSystem(const Layout& l, const ConstraintSystem& sys) : n_cells_(l.n_cells()) {
        std::map<std::vector<std::uint32_t>, int> ids;
        for (const auto& row : sys.constraints) {
            std::map<int, double> w;
            for (const auto& [idx, coef] : row.terms) {
                const auto cc = compile_eta(l, idx);
                for (const auto& t : cc.terms) {
                    auto cells = t.cells;
                    std::sort(cells.begin(), cells.end());
                    auto [it, fresh] = ids.emplace(cells, static_cast<int>(events_.size()));
                    if (fresh) events_.push_back(std::move(cells));
                    w[it->second] += coef * t.sign;
                }
            }
            std::vector<std::pair<int, double>> r;
            for (auto [e, x] : w)
                if (x != 0.0) r.emplace_back(e, x);
            rows_.push_back(std::move(r));
        }
    }

    std::size_t rows() const { return rows_.size(); }
    std::size_t cells() const { return n_cells_; }

    // Event masses; false when some event has no mass.
    bool masses(const Eigen::VectorXd& m, Eigen::VectorXd& s) const {
        s.resize(static_cast<Eigen::Index>(events_.size()));
        for (std::size_t e = 0; e < events_.size(); ++e) {
            double x = 0.0;
            for (auto c : events_[e]) x += m[c];
            if (!(x > 0.0)) return false;
            s[static_cast<Eigen::Index>(e)] = x;
        }
        return true;
    }

    Eigen::VectorXd values(const Eigen::VectorXd& s) const {
        Eigen::VectorXd h(static_cast<Eigen::Index>(rows_.size()));
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            double v = 0.0;
            for (auto [e, w] : rows_[r]) v += w * std::log(s[e]);
            h[static_cast<Eigen::Index>(r)] = v;
        }
        return h;
    }

    // d h / d m (rows x cells); multiply columns by m for the theta Jacobian.
    Eigen::MatrixXd jacobian_m(const Eigen::VectorXd& s) const {
        Eigen::MatrixXd j = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows_.size()), static_cast<Eigen::Index>(n_cells_));
        for (std::size_t r = 0; r < rows_.size(); ++r)
            for (auto [e, w] : rows_[r]) {
                const double g = w / s[e];
                for (auto c : events_[static_cast<std::size_t>(e)]) j(static_cast<Eigen::Index>(r), c) += g;
            }
        return j;
    }

private:
    std::size_t n_cells_;
    std::vector<std::vector<std::uint32_t>> events_;
    std::vector<std::vector<std::pair<int, double>>> rows_;
};

// Numerical rank with threshold sigma_max * 1e-10 * rows.
inline int numerical_rank(const Eigen::MatrixXd& a) {
    if (a.rows() == 0 || a.cols() == 0) return 0;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv[0] == 0.0) return 0;
    const double tol = sv[0] * 1e-10 * static_cast<double>(a.rows());
    int r = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
        if (sv[k] > tol) ++r;
    return r;
}

// Rank of the constraint Jacobian at a strictly positive distribution.
inline int constraint_rank(const ConstraintSystem& sys, const ProbabilityVector& pv) {
    if (sys.empty()) return 0;
    CompiledSystem cs(pv.layout, sys);
    Eigen::VectorXd m = Eigen::Map<const Eigen::VectorXd>(pv.probs.data(), static_cast<Eigen::Index>(pv.probs.size()));
    Eigen::VectorXd s;
    if (!cs.masses(m, s)) throw Error(ErrorKind::ZeroCell, "constraint events without mass");
    return numerical_rank(cs.jacobian_m(s));
}

// ---------------------------------------------------------------------------
// Fit

struct FitOptions {
    int max_iterations = 500;
    double constraint_tolerance = 1e-8;
    int step_halving_max = 20;
    double gradient_tolerance = 1e-6;
    double smoothing = 0.5;
};

struct FitResult {
    ProbabilityVector pi_hat;
    std::optional<EtaVector> eta_hat;
    double g2 = 0.0;
    int df = 0;
    double p_value = 1.0;
    double aic = 0.0;
    double bic = 0.0;
    bool converged = false;
    int iterations = 0;
    double kkt_residual = 0.0;
    double max_violation = 0.0;
    double n = 0.0;
    std::size_t n_cells = 0;
};

inline double deviance(const std::vector<double>& counts, const std::vector<double>& fitted) {
    double g2 = 0.0;
    for (std::size_t k = 0; k < counts.size(); ++k)
        if (counts[k] > 0.0) g2 += counts[k] * std::log(counts[k] / fitted[k]);
    return 2.0 * g2;
}

namespace detail {

inline void finish_fit(FitResult& r, const ContingencyTable& t, const Eigen::VectorXd& m,
                       const EffectAllocation* alloc) {
    const double n = t.total();
    std::vector<double> fitted(m.data(), m.data() + m.size());
    r.g2 = std::max(0.0, deviance(t.counts, fitted));
    std::vector<double> p(fitted);
    for (double& x : p) x /= n;
    r.pi_hat = ProbabilityVector(t.layout, std::move(p));
    r.n = n;
    r.n_cells = t.layout.n_cells();
    r.p_value = chisq_sf(r.g2, r.df);
    const auto ic = information_criteria(r.g2, r.df, static_cast<double>(r.n_cells), n);
    r.aic = ic.aic;
    r.bic = ic.bic;
    if (alloc && r.pi_hat.strictly_positive()) r.eta_hat = eta_vector(r.pi_hat, *alloc);
}

}  // namespace detail

inline FitResult fit_constrained(const ContingencyTable& table, const ConstraintSystem& system,
                                 const FitOptions& opt = {}, const EffectAllocation* alloc = nullptr) {
    if (opt.max_iterations <= 0 || opt.constraint_tolerance <= 0 || opt.step_halving_max <= 0 ||
        opt.gradient_tolerance <= 0 || opt.smoothing < 0)
        throw Error(ErrorKind::InvalidArgument, "fit options must be positive");
    const double n_total = table.total();
    if (!(n_total > 0)) throw Error(ErrorKind::ZeroMass, "table has no observations");
    const auto nc = static_cast<Eigen::Index>(table.counts.size());
    const Eigen::VectorXd n = Eigen::Map<const Eigen::VectorXd>(table.counts.data(), nc);
    FitResult res;

    if (system.empty()) {
        res.converged = true;
        detail::finish_fit(res, table, n, alloc);
        return res;
    }

    const CompiledSystem cs(table.layout, system);
    // Start from the smoothed table rescaled to N.
    Eigen::VectorXd m = n.array() + opt.smoothing;
    if (opt.smoothing == 0.0 && (n.array() <= 0.0).any()) m = n.array() + 0.5;
    m *= n_total / m.sum();
    Eigen::VectorXd theta = m.array().log();

    Eigen::VectorXd s, h, lambda;
    Eigen::MatrixXd jm;
    auto merit = [&](const Eigen::VectorXd& th, double mu, double& out) {
        const Eigen::VectorXd mm = th.array().exp();
        Eigen::VectorXd ss;
        if (!cs.masses(mm, ss)) return false;
        const Eigen::VectorXd hh = cs.values(ss);
        if (!hh.allFinite()) return false;
        out = -(n.dot(th) - mm.sum()) + mu * hh.lpNorm<1>();
        return std::isfinite(out);
    };

    bool converged = false;
    int it = 0;
    double kkt = std::numeric_limits<double>::infinity();
    double viol = std::numeric_limits<double>::infinity();
    for (; it < opt.max_iterations; ++it) {
        m = theta.array().exp();
        if (!cs.masses(m, s)) break;
        h = cs.values(s);
        jm = cs.jacobian_m(s);
        // Theta Jacobian H' = jm * diag(m); H' D^-1 H = jm diag(m) jm'.
        const Eigen::MatrixXd jt = jm * m.asDiagonal();
        const Eigen::MatrixXd a = jm * m.asDiagonal() * jm.transpose();
        const Eigen::VectorXd rhs = h + jm * (n - m);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
        const auto& ev = es.eigenvalues();
        const double emax = ev.cwiseAbs().maxCoeff();
        const double cut = emax * 1e-12 * static_cast<double>(a.rows());
        Eigen::VectorXd inv(ev.size());
        for (Eigen::Index k = 0; k < ev.size(); ++k) inv[k] = ev[k] > cut ? 1.0 / ev[k] : 0.0;
        lambda = -(es.eigenvectors() * (inv.asDiagonal() * (es.eigenvectors().transpose() * rhs)));
        const Eigen::VectorXd grad = n - m + jt.transpose() * lambda;
        kkt = grad.cwiseAbs().maxCoeff() / n_total;
        viol = h.cwiseAbs().maxCoeff();
        if (viol < opt.constraint_tolerance && kkt < std::min(opt.gradient_tolerance, 1e-11)) {
            converged = true;
            break;
        }
        const Eigen::VectorXd step = grad.cwiseQuotient(m);
        const double mu = 1.0 + 2.0 * lambda.cwiseAbs().maxCoeff();
        double f0 = 0.0;
        merit(theta, mu, f0);
        double t = 1.0;
        Eigen::VectorXd next = theta + step;
        bool accepted = false;
        for (int k = 0; k <= opt.step_halving_max; ++k) {
            double f1 = 0.0;
            if (merit(next, mu, f1) && f1 <= f0 + 1e-12 * std::abs(f0)) {
                accepted = true;
                break;
            }
            t *= 0.5;
            next = theta + t * step;
        }
        if (!accepted) {
            // Keep the shortest trial step when it is at least well defined.
            double f1 = 0.0;
            if (!merit(next, mu, f1)) break;
        }
        // Stalled at working precision.
        if ((next - theta).cwiseAbs().maxCoeff() < 1e-10 && viol < opt.constraint_tolerance &&
            kkt < opt.gradient_tolerance) {
            theta = next;
            converged = true;
            ++it;
            break;
        }
        theta = next;
    }
    if (!converged) {
        m = theta.array().exp();
        if (cs.masses(m, s)) viol = cs.values(s).cwiseAbs().maxCoeff();
        converged = viol < opt.constraint_tolerance && kkt < opt.gradient_tolerance;
    }
    m = theta.array().exp();
    m *= n_total / m.sum();
    res.converged = converged;
    res.iterations = it;
    res.kkt_residual = kkt;
    res.max_violation = viol;
    Eigen::VectorXd ss;
    res.df = cs.masses(m, ss) ? numerical_rank(cs.jacobian_m(ss)) : 0;
    detail::finish_fit(res, table, m, alloc);
    return res;
}

inline nlohmann::json to_json(const FitResult& r, const Layout& l) {
    nlohmann::json cells = nlohmann::json::array();
    for (std::size_t k = 0; k < r.pi_hat.probs.size(); ++k)
        cells.push_back({{"cell", l.decode(k)}, {"pi_hat", r.pi_hat.probs[k]}});
    nlohmann::json j{{"schema", "scgm-fit/1"},
                     {"G2", r.g2},
                     {"df", r.df},
                     {"p_value", r.p_value},
                     {"AIC", r.aic},
                     {"BIC", r.bic},
                     {"aic_formula", kAicFormula},
                     {"bic_formula", kBicFormula},
                     {"N", r.n},
                     {"n_cells", r.n_cells},
                     {"converged", r.converged},
                     {"iterations", r.iterations},
                     {"kkt_residual", r.kkt_residual},
                     {"max_violation", r.max_violation},
                     {"pi_hat", cells}};
    if (r.eta_hat) j["eta_hat"] = to_json(*r.eta_hat);
    return j;
}

}  // namespace scgm
