#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kawasaki/local_function.hpp"
#include "kawasaki/rates.hpp"
#include "kawasaki/thermo.hpp"

namespace kawasaki {

// Evaluate f at base site `base` on a window occupancy mask
// (window bit i <-> site window_lo + i). The shifted window must fit.
inline double eval_on_window(const LocalFunction& f, std::uint32_t mask, int window_lo,
                             int window_width, int base = 0) {
    std::uint32_t fm = 0;
    for (int i = 0; i < f.width(); ++i) {
        const int site = base + f.lo() + i;
        const int pos = site - window_lo;
        if (pos < 0 || pos >= window_width)
            throw std::invalid_argument("eval_on_window: function window does not fit");
        fm |= ((mask >> pos) & 1u) << i;
    }
    return f.value_on_mask(fm);
}

// Max residual of c(eta)/c(eta^{0,1}) = exp(-beta dH) over all window
// configurations with eta(0) != eta(1), in the multiplied-out form
// |c(eta) - exp(-beta dH) c(eta^{0,1})|.
inline double check_detailed_balance(const RateTable& c, const GibbsSpec& spec) {
    const int m = std::max(c.radius(), spec.range());
    const int width = 2 * m + 2;
    double worst = 0.0;
    for (std::uint32_t cfg = 0; cfg < (std::uint32_t{1} << width); ++cfg) {
        const int e0 = (cfg >> m) & 1, e1 = (cfg >> (m + 1)) & 1;
        if (e0 == e1) continue;
        const std::uint32_t swapped = cfg ^ (std::uint32_t{1} << m) ^ (std::uint32_t{1} << (m + 1));
        auto cval = [&](std::uint32_t w) {
            std::uint32_t cm = 0;
            for (int i = 0; i < c.window_width(); ++i)
                cm |= ((w >> (i + m - c.radius())) & 1u) << i;
            return c.value(cm);
        };
        const double dH = window_exchange_delta(spec, cfg, m);
        worst = std::max(worst, std::abs(cval(cfg) - std::exp(-spec.beta() * dH) * cval(swapped)));
    }
    return worst;
}

struct GradientSolution {
    LocalFunction omega;   // window {-K..K}, empty-set coefficient fixed to 0
    double residual = 0.0; // max |c(eta)(eta0-eta1) - omega(eta) + omega(theta_1 eta)|
    std::string gauge = "coefficient of the empty set fixed to 0; minimum-norm in any remaining directions";
};

namespace detail {

// Defining-equation matrix for omega on the combined window {-K..K+1}.
// Unknown j <-> nonempty subset mask (j+1) of the omega window {-K..K}.
inline void gradient_system(const RateTable& c, int K, Eigen::MatrixXd& A, Eigen::VectorXd& b) {
    const int width = 2 * K + 2;
    const int nsub = (1 << (2 * K + 1)) - 1;
    const std::uint32_t nconf = std::uint32_t{1} << width;
    A.resize(static_cast<Eigen::Index>(nconf), nsub);
    b.resize(static_cast<Eigen::Index>(nconf));
    for (std::uint32_t m = 0; m < nconf; ++m) {
        auto occ = [&](int site) -> int { return (m >> (site + K)) & 1; };
        std::uint32_t cm = 0;
        for (int i = 0; i < c.window_width(); ++i)
            cm |= ((m >> (i + K - c.radius())) & 1u) << i;
        b[m] = c.value(cm) * (occ(0) - occ(1));
        for (int j = 0; j < nsub; ++j) {
            const std::uint32_t sub = static_cast<std::uint32_t>(j) + 1;
            int pA = 1, pA1 = 1;
            for (int i = 0; i < 2 * K + 1; ++i) {
                if (sub & (1u << i)) {
                    pA &= occ(-K + i);
                    pA1 &= occ(-K + i + 1);
                }
            }
            A(m, j) = pA - pA1;
        }
    }
}

}  // namespace detail

// Solve c(eta)(eta(0)-eta(1)) = omega(eta) - omega(theta_1 eta) for omega on
// the window {-K..K}, in the least-squares sense over the combined window.
// Exact (residual at rounding level) when the family is gradient; otherwise
// the residual is the non-gradient witness.
inline GradientSolution solve_gradient_condition(const RateTable& c, int K) {
    if (K < c.radius())
        throw std::invalid_argument("solve_gradient_condition: require K >= rate radius");
    if (K > 5) throw std::invalid_argument("solve_gradient_condition: K too large");
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    detail::gradient_system(c, K, A, b);
    const Eigen::VectorXd x = A.completeOrthogonalDecomposition().solve(b);
    const double residual = (A * x - b).lpNorm<Eigen::Infinity>();
    std::vector<double> coeff(std::size_t{1} << (2 * K + 1), 0.0);
    for (int j = 0; j < x.size(); ++j) coeff[static_cast<std::size_t>(j) + 1] = x[j];
    return GradientSolution{LocalFunction(-K, std::move(coeff)), residual};
}

// Re-evaluate the defining-equation residual of a given omega (independent of
// the solver path).
inline double gradient_residual(const RateTable& c, const LocalFunction& omega) {
    const int K = std::max({c.radius(), -omega.lo(), omega.hi()});
    const int width = 2 * K + 2;
    double worst = 0.0;
    for (std::uint32_t m = 0; m < (std::uint32_t{1} << width); ++m) {
        auto occ = [&](int site) -> int { return (m >> (site + K)) & 1; };
        std::uint32_t cm = 0;
        for (int i = 0; i < c.window_width(); ++i)
            cm |= ((m >> (i + K - c.radius())) & 1u) << i;
        const double lhs = c.value(cm) * (occ(0) - occ(1));
        const double w0 = eval_on_window(omega, m, -K, width, 0);
        const double w1 = eval_on_window(omega, m, -K, width, 1);
        worst = std::max(worst, std::abs(lhs - (w0 - w1)));
    }
    return worst;
}

// Pointwise residual of the current identity
//   c(eta) eta(1)(1-eta(0)) = (1/2) c(eta)(eta(1)-eta(0))^2
//                             + (1/2)(omega(theta_1 eta) - omega(eta)).
// Both sides are evaluated independently; for binary occupancies the defect
// equals half the gradient defect.
inline double verify_current_identity(const RateTable& c, const LocalFunction& omega) {
    const int K = std::max({c.radius(), -omega.lo(), omega.hi()});
    const int width = 2 * K + 2;
    double worst = 0.0;
    for (std::uint32_t m = 0; m < (std::uint32_t{1} << width); ++m) {
        auto occ = [&](int site) -> int { return (m >> (site + K)) & 1; };
        std::uint32_t cm = 0;
        for (int i = 0; i < c.window_width(); ++i)
            cm |= ((m >> (i + K - c.radius())) & 1u) << i;
        const double cv = c.value(cm);
        const double lhs = cv * occ(1) * (1 - occ(0));
        const double diff = occ(1) - occ(0);
        const double w0 = eval_on_window(omega, m, -K, width, 0);
        const double w1 = eval_on_window(omega, m, -K, width, 1);
        const double rhs = 0.5 * cv * diff * diff + 0.5 * (w1 - w0);
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return worst;
}

struct FdRow {
    double rho = 0.0;
    double lhs = 0.0;  // int c (eta(1)-eta(0))^2 d nu_rho
    double rhs = 0.0;  // 2 chi(rho) D(rho)
    double residual = 0.0;
};

// Fluctuation-dissipation relation int c (Delta eta)^2 d nu = 2 chi D.
inline std::vector<FdRow> verify_fd_relation(const RateTable& c, const LocalFunction& omega,
                                             const GibbsSpec& spec,
                                             const std::vector<double>& rho_grid) {
    const LocalFunction integrand = fd_integrand(c);
    std::vector<FdRow> rows;
    rows.reserve(rho_grid.size());
    for (double rho : rho_grid) {
        FdRow r;
        r.rho = rho;
        r.lhs = static_average(integrand, spec, rho).value;
        r.rhs = 2.0 * compressibility(spec, rho) * diffusivity(omega, spec, rho);
        r.residual = std::abs(r.lhs - r.rhs);
        rows.push_back(r);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Constructive rate design: the joint linear feasibility problem in (c, omega)
// ---------------------------------------------------------------------------

struct DesignRow {
    std::string kind;       // "detailed-balance" | "gradient" | "upper-bound"
    std::uint32_t config = 0;
};

struct InfeasibilityWitness {
    // Farkas certificate: weights y with y^T A <= tol componentwise on the
    // nonnegative variables and y^T b > 0, i.e. an unsatisfiable combination.
    std::vector<double> row_weights;
    std::vector<DesignRow> rows;
    double combination_value = 0.0;  // y^T b
    double max_column_activity = 0.0;  // max_j y^T a_j (should be <= ~0)
    std::string description;
};

struct FeasibilityCertificate {
    bool feasible = false;
    std::optional<RateTable> rates;
    std::optional<GradientSolution> solution;
    double max_violation = 0.0;  // re-evaluated on the returned point
    std::optional<InfeasibilityWitness> witness;
};

namespace detail {

struct SimplexResult {
    bool feasible = false;
    std::vector<double> x;  // primal point (original variables)
    std::vector<double> y;  // Farkas row multipliers when infeasible
    double objective = 0.0;
    double max_column_activity = 0.0;
};

// Phase-1 dense tableau simplex for A x = b, x >= 0. Rows are sign-normalized
// so b >= 0; one artificial per row. Dantzig pricing with a Bland fallback.
inline SimplexResult phase1_simplex(std::vector<std::vector<double>> A, std::vector<double> b) {
    const std::size_t m = A.size();
    const std::size_t n = m == 0 ? 0 : A[0].size();
    std::vector<int> sign(m, 1);
    for (std::size_t i = 0; i < m; ++i) {
        if (b[i] < 0) {
            sign[i] = -1;
            b[i] = -b[i];
            for (double& v : A[i]) v = -v;
        }
    }
    const std::size_t ncols = n + m;
    std::vector<std::vector<double>> T(m, std::vector<double>(ncols + 1, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) T[i][j] = A[i][j];
        T[i][n + i] = 1.0;
        T[i][ncols] = b[i];
    }
    std::vector<std::size_t> basis(m);
    std::vector<double> cost(ncols + 1, 0.0);  // reduced costs, minimize sum of artificials
    for (std::size_t i = 0; i < m; ++i) basis[i] = n + i;
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += T[i][j];
        cost[j] = -s;
    }

    const double tol = 1e-11;
    std::size_t iter = 0;
    const std::size_t bland_after = 200 * (m + 1);
    while (true) {
        ++iter;
        std::size_t enter = ncols;
        if (iter < bland_after) {
            double best = -tol;
            for (std::size_t j = 0; j < ncols; ++j)
                if (cost[j] < best) {
                    best = cost[j];
                    enter = j;
                }
        } else {
            for (std::size_t j = 0; j < ncols; ++j)
                if (cost[j] < -tol) {
                    enter = j;
                    break;
                }
        }
        if (enter == ncols) break;  // optimal
        std::size_t leave = m;
        double best_ratio = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (T[i][enter] > tol) {
                const double ratio = T[i][ncols] / T[i][enter];
                if (leave == m || ratio < best_ratio - 1e-15 ||
                    (std::abs(ratio - best_ratio) <= 1e-15 && basis[i] > basis[leave])) {
                    best_ratio = ratio;
                    leave = i;
                }
            }
        }
        if (leave == m) break;  // unbounded cannot happen in phase 1; stop defensively
        const double piv = T[leave][enter];
        for (double& v : T[leave]) v /= piv;
        for (std::size_t i = 0; i < m; ++i) {
            if (i == leave) continue;
            const double f = T[i][enter];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j <= ncols; ++j) T[i][j] -= f * T[leave][j];
        }
        const double fc = cost[enter];
        for (std::size_t j = 0; j <= ncols; ++j) cost[j] -= fc * T[leave][j];
        basis[leave] = enter;
        if (iter > 100000) break;
    }
    double final_obj = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        if (basis[i] >= n) final_obj += T[i][ncols];

    SimplexResult res;
    res.objective = final_obj;
    double scale = 1.0;
    for (double v : b) scale = std::max(scale, std::abs(v));
    if (final_obj <= 1e-9 * scale) {
        res.feasible = true;
        res.x.assign(n, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            if (basis[i] < n) res.x[basis[i]] = T[i][ncols];
        return res;
    }
    // Farkas multipliers from the artificial reduced costs: y_i = 1 - cost[n+i],
    // mapped back through the row sign normalization.
    res.y.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) res.y[i] = (1.0 - cost[n + i]) * sign[i];
    double maxcol = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += res.y[i] * A[i][j] * sign[i];
        maxcol = std::max(maxcol, s);
    }
    res.max_column_activity = maxcol;
    return res;
}

}  // namespace detail

// Direct re-evaluation of the design constraints on a candidate pair.
// Returns the max violation over detailed balance, the gradient equation and
// the bounds; independent of the LP solver.
inline double evaluate_design_constraints(const GibbsSpec& spec, int r,
                                          const std::vector<double>& c_table,
                                          const LocalFunction& omega, double lo = 1e-6,
                                          double hi = 1.0) {
    RateTable trial(r, c_table, 0.0, 1.0, "candidate");
    double worst = gradient_residual(trial, omega);
    worst = std::max(worst, check_detailed_balance(trial, spec));
    for (std::uint32_t m = 0; m < c_table.size(); ++m) {
        const int e0 = (m >> r) & 1, e1 = (m >> (r + 1)) & 1;
        if (e0 == e1) continue;
        worst = std::max(worst, std::max(lo - c_table[m], c_table[m] - hi));
    }
    return worst;
}

// Search for rates satisfying locality, exclusion/ergodicity, detailed
// balance and the gradient condition jointly: the system is linear in the
// pair (c, omega). Returns a feasible pair or a Farkas witness.
inline FeasibilityCertificate design_gradient_rate(const GibbsSpec& spec, int r, int K,
                                                   double lo = 1e-6, double hi = 1.0) {
    if (r > 2 || K > 3) throw std::invalid_argument("design_gradient_rate: window too large");
    if (K < r) throw std::invalid_argument("design_gradient_rate: require K >= r");
    if (r < spec.range()) throw std::invalid_argument("design_gradient_rate: require r >= potential range");
    if (!(lo > 0.0)) throw std::invalid_argument("design_gradient_rate: lower bound must be positive");
    if (hi > 1.0) throw std::invalid_argument("design_gradient_rate: upper bound must be <= 1");

    const int cw = 2 * r + 2;
    std::vector<std::uint32_t> ex;
    for (std::uint32_t m = 0; m < (std::uint32_t{1} << cw); ++m)
        if (((m >> r) & 1) != ((m >> (r + 1)) & 1)) ex.push_back(m);
    std::vector<int> exi(std::size_t{1} << cw, -1);
    for (std::size_t i = 0; i < ex.size(); ++i) exi[ex[i]] = static_cast<int>(i);

    const std::size_t nu = ex.size();
    const std::size_t nsub = (std::size_t{1} << (2 * K + 1)) - 1;
    const std::size_t nvar = nu + nu + 2 * nsub;  // u, s, p, q

    std::vector<std::vector<double>> A;
    std::vector<double> b;
    std::vector<DesignRow> labels;

    // detailed balance: u_e - kappa u_{e'} = lo (kappa - 1), one per pair
    for (const std::uint32_t e : ex) {
        const std::uint32_t e2 = e ^ (std::uint32_t{1} << r) ^ (std::uint32_t{1} << (r + 1));
        if (e2 < e) continue;
        const double kappa = std::exp(-spec.beta() * window_exchange_delta(spec, e, r));
        std::vector<double> row(nvar, 0.0);
        row[static_cast<std::size_t>(exi[e])] = 1.0;
        row[static_cast<std::size_t>(exi[e2])] -= kappa;
        A.push_back(std::move(row));
        b.push_back(lo * (kappa - 1.0));
        labels.push_back({"detailed-balance", e});
    }
    // gradient condition over the combined window
    const int width = 2 * K + 2;
    for (std::uint32_t m = 0; m < (std::uint32_t{1} << width); ++m) {
        auto occ = [&](int site) -> int { return (m >> (site + K)) & 1; };
        std::vector<double> row(nvar, 0.0);
        for (std::size_t j = 0; j < nsub; ++j) {
            const std::uint32_t sub = static_cast<std::uint32_t>(j) + 1;
            int pA = 1, pA1 = 1;
            for (int i = 0; i < 2 * K + 1; ++i) {
                if (sub & (1u << i)) {
                    pA &= occ(-K + i);
                    pA1 &= occ(-K + i + 1);
                }
            }
            row[nu + nu + j] = pA - pA1;
            row[nu + nu + nsub + j] = -(pA - pA1);
        }
        const int d = occ(0) - occ(1);
        double rhs = 0.0;
        if (d != 0) {
            std::uint32_t cm = 0;
            for (int i = 0; i < cw; ++i) cm |= ((m >> (i + K - r)) & 1u) << i;
            row[static_cast<std::size_t>(exi[cm])] -= d;
            rhs = d * lo;
        }
        A.push_back(std::move(row));
        b.push_back(rhs);
        labels.push_back({"gradient", m});
    }
    // upper bounds: u_e + s_e = hi - lo
    for (std::size_t i = 0; i < nu; ++i) {
        std::vector<double> row(nvar, 0.0);
        row[i] = 1.0;
        row[nu + i] = 1.0;
        A.push_back(std::move(row));
        b.push_back(hi - lo);
        labels.push_back({"upper-bound", ex[i]});
    }

    const detail::SimplexResult sr = detail::phase1_simplex(A, b);
    FeasibilityCertificate cert;
    if (!sr.feasible) {
        InfeasibilityWitness w;
        w.row_weights = sr.y;
        w.rows = labels;
        w.combination_value = sr.objective;
        w.max_column_activity = sr.max_column_activity;
        // name the dominant rows in the unsatisfiable combination
        double wmax = 0.0;
        for (double v : sr.y) wmax = std::max(wmax, std::abs(v));
        std::string desc = "no (c, omega) satisfies:";
        int named = 0;
        for (std::size_t i = 0; i < sr.y.size() && named < 4; ++i) {
            if (std::abs(sr.y[i]) > 0.5 * wmax) {
                desc += " [" + labels[i].kind + " @" + std::to_string(labels[i].config) + "]";
                ++named;
            }
        }
        w.description = std::move(desc);
        cert.feasible = false;
        cert.witness = std::move(w);
        return cert;
    }

    std::vector<double> table(std::size_t{1} << cw, 0.0);
    for (std::size_t i = 0; i < nu; ++i) {
        double v = lo + sr.x[i];
        // snap simplex rounding dust at the box boundaries
        if (v > hi && v < hi + 1e-9) v = hi;
        if (v < lo && v > lo - 1e-9) v = lo;
        table[ex[i]] = v;
    }
    std::vector<double> coeff(std::size_t{1} << (2 * K + 1), 0.0);
    for (std::size_t j = 0; j < nsub; ++j) coeff[j + 1] = sr.x[nu + nu + j] - sr.x[nu + nu + nsub + j];
    LocalFunction omega(-K, std::move(coeff));

    cert.feasible = true;
    cert.max_violation = evaluate_design_constraints(spec, r, table, omega, lo, hi);
    RateTable rates(r, std::move(table), 0.0, 1.0, "designed");
    cert.solution = GradientSolution{omega, gradient_residual(rates, omega)};
    cert.rates = std::move(rates);
    return cert;
}

inline nlohmann::json to_json(const GradientSolution& s) {
    return nlohmann::json{{"omega", s.omega.to_json()}, {"residual", s.residual}, {"gauge", s.gauge}};
}

inline nlohmann::json to_json(const std::vector<FdRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows)
        arr.push_back({{"rho", r.rho}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"residual", r.residual}});
    return arr;
}

inline nlohmann::json to_json(const FeasibilityCertificate& cert) {
    nlohmann::json j;
    j["status"] = cert.feasible ? "feasible" : "infeasible";
    if (cert.feasible) {
        j["rates"] = cert.rates->to_json();
        j["solution"] = to_json(*cert.solution);
        j["max_violation"] = cert.max_violation;
    } else {
        const auto& w = *cert.witness;
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < w.rows.size(); ++i) {
            if (w.row_weights[i] == 0.0) continue;
            rows.push_back({{"kind", w.rows[i].kind},
                            {"config", w.rows[i].config},
                            {"weight", w.row_weights[i]}});
        }
        j["witness"] = {{"description", w.description},
                        {"combination_value", w.combination_value},
                        {"max_column_activity", w.max_column_activity},
                        {"rows", rows}};
    }
    return j;
}

}  // namespace kawasaki
