#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "kawasaki/gibbs.hpp"
#include "kawasaki/local_function.hpp"
#include "kawasaki/numeric.hpp"

namespace kawasaki {

// Canonical ensemble on the periodic window Lambda_ell with k particles.
struct CanonicalSpec {
    int ell = 0;
    int k = 0;

    CanonicalSpec(int ell_, int k_) : ell(ell_), k(k_) {
        if (ell < 1 || ell > 26) throw std::invalid_argument("CanonicalSpec: require 1 <= ell <= 26");
        if (k < 0 || k > ell) throw std::invalid_argument("CanonicalSpec: require 0 <= k <= ell");
    }
    double sigma() const { return static_cast<double>(k) / ell; }
};

namespace detail {

// Next bit permutation with the same popcount (Gosper).
inline std::uint32_t next_combination(std::uint32_t v) {
    const std::uint32_t t = v | (v - 1);
    return (t + 1) | (((~t & -~t) - 1) >> (std::countr_zero(v) + 1));
}

// Per-shift pattern masks for the periodic window Hamiltonian.
inline std::vector<std::pair<std::uint32_t, double>> ring_pattern_masks(const GibbsSpec& spec,
                                                                        int ell) {
    std::vector<std::pair<std::uint32_t, double>> masks;
    for (const auto& c : spec.couplings()) {
        for (int z = 0; z < ell; ++z) {
            std::uint32_t m = 0;
            for (int o : c.sites) {
                int s = (z + o) % ell;
                if (s < 0) s += ell;
                m |= std::uint32_t{1} << s;
            }
            masks.emplace_back(m, c.J);
        }
    }
    return masks;
}

}  // namespace detail

struct CanonicalSlice {
    double psi = 0.0;         // canonical expectation of f
    double log_weight = 0.0;  // log of the slice partition sum (beta part only)
};

// Exact canonical expectation psi_f^ell(sigma) by enumeration of the
// k-particle slice. Gibbs weights use the periodic window Hamiltonian; the
// fugacity factor is constant on the slice and cancels.
inline CanonicalSlice canonical_slice(const LocalFunction& f, const GibbsSpec& spec,
                                      const CanonicalSpec& cs) {
    if (f.width() > cs.ell)
        throw std::invalid_argument("canonical_slice: f window does not fit in Lambda_ell");
    const int ell = cs.ell, k = cs.k;

    // f evaluated at base site 0 with periodic wrap: gather window sites mod ell
    std::vector<int> window_sites(static_cast<std::size_t>(f.width()));
    for (int i = 0; i < f.width(); ++i) {
        int s = (f.lo() + i) % ell;
        if (s < 0) s += ell;
        window_sites[static_cast<std::size_t>(i)] = s;
    }
    const std::vector<double> fvals = f.value_table();
    const auto masks = detail::ring_pattern_masks(spec, ell);
    const double beta = spec.beta();

    CompensatedSum num, den;
    auto visit = [&](std::uint32_t config) {
        double w = 1.0;
        if (beta != 0.0 && !masks.empty()) {
            double H = 0.0;
            for (const auto& [m, J] : masks)
                if ((config & m) == m) H += J;
            w = std::exp(-beta * H);
        }
        std::uint32_t fm = 0;
        for (std::size_t i = 0; i < window_sites.size(); ++i)
            fm |= ((config >> window_sites[i]) & 1u) << i;
        den.add(w);
        num.add(w * fvals[fm]);
    };

    if (k == 0) {
        visit(0);
    } else {
        const std::uint32_t limit = (ell == 32) ? 0xffffffffu : ((std::uint32_t{1} << ell) - 1);
        std::uint32_t config = (std::uint32_t{1} << k) - 1;
        while (true) {
            visit(config);
            if (k == ell) break;
            const std::uint32_t next = detail::next_combination(config);
            if (next > limit) break;
            config = next;
        }
    }
    CanonicalSlice out;
    out.psi = num.value() / den.value();
    out.log_weight = std::log(den.value());
    return out;
}

inline double canonical_expectation(const LocalFunction& f, const GibbsSpec& spec,
                                    const CanonicalSpec& cs) {
    return canonical_slice(f, spec, cs).psi;
}

struct ExpansionRow {
    int ell = 0;
    int k = 0;
    double sigma = 0.0;
    double psi = 0.0;
    double taylor = 0.0;
    double residual = 0.0;
};

struct ExpansionReport {
    std::vector<ExpansionRow> rows;
    std::vector<int> ells;
    std::vector<double> max_residual;  // per ell, over |sigma-rho| <= 1/sqrt(ell)
    double fitted_exponent = 0.0;      // log-log slope of max_residual vs ell
    double rho = 0.0;
    double f_value = 0.0, f_d1 = 0.0, f_d2 = 0.0;
};

// Residuals of the second-order expansion
//   psi_f^ell(sigma) ~ f(rho) + f'(rho)(sigma-rho) + (1/2) f''(rho)(sigma-rho)^2
// for all k with |sigma - rho| <= ell^{-1/2} (the fluctuation scale).
inline ExpansionReport equivalence_expansion_report(const LocalFunction& f, const GibbsSpec& spec,
                                                    double rho, const std::vector<int>& ells,
                                                    double f_value, double f_d1, double f_d2) {
    ExpansionReport rep;
    rep.rho = rho;
    rep.f_value = f_value;
    rep.f_d1 = f_d1;
    rep.f_d2 = f_d2;
    for (int ell : ells) {
        const double half_width = 1.0 / std::sqrt(static_cast<double>(ell));
        const int kmin = std::max(0, static_cast<int>(std::ceil((rho - half_width) * ell)));
        const int kmax = std::min(ell, static_cast<int>(std::floor((rho + half_width) * ell)));
        double maxres = 0.0;
        for (int k = kmin; k <= kmax; ++k) {
            const CanonicalSpec cs(ell, k);
            const double sigma = cs.sigma();
            const double psi = canonical_expectation(f, spec, cs);
            const double d = sigma - rho;
            const double taylor = f_value + f_d1 * d + 0.5 * f_d2 * d * d;
            const double res = psi - taylor;
            rep.rows.push_back({ell, k, sigma, psi, taylor, res});
            maxres = std::max(maxres, std::abs(res));
        }
        rep.ells.push_back(ell);
        rep.max_residual.push_back(maxres);
    }
    if (rep.ells.size() >= 2) {
        std::vector<double> lx, ly;
        for (std::size_t i = 0; i < rep.ells.size(); ++i) {
            if (rep.max_residual[i] <= 0.0) continue;
            lx.push_back(std::log(static_cast<double>(rep.ells[i])));
            ly.push_back(std::log(rep.max_residual[i]));
        }
        if (lx.size() >= 2) rep.fitted_exponent = fit_line(lx, ly).slope;
    }
    return rep;
}

// Finite-ring grand-canonical expectation by summing slices: the law of total
// expectation oracle sum_k P(N=k) psi_f^ell(k/ell).
inline double ring_grand_canonical_expectation(const LocalFunction& f, const GibbsSpec& spec,
                                               int ell) {
    CompensatedSum num, den;
    // stabilize: weights e^{-phi k + log Z_k} can span many orders
    std::vector<double> logw(static_cast<std::size_t>(ell) + 1);
    std::vector<double> psis(static_cast<std::size_t>(ell) + 1);
    double m = -1e300;
    for (int k = 0; k <= ell; ++k) {
        const CanonicalSlice s = canonical_slice(f, spec, CanonicalSpec(ell, k));
        logw[static_cast<std::size_t>(k)] = s.log_weight - spec.phi() * k;
        psis[static_cast<std::size_t>(k)] = s.psi;
        m = std::max(m, logw[static_cast<std::size_t>(k)]);
    }
    for (int k = 0; k <= ell; ++k) {
        const double w = std::exp(logw[static_cast<std::size_t>(k)] - m);
        den.add(w);
        num.add(w * psis[static_cast<std::size_t>(k)]);
    }
    return num.value() / den.value();
}

}  // namespace kawasaki
