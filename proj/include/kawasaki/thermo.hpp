#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "kawasaki/gibbs.hpp"
#include "kawasaki/local_function.hpp"
#include "kawasaki/numeric.hpp"
#include "kawasaki/rates.hpp"
#include "kawasaki/transfer_matrix.hpp"

namespace kawasaki {

// Under a product measure eta(A) -> rho^|A|, so the static average of a local
// function is an exact polynomial in the density.
inline Poly density_polynomial(const LocalFunction& f) {
    Poly p = Poly::zero();
    const auto& c = f.coefficients();
    for (std::size_t m = 0; m < c.size(); ++m)
        if (c[m] != 0.0) p.add_term(static_cast<std::size_t>(std::popcount(m)), c[m]);
    return p;
}

struct StaticAverage {
    double value = 0.0;
    double d1 = 0.0;  // d/drho
    double d2 = 0.0;  // d^2/drho^2
    bool exact = false;
    double error_estimate = 0.0;
};

// f~(rho) = int f d nu_rho with density derivatives. Product measures take
// the exact polynomial path; otherwise transfer-matrix values are
// differentiated by Richardson-extrapolated central differences.
inline StaticAverage static_average(const LocalFunction& f, const GibbsSpec& spec, double rho) {
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("static_average: rho in (0,1) required");
    StaticAverage out;
    if (spec.is_product()) {
        const Poly p = density_polynomial(f);
        const Poly d1 = p.derivative();
        out.value = p.eval(rho);
        out.d1 = d1.eval(rho);
        out.d2 = d1.derivative().eval(rho);
        out.exact = true;
        return out;
    }
    auto g = [&](double r) { return TransferMatrix(at_density(spec, r)).expectation(f); };
    double h = 1e-3;
    h = std::min({h, rho / 4.0, (1.0 - rho) / 4.0});
    if (!(h > 1e-9)) throw std::invalid_argument("static_average: rho too close to {0,1} for stencil");
    out.value = g(rho);
    const auto [d1, e1] = richardson_derivative(g, rho, h);
    const auto [d2, e2] = richardson_second_derivative(g, rho, h);
    out.d1 = d1;
    out.d2 = d2;
    out.exact = false;
    out.error_estimate = std::max(e1, e2);
    return out;
}

// chi(rho) = sum_x Cov(eta(0), eta(x)); Bernoulli variance in the product case.
inline double compressibility(const GibbsSpec& spec, double rho) {
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("compressibility: rho in (0,1) required");
    if (spec.is_product()) return rho * (1.0 - rho);
    return TransferMatrix(at_density(spec, rho)).chi().value;
}

// Exact chi polynomial for the product case (used by the disjoint Einstein pipeline).
inline Poly compressibility_polynomial_product() { return Poly{{0.0, 1.0, -1.0}}; }

// D(rho) = d/drho int omega d nu_rho. Gauge independent: constants drop.
inline double diffusivity(const LocalFunction& omega, const GibbsSpec& spec, double rho) {
    return static_average(omega, spec, rho).d1;
}

// H(rho) = int j d nu_rho with j = c(eta) eta(0)(1-eta(1)).
inline StaticAverage flux(const RateTable& c, const GibbsSpec& spec, double rho) {
    return static_average(current_observable(c), spec, rho);
}

inline double kpz_lambda(double a, const RateTable& c, const GibbsSpec& spec, double rho) {
    return 0.5 * a * flux(c, spec, rho).d2;
}

inline double characteristic_velocity(const RateTable& c, const GibbsSpec& spec, double rho) {
    return flux(c, spec, rho).d1;
}

struct EinsteinRow {
    double rho = 0.0;
    double dlambda_da = 0.0;  // H''(rho)/2, from the current observable
    double half_chiD_pp = 0.0;  // (chi D)''(rho)/2, from compressibility and omega
    double residual = 0.0;
};

// Second-order Einstein relation dlambda/da = (1/2) (chi D)''. The two sides
// are computed through disjoint pipelines: the left from the current j, the
// right from the correlation sum times the omega-derivative.
inline std::vector<EinsteinRow> einstein_relation_check(const RateTable& c,
                                                        const LocalFunction& omega,
                                                        const GibbsSpec& spec,
                                                        const std::vector<double>& rho_grid) {
    std::vector<EinsteinRow> rows;
    rows.reserve(rho_grid.size());
    if (spec.is_product()) {
        const Poly Hpp = density_polynomial(current_observable(c)).derivative().derivative();
        const Poly chiD = compressibility_polynomial_product() * density_polynomial(omega).derivative();
        const Poly chiD_pp = chiD.derivative().derivative();
        for (double rho : rho_grid) {
            EinsteinRow r;
            r.rho = rho;
            r.dlambda_da = 0.5 * Hpp.eval(rho);
            r.half_chiD_pp = 0.5 * chiD_pp.eval(rho);
            r.residual = std::abs(r.dlambda_da - r.half_chiD_pp);
            rows.push_back(r);
        }
        return rows;
    }
    const LocalFunction j = current_observable(c);
    for (double rho : rho_grid) {
        EinsteinRow r;
        r.rho = rho;
        r.dlambda_da = 0.5 * static_average(j, spec, rho).d2;
        auto chiD = [&](double x) {
            return compressibility(spec, x) * diffusivity(omega, spec, x);
        };
        const double h = std::min({1e-2, rho / 4.0, (1.0 - rho) / 4.0});
        r.half_chiD_pp = 0.5 * richardson_second_derivative(chiD, rho, h).first;
        r.residual = std::abs(r.dlambda_da - r.half_chiD_pp);
        rows.push_back(r);
    }
    return rows;
}

struct ThermoRow {
    double rho = 0.0;
    double chi = 0.0;
    double D = 0.0;
    double H = 0.0;
    double Hp = 0.0;
    double Hpp = 0.0;
    double chiD_pp = 0.0;
    double lambda = 0.0;
    double einstein_residual = 0.0;
    std::string method;  // exact-polynomial | finite-difference
};

struct ThermoCurve {
    double a = 0.0;
    double scale = 1.0;  // time rescaling applied to the rate family
    std::vector<ThermoRow> rows;

    const ThermoRow& row_at(double rho, double tol = 1e-12) const {
        for (const auto& r : rows)
            if (std::abs(r.rho - rho) <= tol) return r;
        throw std::invalid_argument("ThermoCurve: no row at requested density (interpolation refused)");
    }
};

inline std::vector<double> uniform_density_grid(int points = 99, double lo = 0.01, double hi = 0.99) {
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
    return g;
}

inline ThermoCurve compute_thermo_curve(const RateTable& c, const LocalFunction& omega,
                                        const GibbsSpec& spec, const std::vector<double>& rho_grid,
                                        double a) {
    ThermoCurve curve;
    curve.a = a;
    curve.scale = c.time_scale();
    const auto einstein = einstein_relation_check(c, omega, spec, rho_grid);
    for (std::size_t i = 0; i < rho_grid.size(); ++i) {
        const double rho = rho_grid[i];
        ThermoRow r;
        r.rho = rho;
        r.chi = compressibility(spec, rho);
        r.D = diffusivity(omega, spec, rho);
        const StaticAverage h = flux(c, spec, rho);
        r.H = h.value;
        r.Hp = h.d1;
        r.Hpp = h.d2;
        r.chiD_pp = 2.0 * einstein[i].half_chiD_pp;
        r.lambda = 0.5 * a * r.Hpp;
        r.einstein_residual = einstein[i].residual;
        r.method = h.exact ? "exact-polynomial" : "finite-difference";
        curve.rows.push_back(std::move(r));
    }
    return curve;
}

}  // namespace kawasaki
