#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "kawasaki/kmc.hpp"  // Mollifier
#include "kawasaki/numeric.hpp"
#include "kawasaki/rng.hpp"
#include "kawasaki/thermo.hpp"

namespace kawasaki {

// Lattice state of the mollified stochastic Burgers equation
//   dY = D lap Y dt + lambda grad (Y*iota_delta)^2 dt + sqrt(2 chi D) grad dW.
// All three terms are discretized in conservative (flux-difference) form, so
// the total mass sum_i Y_i dx is exact under stepping.
struct FieldState {
    int cells = 0;
    double dx = 1.0;
    double t = 0.0;
    std::vector<double> y;
    double D = 1.0;
    double chi = 0.25;
    double lambda = 0.0;
    Mollifier iota = triangular_mollifier();
    double delta = 0.0;  // 0 disables mollified-square smoothing width checks when lambda == 0

    FieldState(int cells_, double dx_) : cells(cells_), dx(dx_), y(static_cast<std::size_t>(cells_), 0.0) {
        if (cells < 4) throw std::invalid_argument("FieldState: need >= 4 cells");
        if (!(dx > 0)) throw std::invalid_argument("FieldState: dx > 0");
    }

    double mass() const {
        CompensatedSum s;
        for (double v : y) s.add(v);
        return s.value() * dx;
    }
};

// Discrete mollifier weights on the cell grid, normalized so sum w dx = 1.
inline std::vector<double> mollifier_kernel(const Mollifier& iota, double delta, double dx) {
    const int reach = static_cast<int>(std::ceil(delta / dx));
    std::vector<double> w(static_cast<std::size_t>(2 * reach + 1));
    double sum = 0.0;
    for (int j = -reach; j <= reach; ++j) {
        const double v = iota(j * dx / delta) / delta;
        w[static_cast<std::size_t>(j + reach)] = v;
        sum += v * dx;
    }
    for (double& v : w) v /= sum;
    return w;
}

// One Euler-Maruyama step with caller-supplied bond noises xi (one standard
// normal per bond (i, i+1)). Exposed for the translation-covariance tests.
inline void step_with_noise(FieldState& s, double dt, std::span<const double> xi) {
    const int M = s.cells;
    if (static_cast<int>(xi.size()) != M) throw std::invalid_argument("step_with_noise: need M noises");
    if (!(dt > 0) || dt > s.dx * s.dx / (4.0 * s.D))
        throw std::invalid_argument("step_with_noise: dt violates the stability bound dx^2/(4D)");

    std::vector<double> flux(static_cast<std::size_t>(M), 0.0);  // flux at bond (i, i+1)
    const double noise_amp = std::sqrt(2.0 * s.chi * s.D * dt / s.dx);
    for (int i = 0; i < M; ++i) {
        const int ip = (i + 1) % M;
        flux[static_cast<std::size_t>(i)] =
            dt * s.D * (s.y[static_cast<std::size_t>(ip)] - s.y[static_cast<std::size_t>(i)]) / s.dx +
            noise_amp * xi[static_cast<std::size_t>(i)];
    }
    if (s.lambda != 0.0) {
        if (s.delta < 2.0 * s.dx)
            throw std::invalid_argument("step_with_noise: require delta >= 2 dx for the nonlinearity");
        const std::vector<double> w = mollifier_kernel(s.iota, s.delta, s.dx);
        const int reach = (static_cast<int>(w.size()) - 1) / 2;
        std::vector<double> g(static_cast<std::size_t>(M));
        for (int i = 0; i < M; ++i) {
            double conv = 0.0;
            for (int j = -reach; j <= reach; ++j) {
                int k = i + j;
                k %= M;
                if (k < 0) k += M;
                conv += w[static_cast<std::size_t>(j + reach)] * s.y[static_cast<std::size_t>(k)] * s.dx;
            }
            g[static_cast<std::size_t>(i)] = conv * conv;
        }
        // centered gradient of g as the average flux (g_{i+1}+g_i)/2 at the bond
        for (int i = 0; i < M; ++i) {
            const int ip = (i + 1) % M;
            flux[static_cast<std::size_t>(i)] +=
                dt * s.lambda * 0.5 *
                (g[static_cast<std::size_t>(ip)] + g[static_cast<std::size_t>(i)]);
        }
    }
    for (int i = 0; i < M; ++i) {
        const int im = (i - 1 + M) % M;
        s.y[static_cast<std::size_t>(i)] +=
            (flux[static_cast<std::size_t>(i)] - flux[static_cast<std::size_t>(im)]) / s.dx;
    }
    s.t += dt;
}

inline void step(FieldState& s, double dt, Stream& rng) {
    std::vector<double> xi(static_cast<std::size_t>(s.cells));
    for (double& v : xi) v = rng.normal();
    step_with_noise(s, dt, xi);
}

// Import coefficients from a thermodynamic curve row: D = omega~'(rho),
// lambda = (a/2) H''(rho), noise amplitude sqrt(2 chi D).
inline void match_microscopic(FieldState& s, const ThermoCurve& curve, double rho, double a) {
    const ThermoRow& row = curve.row_at(rho);
    s.D = row.D;
    s.chi = row.chi;
    s.lambda = 0.5 * a * row.Hpp;
}

}  // namespace kawasaki
