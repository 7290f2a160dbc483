#pragma once

// Shared oracles for the unit and acceptance suites. Everything here is an
// independent route to a value the library computes some other way.

#include <Eigen/Dense>
#include <cmath>

#include "kawasaki/gibbs.hpp"
#include "kawasaki/kmc.hpp"
#include "kawasaki/local_function.hpp"

namespace kawasaki::testing {

// omega = eta(0) + b(eta(-1)eta(0) + eta(0)eta(1) - eta(-1)eta(1)), the
// pre-normalization gradient function of the speed-change family.
inline LocalFunction speed_change_omega(double b) {
    return LocalFunction::site(0) + LocalFunction::monomial({-1, 0}, b) +
           LocalFunction::monomial({0, 1}, b) + LocalFunction::monomial({-1, 1}, -b);
}

// Brute-force ring expectation with weights exp(-beta H - phi N).
inline double ring_expectation_enum(const GibbsSpec& spec, int L, const LocalFunction& f) {
    const CompiledLocal cf(f);
    double num = 0.0, den = 0.0;
    for (std::size_t e = 0; e < (std::size_t{1} << L); ++e) {
        const Ring ring = ring_from_bits(e, L);
        const double w =
            std::exp(-spec.beta() * spec.ring_energy(ring) - spec.phi() * ring.particle_count());
        den += w;
        num += w * cf.evaluate(ring, 0);
    }
    return num / den;
}

inline double geometric_extrapolate(double v8, double v12, double v16) {
    const double d1 = v12 - v8, d2 = v16 - v12;
    if (d1 == 0.0) return v16;
    const double s = d2 / d1;
    if (std::abs(s) >= 1.0) return v16;
    return v16 + d2 * s / (1.0 - s);
}

// Exact stationary covariance of the discrete-time Euler-Maruyama update of
// the lambda=0 field: y <- A y + B xi with A = I + dt D Lap/dx^2. Solved in
// the eigenbasis of the symmetric circulant A.
inline Eigen::MatrixXd lyapunov_stationary(int M, double dx, double dt, double D, double chi) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(M, M);
    const double alpha = dt * D / (dx * dx);
    for (int i = 0; i < M; ++i) {
        A(i, i) -= 2 * alpha;
        A(i, (i + 1) % M) += alpha;
        A(i, (i - 1 + M) % M) += alpha;
    }
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(M, M);
    const double amp = std::sqrt(2.0 * chi * D * dt / dx) / dx;
    for (int i = 0; i < M; ++i) {
        B(i, i) += amp;
        B((i + 1) % M, i) -= amp;
    }
    const Eigen::MatrixXd Q = B * B.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    const Eigen::VectorXd a = es.eigenvalues();
    const Eigen::MatrixXd V = es.eigenvectors();
    const Eigen::MatrixXd Qt = V.transpose() * Q * V;
    Eigen::MatrixXd Ct(M, M);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) {
            const double d = 1.0 - a[i] * a[j];
            Ct(i, j) = (std::abs(d) < 1e-12) ? 0.0 : Qt(i, j) / d;
        }
    return V * Ct * V.transpose();
}

}  // namespace kawasaki::testing
