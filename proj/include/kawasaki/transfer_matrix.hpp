#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "kawasaki/gibbs.hpp"
#include "kawasaki/local_function.hpp"
#include "kawasaki/numeric.hpp"
#include "kawasaki/ring.hpp"
#include "kawasaki/rng.hpp"

namespace kawasaki {

struct ChiResult {
    double value = 0.0;
    double tail_bound = 0.0;      // bound on the truncated geometric tail
    double subdominant_ratio = 0.0;
    int terms = 0;
};

// Row transfer matrix for the infinite-volume Gibbs measure with weights
// exp(-beta*H - phi*sum eta). The state is a block of R consecutive sites
// (R = max(1, potential range)); one transition appends one site and carries
// exactly that site's fugacity weight plus the interactions completed there
// (patterns anchored at their rightmost element). Marginals of the
// infinite-volume measure then take the standard boundary form
//
//   P(sigma_1..sigma_n) = l[s_R] (prod_j T[s_{j-1},s_j] / lambda) r[s_n] / <l,r>,
//
// with l, r the left/right Perron eigenvectors; equivalently the induced
// stationary block chain P[s,s'] = T[s,s'] r[s'] / (lambda r[s]).
class TransferMatrix {
public:
    explicit TransferMatrix(const GibbsSpec& spec) : spec_(spec), R_(std::max(1, spec.range())) {
        build();
        decompose();
    }

    int block_size() const { return R_; }
    double dominant_eigenvalue() const { return lambda_; }
    double subdominant_ratio() const { return sub_ratio_; }
    const Eigen::MatrixXd& matrix() const { return T_; }
    const GibbsSpec& spec() const { return spec_; }

    // Marginal probability of consecutive occupancies sigma (size >= R).
    double window_probability(const std::vector<int>& sigma) const {
        const int n = static_cast<int>(sigma.size());
        if (n < R_) throw std::invalid_argument("window_probability: window shorter than block");
        int s = 0;
        for (int i = 0; i < R_; ++i) s |= sigma[i] << i;
        double p = l_[s];
        for (int j = R_; j < n; ++j) {
            const int sp = (s >> 1) | (sigma[j] << (R_ - 1));
            p *= T_(s, sp) / lambda_;
            s = sp;
        }
        return p * r_[s] / lr_;
    }

    // Infinite-volume expectation of a local function.
    double expectation(const LocalFunction& f) const {
        const int n = std::max(R_, f.width());
        const std::vector<double> values = f.value_table();
        CompensatedSum acc;
        std::vector<int> sigma(static_cast<std::size_t>(n));
        for (std::uint32_t m = 0; m < (std::uint32_t{1} << n); ++m) {
            for (int i = 0; i < n; ++i) sigma[static_cast<std::size_t>(i)] = (m >> i) & 1;
            const double fv = values[m & ((std::uint32_t{1} << f.width()) - 1)];
            if (fv == 0.0) continue;
            acc.add(fv * window_probability(sigma));
        }
        return acc.value();
    }

    double site_density() const { return expectation(LocalFunction::site(0)); }

    // chi = Var(eta(0)) + 2 sum_{d>=1} Cov(eta(0), eta(d)), evaluated through
    // the block chain and truncated once the geometric tail bound drops
    // below `tail_tol`.
    ChiResult chi(double tail_tol = 1e-14) const {
        const int S = static_cast<int>(T_.rows());
        Eigen::VectorXd a(S);
        for (int s = 0; s < S; ++s) a[s] = (s >> (R_ - 1)) & 1;  // newest site of the block
        const double rho = pi_.dot(a);
        Eigen::VectorXd u = (pi_.array() * (a.array() - rho)).matrix();
        Eigen::VectorXd v = (a.array() - rho).matrix();

        ChiResult res;
        res.subdominant_ratio = sub_ratio_;
        CompensatedSum acc;
        acc.add(rho * (1.0 - rho));
        Eigen::RowVectorXd row = u.transpose();
        const double q = std::min(sub_ratio_, 1.0 - 1e-15);
        double term_mag = 0.0;
        int d = 0;
        for (d = 1; d <= 100000; ++d) {
            row = row * P_;
            const double cov = row.dot(v);
            acc.add(2.0 * cov);
            term_mag = std::abs(2.0 * cov);
            // geometric tail bound: remaining sum <= |term| * q / (1-q)
            if (term_mag * q / (1.0 - q) < tail_tol) break;
        }
        res.value = acc.value();
        res.tail_bound = term_mag * q / (1.0 - q);
        res.terms = d;
        return res;
    }

    // Stationary block-chain pieces (used by the ring sampler and oracles).
    const Eigen::MatrixXd& block_chain() const { return P_; }
    const Eigen::VectorXd& block_stationary() const { return pi_; }

private:
    void build() {
        const int S = 1 << R_;
        T_.resize(S, S);
        T_.setZero();
        // anchored patterns: shift so the rightmost offset is 0
        std::vector<Coupling> anchored;
        for (const auto& c : spec_.couplings()) {
            Coupling a = c;
            const int shift = -a.sites.back();
            for (int& o : a.sites) o += shift;
            anchored.push_back(std::move(a));
        }
        for (int s = 0; s < S; ++s) {
            for (int bit = 0; bit <= 1; ++bit) {
                const int sp = (s >> 1) | (bit << (R_ - 1));
                // site occupancies at offsets -R..0 relative to the new site
                auto occ = [&](int off) -> int {
                    if (off == 0) return bit;
                    return (s >> (off + R_)) & 1;  // off in [-R,-1]
                };
                double E = spec_.phi() * bit;
                for (const auto& c : anchored) {
                    int p = 1;
                    for (int o : c.sites) p &= occ(o);
                    E += spec_.beta() * c.J * p;
                }
                T_(s, sp) = std::exp(-E);
            }
        }
        // scale-invariant quantities only; normalize for conditioning
        T_ /= T_.maxCoeff();
    }

    void decompose() {
        Eigen::EigenSolver<Eigen::MatrixXd> es(T_);
        const auto& ev = es.eigenvalues();
        int imax = 0;
        double best = -std::numeric_limits<double>::infinity();
        double second = 0.0;
        for (int i = 0; i < ev.size(); ++i) {
            const double mag = std::abs(ev[i]);
            if (ev[i].real() > best && std::abs(ev[i].imag()) < 1e-12 * mag + 1e-300) {
                best = ev[i].real();
                imax = i;
            }
        }
        for (int i = 0; i < ev.size(); ++i) {
            if (i == imax) continue;
            second = std::max(second, std::abs(ev[i]));
        }
        lambda_ = ev[imax].real();
        sub_ratio_ = second / lambda_;
        if (!(lambda_ > 0.0) || sub_ratio_ >= 1.0 - 1e-12)
            throw std::runtime_error("TransferMatrix: degenerate dominant eigenvalue");
        r_ = es.eigenvectors().col(imax).real();
        if (r_.sum() < 0) r_ = -r_;

        Eigen::EigenSolver<Eigen::MatrixXd> esl(T_.transpose());
        const auto& evl = esl.eigenvalues();
        int jmax = 0;
        double bestl = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < evl.size(); ++i) {
            if (evl[i].real() > bestl && std::abs(evl[i].imag()) < 1e-12 * std::abs(evl[i]) + 1e-300) {
                bestl = evl[i].real();
                jmax = i;
            }
        }
        l_ = esl.eigenvectors().col(jmax).real();
        if (l_.sum() < 0) l_ = -l_;
        lr_ = l_.dot(r_);

        const int S = static_cast<int>(T_.rows());
        P_.resize(S, S);
        for (int s = 0; s < S; ++s)
            for (int sp = 0; sp < S; ++sp) P_(s, sp) = T_(s, sp) * r_[sp] / (lambda_ * r_[s]);
        pi_ = (l_.array() * r_.array()).matrix() / lr_;
    }

    GibbsSpec spec_;
    int R_;
    Eigen::MatrixXd T_;
    Eigen::MatrixXd P_;
    Eigen::VectorXd l_, r_, pi_;
    double lambda_ = 0.0;
    double lr_ = 0.0;
    double sub_ratio_ = 0.0;
};

// Density as a function of fugacity. Exact closed form in the product case.
inline double density_of_fugacity(const GibbsSpec& spec, double phi) {
    const GibbsSpec s = spec.with_phi(phi);
    if (s.is_product()) return 1.0 / (1.0 + std::exp(s.effective_phi()));
    return TransferMatrix(s).site_density();
}

// Invert rho(phi) by bracketing bisection on the strictly monotone map.
// Postcondition: |rho(phi) - rho| <= 1e-12.
inline double fugacity_of_density(const GibbsSpec& spec, double rho) {
    if (!(rho > 0.0 && rho < 1.0))
        throw std::invalid_argument("fugacity_of_density: rho must lie in (0,1)");
    if (spec.is_product()) {
        double shift = spec.effective_phi() - spec.phi();
        return std::log((1.0 - rho) / rho) - shift;
    }
    double lo = -1.0, hi = 1.0;  // rho is decreasing in phi
    while (density_of_fugacity(spec, hi) > rho) {
        hi *= 2.0;
        if (hi > 700.0) throw std::runtime_error("fugacity_of_density: bracket failure (hi)");
    }
    while (density_of_fugacity(spec, lo) < rho) {
        lo *= 2.0;
        if (lo < -700.0) throw std::runtime_error("fugacity_of_density: bracket failure (lo)");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double rm = density_of_fugacity(spec, mid);
        if (std::abs(rm - rho) <= 1e-13) return mid;
        if (rm > rho) lo = mid;
        else hi = mid;
        if (hi - lo < 1e-15 * (1.0 + std::abs(lo))) break;
    }
    const double phi = 0.5 * (lo + hi);
    if (std::abs(density_of_fugacity(spec, phi) - rho) > 1e-12)
        throw std::runtime_error("fugacity_of_density: did not converge");
    return phi;
}

inline GibbsSpec at_density(const GibbsSpec& spec, double rho) {
    return spec.with_phi(fugacity_of_density(spec, rho));
}

// Tabulated (phi, rho(phi)) pairs at fixed beta, with the monotone inverse.
class DensityMap {
public:
    DensityMap(const GibbsSpec& spec, int points = 99, double rho_min = 0.01, double rho_max = 0.99)
        : spec_(spec) {
        if (points < 2) throw std::invalid_argument("DensityMap: need >= 2 grid points");
        const double phi_hi = fugacity_of_density(spec, rho_min);  // low density, high phi
        const double phi_lo = fugacity_of_density(spec, rho_max);
        for (int i = 0; i < points; ++i) {
            const double phi = phi_lo + (phi_hi - phi_lo) * i / (points - 1);
            grid_.emplace_back(phi, density_of_fugacity(spec, phi));
        }
        for (std::size_t i = 1; i < grid_.size(); ++i)
            if (!(grid_[i].second < grid_[i - 1].second))
                throw std::runtime_error("DensityMap: rho(phi) not strictly decreasing on grid");
    }

    const std::vector<std::pair<double, double>>& grid() const { return grid_; }
    double beta() const { return spec_.beta(); }
    double rho_of_phi(double phi) const { return density_of_fugacity(spec_, phi); }
    double phi_of_rho(double rho) const { return fugacity_of_density(spec_, rho); }

private:
    GibbsSpec spec_;
    std::vector<std::pair<double, double>> grid_;
};

// Exact sampler for the finite-ring Gibbs measure, by sequential conditionals
// of the cyclic block chain: P(eta) ∝ prod_j T[b_j, b_{j+1}] around the ring.
class RingGibbsSampler {
public:
    RingGibbsSampler(const GibbsSpec& spec, int size) : tm_(spec), L_(size) {
        const int R = tm_.block_size();
        if (L_ <= 2 * std::max(R, spec.range()))
            throw std::invalid_argument("RingGibbsSampler: require L > 2R");
        const Eigen::MatrixXd That = tm_.matrix() / tm_.dominant_eigenvalue();
        pows_.resize(static_cast<std::size_t>(L_) + 1);
        pows_[0] = Eigen::MatrixXd::Identity(That.rows(), That.cols());
        for (int m = 1; m <= L_; ++m) pows_[static_cast<std::size_t>(m)] = pows_[m - 1] * That;
        diag_ = pows_[static_cast<std::size_t>(L_)].diagonal();
        const double z = diag_.sum();
        if (!(z > 0)) throw std::runtime_error("RingGibbsSampler: vanishing partition trace");
        diag_ /= z;
    }

    Ring sample(Stream& rng) const {
        const int R = tm_.block_size();
        const Eigen::MatrixXd& T = tm_.matrix();
        Ring ring(L_);
        // block b0 ends at site 0: bit i <-> site 1-R+i (mod L)
        int s0 = pick(diag_, rng);
        for (int i = 0; i < R; ++i) ring.set(1 - R + i, (s0 >> i) & 1);
        int s = s0;
        for (int j = 1; j <= L_ - R; ++j) {
            double w[2];
            int sp[2];
            for (int bit = 0; bit <= 1; ++bit) {
                sp[bit] = (s >> 1) | (bit << (R - 1));
                w[bit] = T(s, sp[bit]) * pows_[static_cast<std::size_t>(L_ - j)](sp[bit], s0);
            }
            const double tot = w[0] + w[1];
            const int bit = (rng.uniform() * tot < w[1]) ? 1 : 0;
            ring.set(j, bit);
            s = sp[bit];
        }
        return ring;
    }

private:
    static int pick(const Eigen::VectorXd& p, Stream& rng) {
        double u = rng.uniform();
        for (int i = 0; i < p.size(); ++i) {
            u -= p[i];
            if (u < 0) return i;
        }
        return static_cast<int>(p.size()) - 1;
    }

    TransferMatrix tm_;
    int L_;
    std::vector<Eigen::MatrixXd> pows_;
    Eigen::VectorXd diag_;
};

// Exact sample from nu_rho on a ring; product measures take the fast path.
inline Ring sample_gibbs(const GibbsSpec& spec, double rho, int size, Stream& rng) {
    if (spec.is_product()) {
        Ring ring(size);
        for (int x = 0; x < size; ++x) ring.set(x, rng.bernoulli(rho) ? 1 : 0);
        return ring;
    }
    RingGibbsSampler sampler(at_density(spec, rho), size);
    return sampler.sample(rng);
}

}  // namespace kawasaki
