#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "kawasaki/gibbs.hpp"
#include "kawasaki/numeric.hpp"
#include "kawasaki/rates.hpp"
#include "kawasaki/ring.hpp"
#include "kawasaki/rng.hpp"
#include "kawasaki/transfer_matrix.hpp"

namespace kawasaki {

// Continuous-time plan for the (weakly) asymmetric dynamics. The engine works
// in microscopic time; diffusive speed-up is the caller's multiplication of
// the horizon by epsilon^{-2}.
struct SimulationPlan {
    RateTable rates;
    GibbsSpec spec;
    int L = 0;
    double rho = 0.5;
    double gamma = 0.0;
    double horizon = 0.0;
    std::uint64_t seed = 1;
    int replicas = 1;
    std::vector<double> sample_times;
    bool record_currents = true;

    SimulationPlan(RateTable r, GibbsSpec s) : rates(std::move(r)), spec(std::move(s)) {}

    // gamma = a sqrt(epsilon)
    void set_weak_asymmetry(double a, double epsilon) {
        if (!(epsilon > 0.0)) throw std::invalid_argument("SimulationPlan: epsilon must be > 0");
        gamma = a * std::sqrt(epsilon);
        if (gamma < 0.0 || gamma > 1.0)
            throw std::invalid_argument("SimulationPlan: a sqrt(epsilon) must lie in [0,1]");
    }

    void validate() const {
        if (L <= 2 * rates.window_width())
            throw std::invalid_argument("SimulationPlan: require L > 2 * rate window");
        if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("SimulationPlan: gamma in [0,1]");
        if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("SimulationPlan: rho in (0,1)");
        if (!(horizon > 0.0)) throw std::invalid_argument("SimulationPlan: horizon must be > 0");
        if (!std::is_sorted(sample_times.begin(), sample_times.end()))
            throw std::invalid_argument("SimulationPlan: sample times must be sorted");
        if (!sample_times.empty() && sample_times.front() < 0.0)
            throw std::invalid_argument("SimulationPlan: sample times must be nonnegative");
        if (replicas < 1) throw std::invalid_argument("SimulationPlan: replicas >= 1");
    }
};

struct KmcEvent {
    double dt = 0.0;   // waiting time of this proposal (Exp(L))
    int bond = -1;
    bool accepted = false;
    int direction = 0;  // +1 particle moved right, -1 left, 0 rejected
};

// Rejection kinetic Monte Carlo: proposals at total rate L (uniform bond),
// acceptance with probability c_gamma on the local window. Exact because all
// rates are <= 1; waiting times accumulate for rejected proposals too.
class KmcEngine {
public:
    KmcEngine(Ring state, const RateTable& rates, double gamma)
        : state_(std::move(state)),
          rate_table_(rates.with_gamma(gamma).asym_table()),
          radius_(rates.radius()),
          width_(rates.window_width()),
          currents_(static_cast<std::size_t>(state_.size()), 0) {
        if (state_.size() < width_)
            throw std::invalid_argument("KmcEngine: ring smaller than the rate window");
    }

    const Ring& state() const { return state_; }
    double time() const { return time_; }
    const std::vector<std::int64_t>& currents() const { return currents_; }
    std::uint64_t proposals() const { return proposals_; }
    std::uint64_t accepted() const { return accepted_; }

    // Waiting time to the next proposal (state unchanged until fire()).
    double draw_wait(Stream& rng) {
        return rng.exponential(static_cast<double>(state_.size()));
    }

    KmcEvent fire(double dt, Stream& rng) {
        const int L = state_.size();
        KmcEvent ev;
        ev.dt = dt;
        time_ += dt;
        ev.bond = static_cast<int>(rng.index(static_cast<std::uint64_t>(L)));
        ++proposals_;
        const std::uint32_t mask = state_.window_mask(ev.bond - radius_, width_);
        const double rate = rate_table_[mask];
        const double u = rng.uniform();
        if (u < rate) {
            const int o0 = (mask >> radius_) & 1;
            state_.exchange(ev.bond);
            ev.accepted = true;
            ev.direction = (o0 == 1) ? +1 : -1;
            currents_[static_cast<std::size_t>(ev.bond)] += ev.direction;
            ++accepted_;
        }
        return ev;
    }

    KmcEvent step(Stream& rng) { return fire(draw_wait(rng), rng); }

private:
    Ring state_;
    std::vector<double> rate_table_;
    int radius_;
    int width_;
    std::vector<std::int64_t> currents_;
    double time_ = 0.0;
    std::uint64_t proposals_ = 0;
    std::uint64_t accepted_ = 0;
};

struct TrajectoryRecord {
    std::vector<double> sample_times;
    std::vector<Ring> snapshots;                        // state at each sample time
    std::vector<std::vector<std::int64_t>> currents;    // integrated signed current per bond
    double total_time = 0.0;
    std::uint64_t proposals = 0;
    std::uint64_t accepted = 0;
    double wall_seconds = 0.0;
};

// Height field h_t(x): integrated signed current across bond (x, x+1) up to
// sample index it.
inline std::int64_t height(const TrajectoryRecord& rec, std::size_t it, int x) {
    return rec.currents.at(it).at(static_cast<std::size_t>(x));
}

// Lattice continuity: eta_t(x) - eta_0(x) = J_{x-1,x}(t) - J_{x,x+1}(t),
// exactly, event by event. Returns the max absolute defect (0 when exact).
inline std::int64_t continuity_defect(const TrajectoryRecord& rec) {
    std::int64_t worst = 0;
    if (rec.snapshots.empty()) return 0;
    const Ring& eta0 = rec.snapshots.front();
    const int L = eta0.size();
    for (std::size_t it = 0; it < rec.snapshots.size(); ++it) {
        if (rec.currents.size() <= it) break;
        const auto& J = rec.currents[it];
        for (int x = 0; x < L; ++x) {
            const std::int64_t lhs = rec.snapshots[it].occ(x) - eta0.occ(x);
            const std::int64_t rhs = J[static_cast<std::size_t>((x - 1 + L) % L)] -
                                     J[static_cast<std::size_t>(x)];
            worst = std::max(worst, std::abs(lhs - rhs));
        }
    }
    return worst;
}

inline TrajectoryRecord simulate(const SimulationPlan& plan, Ring initial, Stream& rng) {
    plan.validate();
    if (initial.size() != plan.L) throw std::invalid_argument("simulate: initial state size mismatch");
    const int expected_count = initial.particle_count();
    KmcEngine engine(std::move(initial), plan.rates, plan.gamma);

    TrajectoryRecord rec;
    std::vector<double> times = plan.sample_times;
    if (times.empty() || times.front() != 0.0) times.insert(times.begin(), 0.0);
    if (times.back() < plan.horizon) times.push_back(plan.horizon);

    std::size_t next = 0;
    auto record_at = [&](double) {
        rec.sample_times.push_back(times[next]);
        rec.snapshots.push_back(engine.state());
        if (plan.record_currents) rec.currents.push_back(engine.currents());
        if (engine.state().particle_count() != expected_count)
            throw std::runtime_error("simulate: particle count changed (invariant violation) at t=" +
                                     std::to_string(times[next]));
    };
    record_at(0.0);
    ++next;
    // the state is piecewise constant between events: sample times crossed by
    // the upcoming waiting interval see the pre-event state
    while (next < times.size()) {
        const double dt = engine.draw_wait(rng);
        while (next < times.size() && engine.time() + dt >= times[next]) {
            record_at(times[next]);
            ++next;
        }
        if (next >= times.size()) break;
        engine.fire(dt, rng);
    }
    rec.total_time = engine.time();
    rec.proposals = engine.proposals();
    rec.accepted = engine.accepted();
    return rec;
}

// One record per replica; replicas run in parallel with independent streams
// seeded from (plan.seed, replica index). Results depend only on the seeds,
// not on the thread layout.
inline std::vector<TrajectoryRecord> run_replicas(const SimulationPlan& plan, int threads = 0) {
    plan.validate();
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, plan.replicas));
    std::vector<TrajectoryRecord> records(static_cast<std::size_t>(plan.replicas));
    std::vector<std::string> errors(static_cast<std::size_t>(threads));
    auto worker = [&](int tid) {
        try {
            for (int rep = tid; rep < plan.replicas; rep += threads) {
                Stream init_rng(derive_seed(plan.seed, 2 * static_cast<std::uint64_t>(rep)));
                Stream dyn_rng(derive_seed(plan.seed, 2 * static_cast<std::uint64_t>(rep) + 1));
                Ring initial = sample_gibbs(plan.spec, plan.rho, plan.L, init_rng);
                records[static_cast<std::size_t>(rep)] = simulate(plan, std::move(initial), dyn_rng);
            }
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(tid)] = e.what();
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error("run_replicas: " + e);
    return records;
}

// ---------------------------------------------------------------------------
// Fluctuation-field observables
// ---------------------------------------------------------------------------

// <Y, F> = sqrt(eps) sum_x (eta(x) - rho) F(eps x), F periodic on [0, eps L).
template <typename F>
double fluctuation_field(const Ring& eta, double rho, double eps, F&& test_function) {
    CompensatedSum s;
    for (int x = 0; x < eta.size(); ++x)
        s.add((eta.occ(x) - rho) * test_function(eps * x));
    return std::sqrt(eps) * s.value();
}

// Positive mollifier shape with unit integral and support [-1, 1].
struct Mollifier {
    std::function<double(double)> shape;
    std::string name;

    double operator()(double u) const { return shape(u); }

    double integral() const {
        return simpson([&](double u) { return shape(u); }, -1.0, 1.0, 1 << 12);
    }
    // kappa = int iota(u)^2 du
    double kappa() const {
        return simpson([&](double u) { const double v = shape(u); return v * v; }, -1.0, 1.0, 1 << 12);
    }
};

inline Mollifier triangular_mollifier() {
    return Mollifier{[](double u) { return std::max(0.0, 1.0 - std::abs(u)); }, "triangular"};
}

// Signed periodic distance on the circle of circumference `span`.
inline double periodic_distance(double u, double span) {
    double d = std::fmod(u, span);
    if (d < -span / 2) d += span;
    if (d > span / 2) d -= span;
    return d;
}

// Wick-corrected square of the mollified fluctuation field centered at eps*x:
//   <Y, iota_delta^{eps x}>^2 - kappa chi / delta.
// chi defaults to the product-measure value rho(1-rho).
inline double wick_quadratic(const Ring& eta, double rho, double eps, double delta,
                             const Mollifier& iota, int center, double chi = -1.0) {
    if (delta < 10.0 * eps)
        throw std::invalid_argument("wick_quadratic: require delta >= 10 eps");
    if (chi < 0.0) chi = rho * (1.0 - rho);
    const double span = eps * eta.size();
    if (!(2.0 * delta < span))
        throw std::invalid_argument("wick_quadratic: mollifier support exceeds the domain");
    const double c = eps * center;
    CompensatedSum s;
    // iota_delta vanishes outside |u| <= delta; iterate only the support
    const int reach = static_cast<int>(std::ceil(delta / eps)) + 1;
    for (int x = center - reach; x <= center + reach; ++x) {
        const double u = periodic_distance(eps * x - c, span);
        const double w = iota(u / delta) / delta;
        if (w == 0.0) continue;
        s.add((eta.occ(x) - rho) * w);
    }
    const double y = std::sqrt(eps) * s.value();
    const double kappa = iota.kappa();
    return y * y - kappa * chi / delta;
}

// One measurement of the fluctuation field at scale eps: test-function
// pairings and Wick-corrected squares, with the mollifier bookkeeping kept on
// the record so kappa can be re-derived from iota.
struct FieldSample {
    double eps = 0.0;
    std::vector<double> pairings;        // <Y, F_i> for the requested test functions
    std::string mollifier_name;
    double delta = 0.0;
    double kappa = 0.0;                   // stored value of int iota^2
    std::vector<double> wick_values;      // Wick-corrected squares at requested centers

    // invariant: kappa recomputed from iota matches the stored value
    double kappa_check(const Mollifier& iota) const { return std::abs(iota.kappa() - kappa); }
};

template <typename TestFunctions>
FieldSample measure_field(const Ring& eta, double rho, double eps, const TestFunctions& fs,
                          const Mollifier& iota, double delta, const std::vector<int>& centers,
                          double chi = -1.0) {
    FieldSample s;
    s.eps = eps;
    s.mollifier_name = iota.name;
    s.delta = delta;
    s.kappa = iota.kappa();
    for (const auto& F : fs) s.pairings.push_back(fluctuation_field(eta, rho, eps, F));
    for (int c : centers) s.wick_values.push_back(wick_quadratic(eta, rho, eps, delta, iota, c, chi));
    return s;
}

// The three pieces of the time derivative of <Y, F>: the diffusive term
// sqrt(eps) sum_x omega_x Delta F(eps x), the transport term
// a sum_x j_x grad F(eps x), and the instantaneous noise variance
// eps sum_x c_x (eta(x+1)-eta(x))^2 (grad F(eps x))^2,
// with grad/Delta the exact derivatives of the (smooth, periodic) F.
struct GeneratorTerms {
    double diffusive = 0.0;
    double transport = 0.0;
    double noise_variance = 0.0;
};

template <typename F1, typename F2>
GeneratorTerms generator_term_decomposition(const Ring& eta, const LocalFunction& omega,
                                            const RateTable& c, double a, double eps,
                                            F1&& grad_F, F2&& lap_F) {
    GeneratorTerms t;
    const CompiledLocal om(omega);
    const LocalFunction j = current_observable(c);
    const CompiledLocal jc(j);
    CompensatedSum diff, trans, noise;
    for (int x = 0; x < eta.size(); ++x) {
        const double u = eps * x;
        diff.add(om.evaluate(eta, x) * lap_F(u));
        trans.add(jc.evaluate(eta, x) * grad_F(u));
        const double d = eta.occ(x + 1) - eta.occ(x);
        const double cv = c.value(eta.window_mask(x - c.radius(), c.window_width()));
        noise.add(cv * d * d * grad_F(u) * grad_F(u));
    }
    t.diffusive = std::sqrt(eps) * diff.value();
    t.transport = a * trans.value();
    t.noise_variance = eps * noise.value();
    return t;
}

// ---------------------------------------------------------------------------
// Structure function S(x,t) = E[(eta_t(x) - rho)(eta_0(0) - rho)]
// ---------------------------------------------------------------------------

struct StructureFunction {
    std::vector<double> times;
    std::vector<int> lags;                     // -maxlag..maxlag
    std::vector<std::vector<double>> mean;     // [time][lag]
    std::vector<std::vector<double>> stderr_;  // across replicas
    std::vector<double> sum_rule;              // sum_x S(x,t) per time
    std::vector<double> sum_rule_stderr;
    bool error_bars_valid = false;  // requires >= 2 replicas; reported, not fatal
};

// Translation-averaged two-point function from replica snapshot records.
// Requires grand-canonical initial states for the sum rule sum_x S = chi.
inline StructureFunction structure_function(const std::vector<TrajectoryRecord>& records,
                                            double rho, int max_lag) {
    if (records.empty()) throw std::invalid_argument("structure_function: no records");
    const std::size_t nt = records.front().sample_times.size();
    const int L = records.front().snapshots.front().size();
    if (max_lag >= L / 2) throw std::invalid_argument("structure_function: max_lag >= L/2");

    StructureFunction sf;
    sf.error_bars_valid = records.size() >= 2;
    sf.times = records.front().sample_times;
    for (int x = -max_lag; x <= max_lag; ++x) sf.lags.push_back(x);
    const std::size_t nl = sf.lags.size();
    sf.mean.assign(nt, std::vector<double>(nl, 0.0));
    sf.stderr_.assign(nt, std::vector<double>(nl, 0.0));
    sf.sum_rule.assign(nt, 0.0);
    sf.sum_rule_stderr.assign(nt, 0.0);

    const double R = static_cast<double>(records.size());
    std::vector<std::vector<double>> sum(nt, std::vector<double>(nl, 0.0));
    std::vector<std::vector<double>> sumsq(nt, std::vector<double>(nl, 0.0));
    std::vector<double> srsum(nt, 0.0), srsumsq(nt, 0.0);

    std::vector<double> a0(static_cast<std::size_t>(L));
    std::vector<double> at(static_cast<std::size_t>(L));
    for (const auto& rec : records) {
        if (rec.sample_times.size() != nt)
            throw std::invalid_argument("structure_function: inconsistent sample schedules");
        const Ring& eta0 = rec.snapshots.front();
        double dev0 = 0.0;
        for (int y = 0; y < L; ++y) {
            a0[static_cast<std::size_t>(y)] = eta0.occ(y) - rho;
            dev0 += a0[static_cast<std::size_t>(y)];
        }
        for (std::size_t it = 0; it < nt; ++it) {
            const Ring& etat = rec.snapshots[it];
            double devt = 0.0;
            for (int y = 0; y < L; ++y) {
                at[static_cast<std::size_t>(y)] = etat.occ(y) - rho;
                devt += at[static_cast<std::size_t>(y)];
            }
            for (std::size_t il = 0; il < nl; ++il) {
                const int lag = sf.lags[il];
                double acc = 0.0;
                for (int y = 0; y < L; ++y) {
                    int z = y + lag;
                    if (z >= L) z -= L;
                    else if (z < 0) z += L;
                    acc += a0[static_cast<std::size_t>(y)] * at[static_cast<std::size_t>(z)];
                }
                const double v = acc / L;
                sum[it][il] += v;
                sumsq[it][il] += v * v;
            }
            const double sr = dev0 * devt / L;  // = sum over all lags of the estimator
            srsum[it] += sr;
            srsumsq[it] += sr * sr;
        }
    }
    for (std::size_t it = 0; it < nt; ++it) {
        for (std::size_t il = 0; il < nl; ++il) {
            const double m = sum[it][il] / R;
            sf.mean[it][il] = m;
            if (records.size() > 1)
                sf.stderr_[it][il] =
                    std::sqrt(std::max(0.0, (sumsq[it][il] / R - m * m) / (R - 1.0)));
        }
        const double m = srsum[it] / R;
        sf.sum_rule[it] = m;
        if (records.size() > 1)
            sf.sum_rule_stderr[it] = std::sqrt(std::max(0.0, (srsumsq[it] / R - m * m) / (R - 1.0)));
    }
    return sf;
}

// Second moment sum_x x^2 S(x,t) restricted to |x| <= cutoff(t), with the
// stderr propagated from the per-lag scatter.
struct SecondMomentPoint {
    double t = 0.0;
    double value = 0.0;
    double stderr_ = 0.0;
    int cutoff = 0;
};

inline std::vector<SecondMomentPoint> second_moment_growth(const StructureFunction& sf,
                                                           double diffusivity_guess = 1.0,
                                                           double n_sigmas = 4.0,
                                                           int pad = 10) {
    std::vector<SecondMomentPoint> out;
    const int max_lag = sf.lags.back();
    for (std::size_t it = 0; it < sf.times.size(); ++it) {
        const double t = sf.times[it];
        if (t <= 0.0) continue;
        SecondMomentPoint p;
        p.t = t;
        p.cutoff = std::min(max_lag,
                            static_cast<int>(std::ceil(n_sigmas * std::sqrt(2.0 * diffusivity_guess * t))) + pad);
        double v = 0.0, var = 0.0;
        for (std::size_t il = 0; il < sf.lags.size(); ++il) {
            const int x = sf.lags[il];
            if (std::abs(x) > p.cutoff) continue;
            const double w = static_cast<double>(x) * x;
            v += w * sf.mean[it][il];
            var += w * w * sf.stderr_[it][il] * sf.stderr_[it][il];
        }
        p.value = v;
        p.stderr_ = std::sqrt(var);
        out.push_back(p);
    }
    return out;
}

// Galilean re-indexing by the nearest-integer lattice drift round(v t):
// site x of the shifted frame reads site x + round(v t) of the lab frame.
inline TrajectoryRecord frame_shift(const TrajectoryRecord& rec, double v) {
    TrajectoryRecord out = rec;
    for (std::size_t it = 0; it < rec.snapshots.size(); ++it) {
        const double t = rec.sample_times[it];
        const int L = rec.snapshots[it].size();
        const long long s = std::llround(v * t);
        Ring shifted(L);
        for (int x = 0; x < L; ++x)
            shifted.set(x, rec.snapshots[it].occ(x + static_cast<int>(s % L)));
        out.snapshots[it] = std::move(shifted);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Exact finite-ring generator checks
// ---------------------------------------------------------------------------

inline Ring ring_from_bits(std::size_t bits, int L) {
    Ring r(L);
    for (int x = 0; x < L; ++x) r.set(x, static_cast<int>((bits >> x) & 1));
    return r;
}

// Residual of nu-invariance under the c_gamma dynamics on a ring of size L:
// max_eta' |sum_eta nu(eta) Lgen(eta, eta')| with nu the ring Gibbs measure at
// fugacity phi(rho). Zero (to rounding) iff nu is stationary.
inline double generator_invariance_residual(const RateTable& rates, double gamma,
                                            const GibbsSpec& spec, double rho, int L) {
    if (L < 2 || L > 20) throw std::invalid_argument("generator_invariance_residual: L <= 20");
    if (L <= 2 * std::max(rates.window_width() / 2, spec.range()))
        throw std::invalid_argument("generator_invariance_residual: ring too small for windows");
    const GibbsSpec at_rho = spec.with_phi(fugacity_of_density(spec, rho));
    const std::vector<double> cg = rates.with_gamma(gamma).asym_table();
    const int r = rates.radius(), w = rates.window_width();

    const std::size_t N = std::size_t{1} << L;
    std::vector<double> nu(N), flow(N, 0.0);
    std::vector<double> logw(N);
    double logw_max = -1e300;
    for (std::size_t e = 0; e < N; ++e) {
        const Ring ring = ring_from_bits(e, L);
        logw[e] = -at_rho.beta() * at_rho.ring_energy(ring) - at_rho.phi() * ring.particle_count();
        logw_max = std::max(logw_max, logw[e]);
    }
    double z = 0.0;
    for (std::size_t e = 0; e < N; ++e) {
        nu[e] = std::exp(logw[e] - logw_max);
        z += nu[e];
    }
    for (std::size_t e = 0; e < N; ++e) nu[e] /= z;

    for (std::size_t e = 0; e < N; ++e) {
        for (int x = 0; x < L; ++x) {
            const int o0 = static_cast<int>((e >> x) & 1);
            const int o1 = static_cast<int>((e >> ((x + 1) % L)) & 1);
            if (o0 == o1) continue;
            std::uint32_t mask = 0;
            for (int i = 0; i < w; ++i) {
                const int site = (x - r + i + 2 * L) % L;
                mask |= static_cast<std::uint32_t>((e >> site) & 1) << i;
            }
            const double rate = cg[mask];
            const std::size_t e2 = e ^ (std::size_t{1} << x) ^ (std::size_t{1} << ((x + 1) % L));
            flow[e2] += nu[e] * rate;
            flow[e] -= nu[e] * rate;
        }
    }
    double worst = 0.0;
    for (double f : flow) worst = std::max(worst, std::abs(f));
    return worst;
}

// Built-in periodic test-function shapes on [0, span).
inline std::function<double(double)> sine_mode(int k, double span) {
    const double w = 2.0 * 3.14159265358979323846 * k / span;
    return [w](double u) { return std::sin(w * u); };
}

inline std::function<double(double)> cosine_mode(int k, double span) {
    const double w = 2.0 * 3.14159265358979323846 * k / span;
    return [w](double u) { return std::cos(w * u); };
}

// C^infinity compact bump centered at c with half-width h, periodic on span.
inline std::function<double(double)> smooth_bump(double c, double h, double span) {
    return [=](double u) {
        const double d = periodic_distance(u - c, span) / h;
        if (std::abs(d) >= 1.0) return 0.0;
        return std::exp(-1.0 / (1.0 - d * d)) * std::exp(1.0);
    };
}

}  // namespace kawasaki
