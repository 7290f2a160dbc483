#include <catch2/catch_amalgamated.hpp>

#include "kawasaki/gibbs.hpp"
#include "kawasaki/local_function.hpp"
#include "kawasaki/rates.hpp"
#include "kawasaki/ring.hpp"
#include "kawasaki/rng.hpp"

#include "support.hpp"

using namespace kawasaki;

namespace {

Ring random_ring(int L, Stream& rng, double p = 0.5) {
    Ring r(L);
    for (int x = 0; x < L; ++x) r.set(x, rng.bernoulli(p) ? 1 : 0);
    return r;
}

// The speed-change gradient function omega = eta(0) + b(eta(-1)eta(0)
// + eta(0)eta(1) - eta(-1)eta(1)), written out by direct substitution.
double speed_change_omega_direct(const Ring& eta, int x, double b) {
    const double em1 = eta.occ(x - 1), e0 = eta.occ(x), e1 = eta.occ(x + 1);
    return e0 + b * (em1 * e0 + e0 * e1 - em1 * e1);
}

using testing::speed_change_omega;

}  // namespace

TEST_CASE("ring exchange swaps one bond and conserves particles") {
    Ring r(std::vector<std::uint8_t>{1, 0, 0});
    r.exchange(0);
    CHECK(r.occ(0) == 0);
    CHECK(r.occ(1) == 1);
    CHECK(r.occ(2) == 0);

    Stream rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        Ring s = random_ring(17, rng);
        const Ring before = s;
        const int bond = static_cast<int>(rng.index(17));
        const int n = s.particle_count();
        s.exchange(bond);
        CHECK(s.particle_count() == n);
        s.exchange(bond);  // involution
        CHECK(s == before);
    }
}

TEST_CASE("ring wraps periodically, including the last bond") {
    Ring r(std::vector<std::uint8_t>{1, 0, 0, 0});
    r.exchange(3);  // bond (3, 0)
    CHECK(r.occ(3) == 1);
    CHECK(r.occ(0) == 0);
    CHECK(r.particle_count() == 1);
}

TEST_CASE("evaluate_local basics") {
    Stream rng(12);
    const Ring eta = random_ring(16, rng);

    const LocalFunction f = LocalFunction::site(0);
    CHECK(f.evaluate(eta, 3) == eta.occ(3));

    const LocalFunction pair = LocalFunction::monomial({0, 1});
    Ring ones(std::vector<std::uint8_t>(12, 1));
    for (int x = 0; x < 12; ++x) CHECK(pair.evaluate(ones, x) == 1.0);
}

TEST_CASE("evaluate_local of the speed-change omega matches direct substitution") {
    const double b = 0.37;
    const LocalFunction omega = speed_change_omega(b);
    std::vector<std::uint8_t> alt;
    for (int i = 0; i < 10; ++i) alt.push_back(i % 2 == 0 ? 1 : 0);
    const Ring eta(alt);
    for (int x = 0; x < 10; ++x)
        CHECK_THAT(omega.evaluate(eta, x),
                   Catch::Matchers::WithinAbs(speed_change_omega_direct(eta, x, b), 1e-15));

    Stream rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Ring r = random_ring(9, rng, 0.4);
        for (int x = 0; x < 9; ++x)
            CHECK_THAT(omega.evaluate(r, x),
                       Catch::Matchers::WithinAbs(speed_change_omega_direct(r, x, b), 1e-15));
    }
}

TEST_CASE("evaluate_local depends only on window sites") {
    Stream rng(21);
    const LocalFunction f = speed_change_omega(0.3);  // window [-1, 1]
    for (int trial = 0; trial < 30; ++trial) {
        Ring eta = random_ring(12, rng);
        const double v = f.evaluate(eta, 5);
        // perturb every site outside the window {4,5,6}
        for (int x = 0; x < 12; ++x) {
            if (x >= 4 && x <= 6) continue;
            eta.set(x, 1 - eta.occ(x));
            CHECK(f.evaluate(eta, 5) == v);
        }
    }
}

TEST_CASE("evaluate_local is linear in coefficients and shift covariant") {
    Stream rng(31);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<double> cf(8), cg(8);
        for (auto& c : cf) c = rng.uniform() * 2 - 1;
        for (auto& c : cg) c = rng.uniform() * 2 - 1;
        const LocalFunction f(-1, cf), g(-1, cg);
        const double alpha = rng.uniform() * 4 - 2;
        const LocalFunction combo = f.scaled(alpha) + g;
        const Ring eta = random_ring(11, rng);
        const int x = static_cast<int>(rng.index(11));
        CHECK_THAT(combo.evaluate(eta, x),
                   Catch::Matchers::WithinAbs(alpha * f.evaluate(eta, x) + g.evaluate(eta, x), 1e-13));
        // theta_1 shift covariance
        CHECK_THAT(f.shifted(1).evaluate(eta, x - 1),
                   Catch::Matchers::WithinAbs(f.evaluate(eta, x), 1e-15));
    }
}

TEST_CASE("value_table round-trips through the Moebius transform") {
    Stream rng(41);
    std::vector<double> coeff(32);
    for (auto& c : coeff) c = rng.uniform() * 2 - 1;
    const LocalFunction f(-2, coeff);
    const LocalFunction back = LocalFunction::from_value_table(-2, f.value_table());
    for (std::size_t m = 0; m < coeff.size(); ++m)
        CHECK_THAT(back.coefficient(static_cast<std::uint32_t>(m)),
                   Catch::Matchers::WithinAbs(coeff[m], 1e-12));
}

TEST_CASE("hamiltonian exchange delta") {
    const GibbsSpec nn = GibbsSpec::nearest_neighbor(1.0, 1.0, 0.0);

    SECTION("zero when the bond occupancies agree") {
        Ring eta(std::vector<std::uint8_t>{1, 1, 0, 0});
        CHECK(nn.exchange_delta(eta, 0) == 0.0);
        CHECK(nn.exchange_delta(eta, 2) == 0.0);
    }

    SECTION("alternating ring on L=4 matches the full-sum oracle") {
        Ring eta(std::vector<std::uint8_t>{1, 0, 1, 0});
        for (int bond = 0; bond < 4; ++bond) {
            Ring swapped = eta;
            swapped.exchange(bond);
            const double oracle = nn.ring_energy(swapped) - nn.ring_energy(eta);
            CHECK_THAT(nn.exchange_delta(eta, bond), Catch::Matchers::WithinAbs(oracle, 1e-14));
        }
    }

    SECTION("full-sum oracle on random rings, range-2 potential") {
        const GibbsSpec spec({Coupling{{0, 1}, 0.7}, Coupling{{0, 2}, -0.4}, Coupling{{0}, 0.2}},
                             0.9, 0.0);
        Stream rng(7);
        for (int trial = 0; trial < 40; ++trial) {
            const Ring eta = random_ring(8, rng);
            const int bond = static_cast<int>(rng.index(8));
            Ring swapped = eta;
            swapped.exchange(bond);
            const double oracle = spec.ring_energy(swapped) - spec.ring_energy(eta);
            CHECK_THAT(spec.exchange_delta(eta, bond), Catch::Matchers::WithinAbs(oracle, 1e-13));
        }
    }

    SECTION("empty potential gives zero") {
        const GibbsSpec empty({}, 1.0, 0.0);
        Stream rng(9);
        const Ring eta = random_ring(10, rng);
        for (int bond = 0; bond < 10; ++bond) CHECK(empty.exchange_delta(eta, bond) == 0.0);
    }
}

TEST_CASE("builtin rate tables satisfy their invariants") {
    const RateTable ssep = ssep_rate();
    const RateTable sc = speed_change_rate(0.3);
    const GibbsSpec nn = GibbsSpec::nearest_neighbor(1.0, 0.7, 0.0);
    const RateTable metro = metropolis_rate(nn);
    for (const RateTable* t : {&ssep, &sc, &metro}) CHECK_NOTHROW(t->validate());
}

TEST_CASE("ssep obeys the exclusion rule") {
    const RateTable c = ssep_rate();
    CHECK(c.value(0b11) == 0.0);
    CHECK(c.value(0b00) == 0.0);
    CHECK(c.value(0b01) == 1.0);
    CHECK(c.value(0b10) == 1.0);
}

TEST_CASE("speed-change rate values match the formula") {
    const double b = 0.3;
    const RateTable c = speed_change_rate(b);
    // eta(-1)=eta(2)=0, eta(0) != eta(1): c = 1/(1+2|b|)
    CHECK_THAT(c.value(0b0010), Catch::Matchers::WithinAbs(1.0 / 1.6, 1e-15));
    CHECK_THAT(c.value(0b0100), Catch::Matchers::WithinAbs(1.0 / 1.6, 1e-15));
    // eta(-1)=eta(2)=1: c = (1+2b)/(1+2|b|) = 1
    CHECK_THAT(c.value(0b1011), Catch::Matchers::WithinAbs(1.0, 1e-15));
    CHECK_THROWS_AS(speed_change_rate(0.5), std::invalid_argument);
    CHECK_THROWS_AS(speed_change_rate(-0.7), std::invalid_argument);
}

TEST_CASE("metropolis at beta=0 acts as ssep") {
    const GibbsSpec spec({Coupling{{0, 1}, 1.0}}, 0.0, 0.0);
    const RateTable metro = metropolis_rate(spec);
    const RateTable ssep = ssep_rate();
    Stream rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const Ring eta = random_ring(10, rng);
        const int bond = static_cast<int>(rng.index(10));
        const double vm = metro.value(eta.window_mask(bond - metro.radius(), metro.window_width()));
        const double vs = ssep.value(eta.window_mask(bond, 2));
        CHECK(vm == vs);
    }
}

TEST_CASE("asymmetrized rate suppresses exactly the eta(1)(1-eta(0)) channel") {
    const double gamma = 0.4;
    const RateTable c = speed_change_rate(0.2).with_gamma(gamma);
    for (std::uint32_t m = 0; m < 16; ++m) {
        const double base = c.value(m);
        const double expect =
            base * (1.0 - gamma * c.occ1(m) * (1 - c.occ0(m)));
        CHECK_THAT(c.asym_value(m), Catch::Matchers::WithinAbs(expect, 1e-15));
    }
}
