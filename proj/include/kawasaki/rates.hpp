#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kawasaki/gibbs.hpp"
#include "kawasaki/local_function.hpp"

namespace kawasaki {

// Exchange rate for the bond (0,1) as an explicit table over the window
// {-r, ..., r+1}. Index bit i <-> site -r+i (little-endian), so the bond
// occupancies are bits r and r+1. All rates lie in [0,1] (rejection
// normalization) and vanish exactly on configurations with eta(0) = eta(1).
class RateTable {
public:
    RateTable(int radius, std::vector<double> table, double gamma = 0.0,
              double time_scale = 1.0, std::string family = "custom")
        : radius_(radius),
          table_(std::move(table)),
          gamma_(gamma),
          time_scale_(time_scale),
          family_(std::move(family)) {
        if (radius_ < 0 || radius_ > 6) throw std::invalid_argument("RateTable: radius out of range");
        if (table_.size() != (std::size_t{1} << window_width()))
            throw std::invalid_argument("RateTable: table size must be 2^(2r+2)");
        if (gamma_ < 0.0 || gamma_ > 1.0) throw std::invalid_argument("RateTable: gamma must be in [0,1]");
        validate();
    }

    int radius() const { return radius_; }
    int window_width() const { return 2 * radius_ + 2; }
    int window_lo() const { return -radius_; }
    int window_hi() const { return radius_ + 1; }
    double gamma() const { return gamma_; }
    double time_scale() const { return time_scale_; }
    const std::string& family() const { return family_; }
    const std::vector<double>& table() const { return table_; }

    static int bit_site0(int radius) { return radius; }

    int occ0(std::uint32_t mask) const { return (mask >> radius_) & 1; }
    int occ1(std::uint32_t mask) const { return (mask >> (radius_ + 1)) & 1; }

    double value(std::uint32_t mask) const { return table_[mask]; }

    // c_gamma(eta) = c(eta) * (1 - gamma * eta(1) * (1 - eta(0)))
    double asym_value(std::uint32_t mask) const {
        const double suppress = (occ1(mask) == 1 && occ0(mask) == 0) ? 1.0 - gamma_ : 1.0;
        return table_[mask] * suppress;
    }

    std::vector<double> asym_table() const {
        std::vector<double> t(table_.size());
        for (std::uint32_t m = 0; m < table_.size(); ++m) t[m] = asym_value(m);
        return t;
    }

    RateTable with_gamma(double gamma) const {
        return RateTable(radius_, table_, gamma, time_scale_, family_);
    }

    std::uint32_t exchange_mask(std::uint32_t mask) const {
        const std::uint32_t b0 = (mask >> radius_) & 1, b1 = (mask >> (radius_ + 1)) & 1;
        if (b0 == b1) return mask;
        return mask ^ (std::uint32_t{1} << radius_) ^ (std::uint32_t{1} << (radius_ + 1));
    }

    void validate() const {
        for (std::uint32_t m = 0; m < table_.size(); ++m) {
            const bool exchangeable = occ0(m) != occ1(m);
            if (!exchangeable && table_[m] != 0.0)
                throw std::invalid_argument("RateTable: exclusion rule violated (c != 0 with eta(0)=eta(1))");
            if (exchangeable && !(table_[m] > 0.0))
                throw std::invalid_argument("RateTable: ergodicity violated (c <= 0 on exchangeable config)");
            if (table_[m] > 1.0)
                throw std::invalid_argument("RateTable: rate exceeds 1");
        }
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"radius", radius_},
                              {"gamma", gamma_},
                              {"time_scale", time_scale_},
                              {"family", family_},
                              {"rates", table_}};
    }

    static RateTable from_json(const nlohmann::json& j) {
        for (const auto& [key, _] : j.items())
            if (key != "radius" && key != "gamma" && key != "rates" && key != "time_scale" &&
                key != "family")
                throw std::invalid_argument("RateTable JSON: unknown key '" + key + "'");
        return RateTable(j.at("radius").get<int>(), j.at("rates").get<std::vector<double>>(),
                         j.value("gamma", 0.0), j.value("time_scale", 1.0),
                         j.value("family", std::string("custom")));
    }

private:
    int radius_;
    std::vector<double> table_;
    double gamma_;
    double time_scale_;
    std::string family_;
};

// dH of the bond-(0,1) exchange evaluated on a window occupancy mask
// (bit i <-> site -r+i). Requires r >= spec range so no instance leaves
// the window.
inline double window_exchange_delta(const GibbsSpec& spec, std::uint32_t mask, int radius) {
    if (radius < spec.range())
        throw std::invalid_argument("window_exchange_delta: window radius smaller than potential range");
    auto occ = [&](int site) -> int { return (mask >> (site + radius)) & 1; };
    const int a = occ(0), b = occ(1);
    if (a == b) return 0.0;
    double dH = 0.0;
    for (const auto& c : spec.couplings()) {
        const int lo = c.sites.front(), hi = c.sites.back();
        for (int z = 0 - hi; z <= 1 - lo; ++z) {
            int before = 1, after = 1;
            for (int o : c.sites) {
                const int site = z + o;
                const int v = occ(site);
                before &= v;
                after &= (site == 0) ? b : (site == 1) ? a : v;
            }
            dH += c.J * (after - before);
        }
    }
    return dH;
}

// c(eta) = 1 iff eta(0) != eta(1): the simple symmetric exclusion process.
inline RateTable ssep_rate() {
    std::vector<double> t(4, 0.0);
    t[0b01] = 1.0;  // eta(0)=1, eta(1)=0
    t[0b10] = 1.0;
    return RateTable(0, std::move(t), 0.0, 1.0, "ssep");
}

// c(eta) = (1 + b(eta(-1)+eta(2))) / (1+2|b|) on exchangeable configurations.
// The normalization keeps rates in (0,1]; it rescales time only.
inline RateTable speed_change_rate(double b) {
    if (!(std::abs(b) < 0.5))
        throw std::invalid_argument("speed_change_rate: require |b| < 1/2");
    const double scale = 1.0 + 2.0 * std::abs(b);
    std::vector<double> t(16, 0.0);
    for (std::uint32_t m = 0; m < 16; ++m) {
        const int em1 = m & 1, e0 = (m >> 1) & 1, e1 = (m >> 2) & 1, e2 = (m >> 3) & 1;
        if (e0 != e1) t[m] = (1.0 + b * (em1 + e2)) / scale;
    }
    return RateTable(1, std::move(t), 0.0, scale, "speed_change");
}

// Metropolis acceptance for a general GibbsSpec: c = min(1, exp(-beta*dH)) on
// exchangeable configurations. Window radius equals the potential range.
inline RateTable metropolis_rate(const GibbsSpec& spec) {
    const int r = spec.range();
    const int n = 2 * r + 2;
    std::vector<double> t(std::size_t{1} << n, 0.0);
    for (std::uint32_t m = 0; m < t.size(); ++m) {
        const int e0 = (m >> r) & 1, e1 = (m >> (r + 1)) & 1;
        if (e0 == e1) continue;
        const double dH = window_exchange_delta(spec, m, r);
        t[m] = std::min(1.0, std::exp(-spec.beta() * dH));
    }
    return RateTable(r, std::move(t), 0.0, 1.0, "metropolis");
}

// The microscopic current observable j(eta) = c(eta) eta(0)(1-eta(1)) as a
// LocalFunction on the rate window.
inline LocalFunction current_observable(const RateTable& c) {
    std::vector<double> v(c.table().size(), 0.0);
    for (std::uint32_t m = 0; m < v.size(); ++m)
        if (c.occ0(m) == 1 && c.occ1(m) == 0) v[m] = c.value(m);
    return LocalFunction::from_value_table(c.window_lo(), std::move(v));
}

// c(eta) (eta(1)-eta(0))^2 as a LocalFunction (the fluctuation-dissipation
// integrand). For binary occupancies this equals c itself, but the factor is
// kept explicit.
inline LocalFunction fd_integrand(const RateTable& c) {
    std::vector<double> v(c.table().size(), 0.0);
    for (std::uint32_t m = 0; m < v.size(); ++m) {
        const double d = static_cast<double>(c.occ1(m) - c.occ0(m));
        v[m] = c.value(m) * d * d;
    }
    return LocalFunction::from_value_table(c.window_lo(), std::move(v));
}

// Reverse-channel observable c(eta) eta(1)(1-eta(0)); the gamma-suppressed
// exchange direction. Its static average equals the flux H for reversible c.
inline LocalFunction reverse_current_observable(const RateTable& c) {
    std::vector<double> v(c.table().size(), 0.0);
    for (std::uint32_t m = 0; m < v.size(); ++m)
        if (c.occ1(m) == 1 && c.occ0(m) == 0) v[m] = c.value(m);
    return LocalFunction::from_value_table(c.window_lo(), std::move(v));
}

}  // namespace kawasaki
