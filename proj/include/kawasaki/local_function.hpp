#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kawasaki/ring.hpp"

namespace kawasaki {

// Function of finitely many sites, stored as coefficients over the product
// basis eta(A) = prod_{x in A} eta(x):
//
//   f(eta) = sum_{A subset of window} coeff(A) * eta(A).
//
// The window is the contiguous offset interval [lo, lo+width-1]; subsets are
// keyed by bitmask with bit i <-> site lo+i.
class LocalFunction {
public:
    LocalFunction() : lo_(0), coeff_(1, 0.0) {}

    LocalFunction(int lo, std::vector<double> coeff) : lo_(lo), coeff_(std::move(coeff)) {
        if (coeff_.empty() || (coeff_.size() & (coeff_.size() - 1)) != 0)
            throw std::invalid_argument("LocalFunction: coefficient count must be a power of two");
        if (width() > 26) throw std::invalid_argument("LocalFunction: window too large");
    }

    static LocalFunction constant(double v) { return LocalFunction(0, {v, 0.0}); }

    static LocalFunction site(int offset) {
        return LocalFunction(offset, {0.0, 1.0});  // eta(offset)
    }

    // Monomial eta(A) for explicit offsets.
    static LocalFunction monomial(const std::vector<int>& offsets, double coeff = 1.0) {
        if (offsets.empty()) return constant(coeff);
        int lo = offsets[0], hi = offsets[0];
        for (int o : offsets) {
            lo = std::min(lo, o);
            hi = std::max(hi, o);
        }
        const int n = hi - lo + 1;
        std::vector<double> c(std::size_t{1} << n, 0.0);
        std::uint32_t mask = 0;
        for (int o : offsets) mask |= 1u << (o - lo);
        c[mask] = coeff;
        return LocalFunction(lo, std::move(c));
    }

    int lo() const { return lo_; }
    int hi() const { return lo_ + width() - 1; }
    int width() const { return std::countr_zero(coeff_.size()); }

    const std::vector<double>& coefficients() const { return coeff_; }
    double coefficient(std::uint32_t subset_mask) const { return coeff_[subset_mask]; }

    // Value on a full window occupancy mask: sum of coeff over subsets of the
    // occupied set.
    double value_on_mask(std::uint32_t occupied) const {
        double v = coeff_[0];
        for (std::uint32_t s = occupied; s != 0; s = (s - 1) & occupied) v += coeff_[s];
        return v;
    }

    // f evaluated at base site x on a ring: sum_A coeff(A) prod_{y in A} eta(x+y mod L).
    double evaluate(const Ring& ring, int x) const {
        return value_on_mask(ring.window_mask(x + lo_, width()));
    }

    // Value table over all 2^width occupancy masks (zeta transform of coefficients).
    std::vector<double> value_table() const {
        std::vector<double> v = coeff_;
        const int n = width();
        for (int i = 0; i < n; ++i)
            for (std::size_t m = 0; m < v.size(); ++m)
                if (m & (std::size_t{1} << i)) v[m] += v[m ^ (std::size_t{1} << i)];
        return v;
    }

    // Inverse of value_table (Moebius transform).
    static LocalFunction from_value_table(int lo, std::vector<double> values) {
        const std::size_t sz = values.size();
        if (sz == 0 || (sz & (sz - 1)) != 0)
            throw std::invalid_argument("from_value_table: size must be a power of two");
        const int n = std::countr_zero(sz);
        for (int i = 0; i < n; ++i)
            for (std::size_t m = 0; m < sz; ++m)
                if (m & (std::size_t{1} << i)) values[m] -= values[m ^ (std::size_t{1} << i)];
        return LocalFunction(lo, std::move(values));
    }

    // theta_z f: window translated by z, identical coefficients.
    LocalFunction shifted(int z) const { return LocalFunction(lo_ + z, coeff_); }

    // Particle-hole conjugate: (f o flip)(eta) = f(1 - eta), same window.
    LocalFunction particle_hole() const {
        std::vector<double> v = value_table();
        std::vector<double> w(v.size());
        for (std::size_t m = 0; m < v.size(); ++m) w[m] = v[v.size() - 1 - m];
        return from_value_table(lo_, std::move(w));
    }

    LocalFunction scaled(double a) const {
        LocalFunction r = *this;
        for (double& c : r.coeff_) c *= a;
        return r;
    }

    LocalFunction operator+(const LocalFunction& o) const {
        const int lo = std::min(lo_, o.lo_);
        const int hi = std::max(this->hi(), o.hi());
        const int n = hi - lo + 1;
        if (n > 26) throw std::invalid_argument("LocalFunction: combined window too large");
        std::vector<double> c(std::size_t{1} << n, 0.0);
        auto scatter = [&](const LocalFunction& f) {
            const int sh = f.lo_ - lo;
            for (std::size_t m = 0; m < f.coeff_.size(); ++m)
                if (f.coeff_[m] != 0.0) c[m << sh] += f.coeff_[m];
        };
        scatter(*this);
        scatter(o);
        return LocalFunction(lo, std::move(c));
    }

    LocalFunction operator-(const LocalFunction& o) const { return *this + o.scaled(-1.0); }

    nlohmann::json to_json() const {
        nlohmann::json coeffs = nlohmann::json::object();
        for (std::size_t m = 0; m < coeff_.size(); ++m)
            if (coeff_[m] != 0.0) coeffs[std::to_string(m)] = coeff_[m];
        return nlohmann::json{{"window", {{"lo", lo_}, {"hi", hi()}}}, {"coefficients", coeffs}};
    }

    static LocalFunction from_json(const nlohmann::json& j) {
        const int lo = j.at("window").at("lo").get<int>();
        const int hi = j.at("window").at("hi").get<int>();
        if (hi < lo) throw std::invalid_argument("LocalFunction JSON: hi < lo");
        const int n = hi - lo + 1;
        if (n > 26) throw std::invalid_argument("LocalFunction JSON: window too large");
        std::vector<double> c(std::size_t{1} << n, 0.0);
        for (const auto& [key, val] : j.at("coefficients").items()) {
            const unsigned long mask = std::stoul(key);
            if (mask >= c.size()) throw std::invalid_argument("LocalFunction JSON: mask out of range");
            c[mask] = val.get<double>();
        }
        return LocalFunction(lo, std::move(c));
    }

private:
    int lo_;
    std::vector<double> coeff_;
};

// Precompiled value table for hot loops: O(1) evaluation per configuration.
struct CompiledLocal {
    int lo = 0;
    int width = 0;
    std::vector<double> values;

    explicit CompiledLocal(const LocalFunction& f)
        : lo(f.lo()), width(f.width()), values(f.value_table()) {}

    double evaluate(const Ring& ring, int x) const {
        return values[ring.window_mask(x + lo, width)];
    }
};

}  // namespace kawasaki
