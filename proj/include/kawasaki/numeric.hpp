#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace kawasaki {

// Neumaier-compensated accumulator. Used wherever the spec of a quantity
// promises reproducibility to 1e-12 independent of summation order chunking.
class CompensatedSum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_total(std::span<const double> xs) {
    CompensatedSum s;
    for (double x : xs) s.add(x);
    return s.value();
}

// Dense polynomial in one variable, coefficient of x^i at index i.
struct Poly {
    std::vector<double> c;

    static Poly zero() { return Poly{{0.0}}; }

    double eval(double x) const {
        double v = 0.0;
        for (std::size_t i = c.size(); i-- > 0;) v = v * x + c[i];
        return v;
    }
    Poly derivative() const {
        if (c.size() <= 1) return Poly{{0.0}};
        Poly d;
        d.c.resize(c.size() - 1);
        for (std::size_t i = 1; i < c.size(); ++i) d.c[i - 1] = c[i] * static_cast<double>(i);
        return d;
    }
    Poly operator+(const Poly& o) const {
        Poly r;
        r.c.resize(std::max(c.size(), o.c.size()), 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) r.c[i] += c[i];
        for (std::size_t i = 0; i < o.c.size(); ++i) r.c[i] += o.c[i];
        return r;
    }
    Poly operator*(const Poly& o) const {
        Poly r;
        r.c.assign(c.size() + o.c.size() - 1, 0.0);
        for (std::size_t i = 0; i < c.size(); ++i)
            for (std::size_t j = 0; j < o.c.size(); ++j) r.c[i + j] += c[i] * o.c[j];
        return r;
    }
    Poly scaled(double a) const {
        Poly r = *this;
        for (double& x : r.c) x *= a;
        return r;
    }
    void add_term(std::size_t power, double coeff) {
        if (c.size() <= power) c.resize(power + 1, 0.0);
        c[power] += coeff;
    }
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
};

// Ordinary least squares y = a + b x.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw std::invalid_argument("fit_line: need >= 2 paired points");
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (n > 2) {
        double ss = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - (f.intercept + f.slope * x[i]);
            ss += r * r;
        }
        f.slope_stderr = std::sqrt(ss / (static_cast<double>(n - 2) * sxx));
    }
    return f;
}

// Weighted least squares with known per-point standard errors.
inline LineFit fit_line_weighted(std::span<const double> x, std::span<const double> y,
                                 std::span<const double> sigma) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n || sigma.size() != n)
        throw std::invalid_argument("fit_line_weighted: need >= 2 paired points");
    double sw = 0, swx = 0, swy = 0;
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(sigma[i] > 0)) throw std::invalid_argument("fit_line_weighted: sigma must be > 0");
        w[i] = 1.0 / (sigma[i] * sigma[i]);
        sw += w[i];
        swx += w[i] * x[i];
        swy += w[i] * y[i];
    }
    const double mx = swx / sw, my = swy / sw;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.slope_stderr = std::sqrt(1.0 / sxx);
    return f;
}

// Composite Simpson on [a,b]; panels must be even.
template <typename F>
double simpson(F&& f, double a, double b, int panels) {
    if (panels % 2 != 0) ++panels;
    const double h = (b - a) / panels;
    double s = f(a) + f(b);
    for (int i = 1; i < panels; ++i) s += f(a + i * h) * ((i % 2 == 0) ? 2.0 : 4.0);
    return s * h / 3.0;
}

// Central difference with one Richardson level; returns value and an error estimate.
template <typename F>
std::pair<double, double> richardson_derivative(F&& f, double x, double h) {
    auto d = [&](double hh) { return (f(x + hh) - f(x - hh)) / (2.0 * hh); };
    const double dh = d(h), dh2 = d(h / 2.0);
    const double r = (4.0 * dh2 - dh) / 3.0;
    return {r, std::abs(r - dh2)};
}

template <typename F>
std::pair<double, double> richardson_second_derivative(F&& f, double x, double h) {
    auto d = [&](double hh) { return (f(x + hh) - 2.0 * f(x) + f(x - hh)) / (hh * hh); };
    const double dh = d(h), dh2 = d(h / 2.0);
    const double r = (4.0 * dh2 - dh) / 3.0;
    return {r, std::abs(r - dh2)};
}

}  // namespace kawasaki
