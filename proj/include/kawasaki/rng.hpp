#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace kawasaki {

// splitmix64; used to derive independent per-replica stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream_id) {
    std::uint64_t s = base;
    std::uint64_t a = splitmix64(s);
    s ^= stream_id * 0x9e3779b97f4a7c15ULL;
    std::uint64_t b = splitmix64(s);
    return a ^ (b + 0x632be59bd9b4e019ULL + (stream_id << 1));
}

// Deterministic random stream: mt19937_64 core with hand-rolled transforms,
// so that outputs are identical across platforms and standard libraries
// (std distributions are implementation-defined; these are not).
class Stream {
public:
    explicit Stream(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t bits() { return eng_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1]
    double uniform_pos() { return 1.0 - uniform(); }

    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

    bool bernoulli(double p) { return uniform() < p; }

    // unbiased integer in [0, n) via Lemire's multiply-shift with rejection
    std::uint64_t index(std::uint64_t n) {
        while (true) {
            std::uint64_t x = bits();
            __uint128_t m = static_cast<__uint128_t>(x) * n;
            std::uint64_t lo = static_cast<std::uint64_t>(m);
            if (lo < n) {
                std::uint64_t t = (0 - n) % n;
                if (lo < t) continue;
            }
            return static_cast<std::uint64_t>(m >> 64);
        }
    }

    // Box-Muller, pairs cached
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 eng_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace kawasaki
