#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace kawasaki {

// Periodic 0/1 occupancy state on L sites. The only mutating operation is the
// bond exchange, which conserves the particle count by construction.
class Ring {
public:
    explicit Ring(int size) : occ_(static_cast<std::size_t>(check_size(size)), 0), count_(0) {}

    explicit Ring(std::vector<std::uint8_t> occ) : occ_(std::move(occ)) {
        check_size(static_cast<int>(occ_.size()));
        for (std::uint8_t v : occ_) {
            if (v > 1) throw std::invalid_argument("Ring: occupancies must be 0 or 1");
        }
        count_ = std::accumulate(occ_.begin(), occ_.end(), 0);
    }

    int size() const { return static_cast<int>(occ_.size()); }
    int particle_count() const { return count_; }

    int wrap(int x) const {
        const int L = size();
        x %= L;
        return x < 0 ? x + L : x;
    }

    int occ(int x) const { return occ_[static_cast<std::size_t>(wrap(x))]; }

    void set(int x, int v) {
        if (v != 0 && v != 1) throw std::invalid_argument("Ring::set: value must be 0 or 1");
        std::uint8_t& slot = occ_[static_cast<std::size_t>(wrap(x))];
        count_ += v - slot;
        slot = static_cast<std::uint8_t>(v);
    }

    // Swap occupancies of sites (x, x+1 mod L). Involution; conserves count.
    void exchange(int x) {
        const int a = wrap(x), b = wrap(x + 1);
        std::swap(occ_[static_cast<std::size_t>(a)], occ_[static_cast<std::size_t>(b)]);
    }

    // Bits of sites base, base+1, ..., base+width-1, little-endian (site `base` is bit 0).
    // Interior windows take the wrap-free path (this is the KMC hot loop).
    std::uint32_t window_mask(int base, int width) const {
        const int L = size();
        if (base >= 0 && base + width <= L) {
            std::uint32_t m = 0;
            for (int i = 0; i < width; ++i)
                m |= static_cast<std::uint32_t>(occ_[static_cast<std::size_t>(base + i)]) << i;
            return m;
        }
        std::uint32_t m = 0;
        for (int i = 0; i < width; ++i) m |= static_cast<std::uint32_t>(occ(base + i)) << i;
        return m;
    }

    const std::vector<std::uint8_t>& data() const { return occ_; }

    bool operator==(const Ring& o) const { return occ_ == o.occ_; }

    // Packed snapshot layout: 64 sites per 64-bit word, site j at bit j%64 of word j/64.
    std::vector<std::uint64_t> packed() const {
        std::vector<std::uint64_t> w((occ_.size() + 63) / 64, 0);
        for (std::size_t j = 0; j < occ_.size(); ++j)
            if (occ_[j]) w[j / 64] |= (std::uint64_t{1} << (j % 64));
        return w;
    }

    static Ring from_packed(int size, const std::vector<std::uint64_t>& w) {
        Ring r(size);
        for (int j = 0; j < size; ++j) {
            const std::uint64_t word = w[static_cast<std::size_t>(j) / 64];
            r.set(j, static_cast<int>((word >> (j % 64)) & 1));
        }
        return r;
    }

private:
    static int check_size(int size) {
        if (size < 1) throw std::invalid_argument("Ring: size must be positive");
        return size;
    }

    std::vector<std::uint8_t> occ_;
    int count_ = 0;
};

}  // namespace kawasaki
