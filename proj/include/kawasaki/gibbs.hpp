#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "kawasaki/ring.hpp"

namespace kawasaki {

// One translation class of the potential: J * eta(sites + z) summed over all
// shifts z. Offsets are stored sorted and deduplicated.
struct Coupling {
    std::vector<int> sites;
    double J = 0.0;

    int diameter() const { return sites.empty() ? 0 : sites.back() - sites.front(); }
};

// Finite-range translation-invariant potential with inverse temperature and
// fugacity. Weights are proportional to exp(-beta*H - phi*sum eta).
class GibbsSpec {
public:
    GibbsSpec() = default;

    GibbsSpec(std::vector<Coupling> couplings, double beta, double phi)
        : couplings_(std::move(couplings)), beta_(beta), phi_(phi) {
        for (auto& c : couplings_) {
            std::sort(c.sites.begin(), c.sites.end());
            c.sites.erase(std::unique(c.sites.begin(), c.sites.end()), c.sites.end());
            if (c.sites.empty()) throw std::invalid_argument("GibbsSpec: empty coupling pattern");
            range_ = std::max(range_, c.diameter());
        }
        if (range_ > 4) throw std::invalid_argument("GibbsSpec: potential range > 4 unsupported");
    }

    static GibbsSpec product(double phi) { return GibbsSpec({}, 0.0, phi); }

    static GibbsSpec nearest_neighbor(double J, double beta, double phi) {
        return GibbsSpec({Coupling{{0, 1}, J}}, beta, phi);
    }

    const std::vector<Coupling>& couplings() const { return couplings_; }
    double beta() const { return beta_; }
    double phi() const { return phi_; }
    int range() const { return range_; }

    GibbsSpec with_phi(double phi) const {
        GibbsSpec s = *this;
        s.phi_ = phi;
        return s;
    }

    // True when the measure factorizes over sites: beta = 0 or only
    // single-site patterns (those shift the effective fugacity).
    bool is_product() const {
        if (beta_ == 0.0) return true;
        for (const auto& c : couplings_)
            if (c.sites.size() > 1) return false;
        return true;
    }

    // Effective fugacity of the product case.
    double effective_phi() const {
        double p = phi_;
        if (beta_ != 0.0)
            for (const auto& c : couplings_)
                if (c.sites.size() == 1) p += beta_ * c.J;
        return p;
    }

    // H over the periodic ring: every shifted pattern instance counted once.
    double ring_energy(const Ring& ring) const {
        double H = 0.0;
        for (const auto& c : couplings_) {
            for (int z = 0; z < ring.size(); ++z) {
                int p = 1;
                for (int o : c.sites) p &= ring.occ(z + o);
                H += c.J * p;
            }
        }
        return H;
    }

    // H(eta^{x,x+1}) - H(eta), summed over the finitely many pattern
    // instances that touch the bond. The fugacity term cancels (exchanges
    // conserve the particle count).
    double exchange_delta(const Ring& ring, int bond) const {
        const int a = ring.occ(bond), b = ring.occ(bond + 1);
        if (a == b) return 0.0;
        double dH = 0.0;
        for (const auto& c : couplings_) {
            const int lo = c.sites.front(), hi = c.sites.back();
            // instances P+z touching {bond, bond+1}: z in [bond-hi, bond+1-lo]
            for (int z = bond - hi; z <= bond + 1 - lo; ++z) {
                int before = 1, after = 1;
                for (int o : c.sites) {
                    const int site = z + o;
                    const int occ = ring.occ(site);
                    before &= occ;
                    const int w = ring.wrap(site);
                    int swapped = occ;
                    if (w == ring.wrap(bond)) swapped = b;
                    else if (w == ring.wrap(bond + 1)) swapped = a;
                    after &= swapped;
                }
                dH += c.J * (after - before);
            }
        }
        return dH;
    }

    nlohmann::json couplings_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& c : couplings_) arr.push_back({{"sites", c.sites}, {"J", c.J}});
        return arr;
    }

    static std::vector<Coupling> couplings_from_json(const nlohmann::json& arr) {
        std::vector<Coupling> cs;
        for (const auto& item : arr) {
            for (const auto& [key, _] : item.items())
                if (key != "sites" && key != "J")
                    throw std::invalid_argument("coupling: unknown key '" + key + "'");
            cs.push_back(Coupling{item.at("sites").get<std::vector<int>>(), item.at("J").get<double>()});
        }
        return cs;
    }

private:
    std::vector<Coupling> couplings_;
    double beta_ = 0.0;
    double phi_ = 0.0;
    int range_ = 0;
};

}  // namespace kawasaki
