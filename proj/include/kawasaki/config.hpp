#pragma once

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kawasaki/gibbs.hpp"
#include "kawasaki/rates.hpp"
#include "kawasaki/transfer_matrix.hpp"
#include "kawasaki/version.hpp"

namespace kawasaki {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return j;
}

inline void require_keys_subset(const nlohmann::json& obj, const std::set<std::string>& allowed,
                                const std::string& context) {
    if (!obj.is_object()) throw ConfigError(context + ": expected an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) throw ConfigError(context + ": unknown key '" + key + "'");
}

// Model section: family plus its parameters, the Gibbs potential, and the
// asymmetry (gamma directly, or a with epsilon so gamma = a sqrt(epsilon)).
struct Model {
    RateTable rates = ssep_rate();
    GibbsSpec spec;          // the equilibrium family nu_rho lives here
    double gamma = 0.0;
    std::string family = "ssep";
};

inline Model parse_model(const nlohmann::json& m) {
    require_keys_subset(m, {"family", "b", "beta", "couplings", "gamma", "a", "epsilon"}, "model");
    Model model;
    model.family = m.at("family").get<std::string>();
    const double beta = m.value("beta", 0.0);
    std::vector<Coupling> couplings;
    if (m.contains("couplings")) couplings = GibbsSpec::couplings_from_json(m.at("couplings"));

    if (model.family == "ssep") {
        model.rates = ssep_rate();
        model.spec = GibbsSpec({}, 0.0, 0.0);
        if (beta != 0.0 || !couplings.empty())
            throw ConfigError("model: ssep takes no beta/couplings (product measure)");
    } else if (model.family == "speed_change") {
        if (!m.contains("b")) throw ConfigError("model: speed_change requires 'b'");
        model.rates = speed_change_rate(m.at("b").get<double>());
        model.spec = GibbsSpec({}, 0.0, 0.0);
        if (beta != 0.0 || !couplings.empty())
            throw ConfigError("model: speed_change takes no beta/couplings (product measure)");
    } else if (model.family == "metropolis") {
        model.spec = GibbsSpec(couplings, beta, 0.0);
        model.rates = metropolis_rate(model.spec);
    } else {
        throw ConfigError("model: unknown family '" + model.family + "'");
    }

    if (m.contains("gamma") && (m.contains("a") || m.contains("epsilon")))
        throw ConfigError("model: give either gamma or (a, epsilon), not both");
    if (m.contains("gamma")) {
        model.gamma = m.at("gamma").get<double>();
    } else if (m.contains("a") || m.contains("epsilon")) {
        if (!m.contains("a") || !m.contains("epsilon"))
            throw ConfigError("model: weak asymmetry requires both 'a' and 'epsilon'");
        model.gamma = m.at("a").get<double>() * std::sqrt(m.at("epsilon").get<double>());
    }
    if (model.gamma < 0.0 || model.gamma > 1.0) throw ConfigError("model: gamma must lie in [0,1]");
    return model;
}

struct Ensemble {
    int L = 0;
    double rho = 0.5;
};

inline Ensemble parse_ensemble(const nlohmann::json& e, const GibbsSpec& spec) {
    require_keys_subset(e, {"L", "rho", "phi"}, "ensemble");
    Ensemble out;
    out.L = e.at("L").get<int>();
    if (out.L < 4) throw ConfigError("ensemble: L too small");
    if (e.contains("rho") == e.contains("phi"))
        throw ConfigError("ensemble: give exactly one of rho, phi");
    if (e.contains("rho")) {
        out.rho = e.at("rho").get<double>();
    } else {
        out.rho = density_of_fugacity(spec, e.at("phi").get<double>());
    }
    if (!(out.rho > 0.0 && out.rho < 1.0)) throw ConfigError("ensemble: rho must lie in (0,1)");
    return out;
}

inline nlohmann::json make_manifest(const std::string& command, const nlohmann::json& config,
                                    std::uint64_t seed, const std::vector<std::string>& outputs) {
    return nlohmann::json{{"tool", "kawasaki"},
                          {"version", kVersion},
                          {"command", command},
                          {"seed", seed},
                          {"config", config},
                          {"outputs", outputs}};
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << text;
}

}  // namespace kawasaki
