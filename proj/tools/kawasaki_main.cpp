// kawasaki: reproducible experiments for gradient Kawasaki lattice-gas
// dynamics. Subcommands: check | thermo | ensembles | simulate | sbe.
//
// Exit codes: 0 pass, 1 check failure, 2 usage/config error, 3 runtime error.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kawasaki/canonical.hpp"
#include "kawasaki/config.hpp"
#include "kawasaki/csv.hpp"
#include "kawasaki/gradient.hpp"
#include "kawasaki/kmc.hpp"
#include "kawasaki/sbe.hpp"
#include "kawasaki/thermo.hpp"
#include "kawasaki/version.hpp"

namespace {

using nlohmann::json;
using namespace kawasaki;

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 0;
    std::string profile = "default";
};

struct Thresholds {
    double detailed_balance;
    double gradient;
    double current;
    double fd;
};

Thresholds thresholds_for(const std::string& profile) {
    if (profile == "strict") return {1e-12, 1e-10, 1e-10, 1e-10};
    if (profile == "default") return {1e-9, 1e-8, 1e-8, 1e-8};
    throw ConfigError("unknown tolerance profile: " + profile);
}

std::uint64_t resolve_seed(const CommonOpts& opts, const json& cfg) {
    if (opts.seed_given) return opts.seed;
    return cfg.value("seed", std::uint64_t{1});
}

void check_top_level(const json& cfg) {
    require_keys_subset(cfg,
                        {"experiment", "seed", "model", "ensemble", "simulation", "thermo",
                         "ensembles", "sbe", "check"},
                        "config");
}

// outputs_meta records, per file, whether rows are exact or carry a stderr
// column, so every quantitative output is tagged one way or the other.
void write_manifest(const std::string& out_dir, const std::string& command, const json& cfg,
                    std::uint64_t seed, std::vector<std::string> outputs,
                    json outputs_meta = json::object()) {
    std::sort(outputs.begin(), outputs.end());
    json manifest = make_manifest(command, cfg, seed, outputs);
    if (!outputs_meta.empty()) manifest["outputs_meta"] = std::move(outputs_meta);
    write_text_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");
}

std::vector<double> grid_from(const json& section) {
    const int points = section.value("grid_points", 99);
    const double lo = section.value("rho_min", 0.01);
    const double hi = section.value("rho_max", 0.99);
    return uniform_density_grid(points, lo, hi);
}

// ---------------------------------------------------------------------------

int cmd_check(const CommonOpts& opts) {
    const json cfg = load_json_file(opts.config_path);
    check_top_level(cfg);
    const Model model = parse_model(cfg.at("model"));
    json check_cfg = cfg.value("check", json::object());
    require_keys_subset(check_cfg, {"K", "grid_points", "rho_min", "rho_max"}, "check");
    const int K = check_cfg.value("K", model.rates.radius() + 1);
    const Thresholds tol = thresholds_for(opts.profile);
    const std::uint64_t seed = resolve_seed(opts, cfg);

    std::filesystem::create_directories(opts.out_dir);
    json report;
    std::vector<std::string> failures;

    const double db = check_detailed_balance(model.rates, model.spec);
    const bool db_ok = db <= tol.detailed_balance;
    report["checks"]["detailed_balance"] = {
        {"residual", db}, {"threshold", tol.detailed_balance}, {"status", db_ok ? "pass" : "fail"}};
    if (!db_ok) failures.push_back("detailed_balance");

    const GradientSolution sol = solve_gradient_condition(model.rates, K);
    const bool grad_ok = sol.residual <= tol.gradient;
    report["checks"]["gradient"] = {{"residual", sol.residual},
                                    {"threshold", tol.gradient},
                                    {"K", K},
                                    {"status", grad_ok ? "pass" : "fail"},
                                    {"omega", sol.omega.to_json()}};
    if (!grad_ok) failures.push_back("gradient");

    // Pointwise the current-identity defect equals half the gradient defect,
    // so the check is |residual_current| <= max(threshold, residual_gradient/2 + threshold).
    const double cur = verify_current_identity(model.rates, sol.omega);
    const double cur_budget = std::max(tol.current, 0.5 * sol.residual + tol.current);
    const bool cur_ok = cur <= cur_budget;
    report["checks"]["current_identity"] = {{"residual", cur},
                                            {"budget", cur_budget},
                                            {"consistency_gap", std::abs(cur - 0.5 * sol.residual)},
                                            {"status", cur_ok ? "pass" : "fail"}};
    if (!cur_ok) failures.push_back("current_identity");

    if (grad_ok) {
        const auto rows = verify_fd_relation(model.rates, sol.omega, model.spec, grid_from(check_cfg));
        double worst = 0.0;
        for (const auto& r : rows) worst = std::max(worst, r.residual);
        const bool exact = model.spec.is_product();
        const double fd_tol = exact ? tol.fd : std::max(tol.fd, 1e-6);
        const bool fd_ok = worst <= fd_tol;
        report["checks"]["fd_relation"] = {{"max_residual", worst},
                                           {"threshold", fd_tol},
                                           {"rows", to_json(rows)},
                                           {"status", fd_ok ? "pass" : "fail"}};
        if (!fd_ok) failures.push_back("fd_relation");
    } else {
        report["checks"]["fd_relation"] = {
            {"status", "skipped"}, {"reason", "rates are not gradient; D(rho) undefined via omega"}};
    }

    report["failures"] = failures;
    report["profile"] = opts.profile;
    report["family"] = model.family;
    report["rates"] = model.rates.to_json();
    write_text_file(opts.out_dir + "/check_report.json", report.dump(2) + "\n");
    write_manifest(opts.out_dir, "check", cfg, seed, {"check_report.json"},
                   {{"check_report.json", "exact enumeration residuals"}});

    for (const auto& [name, entry] : report["checks"].items())
        std::cout << name << ": " << entry["status"].get<std::string>() << "\n";
    return failures.empty() ? 0 : 1;
}

int cmd_thermo(const CommonOpts& opts) {
    const json cfg = load_json_file(opts.config_path);
    check_top_level(cfg);
    const Model model = parse_model(cfg.at("model"));
    json tcfg = cfg.value("thermo", json::object());
    require_keys_subset(tcfg, {"a", "grid_points", "rho_min", "rho_max", "K"}, "thermo");
    const double a = tcfg.value("a", 1.0);
    const int K = tcfg.value("K", model.rates.radius() + 1);
    const std::uint64_t seed = resolve_seed(opts, cfg);

    const GradientSolution sol = solve_gradient_condition(model.rates, K);
    if (sol.residual > 1e-6)
        throw std::runtime_error("thermo: rates are not gradient (residual " +
                                 format_double(sol.residual) + "); D(rho) undefined via omega");

    const ThermoCurve curve = compute_thermo_curve(model.rates, sol.omega, model.spec,
                                                   grid_from(tcfg), a);
    std::filesystem::create_directories(opts.out_dir);
    CsvWriter csv(opts.out_dir + "/thermo_curve.csv",
                  {"rho", "chi", "D", "H", "Hp", "Hpp", "chiD_pp", "lambda", "einstein_resid",
                   "method", "scale"});
    for (const auto& r : curve.rows)
        csv.row({r.rho, r.chi, r.D, r.H, r.Hp, r.Hpp, r.chiD_pp, r.lambda, r.einstein_residual,
                 r.method, curve.scale});
    csv.close();
    write_manifest(opts.out_dir, "thermo", cfg, seed, {"thermo_curve.csv"},
                   {{"thermo_curve.csv", "per-row method tag: exact-polynomial | finite-difference"}});
    std::cout << "thermo curve: " << curve.rows.size() << " densities (a=" << a << ")\n";
    return 0;
}

LocalFunction observable_from(const json& section) {
    if (!section.contains("f") || section.at("f") == "nn_pair")
        return LocalFunction::monomial({0, 1});
    if (section.at("f") == "site") return LocalFunction::site(0);
    return LocalFunction::from_json(section.at("f"));
}

int cmd_ensembles(const CommonOpts& opts) {
    const json cfg = load_json_file(opts.config_path);
    check_top_level(cfg);
    const Model model = parse_model(cfg.at("model"));
    json ecfg = cfg.value("ensembles", json::object());
    require_keys_subset(ecfg, {"f", "ell_list", "rho", "density_map_points"}, "ensembles");
    const double rho = ecfg.value("rho", 0.5);
    const std::vector<int> ells = ecfg.value("ell_list", std::vector<int>{10, 14, 18, 22});
    const std::uint64_t seed = resolve_seed(opts, cfg);

    const LocalFunction f = observable_from(ecfg);
    const StaticAverage fa = static_average(f, model.spec, rho);
    const ExpansionReport rep =
        equivalence_expansion_report(f, model.spec, rho, ells, fa.value, fa.d1, fa.d2);

    std::filesystem::create_directories(opts.out_dir);
    CsvWriter csv(opts.out_dir + "/expansion_report.csv",
                  {"ell", "k", "sigma", "psi", "taylor", "residual"});
    for (const auto& r : rep.rows)
        csv.row({static_cast<long long>(r.ell), static_cast<long long>(r.k), r.sigma, r.psi,
                 r.taylor, r.residual});
    csv.close();

    const int map_points = ecfg.value("density_map_points", 99);
    const DensityMap dm(model.spec, map_points);
    CsvWriter mcsv(opts.out_dir + "/density_map.csv", {"phi", "rho"});
    for (const auto& [phi, r] : dm.grid()) mcsv.row({phi, r});
    mcsv.close();

    json summary = {{"fitted_exponent", rep.fitted_exponent},
                    {"rho", rho},
                    {"f_value", rep.f_value},
                    {"f_d1", rep.f_d1},
                    {"f_d2", rep.f_d2}};
    write_text_file(opts.out_dir + "/expansion_summary.json", summary.dump(2) + "\n");
    write_manifest(opts.out_dir, "ensembles", cfg, seed,
                   {"expansion_report.csv", "density_map.csv", "expansion_summary.json"},
                   {{"expansion_report.csv", "exact enumeration"},
                    {"density_map.csv", "exact (transfer matrix / closed form)"},
                    {"expansion_summary.json", "exact enumeration"}});
    std::cout << "expansion exponent: " << rep.fitted_exponent << "\n";
    return 0;
}

void write_packed_snapshots(const std::string& path, const std::vector<TrajectoryRecord>& records) {
    std::vector<std::uint64_t> words;
    std::uint64_t count = 0;
    const std::uint64_t L = records.empty() ? 0 : static_cast<std::uint64_t>(records[0].snapshots[0].size());
    for (const auto& rec : records)
        for (const auto& snap : rec.snapshots) {
            const auto w = snap.packed();
            words.insert(words.end(), w.begin(), w.end());
            ++count;
        }
    std::ofstream out(path, std::ios::binary);
    auto put_word = [&](std::uint64_t v) {
        char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
        out.write(buf, 8);
    };
    put_word(L);
    put_word(count);
    for (std::uint64_t w : words) put_word(w);
}

int cmd_simulate(const CommonOpts& opts) {
    const json cfg = load_json_file(opts.config_path);
    check_top_level(cfg);
    const Model model = parse_model(cfg.at("model"));
    const Ensemble ens = parse_ensemble(cfg.at("ensemble"), model.spec);
    json scfg = cfg.value("simulation", json::object());
    require_keys_subset(scfg,
                        {"T", "replicas", "sample_times", "samples", "record_currents",
                         "snapshots", "structure_max_lag"},
                        "simulation");
    const std::uint64_t seed = resolve_seed(opts, cfg);

    SimulationPlan plan(model.rates, model.spec);
    plan.L = ens.L;
    plan.rho = ens.rho;
    plan.gamma = model.gamma;
    plan.horizon = scfg.value("T", 100.0);
    plan.replicas = scfg.value("replicas", 1);
    plan.seed = seed;
    plan.record_currents = scfg.value("record_currents", true);
    if (scfg.contains("sample_times")) {
        plan.sample_times = scfg.at("sample_times").get<std::vector<double>>();
    } else {
        const int n = scfg.value("samples", 10);
        for (int i = 1; i <= n; ++i) plan.sample_times.push_back(plan.horizon * i / n);
    }
    plan.validate();

    const auto records = run_replicas(plan, opts.threads);

    std::filesystem::create_directories(opts.out_dir);
    std::vector<std::string> outputs;

    // site-averaged density and integrated current per bond and unit time
    {
        CsvWriter csv(opts.out_dir + "/observables.csv",
                      {"time", "observable", "value", "stderr"});
        const std::size_t nt = records[0].sample_times.size();
        const double R = static_cast<double>(records.size());
        for (std::size_t it = 0; it < nt; ++it) {
            const double t = records[0].sample_times[it];
            double dsum = 0, dsq = 0, jsum = 0, jsq = 0;
            for (const auto& rec : records) {
                const double dens =
                    static_cast<double>(rec.snapshots[it].particle_count()) / plan.L;
                dsum += dens;
                dsq += dens * dens;
                if (t > 0 && !rec.currents.empty()) {
                    CompensatedSum jtot;
                    for (std::int64_t j : rec.currents[it]) jtot.add(static_cast<double>(j));
                    const double jrate = jtot.value() / (static_cast<double>(plan.L) * t);
                    jsum += jrate;
                    jsq += jrate * jrate;
                }
            }
            const double dmean = dsum / R;
            const double dse =
                R > 1 ? std::sqrt(std::max(0.0, (dsq / R - dmean * dmean) / (R - 1))) : 0.0;
            csv.row({t, std::string("density"), dmean, dse});
            if (t > 0 && plan.record_currents) {
                const double jmean = jsum / R;
                const double jse =
                    R > 1 ? std::sqrt(std::max(0.0, (jsq / R - jmean * jmean) / (R - 1))) : 0.0;
                csv.row({t, std::string("mean_current_per_bond_per_time"), jmean, jse});
            }
        }
        csv.close();
        outputs.push_back("observables.csv");
    }

    if (scfg.contains("structure_max_lag")) {
        const int max_lag = scfg.at("structure_max_lag").get<int>();
        const StructureFunction sf = structure_function(records, plan.rho, max_lag);
        if (!sf.error_bars_valid)
            std::cerr << "simulate: single replica, structure-function error bars unavailable\n";
        CsvWriter csv(opts.out_dir + "/structure_function.csv",
                      {"time", "lag", "value", "stderr"});
        for (std::size_t it = 0; it < sf.times.size(); ++it)
            for (std::size_t il = 0; il < sf.lags.size(); ++il)
                csv.row({sf.times[it], static_cast<long long>(sf.lags[il]), sf.mean[it][il],
                         sf.stderr_[it][il]});
        csv.close();
        outputs.push_back("structure_function.csv");
    }

    if (scfg.value("snapshots", false)) {
        write_packed_snapshots(opts.out_dir + "/snapshots.bin", records);
        outputs.push_back("snapshots.bin");
    }

    json meta = {{"observables.csv", "stochastic; stderr column across replicas"}};
    if (scfg.contains("structure_max_lag"))
        meta["structure_function.csv"] = "stochastic; stderr column across replicas";
    if (scfg.value("snapshots", false))
        meta["snapshots.bin"] = "raw samples; packed 64 sites/word little-endian, header (L, count)";
    write_manifest(opts.out_dir, "simulate", cfg, seed, outputs, meta);
    std::cout << "simulate: " << plan.replicas << " replicas, horizon " << plan.horizon << "\n";
    return 0;
}

int cmd_sbe(const CommonOpts& opts) {
    const json cfg = load_json_file(opts.config_path);
    check_top_level(cfg);
    json scfg = cfg.value("sbe", json::object());
    require_keys_subset(scfg,
                        {"cells", "dx", "dt", "steps", "sample_every", "rho", "a", "delta",
                         "D", "chi", "lambda", "K"},
                        "sbe");
    const std::uint64_t seed = resolve_seed(opts, cfg);

    FieldState state(scfg.value("cells", 128), scfg.value("dx", 1.0));
    state.delta = scfg.value("delta", 0.0);
    if (scfg.contains("D") || scfg.contains("chi") || scfg.contains("lambda")) {
        state.D = scfg.value("D", 1.0);
        state.chi = scfg.value("chi", 0.25);
        state.lambda = scfg.value("lambda", 0.0);
    } else {
        // coefficients from the model's thermodynamic curve at rho
        const Model model = parse_model(cfg.at("model"));
        const double rho = scfg.value("rho", 0.5);
        const double a = scfg.value("a", 1.0);
        const int K = scfg.value("K", model.rates.radius() + 1);
        const GradientSolution sol = solve_gradient_condition(model.rates, K);
        if (sol.residual > 1e-6) throw std::runtime_error("sbe: rates are not gradient");
        const ThermoCurve curve =
            compute_thermo_curve(model.rates, sol.omega, model.spec, {rho}, a);
        match_microscopic(state, curve, rho, a);
    }

    const double dt = scfg.value("dt", 0.1 * state.dx * state.dx / (4.0 * state.D));
    const int steps = scfg.value("steps", 1000);
    const int sample_every = scfg.value("sample_every", std::max(1, steps / 10));

    std::filesystem::create_directories(opts.out_dir);
    Stream rng(derive_seed(seed, 0));
    CsvWriter summary(opts.out_dir + "/field_summary.csv", {"time", "mass", "cell_variance"});
    CsvWriter field(opts.out_dir + "/field.csv", {"time", "cell", "value"});
    auto emit = [&]() {
        double mean = 0;
        for (double v : state.y) mean += v;
        mean /= state.cells;
        double var = 0;
        for (double v : state.y) var += (v - mean) * (v - mean);
        var /= state.cells;
        summary.row({state.t, state.mass(), var});
        for (int i = 0; i < state.cells; ++i)
            field.row({state.t, static_cast<long long>(i), state.y[static_cast<std::size_t>(i)]});
    };
    emit();
    for (int s = 1; s <= steps; ++s) {
        step(state, dt, rng);
        if (s % sample_every == 0) emit();
    }
    summary.close();
    field.close();
    write_manifest(opts.out_dir, "sbe", cfg, seed, {"field_summary.csv", "field.csv"},
                   {{"field_summary.csv", "stochastic sample path (single stream)"},
                    {"field.csv", "stochastic sample path (single stream)"}});
    std::cout << "sbe: " << steps << " steps, D=" << state.D << " chi=" << state.chi
              << " lambda=" << state.lambda << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gradient Kawasaki dynamics toolkit"};
    app.set_version_flag("--version", kawasaki::kVersion);
    app.require_subcommand(1);

    CommonOpts opts;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config_path, "experiment config (JSON)")->required();
        sub->add_option("--out", opts.out_dir, "output directory");
        sub->add_option("--seed", opts.seed, "seed override")->each([&](const std::string&) {
            opts.seed_given = true;
        });
        sub->add_option("--threads", opts.threads, "worker threads (0 = hardware)");
        sub->add_option("--tolerance-profile", opts.profile, "strict|default");
    };
    CLI::App* c_check = app.add_subcommand("check", "structural identity checks");
    CLI::App* c_thermo = app.add_subcommand("thermo", "transport-coefficient curve");
    CLI::App* c_ens = app.add_subcommand("ensembles", "equivalence-of-ensembles report");
    CLI::App* c_sim = app.add_subcommand("simulate", "kinetic Monte Carlo experiments");
    CLI::App* c_sbe = app.add_subcommand("sbe", "stochastic Burgers integrator");
    for (CLI::App* sub : {c_check, c_thermo, c_ens, c_sim, c_sbe}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (c_check->parsed()) return cmd_check(opts);
        if (c_thermo->parsed()) return cmd_thermo(opts);
        if (c_ens->parsed()) return cmd_ensembles(opts);
        if (c_sim->parsed()) return cmd_simulate(opts);
        if (c_sbe->parsed()) return cmd_sbe(opts);
    } catch (const kawasaki::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
