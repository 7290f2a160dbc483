// Acceptance suite: one pass/fail line per criterion. Exit 0 iff all pass.
//
// Usage: acceptance_tests [--cli PATH] [--work-dir DIR] [--threads N]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kawasaki/canonical.hpp"
#include "kawasaki/csv.hpp"
#include "kawasaki/gradient.hpp"
#include "kawasaki/kmc.hpp"
#include "kawasaki/sbe.hpp"
#include "kawasaki/thermo.hpp"
#include "../support.hpp"

using namespace kawasaki;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    int failures = 0;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            ++failures;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
    void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

int g_total_failures = 0;

// budget_seconds = 0 means no stated runtime bound ("minutes")
template <typename Fn>
void run_criterion(int number, const std::string& title, double budget_seconds, Fn&& body) {
    Criterion c;
    const auto start = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.require(false, std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (budget_seconds > 0 && secs > budget_seconds)
        c.require(false, "runtime " + std::to_string(secs) + "s exceeds the stated " +
                             std::to_string(budget_seconds) + "s");
    const bool pass = c.failures == 0;
    if (!pass) g_total_failures += c.failures;
    std::printf("[%s] criterion %d: %s (%.2fs)%s%s\n", pass ? "PASS" : "FAIL", number,
                title.c_str(), secs, c.detail.empty() ? "" : " -- ", c.detail.c_str());
    std::fflush(stdout);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

double speed_change_scale(double b) { return 1.0 + 2.0 * std::abs(b); }

}  // namespace

// --- criterion bodies -------------------------------------------------------

static void criterion1_gradient_solver(Criterion& c) {
    // ssep: omega = eta(0) up to additive constant
    const GradientSolution ssep_sol = solve_gradient_condition(ssep_rate(), 1);
    c.require(ssep_sol.residual <= 1e-10, "ssep residual > 1e-10");
    for (std::uint32_t m = 0; m < 8; ++m) {
        const double expect = (m == 0b010) ? 1.0 : 0.0;
        if (std::abs(ssep_sol.omega.coefficient(m) - expect) > 1e-10)
            c.require(false, "ssep omega coefficient mismatch");
    }

    // speed-change: omega = eta(0) + b(eta(-1)eta(0)+eta(0)eta(1)-eta(-1)eta(1)),
    // pre-normalization, up to additive constant
    const double b = 0.3;
    const RateTable sc = speed_change_rate(b);
    const GradientSolution sc_sol = solve_gradient_condition(sc, 2);
    c.require(sc_sol.residual <= 1e-10, "speed-change residual > 1e-10");
    const LocalFunction recovered = sc_sol.omega.scaled(speed_change_scale(b));
    const LocalFunction expect = testing::speed_change_omega(b);
    const LocalFunction diff = recovered - expect;
    double worst = 0.0;
    const auto table = diff.value_table();
    for (double v : table) worst = std::max(worst, std::abs(v - table[0]));  // modulo constants
    c.require(worst <= 1e-10, "speed-change omega differs beyond an additive constant");

    // metropolis beta=0.7: non-gradient witness
    const GibbsSpec nn = GibbsSpec::nearest_neighbor(1.0, 0.7, 0.0);
    const GradientSolution metro_sol = solve_gradient_condition(metropolis_rate(nn), 2);
    c.require(metro_sol.residual > 1e-3, "metropolis residual not > 1e-3");
}

static void criterion2_exact_identities(Criterion& c) {
    const GibbsSpec prod = GibbsSpec::product(0.0);
    const std::vector<double> grid = uniform_density_grid(99);
    struct Family {
        const char* name;
        RateTable rates;
        int K;
    };
    const std::vector<Family> families = {{"ssep", ssep_rate(), 1},
                                          {"speed_change", speed_change_rate(0.3), 2}};
    for (const auto& fam : families) {
        const GradientSolution sol = solve_gradient_condition(fam.rates, fam.K);
        const double cur = verify_current_identity(fam.rates, sol.omega);
        if (cur > 1e-10) c.require(false, std::string(fam.name) + ": current identity > 1e-10");
        const auto fd = verify_fd_relation(fam.rates, sol.omega, prod, grid);
        const auto ein = einstein_relation_check(fam.rates, sol.omega, prod, grid);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double rho = grid[i];
            const double H = flux(fam.rates, prod, rho).value;
            const double chiD = compressibility(prod, rho) * diffusivity(sol.omega, prod, rho);
            if (std::abs(H - chiD) > 1e-10) {
                c.require(false, std::string(fam.name) + ": |H - chi D| > 1e-10");
                break;
            }
            if (fd[i].residual > 1e-10) {
                c.require(false, std::string(fam.name) + ": FD relation > 1e-10");
                break;
            }
            if (ein[i].residual > 1e-10) {
                c.require(false, std::string(fam.name) + ": Einstein relation > 1e-10");
                break;
            }
        }
    }
}

static void criterion3_equivalence(Criterion& c) {
    const GibbsSpec prod = GibbsSpec::product(0.0);
    const LocalFunction f = LocalFunction::monomial({0, 1});
    const double rho = 0.5;
    const StaticAverage fa = static_average(f, prod, rho);
    const std::vector<int> ells = {10, 14, 18, 22};
    const ExpansionReport rep =
        equivalence_expansion_report(f, prod, rho, ells, fa.value, fa.d1, fa.d2);
    // residual at sigma = rho equals rho(rho-1)/(ell-1) to 1e-12
    for (int ell : ells) {
        const int k = static_cast<int>(std::lround(rho * ell));
        bool found = false;
        for (const auto& row : rep.rows) {
            if (row.ell != ell || row.k != k) continue;
            found = true;
            const double expect = rho * (rho - 1.0) / (ell - 1.0);
            if (std::abs(row.residual - expect) > 1e-12)
                c.require(false, "sigma=rho residual differs from rho(rho-1)/(ell-1) at ell=" +
                                     std::to_string(ell));
        }
        if (!found) c.require(false, "missing k = rho*ell row");
    }
    c.require(std::abs(rep.fitted_exponent - (-1.0)) <= 0.15,
              "decay exponent " + format_double(rep.fitted_exponent) + " outside -1.0 +- 0.15");
}

static void criterion4_generator_invariance(Criterion& c) {
    const GibbsSpec prod = GibbsSpec::product(0.0);
    const int L = 12;
    const double gamma = 0.3, rho = 0.4;
    const double r_ssep = generator_invariance_residual(ssep_rate(), gamma, prod, rho, L);
    c.require(r_ssep <= 1e-10, "ssep invariance residual > 1e-10");
    const double r_sc =
        generator_invariance_residual(speed_change_rate(0.3), gamma, prod, rho, L);
    c.require(r_sc <= 1e-10, "speed-change invariance residual > 1e-10");
    const GibbsSpec nn = GibbsSpec::nearest_neighbor(1.0, 0.7, 0.0);
    const double r_metro =
        generator_invariance_residual(metropolis_rate(nn), gamma, nn, rho, L);
    c.require(r_metro > 1e-6, "metropolis invariance residual not > 1e-6");
}

static void criterion5_kmc_drift(Criterion& c, int threads) {
    const double b = 0.3, rho = 0.4, gamma = 0.05;
    const RateTable rates = speed_change_rate(b);
    const GibbsSpec prod = GibbsSpec::product(0.0);
    SimulationPlan plan(rates, prod);
    plan.L = 512;
    plan.rho = rho;
    plan.gamma = gamma;
    plan.horizon = 1e4;
    plan.replicas = 32;
    plan.seed = 20240901;
    plan.sample_times = {plan.horizon};
    const auto records = run_replicas(plan, threads);

    const double target =
        gamma * static_average(reverse_current_observable(rates), prod, rho).value;
    double jsum = 0, jsq = 0;
    for (const auto& rec : records) {
        CompensatedSum tot;
        for (auto v : rec.currents.back()) tot.add(static_cast<double>(v));
        const double j = tot.value() / (plan.L * plan.horizon);
        jsum += j;
        jsq += j * j;
    }
    const double R = static_cast<double>(records.size());
    const double mean = jsum / R;
    const double se = std::sqrt(std::max(0.0, (jsq / R - mean * mean) / (R - 1)));
    c.note("measured " + format_double(mean) + " target " + format_double(target) + " se " +
           format_double(se));
    c.require(std::abs(mean - target) <= 4 * se, "drift outside 4 standard errors");
}

static void criterion6_diffusive_spreading(Criterion& c, int threads) {
    SimulationPlan plan(ssep_rate(), GibbsSpec::product(0.0));
    plan.L = 1024;
    plan.rho = 0.5;
    plan.gamma = 0.0;
    plan.horizon = 500.0;
    plan.replicas = 3072;  // >= 64; extra replicas buy slope resolution
    plan.seed = 555;
    plan.record_currents = false;
    for (int t = 50; t <= 500; t += 50) plan.sample_times.push_back(t);
    const auto records = run_replicas(plan, threads);
    const StructureFunction sf = structure_function(records, plan.rho, 125);
    const auto pts = second_moment_growth(sf, 1.0, 3.5, 5);

    const double chi = 0.25;
    std::vector<double> ts, ys, ss;
    for (const auto& p : pts) {
        ts.push_back(p.t);
        ys.push_back(p.value / chi);
        ss.push_back(std::max(p.stderr_ / chi, 1e-9));
    }
    const LineFit fit = fit_line_weighted(ts, ys, ss);
    c.note("slope " + format_double(fit.slope) + " +- " + format_double(fit.slope_stderr));
    c.require(std::abs(fit.slope - 2.0) <= 0.2, "slope outside 2 +- 10%");
}

static void criterion7_sbe(Criterion& c) {
    // stationary per-cell variance vs the discrete-OU Lyapunov law
    {
        const int M = 64;
        const double dx = 1.0, D = 1.0, chi = 0.25;
        const double dt = 0.05;
        const Eigen::MatrixXd C = testing::lyapunov_stationary(M, dx, dt, D, chi);
        double pred = 0.0;
        for (int i = 0; i < M; ++i) pred += C(i, i);
        pred /= M;

        FieldState s(M, dx);
        s.D = D;
        s.chi = chi;
        s.lambda = 0.0;
        Stream rng(8191);
        for (int n = 0; n < 60000; ++n) step(s, dt, rng);
        double acc = 0.0;
        long cnt = 0;
        for (int k = 0; k < 400; ++k) {
            for (int n = 0; n < 1500; ++n) step(s, dt, rng);
            for (double v : s.y) {
                acc += v * v;
                ++cnt;
            }
        }
        const double measured = acc / cnt;
        c.note("variance " + format_double(measured) + " predicted " + format_double(pred));
        c.require(std::abs(measured - pred) <= 0.05 * pred,
                  "stationary variance outside 5% of the discrete-OU law");
    }
    // single-mode heat decay within the stated discretization bounds
    {
        const int M = 64;
        FieldState s(M, 1.0);
        s.D = 0.8;
        s.chi = 0.0;
        s.lambda = 0.0;
        const int mode = 3;
        const double k = 2.0 * M_PI * mode / M;
        for (int i = 0; i < M; ++i) s.y[static_cast<std::size_t>(i)] = std::sin(k * i);
        const double dt = 0.2;
        const int steps = 200;
        Stream rng(1);
        for (int n = 0; n < steps; ++n) step(s, dt, rng);
        const double q2 = 2.0 * (1.0 - std::cos(k));
        const double lattice = std::pow(1.0 - s.D * q2 * dt, steps);
        double worst = 0.0;
        for (int i = 0; i < M; ++i)
            worst = std::max(worst, std::abs(s.y[static_cast<std::size_t>(i)] - lattice * std::sin(k * i)));
        c.require(worst <= 1e-12, "mode amplitude deviates from the exact lattice decay");
        const double t = steps * dt;
        const double continuum = std::exp(-s.D * k * k * t);
        const double bound = 1.5 * t * s.D * (std::pow(k, 4) / 12.0 + s.D * std::pow(k, 4) * dt / 2.0);
        c.require(std::abs(std::log(lattice / continuum)) <= bound,
                  "lattice decay outside the documented bound around exp(-D k^2 t)");
    }
    // mass conservation per step with noise and nonlinearity on
    {
        FieldState s(128, 0.5);
        s.D = 1.0;
        s.chi = 0.25;
        s.lambda = -1.0;
        s.delta = 2.0;
        Stream rng(4242);
        for (int i = 0; i < 128; ++i) s.y[static_cast<std::size_t>(i)] = 0.2 * std::cos(2 * M_PI * i / 128.0);
        double mass = s.mass();
        const double dt = 0.05;
        for (int n = 0; n < 500; ++n) {
            step(s, dt, rng);
            const double m = s.mass();
            if (std::abs(m - mass) > 1e-12) {
                c.require(false, "mass drift exceeds 1e-12 in one step");
                break;
            }
            mass = m;
        }
    }
}

static int run_cli(const std::string& cli, const std::string& args) {
    const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WEXITSTATUS(status);
}

static void criterion8_reproducibility(Criterion& c, const std::string& cli, const fs::path& work) {
    if (cli.empty()) {
        c.require(false, "no --cli path given");
        return;
    }
    fs::create_directories(work);

    const fs::path cfgdir = work / "configs";
    fs::create_directories(cfgdir);
    auto write_cfg = [&](const std::string& name, const std::string& text) {
        std::ofstream out(cfgdir / name);
        out << text;
        return (cfgdir / name).string();
    };
    const std::string check_cfg = write_cfg("check.json", R"({
  "experiment": "check-ssep",
  "seed": 3,
  "model": {"family": "ssep"}
})");
    const std::string thermo_cfg = write_cfg("thermo.json", R"({
  "experiment": "thermo-sc",
  "seed": 3,
  "model": {"family": "speed_change", "b": 0.3},
  "thermo": {"a": 1.0, "grid_points": 21}
})");
    const std::string ens_cfg = write_cfg("ensembles.json", R"({
  "experiment": "ens",
  "seed": 3,
  "model": {"family": "ssep"},
  "ensembles": {"ell_list": [8, 10], "rho": 0.5, "density_map_points": 11}
})");
    const std::string sim_cfg = write_cfg("simulate.json", R"({
  "experiment": "sim",
  "seed": 17,
  "model": {"family": "speed_change", "b": 0.3, "gamma": 0.1},
  "ensemble": {"L": 64, "rho": 0.4},
  "simulation": {"T": 50.0, "replicas": 4, "samples": 5, "structure_max_lag": 8, "snapshots": true}
})");
    const std::string sbe_cfg = write_cfg("sbe.json", R"({
  "experiment": "sbe",
  "seed": 5,
  "sbe": {"cells": 64, "dx": 1.0, "dt": 0.05, "steps": 200, "sample_every": 50,
           "D": 1.0, "chi": 0.25, "lambda": -0.5, "delta": 2.0}
})");

    const std::vector<std::pair<std::string, std::string>> runs = {
        {"check", check_cfg}, {"thermo", thermo_cfg}, {"ensembles", ens_cfg},
        {"simulate", sim_cfg}, {"sbe", sbe_cfg}};
    for (const auto& [cmd, cfg] : runs) {
        const fs::path dir_a = work / (cmd + "_a"), dir_b = work / (cmd + "_b");
        fs::remove_all(dir_a);
        fs::remove_all(dir_b);
        const int ra = run_cli(cli, cmd + " --config " + cfg + " --out " + dir_a.string());
        const int rb = run_cli(cli, cmd + " --config " + cfg + " --out " + dir_b.string() +
                                        " --threads 1");
        if (ra < 0 || rb < 0 || ra != rb) {
            c.require(false, cmd + ": exit codes differ between reruns");
            continue;
        }
        // every produced file must match byte for byte
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir_a)) files.push_back(entry.path().filename());
        if (files.empty()) c.require(false, cmd + ": produced no outputs");
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            if (!fs::exists(dir_b / f)) {
                c.require(false, cmd + ": missing " + f.string() + " on rerun");
                continue;
            }
            if (slurp(dir_a / f) != slurp(dir_b / f))
                c.require(false, cmd + ": " + f.string() + " differs between reruns");
        }
    }
}

static void cli_exit_code_contract(Criterion& c, const std::string& cli, const fs::path& work) {
    if (cli.empty()) {
        c.require(false, "no --cli path given");
        return;
    }
    const fs::path cfgdir = work / "configs";
    fs::create_directories(cfgdir);
    {
        std::ofstream out(cfgdir / "metro.json");
        out << R"({"experiment":"m","seed":1,"model":{"family":"metropolis","beta":0.7,
                   "couplings":[{"sites":[0,1],"J":1.0}]}})";
    }
    {
        std::ofstream out(cfgdir / "bad.json");
        out << R"({"model":{"family":"ssep"},"unknown_section":{}})";
    }
    {
        std::ofstream out(cfgdir / "check_ok.json");
        out << R"({"experiment":"ok","seed":1,"model":{"family":"ssep"}})";
    }
    c.require(run_cli(cli, "check --config " + (cfgdir / "check_ok.json").string() + " --out " +
                               (work / "ec_ok").string()) == 0,
              "ssep check should exit 0");
    c.require(run_cli(cli, "check --config " + (cfgdir / "metro.json").string() + " --out " +
                               (work / "ec_metro").string()) == 1,
              "metropolis check should exit 1 (gradient failure)");
    c.require(run_cli(cli, "check --config " + (cfgdir / "bad.json").string() + " --out " +
                               (work / "ec_bad").string()) == 2,
              "malformed config should exit 2");
    c.require(run_cli(cli, "check") == 2, "missing --config should exit 2");
}

int main(int argc, char** argv) {
    std::string cli;
    fs::path work = fs::temp_directory_path() / "kawasaki_acceptance";
    int threads = 2;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--cli" && i + 1 < argc) cli = argv[++i];
        else if (arg == "--work-dir" && i + 1 < argc) work = argv[++i];
        else if (arg == "--threads" && i + 1 < argc) threads = std::atoi(argv[++i]);
    }

    run_criterion(1, "gradient solver recovers omega; metropolis flagged non-gradient", 1.0,
                  [&](Criterion& c) { criterion1_gradient_solver(c); });
    run_criterion(2, "exact identities at beta=0 on the 99-point grid (H=chiD, FD, current, Einstein)",
                  5.0, [&](Criterion& c) { criterion2_exact_identities(c); });
    run_criterion(3, "equivalence-of-ensembles expansion and 1/ell decay", 60.0,
                  [&](Criterion& c) { criterion3_equivalence(c); });
    run_criterion(4, "exact generator invariance of nu_rho under c_gamma on L=12", 30.0,
                  [&](Criterion& c) { criterion4_generator_invariance(c); });
    run_criterion(5, "KMC drift matches gamma int c eta(1)(1-eta(0)) dnu within 4 se", 0,
                  [&](Criterion& c) { criterion5_kmc_drift(c, threads); });
    run_criterion(6, "diffusive spreading: second-moment slope = 2D within 10%", 0,
                  [&](Criterion& c) { criterion6_diffusive_spreading(c, threads); });
    run_criterion(7, "SBE integrator: discrete-OU variance, heat decay, exact mass", 60.0,
                  [&](Criterion& c) { criterion7_sbe(c); });
    run_criterion(8, "byte-identical reruns of every experiment", 0,
                  [&](Criterion& c) { criterion8_reproducibility(c, cli, work); });
    run_criterion(9, "cli exit-code contract (supplementary)", 0,
                  [&](Criterion& c) { cli_exit_code_contract(c, cli, work); });

    if (g_total_failures == 0) {
        std::printf("acceptance: all criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d failure(s)\n", g_total_failures);
    return 1;
}
