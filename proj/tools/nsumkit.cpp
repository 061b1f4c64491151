// nsumkit: sample sizes, estimates and simulation studies for the network scale-up method.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"
#include "nsumkit/design.hpp"
#include "nsumkit/estimator.hpp"
#include "nsumkit/montecarlo.hpp"

#ifndef NSUMKIT_VERSION
#define NSUMKIT_VERSION "dev"
#endif

namespace fs = std::filesystem;
using namespace nsumkit;
using namespace nsumkit::cli;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitDegenerate = 3;

struct RunFlags {
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
};

std::size_t thread_count(const RunFlags& f) {
    if (f.threads) return *f.threads;
    if (const char* env = std::getenv("NSUMKIT_THREADS")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end == env || *end != '\0') throw ConfigError("NSUMKIT_THREADS must be a non-negative integer");
        return static_cast<std::size_t>(v);
    }
    return 0;
}

struct LoadedConfig {
    json config;
    std::uint64_t seed = 0;
};

// Seed precedence: --seed, then the config's (or manifest's) "seed", then 0.
LoadedConfig load(const RunFlags& f) {
    const json raw = load_json(f.config);
    LoadedConfig out;
    out.config = unwrap_manifest(raw);
    if (!out.config.is_object()) throw ConfigError("config must be a JSON object");
    if (f.seed) out.seed = *f.seed;
    else if (raw.contains("seed")) out.seed = get_required<std::uint64_t>(raw, "seed");
    else if (out.config.contains("seed")) out.seed = get_required<std::uint64_t>(out.config, "seed");
    return out;
}

void emit(const RunFlags& f, const std::string& command, const LoadedConfig& cfg,
          const std::string& csv, const json& notes) {
    const fs::path dir(f.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir.string());
    const std::string name = command + ".csv";
    write_atomic(dir / name, csv);
    const json manifest = make_manifest(command, cfg.config, cfg.seed, NSUMKIT_VERSION, name, notes);
    write_atomic(dir / (command + ".manifest.json"), manifest.dump(2) + "\n");
    std::cout << "wrote " << (dir / name).string() << '\n';
}

json sim_notes(const std::vector<SimResult>& rows) {
    json notes = json::array();
    for (const auto& r : rows) {
        std::ostringstream key;
        key << r.model;
        if (r.delta) key << " delta=" << fmt(*r.delta);
        key << " M=" << r.M << " q=" << fmt(r.q) << " alpha=" << fmt(r.alpha);
        if (r.infeasible) {
            notes.push_back(key.str() + ": infeasible (ERGM limited to M <= 1000)");
            continue;
        }
        if (r.truncated) notes.push_back(key.str() + ": sample size truncated at the respondent pool");
        if (!std::isnan(r.mean_density) && std::fabs(r.mean_density - 0.1) > 0.02)
            notes.push_back(key.str() + ": mean density " + fmt(r.mean_density) + " departs from 0.1");
        if (r.calibration && !r.calibration->converged)
            notes.push_back(key.str() + ": ERGM edge calibration did not converge");
    }
    return notes;
}

int cmd_simulate(const RunFlags& f, bool full_grid) {
    LoadedConfig cfg;
    if (full_grid) {
        cfg.config = json{{"M", {1000, 5000, 10000}},
                          {"q", {{"from", 0.01}, {"to", 0.51}, {"step", 0.02}}},
                          {"alpha", {0.01, 0.05, 0.1, 0.2}},
                          {"epsilon", 0.1},
                          {"replicates", 500},
                          {"models", {"ER", "ERGM", "PA", "SBM", "SmallWorld"}}};
        cfg.seed = f.seed.value_or(0);
    } else {
        cfg = load(f);
    }
    SimConfig sim = parse_sim_config(cfg.config);
    sim.seed = cfg.seed;
    sim.options.threads = thread_count(f);
    const auto rows = run_factorial(sim);
    emit(f, "simulate", cfg, simulate_csv(rows), sim_notes(rows));
    return kExitOk;
}

int cmd_sweep(const RunFlags& f) {
    const LoadedConfig cfg = load(f);
    SweepConfig sweep = parse_sweep_config(cfg.config);
    sweep.seed = cfg.seed;
    sweep.options.threads = thread_count(f);
    const auto rows = run_deviation_sweep(sweep);
    emit(f, "sweep", cfg, sweep_csv(rows), sim_notes(rows));
    return kExitOk;
}

int cmd_retro(const RunFlags& f) {
    const LoadedConfig cfg = load(f);
    const RetroConfig retro = parse_retro_config(cfg.config);
    const RngStream root(cfg.seed);
    std::vector<RetroResult> results;
    json notes = json::array();
    for (const auto& c : retro.cases) {
        results.push_back(
            run_retrospective(c, retro.epsilon, retro.alpha, retro.replicates, root, thread_count(f)));
        if (results.back().degenerate)
            notes.push_back(c.name + ": " + std::to_string(results.back().degenerate) +
                            " replicates with zero total degree excluded");
    }
    emit(f, "retro", cfg, retro_csv(retro.cases, results), notes);
    return kExitOk;
}

int cmd_grid(const RunFlags& f) {
    LoadedConfig cfg = load(f);
    const GridConfig grid = parse_grid_config(cfg.config);
    const auto table = sample_size_grid(grid.design, grid.M, grid.q, grid.d_bar);
    json notes = json::array();
    for (std::size_t i = 0; i < table.q.size(); ++i)
        for (std::size_t k = 0; k < table.d_bar.size(); ++k)
            if (table.at(i, k) == grid.M) {
                notes.push_back("some cells are truncated at M = " + std::to_string(grid.M));
                i = table.q.size();
                break;
            }
    emit(f, "grid", cfg, grid_csv(table), notes);
    return kExitOk;
}

struct SampleSizeFlags {
    double epsilon = 0;
    double alpha = 0;
    double prevalence = 0;
    double mean_degree = 0;
    std::int64_t population = 0;
    double deff = 1.0;
    bool z2 = false;
};

int cmd_samplesize(const SampleSizeFlags& f) {
    const StudyDesign design{f.epsilon, f.alpha, f.deff,
                             f.z2 ? ZConvention::ZEqualsTwo : ZConvention::ExactQuantile};
    const SampleSize s = min_sample_size_detail(design, {f.population, f.prevalence, f.mean_degree});
    std::cout << "n " << s.n << '\n'
              << "raw " << fmt(s.raw) << '\n'
              << "truncated " << (s.truncated ? "yes" : "no") << '\n';
    return kExitOk;
}

DegreeSample read_degree_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path);
    DegreeSample s;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::istringstream row(line);
        long long d = -1;
        long long du = -1;
        char comma = 0;
        std::string rest;
        if (!(row >> d >> comma >> du) || comma != ',' || (row >> rest) || d < 0 || du < 0)
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected two non-negative integers 'd,d_u'");
        s.d.push_back(d);
        s.d_u.push_back(du);
    }
    if (s.d.empty()) throw ConfigError(path + ": no degree rows");
    return s;
}

int cmd_estimate(const std::string& input, std::int64_t population, double alpha) {
    detail::require_domain(population >= 1, "population must be at least 1");
    const DegreeSample sample = read_degree_file(input);
    const NsumEstimate e = estimate(sample, population, alpha);
    std::cout << "n " << e.n << '\n'
              << "n_hat " << fmt(e.n_hat) << '\n'
              << "variance " << fmt(e.variance) << '\n'
              << "ci_lo " << fmt(e.ci_lo) << '\n'
              << "ci_hi " << fmt(e.ci_hi) << '\n';
    return kExitOk;
}

void add_run_flags(CLI::App* sub, RunFlags& f, bool config_required = true) {
    auto* opt = sub->add_option("--config", f.config, "JSON config, or a manifest from a previous run")
                    ->check(CLI::ExistingFile);
    if (config_required) opt->required();
    sub->add_option("--out", f.out, "output directory")->capture_default_str();
    sub->add_option("--seed", f.seed, "64-bit seed; overrides the config");
    sub->add_option("--threads", f.threads, "worker cap (0: all cores; env NSUMKIT_THREADS)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Network scale-up sample sizes, estimates and simulation studies"};
    app.set_version_flag("--version", NSUMKIT_VERSION);
    app.require_subcommand(1);

    std::function<int()> action;

    SampleSizeFlags ss;
    auto* samplesize = app.add_subcommand("samplesize", "minimum sample size");
    samplesize->add_option("--epsilon", ss.epsilon, "relative margin of error")->required();
    samplesize->add_option("--alpha", ss.alpha, "one minus the confidence level")->required();
    samplesize->add_option("--prevalence", ss.prevalence, "hidden prevalence q")->required();
    samplesize->add_option("--mean-degree", ss.mean_degree, "mean degree")->required();
    samplesize->add_option("--population", ss.population, "population size M")->required();
    samplesize->add_option("--deff", ss.deff, "design effect")->capture_default_str();
    samplesize->add_flag("--z2", ss.z2, "use z = 2 instead of the exact normal quantile");
    samplesize->callback([&] { action = [&] { return cmd_samplesize(ss); }; });

    std::string input;
    std::int64_t population = 0;
    double alpha = 0.05;
    auto* est = app.add_subcommand("estimate", "scale-up estimate from a degree file");
    est->add_option("--input", input, "headerless CSV of d,d_u rows")->required()->check(CLI::ExistingFile);
    est->add_option("--population", population, "population size M")->required();
    est->add_option("--alpha", alpha, "one minus the confidence level")->capture_default_str();
    est->callback([&] { action = [&] { return cmd_estimate(input, population, alpha); }; });

    RunFlags sim_flags;
    bool full_grid = false;
    auto* sim = app.add_subcommand("simulate", "factorial simulation study");
    add_run_flags(sim, sim_flags, false);
    sim->add_flag("--full-grid", full_grid, "run the full five-model factorial grid");
    sim->callback([&] {
        if (!full_grid && sim_flags.config.empty())
            throw CLI::RequiredError("--config (or --full-grid)");
        action = [&] { return cmd_simulate(sim_flags, full_grid); };
    });

    RunFlags sweep_flags;
    auto* sweep = app.add_subcommand("sweep", "deviation-from-ER sweep");
    add_run_flags(sweep, sweep_flags);
    sweep->callback([&] { action = [&] { return cmd_sweep(sweep_flags); }; });

    RunFlags retro_flags;
    auto* retro = app.add_subcommand("retro", "retrospective case-study analysis");
    add_run_flags(retro, retro_flags);
    retro->callback([&] { action = [&] { return cmd_retro(retro_flags); }; });

    RunFlags grid_flags;
    auto* grid = app.add_subcommand("grid", "sample-size grid over prevalence and mean degree");
    add_run_flags(grid, grid_flags);
    grid->callback([&] { action = [&] { return cmd_grid(grid_flags); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        return action();
    } catch (const DegenerateSampleError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitDegenerate;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const UnsupportedError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InfeasibleError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
}
