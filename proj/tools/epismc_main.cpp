// Command-line front end: network generation, agent simulation, filtering,
// the coupled calibration loop, the ODE reference and the scan benchmark.
//
// Exit codes: 0 success, 1 usage error, 2 invalid configuration or
// infeasible spec, 3 I/O failure, 4 numerical failure (filter degeneracy).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "epismc/abm.hpp"
#include "epismc/coupling.hpp"
#include "epismc/errors.hpp"
#include "epismc/network.hpp"
#include "epismc/ode.hpp"
#include "epismc/scan.hpp"
#include "epismc/smc.hpp"

namespace {

constexpr const char* kVersion = "epismc 0.1.0";

std::vector<std::size_t> parse_size_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::istringstream fields(text);
    std::string cell;
    while (std::getline(fields, cell, ',')) {
        if (cell.empty()) continue;
        out.push_back(static_cast<std::size_t>(std::stoull(cell)));
    }
    if (out.empty()) throw epismc::ConfigError("empty list: '" + text + "'");
    return out;
}

struct NetworkFlags {
    std::string edges_path;
    std::size_t complete_nodes = 0;
    std::size_t bter_nodes = 0;
    double mean_degree = 16.52;
    double exponent = 1.0;
    double clustering = 0.55;

    epismc::ContactNetwork build(std::uint64_t seed, int workers) const {
        epismc::ContactNetwork net;
        if (!edges_path.empty()) {
            net = epismc::load_edge_list(edges_path);
        } else if (complete_nodes > 0) {
            net = epismc::complete_graph(complete_nodes);
        } else if (bter_nodes > 0) {
            epismc::BterSpec spec;
            spec.node_count = bter_nodes;
            spec.target_mean_degree = mean_degree;
            spec.degree_exponent = exponent;
            spec.target_clustering = clustering;
            spec.seed = seed;
            net = epismc::generate_bter(spec);
        } else {
            throw epismc::ConfigError("choose a network: --edges, --complete or --bter");
        }
        return epismc::partition(std::move(net), static_cast<std::size_t>(workers));
    }
};

void cmd_netgen(const epismc::BterSpec& spec, const std::string& output_dir,
                const std::string& name) {
    const auto net = epismc::generate_bter(spec);
    std::filesystem::create_directories(output_dir);
    const auto base = std::filesystem::path(output_dir) / name;
    epismc::write_edge_list(net, base.string() + ".edges");
    epismc::write_stats_sidecar(net, base.string() + ".json");
    const auto stats = net.realized_stats();
    std::cout << "nodes " << net.node_count() << " edges " << net.edge_count()
              << " mean_degree " << stats->mean_degree << " clustering "
              << stats->clustering << '\n';
}

void cmd_abm(const NetworkFlags& flags, double beta, double gamma, double i0,
             int days, std::uint64_t seed, int workers,
             const std::string& output_dir) {
    const auto net = flags.build(seed, workers);
    const auto n_seed = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::ceil(i0 * static_cast<double>(net.node_count()))));
    epismc::RngStream rng(seed, epismc::stream_id(0x636c6930ull));
    auto ledger = epismc::seed_infections(
        epismc::HealthLedger::all_susceptible(net.node_count()), n_seed, rng);
    auto [final_ledger, counts] =
        epismc::run_window(net, std::move(ledger), epismc::RateDistribution::point(beta),
                           epismc::RateDistribution::point(gamma), days, seed, workers);
    std::filesystem::create_directories(output_dir);
    epismc::write_daily_counts(counts,
                               std::filesystem::path(output_dir) / "abm_daily.csv");
    std::cout << "final s " << final_ledger.s_count() << " i "
              << final_ledger.i_count() << " r " << final_ledger.r_count() << '\n';
}

void cmd_filter(const std::string& obs_path, epismc::FilterConfig cfg,
                const std::string& output_dir) {
    const auto observations = epismc::ingest_observations(obs_path);
    const auto out = epismc::smc_run(observations, cfg);
    std::filesystem::create_directories(output_dir);
    epismc::write_filter_csv(out, std::filesystem::path(output_dir) / "curves.csv");
    epismc::write_params_ndjson(out,
                                std::filesystem::path(output_dir) / "params.ndjson");
    std::cout << "steps " << out.rows.size() - 1 << " final_ess "
              << out.rows.back().ess << '\n';
}

void cmd_couple(const std::string& config_path, const std::string& mode_override,
                const std::string& output_override, std::int64_t seed_override,
                int workers_override) {
    auto config = epismc::load_config(config_path);
    if (!mode_override.empty()) {
        if (mode_override == "static")
            config.io.mode = epismc::RunMode::static_assimilation;
        else if (mode_override == "streaming")
            config.io.mode = epismc::RunMode::streaming;
        else
            throw epismc::ConfigError("--mode must be static or streaming");
    }
    if (!output_override.empty()) config.io.output_dir = output_override;
    if (seed_override >= 0) {
        config.abm.seed = static_cast<std::uint64_t>(seed_override);
        config.smc.seed = static_cast<std::uint64_t>(seed_override);
    }
    if (workers_override > 0) {
        config.abm.workers = workers_override;
        config.smc.threads = workers_override;
    }
    const auto report = config.io.mode == epismc::RunMode::static_assimilation
                            ? epismc::run_static(config)
                            : epismc::run_streaming(config);
    std::cout << "run " << report.run_id << " windows " << report.windows.size()
              << " artifacts " << report.manifest.size() << '\n';
}

void cmd_ode(double beta, double gamma, double i0, double days, double dt,
             const std::string& output_dir) {
    const auto curve = epismc::solve_sir(beta, gamma, 1.0 - i0, i0, 0.0, days, dt);
    std::filesystem::create_directories(output_dir);
    epismc::write_ode_csv(curve,
                          std::filesystem::path(output_dir) / "ode_baseline.csv");
    std::cout << "r0 " << epismc::r_naught(beta, gamma) << " samples "
              << curve.size() << '\n';
}

void cmd_scanbench(const std::string& sizes_text, const std::string& workers_text,
                   int reps, std::uint64_t seed, const std::string& output_dir) {
    const auto sizes = parse_size_list(sizes_text);
    const auto workers = parse_size_list(workers_text);
    std::filesystem::create_directories(output_dir);
    std::ofstream out(std::filesystem::path(output_dir) / "scan_bench.csv");
    if (!out) throw epismc::IoError("cannot open scan_bench.csv");
    out << "size,workers,median_ns,p95_ns\n";
    for (const std::size_t size : sizes) {
        std::vector<double> values(size);
        epismc::RngStream rng(seed, epismc::stream_id(0x62656e6368ull, size));
        for (auto& v : values) v = rng.u01();
        for (const std::size_t w : workers) {
            std::vector<double> ns;
            ns.reserve(static_cast<std::size_t>(reps));
            for (int rep = 0; rep < reps; ++rep) {
                const auto begin = std::chrono::steady_clock::now();
                const auto result =
                    epismc::inclusive_scan(values, static_cast<int>(w));
                const auto end = std::chrono::steady_clock::now();
                ns.push_back(static_cast<double>(
                    std::chrono::duration_cast<std::chrono::nanoseconds>(end - begin)
                        .count()));
                if (result.back() < 0) std::abort();  // keep the result alive
            }
            std::sort(ns.begin(), ns.end());
            const double median = ns[ns.size() / 2];
            const double p95 = ns[std::min(ns.size() - 1,
                                           static_cast<std::size_t>(
                                               0.95 * static_cast<double>(ns.size())))];
            out << size << ',' << w << ',' << median << ',' << p95 << '\n';
            std::cout << "size " << size << " workers " << w << " median_ns "
                      << median << '\n';
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Coupled agent-based / sequential Monte Carlo epidemic engine"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    app.footer(
        "Exit codes:\n"
        "  0  success\n"
        "  1  usage error (unknown flag or subcommand, missing required option)\n"
        "  2  invalid configuration or infeasible generator target\n"
        "  3  I/O failure (missing or malformed input, unwritable output)\n"
        "  4  numerical failure (e.g. filter degeneracy)");

    // netgen
    auto* netgen = app.add_subcommand("netgen", "Generate a BTER contact network");
    epismc::BterSpec spec;
    spec.node_count = 5000;
    spec.target_mean_degree = 16.52;
    spec.target_clustering = 0.55;
    std::string netgen_dir = ".";
    std::string netgen_name = "network";
    netgen->add_option("--nodes", spec.node_count, "Node count")->required();
    netgen->add_option("--mean-degree", spec.target_mean_degree, "Target mean degree");
    netgen->add_option("--exponent", spec.degree_exponent, "Degree power-law exponent");
    netgen->add_option("--clustering", spec.target_clustering, "Target clustering");
    netgen->add_option("--seed", spec.seed, "Generator seed");
    netgen->add_option("--output-dir", netgen_dir, "Output directory");
    netgen->add_option("--name", netgen_name, "Output file stem");
    int netgen_workers = 1;
    netgen->add_option("--workers", netgen_workers,
                       "Accepted for interface uniformity; labels are assigned at load");

    // abm
    auto* abm = app.add_subcommand("abm", "Run the agent-based simulation alone");
    NetworkFlags abm_net;
    double abm_beta = 0.5, abm_gamma = 0.1, abm_i0 = 0.002;
    int abm_days = 50, abm_workers = 1;
    std::uint64_t abm_seed = 0;
    std::string abm_dir = ".";
    abm->add_option("--edges", abm_net.edges_path, "Edge-list file");
    abm->add_option("--complete", abm_net.complete_nodes, "Complete graph of N nodes");
    abm->add_option("--bter", abm_net.bter_nodes, "BTER network of N nodes");
    abm->add_option("--mean-degree", abm_net.mean_degree, "BTER mean degree");
    abm->add_option("--exponent", abm_net.exponent, "BTER degree exponent");
    abm->add_option("--clustering", abm_net.clustering, "BTER clustering");
    abm->add_option("--beta", abm_beta, "Transmissibility rate");
    abm->add_option("--gamma", abm_gamma, "Recovery rate");
    abm->add_option("--i0", abm_i0, "Initial infected fraction");
    abm->add_option("--days", abm_days, "Days to simulate");
    abm->add_option("--seed", abm_seed, "Simulation seed");
    abm->add_option("--workers", abm_workers, "Partition/worker count");
    abm->add_option("--output-dir", abm_dir, "Output directory");

    // filter
    auto* filter = app.add_subcommand("filter", "Run the particle filter alone");
    std::string filter_obs;
    epismc::FilterConfig filter_cfg;
    std::string filter_dir = ".";
    std::string filter_backend = "sequential";
    filter->add_option("--obs", filter_obs, "Observation file (NDJSON or counts CSV)")
        ->required();
    filter->add_option("--particles", filter_cfg.n_particles, "Particle count");
    filter->add_option("--obs-sd", filter_cfg.obs_sd, "Observation noise sd");
    filter->add_option("--latent-sd", filter_cfg.latent_sd, "Latent weighting sd");
    filter->add_option("--interp", filter_cfg.interp_steps,
                       "Interpolated sub-steps between observations");
    filter->add_option("--ess-frac", filter_cfg.ess_threshold_fraction,
                       "Resampling ESS fraction");
    filter->add_option("--prior-low", filter_cfg.prior_log_low, "Log-prior lower bound");
    filter->add_option("--prior-high", filter_cfg.prior_log_high, "Log-prior upper bound");
    filter->add_option("--ou-w3", filter_cfg.ou.w3, "log-beta diffusion");
    filter->add_option("--ou-u3", filter_cfg.ou.u3, "log-gamma diffusion");
    filter->add_option("--i0", filter_cfg.initial_infected, "Initial infected fraction");
    filter->add_option("--seed", filter_cfg.seed, "Filter seed");
    filter->add_option("--workers", filter_cfg.threads, "Propagation threads");
    filter->add_option("--scan-backend", filter_backend,
                       "Resampling scan backend: sequential|threaded");
    filter->add_option("--scan-workers", filter_cfg.scan_workers,
                       "Workers for the threaded scan");
    filter->add_option("--output-dir", filter_dir, "Output directory");

    // couple
    auto* couple = app.add_subcommand("couple", "Run the coupled calibration loop");
    std::string couple_config, couple_mode, couple_dir;
    std::int64_t couple_seed = -1;
    int couple_workers = 0;
    couple->add_option("--config", couple_config, "TOML run configuration")->required();
    couple->add_option("--mode", couple_mode, "Override io.mode (static|streaming)");
    couple->add_option("--output-dir", couple_dir, "Override io.output_dir");
    couple->add_option("--seed", couple_seed, "Override both abm.seed and smc.seed");
    couple->add_option("--workers", couple_workers,
                       "Override abm.workers and smc.threads");

    // ode
    auto* ode = app.add_subcommand("ode", "Emit the deterministic SIR reference");
    double ode_beta = 0.5, ode_gamma = 0.1, ode_i0 = 0.002, ode_days = 50,
           ode_dt = 0.01;
    std::string ode_dir = ".";
    ode->add_option("--beta", ode_beta, "Transmissibility rate");
    ode->add_option("--gamma", ode_gamma, "Recovery rate");
    ode->add_option("--i0", ode_i0, "Initial infected proportion");
    ode->add_option("--days", ode_days, "Integration horizon");
    ode->add_option("--dt", ode_dt, "Integration step");
    ode->add_option("--output-dir", ode_dir, "Output directory");
    std::uint64_t ode_seed = 0;
    int ode_workers = 1;
    ode->add_option("--seed", ode_seed,
                    "Accepted for interface uniformity; the solver is deterministic");
    ode->add_option("--workers", ode_workers,
                    "Accepted for interface uniformity; the solver is single-threaded");

    // scanbench
    auto* bench = app.add_subcommand("scanbench", "Benchmark the prefix scan");
    std::string bench_sizes = "1048576";
    std::string bench_workers = "1,2";
    int bench_reps = 9;
    std::uint64_t bench_seed = 0;
    std::string bench_dir = ".";
    bench->add_option("--sizes", bench_sizes, "Comma-separated input sizes");
    bench->add_option("--workers", bench_workers, "Comma-separated worker counts");
    bench->add_option("--reps", bench_reps, "Repetitions per cell");
    bench->add_option("--seed", bench_seed, "Input seed");
    bench->add_option("--output-dir", bench_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << '\n';
        return 1;
    }

    try {
        if (*netgen) cmd_netgen(spec, netgen_dir, netgen_name);
        if (*abm)
            cmd_abm(abm_net, abm_beta, abm_gamma, abm_i0, abm_days, abm_seed,
                    abm_workers, abm_dir);
        if (*filter) {
            if (filter_backend == "threaded")
                filter_cfg.scan_backend = epismc::ScanBackend::threaded;
            else if (filter_backend != "sequential")
                throw epismc::ConfigError("--scan-backend must be sequential or threaded");
            cmd_filter(filter_obs, filter_cfg, filter_dir);
        }
        if (*couple)
            cmd_couple(couple_config, couple_mode, couple_dir, couple_seed,
                       couple_workers);
        if (*ode) cmd_ode(ode_beta, ode_gamma, ode_i0, ode_days, ode_dt, ode_dir);
        if (*bench)
            cmd_scanbench(bench_sizes, bench_workers, bench_reps, bench_seed, bench_dir);
    } catch (const epismc::ConfigError& err) {
        std::cerr << "error: config: " << err.what() << '\n';
        return 2;
    } catch (const epismc::InfeasibleSpecError& err) {
        std::cerr << "error: infeasible: " << err.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& err) {
        std::cerr << "error: config: " << err.what() << '\n';
        return 2;
    } catch (const epismc::IoError& err) {
        std::cerr << "error: io: " << err.what() << '\n';
        return 3;
    } catch (const epismc::FilterDegeneracyError& err) {
        std::cerr << "error: numeric: " << err.what() << '\n';
        return 4;
    } catch (const std::exception& err) {
        std::cerr << "error: runtime: " << err.what() << '\n';
        return 4;
    }
    return 0;
}
