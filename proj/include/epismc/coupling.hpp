#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "epismc/abm.hpp"
#include "epismc/network.hpp"
#include "epismc/ode.hpp"
#include "epismc/smc.hpp"
#include "epismc/summary.hpp"

namespace epismc {

/// Cadence of the simulation/assimilation exchange.
struct ExchangeSchedule {
    int window_days = 7;
    int total_days = 50;
    int interp_steps = 1;  // authoritative for coupled runs
};

struct NetworkSource {
    enum class Kind { bter, complete, edge_file };
    Kind kind = Kind::complete;
    BterSpec bter;
    std::size_t complete_nodes = 4000;
    std::filesystem::path path;
};

struct AbmSettings {
    double beta = 0.5;
    double gamma = 0.1;
    double initial_infected_fraction = 0.002;
    std::uint64_t seed = 0;
    int workers = 1;
};

enum class RunMode { static_assimilation, streaming };

struct IoSettings {
    std::filesystem::path output_dir = ".";
    RunMode mode = RunMode::static_assimilation;
    std::filesystem::path observations;
    double kde_day_lo = 15.0;
    double kde_day_hi = 21.0;
    bool emit_timings = false;
};

struct RunConfig {
    NetworkSource network;
    AbmSettings abm;
    FilterConfig smc;
    ExchangeSchedule schedule;
    IoSettings io;
};

/// Parses the TOML run file ([network]/[abm]/[smc]/[schedule]/[io]).
RunConfig load_config(const std::filesystem::path& path);

/// Validated day-ordered observations from an NDJSON feed
/// ({"day":..., "infected_count":..., "population":...} or
///  {"day":..., "infected_proportion":...}) or a daily-counts CSV.
std::vector<Observation> ingest_observations(std::istream& in,
                                             std::string_view source_name);
std::vector<Observation> ingest_observations(const std::filesystem::path& path);

struct WindowSummary {
    int window = 0;
    int day_begin = 0;
    int day_end = 0;
    ParameterSummary params;
};

struct RunReport {
    std::string run_id;
    std::string mode;
    std::uint64_t abm_seed = 0;
    std::uint64_t smc_seed = 0;
    std::size_t network_nodes = 0;
    std::size_t network_edges = 0;
    std::optional<NetworkStats> network_stats;
    std::vector<WindowSummary> windows;
    std::vector<std::string> manifest;  // file names inside output_dir
    std::vector<std::pair<std::string, double>> timings_ms;
};

/// Offline assimilation: one filter pass over a recorded observation file,
/// with the ODE reference curve and posterior density grids emitted alongside.
RunReport run_static(const RunConfig& config);

/// Windowed loop: simulate a window, hand its daily infected proportions to
/// the persistent filter, summarize, and feed the posterior rates back into
/// the agent model for the next window.
RunReport run_streaming(const RunConfig& config);

void write_kde_csv(const DensityEstimate& estimate, const std::filesystem::path& path);
void write_ode_csv(const OdeCurve& curve, const std::filesystem::path& path);
void write_report(const RunReport& report, const std::filesystem::path& path,
                  bool emit_timings);

}  // namespace epismc
