#include "epismc/coupling.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "epismc/errors.hpp"
#include "epismc/ode.hpp"

namespace epismc {
namespace {

constexpr std::uint64_t kTagDriverPrior = 0x64727630ull;

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point begin) {
    return std::chrono::duration<double, std::milli>(Clock::now() - begin).count();
}

Observation parse_ndjson_record(const std::string& line, std::string_view source,
                                std::size_t line_no) {
    nlohmann::json record;
    try {
        record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& err) {
        throw IoError(std::string(source) + ":" + std::to_string(line_no) + ": " +
                      err.what());
    }
    if (!record.contains("day") || !record["day"].is_number_integer())
        throw IoError(std::string(source) + ":" + std::to_string(line_no) +
                      ": missing integer field 'day'");
    Observation obs;
    obs.day = record["day"].get<int>();
    if (record.contains("infected_proportion")) {
        obs.infected_proportion = record["infected_proportion"].get<double>();
    } else if (record.contains("infected_count") && record.contains("population")) {
        const double population = record["population"].get<double>();
        if (population <= 0.0)
            throw IoError(std::string(source) + ":" + std::to_string(line_no) +
                          ": population must be positive");
        obs.infected_proportion = record["infected_count"].get<double>() / population;
    } else {
        throw IoError(std::string(source) + ":" + std::to_string(line_no) +
                      ": need infected_proportion or infected_count + population");
    }
    return obs;
}

Observation parse_counts_row(const std::string& line, std::string_view source,
                             std::size_t line_no) {
    std::istringstream fields(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(fields, cell, ',')) {
        try {
            row.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw IoError(std::string(source) + ":" + std::to_string(line_no) +
                          ": malformed count '" + cell + "'");
        }
    }
    if (row.size() < 4)
        throw IoError(std::string(source) + ":" + std::to_string(line_no) +
                      ": expected day,s,i,r columns");
    const double population = row[1] + row[2] + row[3];
    if (population <= 0.0)
        throw IoError(std::string(source) + ":" + std::to_string(line_no) +
                      ": empty population");
    return Observation{static_cast<int>(row[0]), row[2] / population};
}

}  // namespace

std::vector<Observation> ingest_observations(std::istream& in,
                                             std::string_view source_name) {
    std::vector<Observation> observations;
    std::string line;
    std::size_t line_no = 0;
    bool csv_header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto begin = line.find_first_not_of(" \t\r");
        if (begin == std::string::npos) continue;
        const auto end = line.find_last_not_of(" \t\r");
        const std::string text = line.substr(begin, end - begin + 1);
        if (text.empty() || text[0] == '#') continue;
        if (text[0] == '{') {
            observations.push_back(parse_ndjson_record(text, source_name, line_no));
        } else if (!csv_header_seen && text.rfind("day,", 0) == 0) {
            csv_header_seen = true;
        } else {
            observations.push_back(parse_counts_row(text, source_name, line_no));
        }
    }
    if (observations.empty())
        throw IoError(std::string(source_name) + ": no observation records");
    for (std::size_t k = 0; k < observations.size(); ++k) {
        const auto& obs = observations[k];
        if (obs.infected_proportion < 0.0 || obs.infected_proportion > 1.0)
            throw IoError(std::string(source_name) + ": day " + std::to_string(obs.day) +
                          ": infected proportion outside [0, 1]");
        if (k > 0 && obs.day <= observations[k - 1].day)
            throw IoError(std::string(source_name) + ": day " + std::to_string(obs.day) +
                          " out of order (follows day " +
                          std::to_string(observations[k - 1].day) + ")");
    }
    return observations;
}

std::vector<Observation> ingest_observations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open observations " + path.string());
    return ingest_observations(in, path.string());
}

namespace {

std::string format_day_label(double day) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(1) << day;
    return out.str();
}

std::string make_run_id(const RunConfig& config, std::string_view mode) {
    std::uint64_t h = stream_id(0x72756e6964ull, config.abm.seed, config.smc.seed);
    h = stream_id(h, config.smc.n_particles,
                  static_cast<std::uint64_t>(config.schedule.total_days));
    h = stream_id(h, mode.size(), static_cast<std::uint64_t>(mode.front()));
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

ContactNetwork build_network(const NetworkSource& source, int workers) {
    ContactNetwork net;
    switch (source.kind) {
        case NetworkSource::Kind::bter:
            net = generate_bter(source.bter);
            break;
        case NetworkSource::Kind::complete:
            net = complete_graph(source.complete_nodes);
            break;
        case NetworkSource::Kind::edge_file:
            net = load_edge_list(source.path);
            break;
    }
    return partition(std::move(net), static_cast<std::size_t>(workers));
}

ParameterSummary summarize_ensemble(const Ensemble& ens) {
    const std::size_t n = ens.particles.size();
    std::vector<double> log_beta(n), log_gamma(n);
    for (std::size_t k = 0; k < n; ++k) {
        log_beta[k] = ens.particles[k].log_beta;
        log_gamma[k] = ens.particles[k].log_gamma;
    }
    return summarize(log_beta, log_gamma, ens.weights);
}

void emit_filter_artifacts(const FilterOutput& out, const RunConfig& config,
                           RunReport& report) {
    const auto dir = config.io.output_dir;
    write_filter_csv(out, dir / "curves.csv");
    report.manifest.push_back("curves.csv");
    write_params_ndjson(out, dir / "params.ndjson");
    report.manifest.push_back("params.ndjson");
    for (const auto& snap : out.snapshots) {
        const DensityEstimate density = kde(snap.infected, snap.weights);
        const std::string name = "kde_" + format_day_label(snap.day) + ".csv";
        write_kde_csv(density, dir / name);
        report.manifest.push_back(name);
    }
}

void emit_ode_baseline(const RunConfig& config, int total_days, RunReport& report) {
    const double i0 = config.abm.initial_infected_fraction;
    const OdeCurve curve = solve_sir(config.abm.beta, config.abm.gamma, 1.0 - i0, i0,
                                     0.0, static_cast<double>(total_days));
    write_ode_csv(curve, config.io.output_dir / "ode_baseline.csv");
    report.manifest.push_back("ode_baseline.csv");
}

}  // namespace

RunReport run_static(const RunConfig& config) {
    const auto t0 = Clock::now();
    RunReport report;
    report.mode = "static";
    report.run_id = make_run_id(config, report.mode);
    report.abm_seed = config.abm.seed;
    report.smc_seed = config.smc.seed;

    if (config.io.observations.empty())
        throw ConfigError("static mode needs io.observations");
    const std::vector<Observation> observations =
        ingest_observations(config.io.observations);

    std::filesystem::create_directories(config.io.output_dir);

    FilterConfig filter_cfg = config.smc;
    filter_cfg.interp_steps = config.schedule.interp_steps;
    ParticleFilter filter(filter_cfg);
    filter.set_snapshot_window(config.io.kde_day_lo, config.io.kde_day_hi);
    const auto t_filter = Clock::now();
    filter.observe(observations);
    report.timings_ms.emplace_back("filter", elapsed_ms(t_filter));

    WindowSummary whole;
    whole.window = 0;
    whole.day_begin = observations.front().day;
    whole.day_end = observations.back().day;
    whole.params = summarize_ensemble(filter.ensemble());
    report.windows.push_back(whole);

    const FilterOutput out = filter.take_output();
    emit_filter_artifacts(out, config, report);
    emit_ode_baseline(config, observations.back().day, report);

    report.timings_ms.emplace_back("total", elapsed_ms(t0));
    write_report(report, config.io.output_dir / "report.json", config.io.emit_timings);
    return report;
}

RunReport run_streaming(const RunConfig& config) {
    const auto t0 = Clock::now();
    RunReport report;
    report.mode = "streaming";
    report.run_id = make_run_id(config, report.mode);
    report.abm_seed = config.abm.seed;
    report.smc_seed = config.smc.seed;

    std::filesystem::create_directories(config.io.output_dir);

    const auto t_net = Clock::now();
    const ContactNetwork net = build_network(config.network, config.abm.workers);
    report.timings_ms.emplace_back("network", elapsed_ms(t_net));
    report.network_nodes = net.node_count();
    report.network_edges = net.edge_count();
    report.network_stats = net.realized_stats();

    const std::size_t n_infected = static_cast<std::size_t>(std::ceil(
        config.abm.initial_infected_fraction * static_cast<double>(net.node_count())));
    RngStream seed_rng(config.abm.seed, stream_id(kTagDriverPrior, 0));
    HealthLedger ledger =
        seed_infections(HealthLedger::all_susceptible(net.node_count()),
                        std::max<std::size_t>(n_infected, 1), seed_rng);

    FilterConfig filter_cfg = config.smc;
    filter_cfg.interp_steps = config.schedule.interp_steps;
    ParticleFilter filter(filter_cfg);
    filter.set_snapshot_window(config.io.kde_day_lo, config.io.kde_day_hi);

    std::vector<DailyCounts> all_counts;
    RateDistribution beta = RateDistribution::point(1.0);
    RateDistribution gamma = RateDistribution::point(1.0);
    int done = 0;
    int window_index = 0;
    while (done < config.schedule.total_days) {
        const int window_days =
            std::min(config.schedule.window_days, config.schedule.total_days - done);
        if (window_index == 0) {
            // First window runs on rates drawn once from the vague prior.
            RngStream prior_rng(config.abm.seed, stream_id(kTagDriverPrior, 1));
            beta = RateDistribution::point(std::exp(prior_rng.uniform(
                config.smc.prior_log_low, config.smc.prior_log_high)));
            gamma = RateDistribution::point(std::exp(prior_rng.uniform(
                config.smc.prior_log_low, config.smc.prior_log_high)));
        }

        auto [next_ledger, counts] =
            run_window(net, std::move(ledger), beta, gamma, window_days,
                       config.abm.seed, config.abm.workers);
        ledger = std::move(next_ledger);

        std::vector<Observation> batch;
        batch.reserve(counts.size());
        for (const auto& c : counts) {
            batch.push_back(Observation{
                c.day, static_cast<double>(c.i) / static_cast<double>(net.node_count())});
            all_counts.push_back(c);
        }
        filter.observe(batch);

        WindowSummary summary;
        summary.window = window_index;
        summary.day_begin = done + 1;
        summary.day_end = done + window_days;
        summary.params = summarize_ensemble(filter.ensemble());
        report.windows.push_back(summary);

        // Posterior rates drive the next window's agent simulation.
        beta = RateDistribution::lognormal(summary.params.beta_log_mean,
                                           summary.params.beta_log_sd);
        gamma = RateDistribution::lognormal(summary.params.gamma_log_mean,
                                            summary.params.gamma_log_sd);

        done += window_days;
        ++window_index;
    }

    write_daily_counts(all_counts, config.io.output_dir / "abm_daily.csv");
    report.manifest.push_back("abm_daily.csv");

    const FilterOutput out = filter.take_output();
    emit_filter_artifacts(out, config, report);
    emit_ode_baseline(config, config.schedule.total_days, report);

    report.timings_ms.emplace_back("total", elapsed_ms(t0));
    write_report(report, config.io.output_dir / "report.json", config.io.emit_timings);
    return report;
}

void write_kde_csv(const DensityEstimate& estimate, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << std::setprecision(17) << "grid,density\n";
    for (std::size_t k = 0; k < estimate.grid.size(); ++k)
        out << estimate.grid[k] << ',' << estimate.density[k] << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

void write_ode_csv(const OdeCurve& curve, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << std::setprecision(17) << "day,s,i,r\n";
    for (std::size_t k = 0; k < curve.size(); ++k)
        out << curve.times[k] << ',' << curve.s[k] << ',' << curve.i[k] << ','
            << curve.r[k] << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

void write_report(const RunReport& report, const std::filesystem::path& path,
                  bool emit_timings) {
    nlohmann::json doc;
    doc["run_id"] = report.run_id;
    doc["mode"] = report.mode;
    doc["seeds"] = {{"abm", report.abm_seed}, {"smc", report.smc_seed}};
    if (report.network_nodes > 0) {
        nlohmann::json net{{"nodes", report.network_nodes},
                           {"edges", report.network_edges}};
        if (report.network_stats) {
            net["mean_degree"] = report.network_stats->mean_degree;
            net["clustering"] = report.network_stats->clustering;
        }
        doc["network"] = net;
    }
    doc["windows"] = nlohmann::json::array();
    for (const auto& w : report.windows) {
        const auto& p = w.params;
        doc["windows"].push_back({{"window", w.window},
                                  {"day_begin", w.day_begin},
                                  {"day_end", w.day_end},
                                  {"beta_log_mean", p.beta_log_mean},
                                  {"beta_log_sd", p.beta_log_sd},
                                  {"gamma_log_mean", p.gamma_log_mean},
                                  {"gamma_log_sd", p.gamma_log_sd},
                                  {"beta_q05", p.beta_q05},
                                  {"beta_q50", p.beta_q50},
                                  {"beta_q95", p.beta_q95},
                                  {"gamma_q05", p.gamma_q05},
                                  {"gamma_q50", p.gamma_q50},
                                  {"gamma_q95", p.gamma_q95}});
    }
    doc["manifest"] = report.manifest;
    if (emit_timings) {
        nlohmann::json timings;
        for (const auto& [stage, ms] : report.timings_ms) timings[stage] = ms;
        doc["timings_ms"] = timings;
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace epismc
