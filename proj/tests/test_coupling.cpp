#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "epismc/abm.hpp"
#include "epismc/coupling.hpp"
#include "epismc/errors.hpp"

using epismc::ConfigError;
using epismc::ingest_observations;
using epismc::IoError;
using epismc::Observation;
using epismc::RunConfig;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "epismc_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::size_t line_count(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) ++n;
    return n;
}

}  // namespace

TEST_CASE("ndjson ingestion normalizes counts by population") {
    std::istringstream in(
        "{\"day\": 3, \"infected_count\": 10, \"population\": 5000}\n"
        "{\"day\": 4, \"infected_proportion\": 0.25}\n");
    const auto obs = ingest_observations(in, "test");
    REQUIRE(obs.size() == 2);
    CHECK(obs[0].day == 3);
    CHECK(obs[0].infected_proportion == doctest::Approx(0.002).epsilon(1e-15));
    CHECK(obs[1].infected_proportion == 0.25);
}

TEST_CASE("ingestion rejects disorder, bad ranges and malformed lines") {
    std::istringstream disorder(
        "{\"day\": 3, \"infected_proportion\": 0.1}\n"
        "{\"day\": 2, \"infected_proportion\": 0.2}\n");
    CHECK_THROWS_WITH_AS(ingest_observations(disorder, "feed"),
                         doctest::Contains("day 2"), IoError);

    std::istringstream range("{\"day\": 1, \"infected_proportion\": 1.5}\n");
    CHECK_THROWS_AS(ingest_observations(range, "feed"), IoError);

    std::istringstream malformed("{\"day\": 1, \"infected\n");
    CHECK_THROWS_WITH_AS(ingest_observations(malformed, "feed"),
                         doctest::Contains("feed:1"), IoError);

    std::istringstream empty("\n\n");
    CHECK_THROWS_AS(ingest_observations(empty, "feed"), IoError);
}

TEST_CASE("daily-counts csv round trip") {
    const auto dir = fresh_dir("roundtrip");
    std::vector<epismc::DailyCounts> counts;
    for (int day = 1; day <= 50; ++day) {
        epismc::DailyCounts c;
        c.day = day;
        c.s = 5000 - 2 * static_cast<std::size_t>(day);
        c.i = static_cast<std::size_t>(day);
        c.r = static_cast<std::size_t>(day);
        counts.push_back(c);
    }
    epismc::write_daily_counts(counts, dir / "counts.csv");
    const auto obs = ingest_observations(dir / "counts.csv");
    REQUIRE(obs.size() == 50);
    for (std::size_t k = 0; k < 50; ++k) {
        CHECK(obs[k].day == static_cast<int>(k + 1));
        CHECK(obs[k].infected_proportion ==
              doctest::Approx(static_cast<double>(k + 1) / 5000.0).epsilon(1e-12));
    }
}

TEST_CASE("stream and file ingestion agree") {
    const auto dir = fresh_dir("transport");
    const std::string payload =
        "{\"day\": 1, \"infected_count\": 4, \"population\": 100}\n"
        "{\"day\": 2, \"infected_count\": 9, \"population\": 100}\n";
    write_file(dir / "feed.ndjson", payload);
    std::istringstream stream(payload);
    const auto from_stream = ingest_observations(stream, "feed.ndjson");
    const auto from_file = ingest_observations(dir / "feed.ndjson");
    REQUIRE(from_stream.size() == from_file.size());
    for (std::size_t k = 0; k < from_stream.size(); ++k) {
        CHECK(from_stream[k].day == from_file[k].day);
        CHECK(from_stream[k].infected_proportion == from_file[k].infected_proportion);
    }
}

TEST_CASE("config parsing and validation") {
    const auto dir = fresh_dir("config");
    write_file(dir / "run.toml",
               "[network]\n"
               "kind = \"bter\"\n"
               "nodes = 2000\n"
               "mean_degree = 16.52  # paper-scale target\n"
               "clustering = 0.55\n"
               "seed = 7\n"
               "[abm]\n"
               "beta = 0.5\n"
               "gamma = 0.1\n"
               "initial_infected_fraction = 0.002\n"
               "workers = 4\n"
               "[smc]\n"
               "n_particles = 4096\n"
               "seed = 11\n"
               "[schedule]\n"
               "window_days = 7\n"
               "total_days = 50\n"
               "interp_steps = 1\n"
               "[io]\n"
               "mode = \"streaming\"\n"
               "output_dir = \"out\"\n");
    const RunConfig cfg = epismc::load_config(dir / "run.toml");
    CHECK(cfg.network.kind == epismc::NetworkSource::Kind::bter);
    CHECK(cfg.network.bter.node_count == 2000);
    CHECK(cfg.network.bter.target_mean_degree == 16.52);
    CHECK(cfg.abm.workers == 4);
    CHECK(cfg.smc.n_particles == 4096);
    CHECK(cfg.smc.initial_infected == 0.002);  // inherited from the abm section
    CHECK(cfg.schedule.total_days == 50);
    CHECK(cfg.io.mode == epismc::RunMode::streaming);

    write_file(dir / "bad_key.toml", "[abm]\nbeta = 0.5\nbanana = 1\n");
    CHECK_THROWS_AS(epismc::load_config(dir / "bad_key.toml"), ConfigError);
    write_file(dir / "bad_value.toml", "[abm]\nbeta = \"high\"\n");
    CHECK_THROWS_AS(epismc::load_config(dir / "bad_value.toml"), ConfigError);
    write_file(dir / "bad_mode.toml", "[io]\nmode = \"sideways\"\n");
    CHECK_THROWS_AS(epismc::load_config(dir / "bad_mode.toml"), ConfigError);
    CHECK_THROWS_AS(epismc::load_config(dir / "missing.toml"), IoError);
}

TEST_CASE("static run emits the full artifact set") {
    const auto dir = fresh_dir("static_run");

    // build a small synthetic observation record
    std::ostringstream obs;
    double level = 0.002;
    for (int day = 1; day <= 12; ++day) {
        level = std::min(0.5, level * 1.4);
        obs << "{\"day\": " << day << ", \"infected_proportion\": " << level << "}\n";
    }
    write_file(dir / "obs.ndjson", obs.str());

    RunConfig cfg;
    cfg.smc.n_particles = 512;
    cfg.smc.seed = 21;
    cfg.schedule.interp_steps = 1;
    cfg.schedule.total_days = 12;
    cfg.io.observations = dir / "obs.ndjson";
    cfg.io.output_dir = dir / "out";
    cfg.io.kde_day_lo = 5.0;
    cfg.io.kde_day_hi = 6.0;

    const auto report = epismc::run_static(cfg);
    CHECK(report.mode == "static");
    REQUIRE(report.windows.size() == 1);
    const auto& p = report.windows[0].params;
    CHECK(p.beta_q05 <= p.beta_q50);
    CHECK(p.beta_q50 <= p.beta_q95);

    for (const auto& name : report.manifest)
        CHECK(std::filesystem::exists(cfg.io.output_dir / name));
    CHECK(std::filesystem::exists(cfg.io.output_dir / "report.json"));

    // curves.csv: total_days * (interp_steps + 1) + 1 rows plus the header
    CHECK(line_count(cfg.io.output_dir / "curves.csv") == 12u * 2u + 1u + 1u);
    // kde files cover days 5, 5.5 and 6
    CHECK(std::filesystem::exists(cfg.io.output_dir / "kde_5.0.csv"));
    CHECK(std::filesystem::exists(cfg.io.output_dir / "kde_5.5.csv"));
    CHECK(std::filesystem::exists(cfg.io.output_dir / "kde_6.0.csv"));

    // deterministic rerun: byte-identical artifacts
    RunConfig again = cfg;
    again.io.output_dir = dir / "out2";
    epismc::run_static(again);
    CHECK(slurp(cfg.io.output_dir / "curves.csv") ==
          slurp(again.io.output_dir / "curves.csv"));
    CHECK(slurp(cfg.io.output_dir / "report.json") ==
          slurp(again.io.output_dir / "report.json"));

    RunConfig missing = cfg;
    missing.io.observations = dir / "nope.ndjson";
    CHECK_THROWS_AS(epismc::run_static(missing), IoError);
    RunConfig unset = cfg;
    unset.io.observations.clear();
    CHECK_THROWS_AS(epismc::run_static(unset), ConfigError);
}

TEST_CASE("filter state persists across batches exactly") {
    epismc::FilterConfig cfg;
    cfg.n_particles = 512;
    cfg.seed = 33;
    std::vector<Observation> all;
    double level = 0.002;
    for (int day = 1; day <= 14; ++day) {
        level = std::min(0.6, level * 1.45);
        all.push_back({day, level});
    }
    const std::vector<Observation> first(all.begin(), all.begin() + 7);
    const std::vector<Observation> second(all.begin() + 7, all.end());

    epismc::ParticleFilter split(cfg);
    split.observe(first);
    split.observe(second);
    const auto one_shot = epismc::smc_run(all, cfg);
    const auto split_out = split.take_output();

    REQUIRE(one_shot.rows.size() == split_out.rows.size());
    for (std::size_t k = 0; k < one_shot.rows.size(); ++k) {
        CHECK(one_shot.rows[k].mean_i == split_out.rows[k].mean_i);
        CHECK(one_shot.rows[k].mean_beta == split_out.rows[k].mean_beta);
        CHECK(one_shot.rows[k].ess == split_out.rows[k].ess);
    }
    CHECK(one_shot.final_weights == split_out.final_weights);
}

TEST_CASE("streaming run completes with positive feedback rates") {
    const auto dir = fresh_dir("streaming_run");
    RunConfig cfg;
    cfg.network.kind = epismc::NetworkSource::Kind::complete;
    cfg.network.complete_nodes = 300;
    cfg.abm.beta = 0.5;
    cfg.abm.gamma = 0.1;
    cfg.abm.initial_infected_fraction = 0.01;
    cfg.abm.seed = 2;
    cfg.abm.workers = 2;
    cfg.smc.n_particles = 256;
    cfg.smc.seed = 3;
    cfg.schedule.window_days = 7;
    cfg.schedule.total_days = 16;  // deliberately not a multiple of the window
    cfg.schedule.interp_steps = 1;
    cfg.io.output_dir = dir / "out";
    cfg.io.mode = epismc::RunMode::streaming;

    const auto report = epismc::run_streaming(cfg);
    CHECK(report.windows.size() == 3);  // 7 + 7 + 2 days
    CHECK(report.windows.back().day_end == 16);
    for (const auto& w : report.windows) {
        CHECK(w.params.beta_q05 <= w.params.beta_q50);
        CHECK(w.params.beta_q50 <= w.params.beta_q95);
        CHECK(w.params.gamma_q05 <= w.params.gamma_q50);
        CHECK(w.params.gamma_q50 <= w.params.gamma_q95);
        CHECK(w.params.beta_q05 > 0.0);
        CHECK(w.params.gamma_q05 > 0.0);
        // lognormal feedback draws are strictly positive
        epismc::RngStream rng(7, 7);
        const auto fed = epismc::RateDistribution::lognormal(w.params.beta_log_mean,
                                                             w.params.beta_log_sd);
        for (int k = 0; k < 100; ++k) CHECK(fed.draw(rng) > 0.0);
    }
    CHECK(line_count(cfg.io.output_dir / "curves.csv") == 16u * 2u + 1u + 1u);
    CHECK(std::filesystem::exists(cfg.io.output_dir / "abm_daily.csv"));
    CHECK(line_count(cfg.io.output_dir / "abm_daily.csv") == 16u + 1u);

    // single-window degenerate schedule
    RunConfig single = cfg;
    single.schedule.window_days = 16;
    single.io.output_dir = dir / "single";
    const auto single_report = epismc::run_streaming(single);
    CHECK(single_report.windows.size() == 1);
}

TEST_CASE("report json is deterministic and complete") {
    const auto dir = fresh_dir("report");
    epismc::RunReport report;
    report.run_id = "cafe";
    report.mode = "static";
    report.manifest = {"curves.csv"};
    report.timings_ms = {{"total", 12.5}};
    epismc::WindowSummary w;
    w.window = 0;
    report.windows.push_back(w);
    epismc::write_report(report, dir / "with.json", true);
    epismc::write_report(report, dir / "without.json", false);
    CHECK(slurp(dir / "with.json").find("timings_ms") != std::string::npos);
    CHECK(slurp(dir / "without.json").find("timings_ms") == std::string::npos);
}

TEST_CASE("paper-scale offline calibration emits all artifacts") {
    const auto dir = fresh_dir("paper_static");

    // fully connected 4000-node simulation provides the observation record
    const auto net = epismc::complete_graph(4000);
    epismc::RngStream rng(7, epismc::stream_id(0x706170ull));
    auto ledger = epismc::seed_infections(
        epismc::HealthLedger::all_susceptible(4000), 8, rng);
    auto [final_ledger, counts] = epismc::run_window(
        net, std::move(ledger), epismc::RateDistribution::point(0.5),
        epismc::RateDistribution::point(0.1), 50, 7);
    epismc::write_daily_counts(counts, dir / "abm_daily.csv");

    RunConfig cfg;
    cfg.abm.beta = 0.5;
    cfg.abm.gamma = 0.1;
    cfg.abm.initial_infected_fraction = 0.002;
    cfg.smc.n_particles = std::size_t{1} << 14;
    cfg.smc.seed = 7;
    cfg.schedule.total_days = 50;
    cfg.schedule.interp_steps = 1;
    cfg.io.observations = dir / "abm_daily.csv";
    cfg.io.output_dir = dir / "out";

    const auto report = epismc::run_static(cfg);
    for (const auto& name : report.manifest)
        CHECK(std::filesystem::exists(cfg.io.output_dir / name));
    CHECK(line_count(cfg.io.output_dir / "curves.csv") == 50u * 2u + 1u + 1u);
    CHECK(line_count(cfg.io.output_dir / "params.ndjson") == (1u << 14));
    CHECK(std::filesystem::exists(cfg.io.output_dir / "ode_baseline.csv"));
    CHECK(std::filesystem::exists(cfg.io.output_dir / "report.json"));
}
