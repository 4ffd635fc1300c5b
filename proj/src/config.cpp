#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "epismc/coupling.hpp"
#include "epismc/errors.hpp"

namespace epismc {
namespace {

// Minimal TOML reader for the flat [section] key = value layout the run
// files use. Values are strings, booleans, integers or floats; no arrays,
// no nesting.
struct TomlValue {
    std::string raw;
    bool quoted = false;
    int line = 0;
};
using TomlTable = std::map<std::string, std::map<std::string, TomlValue>>;

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        if (line[k] == '"') in_string = !in_string;
        if (line[k] == '#' && !in_string) return line.substr(0, k);
    }
    return line;
}

TomlTable parse_toml(std::istream& in, const std::string& name) {
    TomlTable table;
    std::string section;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(strip_comment(line));
        if (text.empty()) continue;
        if (text.front() == '[') {
            if (text.back() != ']')
                throw ConfigError(name + ":" + std::to_string(line_no) +
                                  ": malformed section header");
            section = trim(text.substr(1, text.size() - 2));
            if (section.empty())
                throw ConfigError(name + ":" + std::to_string(line_no) +
                                  ": empty section name");
            table.try_emplace(section);
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError(name + ":" + std::to_string(line_no) +
                              ": expected key = value");
        const std::string key = trim(text.substr(0, eq));
        std::string value = trim(text.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError(name + ":" + std::to_string(line_no) +
                              ": expected key = value");
        TomlValue tv;
        tv.line = line_no;
        if (value.front() == '"') {
            if (value.size() < 2 || value.back() != '"')
                throw ConfigError(name + ":" + std::to_string(line_no) +
                                  ": unterminated string");
            tv.raw = value.substr(1, value.size() - 2);
            tv.quoted = true;
        } else {
            tv.raw = value;
        }
        if (!table[section].insert({key, tv}).second)
            throw ConfigError(name + ":" + std::to_string(line_no) +
                              ": duplicate key '" + key + "'");
    }
    return table;
}

class SectionReader {
public:
    SectionReader(const TomlTable& table, std::string section, std::string file)
        : section_(std::move(section)), file_(std::move(file)) {
        const auto it = table.find(section_);
        if (it != table.end()) entries_ = &it->second;
    }

    bool present() const { return entries_ != nullptr; }

    bool has(const std::string& key) const {
        return entries_ && entries_->count(key) > 0;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const TomlValue* v = find(key);
        return v ? v->raw : fallback;
    }

    double get_double(const std::string& key, double fallback) const {
        const TomlValue* v = find(key);
        if (!v) return fallback;
        try {
            std::size_t used = 0;
            const double parsed = std::stod(v->raw, &used);
            if (used != v->raw.size()) throw std::invalid_argument("");
            return parsed;
        } catch (const std::exception&) {
            throw ConfigError(where(key, *v) + ": expected a number, got '" + v->raw + "'");
        }
    }

    std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
        const TomlValue* v = find(key);
        if (!v) return fallback;
        try {
            std::size_t used = 0;
            const std::int64_t parsed = std::stoll(v->raw, &used);
            if (used != v->raw.size()) throw std::invalid_argument("");
            return parsed;
        } catch (const std::exception&) {
            throw ConfigError(where(key, *v) + ": expected an integer, got '" + v->raw + "'");
        }
    }

    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
        const std::int64_t v = get_int(key, static_cast<std::int64_t>(fallback));
        if (v < 0) throw ConfigError(section_ + "." + key + ": must be nonnegative");
        return static_cast<std::uint64_t>(v);
    }

    bool get_bool(const std::string& key, bool fallback) const {
        const TomlValue* v = find(key);
        if (!v) return fallback;
        if (v->raw == "true") return true;
        if (v->raw == "false") return false;
        throw ConfigError(where(key, *v) + ": expected true or false");
    }

    void check_known(const std::set<std::string>& known) const {
        if (!entries_) return;
        for (const auto& [key, value] : *entries_)
            if (!known.count(key))
                throw ConfigError(where(key, value) + ": unknown key '" + section_ +
                                  "." + key + "'");
    }

private:
    const TomlValue* find(const std::string& key) const {
        if (!entries_) return nullptr;
        const auto it = entries_->find(key);
        return it == entries_->end() ? nullptr : &it->second;
    }
    std::string where(const std::string&, const TomlValue& v) const {
        return file_ + ":" + std::to_string(v.line);
    }

    std::string section_;
    std::string file_;
    const std::map<std::string, TomlValue>* entries_ = nullptr;
};

}  // namespace

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    const TomlTable table = parse_toml(in, path.string());
    for (const auto& [section, _] : table)
        if (section != "network" && section != "abm" && section != "smc" &&
            section != "schedule" && section != "io")
            throw ConfigError(path.string() + ": unknown section [" + section + "]");

    RunConfig cfg;
    const std::string file = path.string();

    SectionReader network(table, "network", file);
    network.check_known({"kind", "nodes", "mean_degree", "exponent", "clustering",
                         "seed", "path"});
    if (network.present()) {
        const std::string kind = network.get_string("kind", "complete");
        if (kind == "bter") {
            cfg.network.kind = NetworkSource::Kind::bter;
            cfg.network.bter.node_count =
                static_cast<std::size_t>(network.get_int("nodes", 5000));
            cfg.network.bter.target_mean_degree = network.get_double("mean_degree", 16.52);
            cfg.network.bter.degree_exponent = network.get_double("exponent", 1.0);
            cfg.network.bter.target_clustering = network.get_double("clustering", 0.55);
            cfg.network.bter.seed = network.get_uint("seed", 0);
        } else if (kind == "complete") {
            cfg.network.kind = NetworkSource::Kind::complete;
            cfg.network.complete_nodes =
                static_cast<std::size_t>(network.get_int("nodes", 4000));
        } else if (kind == "file") {
            cfg.network.kind = NetworkSource::Kind::edge_file;
            cfg.network.path = network.get_string("path", "");
            if (cfg.network.path.empty())
                throw ConfigError(file + ": network.kind = \"file\" needs network.path");
        } else {
            throw ConfigError(file + ": network.kind must be bter, complete or file");
        }
    }

    SectionReader abm(table, "abm", file);
    abm.check_known({"beta", "gamma", "initial_infected_fraction", "seed", "workers"});
    cfg.abm.beta = abm.get_double("beta", cfg.abm.beta);
    cfg.abm.gamma = abm.get_double("gamma", cfg.abm.gamma);
    cfg.abm.initial_infected_fraction =
        abm.get_double("initial_infected_fraction", cfg.abm.initial_infected_fraction);
    cfg.abm.seed = abm.get_uint("seed", cfg.abm.seed);
    cfg.abm.workers = static_cast<int>(abm.get_int("workers", cfg.abm.workers));
    if (cfg.abm.workers < 1) throw ConfigError(file + ": abm.workers must be >= 1");

    SectionReader smc(table, "smc", file);
    smc.check_known({"n_particles", "obs_sd", "latent_sd", "interp_steps",
                     "ess_threshold_fraction", "prior_log_low", "prior_log_high",
                     "ou_w1", "ou_w2", "ou_w3", "ou_u1", "ou_u2", "ou_u3", "seed",
                     "initial_infected", "threads", "scan_backend", "scan_workers"});
    cfg.smc.n_particles = static_cast<std::size_t>(
        smc.get_int("n_particles", static_cast<std::int64_t>(cfg.smc.n_particles)));
    cfg.smc.obs_sd = smc.get_double("obs_sd", cfg.smc.obs_sd);
    cfg.smc.latent_sd = smc.get_double("latent_sd", cfg.smc.latent_sd);
    cfg.smc.interp_steps =
        static_cast<int>(smc.get_int("interp_steps", cfg.smc.interp_steps));
    cfg.smc.ess_threshold_fraction =
        smc.get_double("ess_threshold_fraction", cfg.smc.ess_threshold_fraction);
    cfg.smc.prior_log_low = smc.get_double("prior_log_low", cfg.smc.prior_log_low);
    cfg.smc.prior_log_high = smc.get_double("prior_log_high", cfg.smc.prior_log_high);
    cfg.smc.ou.w1 = smc.get_double("ou_w1", cfg.smc.ou.w1);
    cfg.smc.ou.w2 = smc.get_double("ou_w2", cfg.smc.ou.w2);
    cfg.smc.ou.w3 = smc.get_double("ou_w3", cfg.smc.ou.w3);
    cfg.smc.ou.u1 = smc.get_double("ou_u1", cfg.smc.ou.u1);
    cfg.smc.ou.u2 = smc.get_double("ou_u2", cfg.smc.ou.u2);
    cfg.smc.ou.u3 = smc.get_double("ou_u3", cfg.smc.ou.u3);
    cfg.smc.seed = smc.get_uint("seed", cfg.smc.seed);
    cfg.smc.initial_infected =
        smc.get_double("initial_infected", cfg.abm.initial_infected_fraction);
    cfg.smc.threads = static_cast<int>(smc.get_int("threads", cfg.smc.threads));
    const std::string backend = smc.get_string("scan_backend", "sequential");
    if (backend == "sequential")
        cfg.smc.scan_backend = ScanBackend::sequential;
    else if (backend == "threaded")
        cfg.smc.scan_backend = ScanBackend::threaded;
    else
        throw ConfigError(file + ": smc.scan_backend must be sequential or threaded");
    cfg.smc.scan_workers =
        static_cast<int>(smc.get_int("scan_workers", cfg.smc.scan_workers));

    SectionReader schedule(table, "schedule", file);
    schedule.check_known({"window_days", "total_days", "interp_steps"});
    cfg.schedule.window_days =
        static_cast<int>(schedule.get_int("window_days", cfg.schedule.window_days));
    cfg.schedule.total_days =
        static_cast<int>(schedule.get_int("total_days", cfg.schedule.total_days));
    if (schedule.has("interp_steps"))
        cfg.schedule.interp_steps =
            static_cast<int>(schedule.get_int("interp_steps", cfg.schedule.interp_steps));
    else
        cfg.schedule.interp_steps = cfg.smc.interp_steps;
    if (cfg.schedule.window_days < 1)
        throw ConfigError(file + ": schedule.window_days must be >= 1");
    if (cfg.schedule.total_days < 1)
        throw ConfigError(file + ": schedule.total_days must be >= 1");

    SectionReader io(table, "io", file);
    io.check_known({"output_dir", "mode", "observations", "kde_day_lo", "kde_day_hi",
                    "emit_timings"});
    cfg.io.output_dir = io.get_string("output_dir", cfg.io.output_dir.string());
    const std::string mode = io.get_string("mode", "static");
    if (mode == "static")
        cfg.io.mode = RunMode::static_assimilation;
    else if (mode == "streaming")
        cfg.io.mode = RunMode::streaming;
    else
        throw ConfigError(file + ": io.mode must be static or streaming");
    cfg.io.observations = io.get_string("observations", "");
    cfg.io.kde_day_lo = io.get_double("kde_day_lo", cfg.io.kde_day_lo);
    cfg.io.kde_day_hi = io.get_double("kde_day_hi", cfg.io.kde_day_hi);
    cfg.io.emit_timings = io.get_bool("emit_timings", cfg.io.emit_timings);

    try {
        cfg.smc.validate();
    } catch (const std::invalid_argument& err) {
        throw ConfigError(file + ": " + err.what());
    }
    return cfg;
}

}  // namespace epismc
