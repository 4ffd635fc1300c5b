#include "epismc/abm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "epismc/errors.hpp"
#include "epismc/parallel.hpp"

namespace epismc {
namespace {

constexpr std::uint64_t kTagAbmStep = 0x61626d31ull;

using node_t = ContactNetwork::node_t;

std::vector<node_t> sorted_union(const std::vector<node_t>& a,
                                 std::vector<node_t> b) {
    std::sort(b.begin(), b.end());
    std::vector<node_t> out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

std::vector<node_t> sorted_difference(const std::vector<node_t>& a,
                                      std::vector<node_t> b) {
    std::sort(b.begin(), b.end());
    std::vector<node_t> out;
    out.reserve(a.size());
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out));
    return out;
}

}  // namespace

RateDistribution RateDistribution::point(double value) {
    if (value < 0.0 || !std::isfinite(value))
        throw std::invalid_argument("rate point value must be finite and >= 0");
    RateDistribution d;
    d.kind_ = Kind::point;
    d.a_ = value;
    return d;
}

RateDistribution RateDistribution::lognormal(double log_mean, double log_sd) {
    if (log_sd < 0.0 || !std::isfinite(log_mean) || !std::isfinite(log_sd))
        throw std::invalid_argument("lognormal rate needs finite log-mean and log-sd >= 0");
    RateDistribution d;
    d.kind_ = Kind::lognormal;
    d.a_ = log_mean;
    d.b_ = log_sd;
    return d;
}

RateDistribution RateDistribution::empirical(std::vector<double> samples) {
    if (samples.empty())
        throw std::invalid_argument("empirical rate sample set must be nonempty");
    for (double s : samples)
        if (s <= 0.0 || !std::isfinite(s))
            throw std::invalid_argument("empirical rate samples must be positive");
    RateDistribution d;
    d.kind_ = Kind::empirical;
    d.samples_ = std::move(samples);
    return d;
}

double RateDistribution::draw(RngStream& rng) const {
    switch (kind_) {
        case Kind::point:
            return a_;
        case Kind::lognormal:
            return std::exp(a_ + b_ * rng.normal());
        case Kind::empirical: {
            const auto idx = static_cast<std::size_t>(rng.u01() *
                                                      static_cast<double>(samples_.size()));
            return samples_[std::min(idx, samples_.size() - 1)];
        }
    }
    return a_;
}

std::string RateDistribution::describe() const {
    std::ostringstream out;
    switch (kind_) {
        case Kind::point:
            out << "point(" << a_ << ")";
            break;
        case Kind::lognormal:
            out << "lognormal(log_mean=" << a_ << ", log_sd=" << b_ << ")";
            break;
        case Kind::empirical:
            out << "empirical(n=" << samples_.size() << ")";
            break;
    }
    return out.str();
}

HealthLedger HealthLedger::all_susceptible(std::size_t node_count) {
    HealthLedger ledger;
    ledger.states.assign(node_count, HealthState::susceptible);
    ledger.susceptible_set.resize(node_count);
    std::iota(ledger.susceptible_set.begin(), ledger.susceptible_set.end(), node_t{0});
    return ledger;
}

bool HealthLedger::consistent() const {
    if (susceptible_set.size() + infected_set.size() + recovered_set.size() !=
        states.size())
        return false;
    auto agrees = [&](const std::vector<node_t>& set, HealthState expect) {
        if (!std::is_sorted(set.begin(), set.end())) return false;
        if (std::adjacent_find(set.begin(), set.end()) != set.end()) return false;
        for (node_t v : set)
            if (v >= states.size() || states[v] != expect) return false;
        return true;
    };
    return agrees(susceptible_set, HealthState::susceptible) &&
           agrees(infected_set, HealthState::infected) &&
           agrees(recovered_set, HealthState::recovered);
}

HealthLedger seed_infections(const HealthLedger& ledger, std::size_t n_i,
                             RngStream& rng) {
    const std::size_t n = ledger.node_count();
    if (n_i == 0 || n_i > n)
        throw std::invalid_argument("seed_infections: n_i must lie in [1, node_count]");
    if (ledger.i_count() != 0 || ledger.r_count() != 0)
        throw std::invalid_argument("seed_infections: ledger must be all-susceptible");

    // Partial Fisher-Yates over the node ids.
    std::vector<node_t> pool(n);
    std::iota(pool.begin(), pool.end(), node_t{0});
    for (std::size_t k = 0; k < n_i; ++k) {
        const auto j = k + static_cast<std::size_t>(rng.u01() *
                                                    static_cast<double>(n - k));
        std::swap(pool[k], pool[std::min(j, n - 1)]);
    }
    std::vector<node_t> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_i));
    std::sort(chosen.begin(), chosen.end());

    HealthLedger out = ledger;
    for (node_t v : chosen) out.states[v] = HealthState::infected;
    out.infected_set = chosen;
    out.susceptible_set = sorted_difference(ledger.susceptible_set, std::move(chosen));
    return out;
}

std::pair<HealthLedger, DailyCounts> abm_step(const ContactNetwork& net,
                                              const HealthLedger& ledger,
                                              const RateDistribution& beta,
                                              const RateDistribution& gamma,
                                              std::uint64_t seed, int threads,
                                              EventLog* events) {
    if (ledger.node_count() != net.node_count())
        throw std::invalid_argument("abm_step: ledger and network sizes differ");

    const double average_degree = avg_degree(net);
    const int day = ledger.day;
    const std::size_t n_partitions = net.partition_count();

    // Group this day's infected nodes by partition; each partition is owned
    // by exactly one worker between barriers.
    std::vector<std::vector<node_t>> infected_by_partition(n_partitions);
    for (node_t v : ledger.infected_set)
        infected_by_partition[net.partition_of(v)].push_back(v);

    std::vector<HealthState> next_states = ledger.states;
    std::vector<std::vector<node_t>> new_infections(n_partitions);
    std::vector<std::vector<node_t>> new_recoveries(n_partitions);
    std::vector<EventLog> local_events(events ? n_partitions : 0);

    parallel_for_chunks(n_partitions, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            RngStream rng(seed, stream_id(kTagAbmStep, static_cast<std::uint64_t>(day), p));
            for (node_t v : infected_by_partition[p]) {
                for (node_t nbr : net.neighbors(v)) {
                    // Partition check first: states of foreign partitions may be
                    // mid-update by their owning worker.
                    if (net.partition_of(nbr) != p) continue;
                    if (next_states[nbr] != HealthState::susceptible) continue;
                    const double u1 = rng.u01();
                    const double r_beta = beta.draw(rng);
                    const double p_infect =
                        std::clamp(r_beta / average_degree, 0.0, 1.0);
                    if (u1 <= p_infect) {
                        next_states[nbr] = HealthState::infected;
                        new_infections[p].push_back(nbr);
                        if (events) local_events[p].push_back({day, v, nbr, true});
                    }
                }
                const double u2 = rng.u01();
                const double r_gamma = gamma.draw(rng);
                if (u2 <= std::clamp(r_gamma, 0.0, 1.0)) {
                    next_states[v] = HealthState::recovered;
                    new_recoveries[p].push_back(v);
                    if (events) local_events[p].push_back({day, v, v, false});
                }
            }
        }
    });

    // Barrier passed: merge per-partition buffers in partition order.
    std::vector<node_t> infected_now;
    std::vector<node_t> recovered_now;
    for (std::size_t p = 0; p < n_partitions; ++p) {
        infected_now.insert(infected_now.end(), new_infections[p].begin(),
                            new_infections[p].end());
        recovered_now.insert(recovered_now.end(), new_recoveries[p].begin(),
                             new_recoveries[p].end());
        if (events)
            events->insert(events->end(), local_events[p].begin(), local_events[p].end());
    }

    const std::size_t n_new_infections = infected_now.size();
    const std::size_t n_new_recoveries = recovered_now.size();

    HealthLedger next;
    next.states = std::move(next_states);
    next.day = day + 1;
    next.susceptible_set = sorted_difference(ledger.susceptible_set, infected_now);
    next.infected_set =
        sorted_union(sorted_difference(ledger.infected_set, recovered_now),
                     std::move(infected_now));
    next.recovered_set = sorted_union(ledger.recovered_set, std::move(recovered_now));

    DailyCounts counts;
    counts.day = next.day;
    counts.s = next.s_count();
    counts.i = next.i_count();
    counts.r = next.r_count();
    counts.new_infections = n_new_infections;
    counts.new_recoveries = n_new_recoveries;
    return {std::move(next), counts};
}

std::pair<HealthLedger, std::vector<DailyCounts>> run_window(
    const ContactNetwork& net, HealthLedger ledger, const RateDistribution& beta,
    const RateDistribution& gamma, int days, std::uint64_t seed, int threads) {
    if (days < 1) throw std::invalid_argument("run_window: days must be >= 1");
    std::vector<DailyCounts> counts;
    counts.reserve(static_cast<std::size_t>(days));
    for (int d = 0; d < days; ++d) {
        auto [next, daily] = abm_step(net, ledger, beta, gamma, seed, threads);
        ledger = std::move(next);
        counts.push_back(daily);
    }
    return {std::move(ledger), std::move(counts)};
}

void write_daily_counts(const std::vector<DailyCounts>& counts,
                        const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "day,s,i,r,new_i,new_r\n";
    for (const auto& c : counts)
        out << c.day << ',' << c.s << ',' << c.i << ',' << c.r << ','
            << c.new_infections << ',' << c.new_recoveries << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace epismc
