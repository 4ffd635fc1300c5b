#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "epismc/network.hpp"
#include "epismc/rng.hpp"

namespace epismc {

enum class HealthState : std::uint8_t { susceptible, infected, recovered };

/// Disease-rate draw source handed to the agent simulation. Point values may
/// be zero (a zero-rate day is a fixpoint); stochastic kinds draw strictly
/// positive rates.
class RateDistribution {
public:
    static RateDistribution point(double value);
    static RateDistribution lognormal(double log_mean, double log_sd);
    static RateDistribution empirical(std::vector<double> samples);

    double draw(RngStream& rng) const;
    std::string describe() const;

private:
    enum class Kind { point, lognormal, empirical };
    Kind kind_ = Kind::point;
    double a_ = 0.0;  // value, or log-mean
    double b_ = 0.0;  // log-sd
    std::vector<double> samples_;
};

/// Per-agent health state plus the three compartment index sets (sorted,
/// disjoint, covering every node) at one simulated day.
struct HealthLedger {
    std::vector<HealthState> states;
    std::vector<ContactNetwork::node_t> susceptible_set;
    std::vector<ContactNetwork::node_t> infected_set;
    std::vector<ContactNetwork::node_t> recovered_set;
    int day = 0;

    static HealthLedger all_susceptible(std::size_t node_count);

    std::size_t node_count() const { return states.size(); }
    std::size_t s_count() const { return susceptible_set.size(); }
    std::size_t i_count() const { return infected_set.size(); }
    std::size_t r_count() const { return recovered_set.size(); }

    /// Verifies the partition/agreement/conservation invariants.
    bool consistent() const;
};

struct DailyCounts {
    int day = 0;
    std::size_t s = 0, i = 0, r = 0;
    std::size_t new_infections = 0, new_recoveries = 0;
};

/// Transmission/recovery event record for instrumented runs.
struct StepEvent {
    int day;
    ContactNetwork::node_t source;
    ContactNetwork::node_t target;
    bool infection;  // false: recovery of source
};
using EventLog = std::vector<StepEvent>;

/// Infects exactly n_i distinct nodes uniformly at random in an
/// all-susceptible ledger.
HealthLedger seed_infections(const HealthLedger& ledger, std::size_t n_i,
                             RngStream& rng);

/// One simulated day. Every infected node exposes each susceptible
/// same-partition neighbour independently with probability
/// min(1, r_beta / avgD), drawing a fresh rate per contact, then recovers
/// with probability min(1, r_gamma). Nodes infected within the step neither
/// transmit nor recover until the next day. Draws come from per-partition
/// streams keyed by (seed, day, partition), so trajectories depend on the
/// partition layout but not on the executing thread count.
std::pair<HealthLedger, DailyCounts> abm_step(const ContactNetwork& net,
                                              const HealthLedger& ledger,
                                              const RateDistribution& beta,
                                              const RateDistribution& gamma,
                                              std::uint64_t seed, int threads = 1,
                                              EventLog* events = nullptr);

/// Applies abm_step `days` times with a full ledger merge between steps.
std::pair<HealthLedger, std::vector<DailyCounts>> run_window(
    const ContactNetwork& net, HealthLedger ledger, const RateDistribution& beta,
    const RateDistribution& gamma, int days, std::uint64_t seed, int threads = 1);

/// day,s,i,r,new_i,new_r rows.
void write_daily_counts(const std::vector<DailyCounts>& counts,
                        const std::filesystem::path& path);

}  // namespace epismc
