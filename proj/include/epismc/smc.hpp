#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "epismc/rng.hpp"

namespace epismc {

/// One sample of the augmented epidemic state: compartment proportions plus
/// the log rates. Proportions stay on the simplex (sum 1, nonnegative).
struct Particle {
    double s = 1.0;
    double i = 0.0;
    double r = 0.0;
    double log_beta = 0.0;
    double log_gamma = 0.0;
};

/// Ornstein-Uhlenbeck coefficients for d log beta and d log gamma:
/// d x = (a1 - a2 x) dt + a3 dB. Defaults are a pure random walk.
struct OuParams {
    double w1 = 0.0, w2 = 0.0, w3 = 0.05;
    double u1 = 0.0, u2 = 0.0, u3 = 0.05;
};

struct Observation {
    int day = 0;
    double infected_proportion = 0.0;
};

enum class ScanBackend { sequential, threaded };

struct FilterConfig {
    std::size_t n_particles = std::size_t{1} << 14;
    double obs_sd = 0.31622776601683794;  // sqrt(0.1)
    double latent_sd = 0.31622776601683794;
    int interp_steps = 1;  // interpolated sub-steps between observations
    double ess_threshold_fraction = 0.5;
    double prior_log_low = -20.0;
    double prior_log_high = 1.0;
    OuParams ou;
    std::uint64_t seed = 0;
    double initial_infected = 0.002;
    int threads = 1;
    ScanBackend scan_backend = ScanBackend::sequential;
    int scan_workers = 2;

    void validate() const;
};

struct Ensemble {
    std::vector<Particle> particles;
    std::vector<double> weights;
    std::vector<std::uint32_t> ancestors;
    std::int64_t step = 0;
};

struct FilterRow {
    std::int64_t step = 0;
    double day = 0.0;
    double mean_s = 0.0, mean_i = 0.0, mean_r = 0.0;
    double q05_i = 0.0, q95_i = 0.0;
    double mean_beta = 0.0, q05_beta = 0.0, q95_beta = 0.0;
    double mean_gamma = 0.0, q05_gamma = 0.0, q95_gamma = 0.0;
    double ess = 0.0;
    bool resampled = false;
};

/// Weighted infected-proportion sample captured at one sub-step, the raw
/// material for the posterior density ridgelines.
struct ParticleSnapshot {
    double day = 0.0;
    std::vector<double> infected;
    std::vector<double> weights;
};

struct FilterOutput {
    std::vector<FilterRow> rows;
    std::vector<ParticleSnapshot> snapshots;
    std::vector<double> final_log_beta;
    std::vector<double> final_log_gamma;
    std::vector<double> final_weights;
};

using ScanFn = std::function<std::vector<double>(std::span<const double>)>;

/// Equal-weight ensemble at day 0: every particle starts at (1-i0, i0, 0)
/// with log rates drawn independently from U(prior_log_low, prior_log_high).
Ensemble init_ensemble(const FilterConfig& cfg, double i0);

/// One Euler-Maruyama step of the stochastic SIR system with OU-driven log
/// rates; the compartments are clamped at zero and renormalized to sum 1.
Particle propagate(const Particle& p, double dt, const OuParams& ou, RngStream& rng);

/// Gaussian observation density N(y; p.i, obs_sd^2).
double weight_obs(const Particle& p, const Observation& y, double obs_sd);

/// Gaussian pseudo-observation density against the interpolated value.
double weight_latent(const Particle& p, double pseudo, double latent_sd);

/// Effective sample size 1 / sum w^2 of normalized weights.
double ess(std::span<const double> weights);

/// Systematic resampling: one uniform u ~ (0, 1/N], comb positions u + k/N,
/// ancestors from the supplied inclusive-scan cumulative weights. Returned
/// indices are nondecreasing; expected offspring of particle j is N w_j.
std::vector<std::uint32_t> resample_systematic(std::span<const double> weights,
                                               RngStream& rng, const ScanFn& scan);

/// Bootstrap-style filter over the augmented SIR state. Feed observation
/// batches as they arrive; filter state persists across calls, so a
/// streaming run and a one-shot run over the same records coincide.
class ParticleFilter {
public:
    explicit ParticleFilter(const FilterConfig& cfg);

    /// Capture particle snapshots for sub-steps with day in [lo, hi].
    void set_snapshot_window(double day_lo, double day_hi);

    void observe(std::span<const Observation> batch);

    const Ensemble& ensemble() const { return ens_; }
    int current_day() const { return anchor_day_; }
    const FilterOutput& output() const { return out_; }

    /// Finalizes parameter samples and hands the accumulated output over.
    FilterOutput take_output();

private:
    void advance_substep(double day, const Observation* obs, double pseudo);
    void record_row(double day, bool resampled);

    FilterConfig cfg_;
    double dt_;
    Ensemble ens_;
    FilterOutput out_;
    int anchor_day_ = 0;
    double anchor_value_ = 0.0;
    std::optional<std::pair<double, double>> snapshot_window_;
    ScanFn scan_;
};

/// Runs the filter over a full observation record.
FilterOutput smc_run(std::span<const Observation> observations,
                     const FilterConfig& cfg);

void write_filter_csv(const FilterOutput& out, const std::filesystem::path& path);
void write_params_ndjson(const FilterOutput& out, const std::filesystem::path& path);

}  // namespace epismc
