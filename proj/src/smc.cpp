#include "epismc/smc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "epismc/errors.hpp"
#include "epismc/parallel.hpp"
#include "epismc/scan.hpp"
#include "epismc/summary.hpp"

namespace epismc {
namespace {

constexpr std::uint64_t kTagSmcInit = 0x736d6330ull;
constexpr std::uint64_t kTagSmcPropagate = 0x736d6331ull;
constexpr std::uint64_t kTagSmcResample = 0x736d6332ull;

double gaussian_density(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

void FilterConfig::validate() const {
    if (n_particles < 2)
        throw std::invalid_argument("filter: n_particles must be >= 2");
    if (obs_sd <= 0.0) throw std::invalid_argument("filter: obs_sd must be positive");
    if (latent_sd <= 0.0)
        throw std::invalid_argument("filter: latent_sd must be positive");
    if (interp_steps < 0)
        throw std::invalid_argument("filter: interp_steps must be >= 0");
    if (ess_threshold_fraction <= 0.0 || ess_threshold_fraction > 1.0)
        throw std::invalid_argument("filter: ess_threshold_fraction must lie in (0, 1]");
    if (prior_log_low > prior_log_high)
        throw std::invalid_argument("filter: prior_log_low must not exceed prior_log_high");
    if (ou.w2 < 0.0 || ou.u2 < 0.0 || ou.w3 < 0.0 || ou.u3 < 0.0)
        throw std::invalid_argument("filter: OU reversion and diffusion must be >= 0");
    if (initial_infected < 0.0 || initial_infected > 1.0)
        throw std::invalid_argument("filter: initial_infected must lie in [0, 1]");
}

Ensemble init_ensemble(const FilterConfig& cfg, double i0) {
    cfg.validate();
    if (i0 < 0.0 || i0 > 1.0)
        throw std::invalid_argument("init_ensemble: i0 must lie in [0, 1]");
    const std::size_t n = cfg.n_particles;
    Ensemble ens;
    ens.particles.resize(n);
    ens.weights.assign(n, 1.0 / static_cast<double>(n));
    ens.ancestors.resize(n);
    std::iota(ens.ancestors.begin(), ens.ancestors.end(), std::uint32_t{0});
    for (std::size_t k = 0; k < n; ++k) {
        RngStream rng(cfg.seed, stream_id(kTagSmcInit, k));
        Particle& p = ens.particles[k];
        p.s = 1.0 - i0;
        p.i = i0;
        p.r = 0.0;
        p.log_beta = rng.uniform(cfg.prior_log_low, cfg.prior_log_high);
        p.log_gamma = rng.uniform(cfg.prior_log_low, cfg.prior_log_high);
    }
    return ens;
}

Particle propagate(const Particle& p, double dt, const OuParams& ou, RngStream& rng) {
    if (dt <= 0.0) throw std::invalid_argument("propagate: dt must be positive");
    const double beta = std::exp(p.log_beta);
    const double gamma = std::exp(p.log_gamma);

    Particle next;
    next.s = p.s - beta * p.s * p.i * dt;
    next.i = p.i + (beta * p.s * p.i - gamma * p.i) * dt;
    next.r = p.r + gamma * p.i * dt;

    const double sqrt_dt = std::sqrt(dt);
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    next.log_beta = p.log_beta + (ou.w1 - ou.w2 * p.log_beta) * dt + ou.w3 * sqrt_dt * z1;
    next.log_gamma = p.log_gamma + (ou.u1 - ou.u2 * p.log_gamma) * dt + ou.u3 * sqrt_dt * z2;

    // Euler overshoot repair: clamp at zero, renormalize onto the simplex.
    next.s = std::max(next.s, 0.0);
    next.i = std::max(next.i, 0.0);
    next.r = std::max(next.r, 0.0);
    const double total = next.s + next.i + next.r;
    next.s /= total;
    next.i /= total;
    next.r /= total;
    return next;
}

double weight_obs(const Particle& p, const Observation& y, double obs_sd) {
    if (obs_sd <= 0.0) throw std::invalid_argument("weight_obs: obs_sd must be positive");
    return gaussian_density(y.infected_proportion, p.i, obs_sd);
}

double weight_latent(const Particle& p, double pseudo, double latent_sd) {
    if (latent_sd <= 0.0)
        throw std::invalid_argument("weight_latent: latent_sd must be positive");
    return gaussian_density(pseudo, p.i, latent_sd);
}

double ess(std::span<const double> weights) {
    if (weights.empty()) throw std::invalid_argument("ess: empty weight vector");
    double total = 0.0;
    double sq = 0.0;
    for (double w : weights) {
        total += w;
        sq += w * w;
    }
    if (std::abs(total - 1.0) > 1e-6)
        throw std::invalid_argument("ess: weights must be normalized");
    return 1.0 / sq;
}

std::vector<std::uint32_t> resample_systematic(std::span<const double> weights,
                                               RngStream& rng, const ScanFn& scan) {
    const std::size_t n = weights.size();
    if (n == 0) throw std::invalid_argument("resample: empty weight vector");
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0) || !std::isfinite(total))
        throw FilterDegeneracyError(-1, "resample: weights sum to zero");
    if (std::abs(total - 1.0) > 1e-6)
        throw std::invalid_argument("resample: weights must be normalized");

    const std::vector<double> cumulative = scan(weights);
    const double nd = static_cast<double>(n);
    const double u = rng.u01_pos() / nd;

    std::vector<std::uint32_t> ancestors(n);
    std::size_t j = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double position = u + static_cast<double>(k) / nd;
        while (j + 1 < n && cumulative[j] < position) ++j;
        ancestors[k] = static_cast<std::uint32_t>(j);
    }
    return ancestors;
}

ParticleFilter::ParticleFilter(const FilterConfig& cfg)
    : cfg_(cfg),
      dt_(1.0 / static_cast<double>(cfg.interp_steps + 1)),
      ens_(init_ensemble(cfg, cfg.initial_infected)),
      anchor_value_(cfg.initial_infected) {
    const int workers = cfg_.scan_workers;
    if (cfg_.scan_backend == ScanBackend::threaded)
        scan_ = [workers](std::span<const double> v) { return inclusive_scan(v, workers); };
    else
        scan_ = [](std::span<const double> v) { return inclusive_scan(v, 1); };
    record_row(0.0, false);
}

void ParticleFilter::set_snapshot_window(double day_lo, double day_hi) {
    snapshot_window_ = std::make_pair(day_lo, day_hi);
}

void ParticleFilter::observe(std::span<const Observation> batch) {
    for (const Observation& obs : batch) {
        if (obs.infected_proportion < 0.0 || obs.infected_proportion > 1.0)
            throw std::invalid_argument("observe: infected proportion outside [0, 1]");
        if (obs.day <= anchor_day_)
            throw std::invalid_argument(
                "observe: observation days must be strictly increasing (day " +
                std::to_string(obs.day) + " after day " + std::to_string(anchor_day_) + ")");
        const int gap = obs.day - anchor_day_;
        const int n_sub = gap * (cfg_.interp_steps + 1);
        const double span_days = static_cast<double>(gap);
        for (int sub = 1; sub <= n_sub; ++sub) {
            const bool at_observation = (sub == n_sub);
            const double day = at_observation
                                   ? static_cast<double>(obs.day)
                                   : static_cast<double>(anchor_day_) + dt_ * sub;
            // Pseudo-observations interpolate linearly between the bracketing
            // records (day 0 anchors at the known initial proportion).
            const double frac = (day - static_cast<double>(anchor_day_)) / span_days;
            const double pseudo =
                anchor_value_ + (obs.infected_proportion - anchor_value_) * frac;
            advance_substep(day, at_observation ? &obs : nullptr, pseudo);
        }
        anchor_day_ = obs.day;
        anchor_value_ = obs.infected_proportion;
    }
}

void ParticleFilter::advance_substep(double day, const Observation* obs, double pseudo) {
    const std::size_t n = cfg_.n_particles;
    const double nd = static_cast<double>(n);
    ens_.step += 1;

    const std::vector<double> prev_weights = ens_.weights;
    const double prev_ess = ess(prev_weights);
    const bool resampled = prev_ess < cfg_.ess_threshold_fraction * nd;

    // Carried weight per Alg. 2 lines 6/9, and the matching ancestor weight
    // for the line-13 division. After resampling the ancestors' weights are
    // the just-reset 1/N, so both branches reduce to the bootstrap
    // likelihood weight; dead particles (weight exactly zero) stay dead.
    std::vector<double> carry(n);
    std::vector<double> ancestor_weight(n);
    if (resampled) {
        RngStream rng(cfg_.seed, stream_id(kTagSmcResample, static_cast<std::uint64_t>(ens_.step)));
        ens_.ancestors = resample_systematic(prev_weights, rng, scan_);
        std::fill(carry.begin(), carry.end(), 1.0 / nd);
        std::fill(ancestor_weight.begin(), ancestor_weight.end(), 1.0 / nd);
    } else {
        std::iota(ens_.ancestors.begin(), ens_.ancestors.end(), std::uint32_t{0});
        const double total = std::accumulate(prev_weights.begin(), prev_weights.end(), 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            carry[k] = prev_weights[k] / total;
            ancestor_weight[k] = prev_weights[k];
        }
    }

    std::vector<Particle> next(n);
    std::vector<double> weights(n);
    parallel_for_chunks(n, cfg_.threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t k = lo; k < hi; ++k) {
            const Particle& source = ens_.particles[ens_.ancestors[k]];
            RngStream rng(cfg_.seed,
                          stream_id(kTagSmcPropagate, static_cast<std::uint64_t>(ens_.step), k));
            next[k] = propagate(source, dt_, cfg_.ou, rng);
            const double likelihood = obs ? weight_obs(next[k], *obs, cfg_.obs_sd)
                                          : weight_latent(next[k], pseudo, cfg_.latent_sd);
            weights[k] = ancestor_weight[k] > 0.0
                             ? likelihood * carry[k] / ancestor_weight[k]
                             : 0.0;
        }
    });

    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0) || !std::isfinite(total))
        throw FilterDegeneracyError(
            ens_.step, "filter degenerated at sub-step " + std::to_string(ens_.step) +
                           " (day " + std::to_string(day) + "): all weights zero");
    for (double& w : weights) w /= total;

    ens_.particles = std::move(next);
    ens_.weights = std::move(weights);
    record_row(day, resampled);

    if (snapshot_window_ && day >= snapshot_window_->first &&
        day <= snapshot_window_->second) {
        ParticleSnapshot snap;
        snap.day = day;
        snap.infected.resize(n);
        for (std::size_t k = 0; k < n; ++k) snap.infected[k] = ens_.particles[k].i;
        snap.weights = ens_.weights;
        out_.snapshots.push_back(std::move(snap));
    }
}

void ParticleFilter::record_row(double day, bool resampled) {
    const std::size_t n = ens_.particles.size();
    std::vector<double> inf(n), beta(n), gamma(n), s(n), r(n);
    for (std::size_t k = 0; k < n; ++k) {
        const Particle& p = ens_.particles[k];
        s[k] = p.s;
        inf[k] = p.i;
        r[k] = p.r;
        beta[k] = std::exp(p.log_beta);
        gamma[k] = std::exp(p.log_gamma);
    }
    const auto& w = ens_.weights;

    FilterRow row;
    row.step = ens_.step;
    row.day = day;
    row.mean_s = weighted_mean(s, w);
    row.mean_i = weighted_mean(inf, w);
    row.mean_r = weighted_mean(r, w);
    row.q05_i = weighted_quantile(inf, w, 0.05);
    row.q95_i = weighted_quantile(inf, w, 0.95);
    row.mean_beta = weighted_mean(beta, w);
    row.q05_beta = weighted_quantile(beta, w, 0.05);
    row.q95_beta = weighted_quantile(beta, w, 0.95);
    row.mean_gamma = weighted_mean(gamma, w);
    row.q05_gamma = weighted_quantile(gamma, w, 0.05);
    row.q95_gamma = weighted_quantile(gamma, w, 0.95);
    row.ess = ess(w);
    row.resampled = resampled;
    out_.rows.push_back(row);
}

FilterOutput ParticleFilter::take_output() {
    const std::size_t n = ens_.particles.size();
    out_.final_log_beta.resize(n);
    out_.final_log_gamma.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        out_.final_log_beta[k] = ens_.particles[k].log_beta;
        out_.final_log_gamma[k] = ens_.particles[k].log_gamma;
    }
    out_.final_weights = ens_.weights;
    return std::move(out_);
}

FilterOutput smc_run(std::span<const Observation> observations,
                     const FilterConfig& cfg) {
    if (observations.empty())
        throw std::invalid_argument("smc_run: need at least one observation");
    ParticleFilter filter(cfg);
    filter.observe(observations);
    return filter.take_output();
}

void write_filter_csv(const FilterOutput& out, const std::filesystem::path& path) {
    std::ofstream file(path);
    if (!file) throw IoError("cannot open " + path.string() + " for writing");
    file << std::setprecision(17);
    file << "step,day,mean_s,mean_i,mean_r,q05_i,q95_i,mean_beta,q05_beta,q95_beta,"
            "mean_gamma,q05_gamma,q95_gamma,ess,resampled\n";
    for (const auto& r : out.rows)
        file << r.step << ',' << r.day << ',' << r.mean_s << ',' << r.mean_i << ','
             << r.mean_r << ',' << r.q05_i << ',' << r.q95_i << ',' << r.mean_beta
             << ',' << r.q05_beta << ',' << r.q95_beta << ',' << r.mean_gamma << ','
             << r.q05_gamma << ',' << r.q95_gamma << ',' << r.ess << ','
             << (r.resampled ? 1 : 0) << '\n';
    if (!file) throw IoError("failed writing " + path.string());
}

void write_params_ndjson(const FilterOutput& out, const std::filesystem::path& path) {
    std::ofstream file(path);
    if (!file) throw IoError("cannot open " + path.string() + " for writing");
    file << std::setprecision(17);
    for (std::size_t k = 0; k < out.final_weights.size(); ++k)
        file << "{\"log_beta\":" << out.final_log_beta[k]
             << ",\"log_gamma\":" << out.final_log_gamma[k]
             << ",\"weight\":" << out.final_weights[k] << "}\n";
    if (!file) throw IoError("failed writing " + path.string());
}

}  // namespace epismc
