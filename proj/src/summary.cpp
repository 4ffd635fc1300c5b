#include "epismc/summary.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace epismc {
namespace {

double total_weight(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0 || !std::isfinite(w))
            throw std::invalid_argument("weights must be finite and nonnegative");
        total += w;
    }
    return total;
}

void check_sizes(std::span<const double> values, std::span<const double> weights) {
    if (values.empty()) throw std::invalid_argument("empty sample set");
    if (values.size() != weights.size())
        throw std::invalid_argument("values and weights differ in length");
}

}  // namespace

double weighted_mean(std::span<const double> values, std::span<const double> weights) {
    check_sizes(values, weights);
    const double total = total_weight(weights);
    if (total <= 0.0) throw std::invalid_argument("total weight must be positive");
    double acc = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) acc += weights[k] * values[k];
    return acc / total;
}

double weighted_sd(std::span<const double> values, std::span<const double> weights) {
    const double mean = weighted_mean(values, weights);
    const double total = total_weight(weights);
    double acc = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double d = values[k] - mean;
        acc += weights[k] * d * d;
    }
    return std::sqrt(acc / total);
}

double weighted_quantile(std::span<const double> values,
                         std::span<const double> weights, double q) {
    check_sizes(values, weights);
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile must lie in [0, 1]");
    const double total = total_weight(weights);
    if (total <= 0.0) throw std::invalid_argument("total weight must be positive");

    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    const double target = q * total;
    double cum = 0.0;
    for (std::size_t idx : order) {
        cum += weights[idx];
        if (cum >= target) return values[idx];
    }
    return values[order.back()];
}

ParameterSummary summarize(std::span<const double> log_beta,
                           std::span<const double> log_gamma,
                           std::span<const double> weights) {
    check_sizes(log_beta, weights);
    check_sizes(log_gamma, weights);

    ParameterSummary out;
    out.beta_log_mean = weighted_mean(log_beta, weights);
    out.beta_log_sd = weighted_sd(log_beta, weights);
    out.gamma_log_mean = weighted_mean(log_gamma, weights);
    out.gamma_log_sd = weighted_sd(log_gamma, weights);

    std::vector<double> beta(log_beta.size());
    std::vector<double> gamma(log_gamma.size());
    for (std::size_t k = 0; k < log_beta.size(); ++k) {
        beta[k] = std::exp(log_beta[k]);
        gamma[k] = std::exp(log_gamma[k]);
    }
    out.beta_q05 = weighted_quantile(beta, weights, 0.05);
    out.beta_q50 = weighted_quantile(beta, weights, 0.50);
    out.beta_q95 = weighted_quantile(beta, weights, 0.95);
    out.gamma_q05 = weighted_quantile(gamma, weights, 0.05);
    out.gamma_q50 = weighted_quantile(gamma, weights, 0.50);
    out.gamma_q95 = weighted_quantile(gamma, weights, 0.95);
    return out;
}

DensityEstimate kde(std::span<const double> samples,
                    std::span<const double> weights, std::size_t grid_size) {
    check_sizes(samples, weights);
    if (grid_size < 2) throw std::invalid_argument("kde: grid_size must be at least 2");
    const double total = total_weight(weights);
    if (total <= 0.0) throw std::invalid_argument("kde: total weight must be positive");

    double sq = 0.0;
    for (double w : weights) sq += w * w;
    const double n_eff = total * total / sq;
    const double sd = weighted_sd(samples, weights);

    double h = 1.06 * sd * std::pow(n_eff, -0.2);
    if (h <= 0.0) {
        // Degenerate sample spread; fall back to a visible bump width.
        const double scale = std::max(1.0, std::abs(samples.front()));
        h = 1e-3 * scale;
    }

    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    const double lo = *lo_it - 3.0 * h;
    const double hi = *hi_it + 3.0 * h;
    const double step = (hi - lo) / static_cast<double>(grid_size - 1);

    DensityEstimate est;
    est.bandwidth = h;
    est.grid.resize(grid_size);
    est.density.assign(grid_size, 0.0);
    const double norm = 1.0 / (h * std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t g = 0; g < grid_size; ++g) {
        const double x = lo + step * static_cast<double>(g);
        est.grid[g] = x;
        double acc = 0.0;
        for (std::size_t k = 0; k < samples.size(); ++k) {
            const double z = (x - samples[k]) / h;
            acc += weights[k] * std::exp(-0.5 * z * z);
        }
        est.density[g] = acc * norm / total;
    }

    double integral = 0.0;
    for (std::size_t g = 1; g < grid_size; ++g)
        integral += 0.5 * (est.density[g - 1] + est.density[g]) * step;
    if (integral <= 0.0) throw std::invalid_argument("kde: degenerate density");
    for (double& d : est.density) d /= integral;
    return est;
}

int count_local_maxima(const DensityEstimate& estimate, double min_height_fraction) {
    const auto& d = estimate.density;
    if (d.size() < 3) return d.empty() ? 0 : 1;
    const double peak = *std::max_element(d.begin(), d.end());
    const double floor = peak * min_height_fraction;

    // Collapse plateaus so equal neighbours do not mask a summit.
    std::vector<double> c;
    c.reserve(d.size());
    for (double v : d)
        if (c.empty() || c.back() != v) c.push_back(v);

    int count = 0;
    for (std::size_t k = 1; k + 1 < c.size(); ++k)
        if (c[k] > c[k - 1] && c[k] > c[k + 1] && c[k] >= floor) ++count;
    return count;
}

}  // namespace epismc
