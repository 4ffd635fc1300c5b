#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace epismc {

double weighted_mean(std::span<const double> values, std::span<const double> weights);
double weighted_sd(std::span<const double> values, std::span<const double> weights);

/// Smallest sample value whose cumulative weight reaches q of the total.
double weighted_quantile(std::span<const double> values,
                         std::span<const double> weights, double q);

/// Posterior summary of the rate parameters: log-space moments plus natural-
/// scale quantiles. This is the exchange payload handed back to the agent
/// simulation between windows.
struct ParameterSummary {
    double beta_log_mean = 0.0;
    double beta_log_sd = 0.0;
    double gamma_log_mean = 0.0;
    double gamma_log_sd = 0.0;
    double beta_q05 = 0.0, beta_q50 = 0.0, beta_q95 = 0.0;
    double gamma_q05 = 0.0, gamma_q50 = 0.0, gamma_q95 = 0.0;
};

ParameterSummary summarize(std::span<const double> log_beta,
                           std::span<const double> log_gamma,
                           std::span<const double> weights);

struct DensityEstimate {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth = 0.0;
};

/// Weighted Gaussian kernel density on an equispaced grid spanning the
/// samples plus three bandwidths, renormalized so the trapezoid integral is
/// one. Bandwidth is Silverman's rule on the weighted sd, with the effective
/// sample size standing in for n.
DensityEstimate kde(std::span<const double> samples,
                    std::span<const double> weights, std::size_t grid_size = 256);

/// Interior local maxima of the density, ignoring peaks below
/// min_height_fraction of the global maximum.
int count_local_maxima(const DensityEstimate& estimate,
                       double min_height_fraction = 0.05);

}  // namespace epismc
