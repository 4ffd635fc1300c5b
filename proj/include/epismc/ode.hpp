#pragma once

#include <cstddef>
#include <vector>

namespace epismc {

/// Deterministic SIR trajectory in population proportions.
struct OdeCurve {
    std::vector<double> times;  // days
    std::vector<double> s;
    std::vector<double> i;
    std::vector<double> r;

    std::size_t size() const { return times.size(); }
};

/// Integrates the constant-rate SIR system with classical RK4.
/// Samples every `output_stride` steps (0 picks the stride closest to one
/// sample per day); the initial state is always the first sample.
OdeCurve solve_sir(double beta, double gamma, double s0, double i0, double r0,
                   double t_end, double dt = 0.01, std::size_t output_stride = 0);

/// Basic reproduction number beta/gamma; rejects gamma <= 0.
double r_naught(double beta, double gamma);

}  // namespace epismc
