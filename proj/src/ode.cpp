#include "epismc/ode.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace epismc {
namespace {

std::array<double, 3> sir_rhs(double beta, double gamma,
                              const std::array<double, 3>& y) {
    const double force = beta * y[0] * y[1];
    return {-force, force - gamma * y[1], gamma * y[1]};
}

}  // namespace

OdeCurve solve_sir(double beta, double gamma, double s0, double i0, double r0,
                   double t_end, double dt, std::size_t output_stride) {
    if (beta < 0.0 || gamma < 0.0)
        throw std::invalid_argument("solve_sir: rates must be nonnegative");
    if (dt <= 0.0) throw std::invalid_argument("solve_sir: dt must be positive");
    if (t_end < 0.0) throw std::invalid_argument("solve_sir: t_end must be nonnegative");
    if (std::abs(s0 + i0 + r0 - 1.0) > 1e-9)
        throw std::invalid_argument("solve_sir: s0 + i0 + r0 must equal 1");

    const std::size_t n_steps = static_cast<std::size_t>(std::llround(t_end / dt));
    std::size_t stride = output_stride;
    if (stride == 0)
        stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(1.0 / dt)));

    OdeCurve curve;
    curve.times.reserve(n_steps / stride + 2);
    std::array<double, 3> y = {s0, i0, r0};
    auto record = [&](double t) {
        curve.times.push_back(t);
        curve.s.push_back(y[0]);
        curve.i.push_back(y[1]);
        curve.r.push_back(y[2]);
    };
    record(0.0);

    for (std::size_t step = 1; step <= n_steps; ++step) {
        const auto k1 = sir_rhs(beta, gamma, y);
        const auto k2 = sir_rhs(beta, gamma,
                                {y[0] + 0.5 * dt * k1[0], y[1] + 0.5 * dt * k1[1],
                                 y[2] + 0.5 * dt * k1[2]});
        const auto k3 = sir_rhs(beta, gamma,
                                {y[0] + 0.5 * dt * k2[0], y[1] + 0.5 * dt * k2[1],
                                 y[2] + 0.5 * dt * k2[2]});
        const auto k4 = sir_rhs(beta, gamma,
                                {y[0] + dt * k3[0], y[1] + dt * k3[1],
                                 y[2] + dt * k3[2]});
        for (int c = 0; c < 3; ++c)
            y[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        if (step % stride == 0 || step == n_steps) record(static_cast<double>(step) * dt);
    }
    return curve;
}

double r_naught(double beta, double gamma) {
    if (gamma <= 0.0) throw std::invalid_argument("r_naught: gamma must be positive");
    return beta / gamma;
}

}  // namespace epismc
