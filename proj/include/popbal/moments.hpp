#pragma once

// Method-of-moments reference solver: six cross moments plus concentration,
// integrated with fixed-step classical Runge-Kutta.

#include "popbal/core.hpp"
#include "popbal/error.hpp"
#include "popbal/fvm.hpp"
#include "popbal/kinetics.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace popbal {

struct MomentState {
    double mu00 = 0.0, mu10 = 0.0, mu01 = 0.0, mu11 = 0.0, mu02 = 0.0, mu12 = 0.0;
    double c = 0.0;

    std::array<double, 7> as_array() const { return {mu00, mu10, mu01, mu11, mu02, mu12, c}; }
    static MomentState from_array(const std::array<double, 7>& a) { return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]}; }
};

inline MomentState moment_state(const Moments<double>& m, double c) {
    return {m.mu00, m.mu10, m.mu01, m.mu11, m.mu02, m.mu12, c};
}

/// Time derivative of the moment system at constant temperature.
inline MomentState mom_rhs(const MomentState& s, double temperature, const GrowthLaw<double>& law,
                           const MaterialProperties& material) {
    const double S = supersaturation(s.c, temperature, material);
    const double G1 = growth_rate(law, 1, S, temperature);
    const double G2 = growth_rate(law, 2, S, temperature);
    MomentState d;
    d.mu00 = 0.0;
    d.mu10 = G1 * s.mu00;
    d.mu01 = G2 * s.mu00;
    d.mu11 = G1 * s.mu01 + G2 * s.mu10;
    d.mu02 = 2.0 * G2 * s.mu01;
    d.mu12 = G1 * s.mu02 + 2.0 * G2 * s.mu11;
    d.c = -material.rho_kv() * d.mu12;
    return d;
}

struct MomentTrace {
    std::vector<double> times;
    std::vector<MomentState> states;
};

/// Classical RK4 with n_steps fixed steps of t_max / n_steps; the trace holds
/// the initial state and every step.
inline MomentTrace mom_solve(const MomentState& initial, double temperature, const GrowthLaw<double>& law,
                             const MaterialProperties& material, double t_max, std::size_t n_steps) {
    if (n_steps < 1) throw ConfigError("the moment solver needs at least one step");
    if (!(t_max > 0.0)) throw ConfigError("t_max must be positive");
    validate(law);
    const double h = t_max / static_cast<double>(n_steps);
    MomentTrace tr;
    tr.times.reserve(n_steps + 1);
    tr.states.reserve(n_steps + 1);
    tr.times.push_back(0.0);
    tr.states.push_back(initial);
    auto y = initial.as_array();
    auto f = [&](const std::array<double, 7>& x) {
        return mom_rhs(MomentState::from_array(x), temperature, law, material).as_array();
    };
    auto axpy = [](const std::array<double, 7>& x, double a, const std::array<double, 7>& k) {
        std::array<double, 7> r;
        for (std::size_t i = 0; i < 7; ++i) r[i] = x[i] + a * k[i];
        return r;
    };
    for (std::size_t n = 0; n < n_steps; ++n) {
        const auto k1 = f(y);
        const auto k2 = f(axpy(y, 0.5 * h, k1));
        const auto k3 = f(axpy(y, 0.5 * h, k2));
        const auto k4 = f(axpy(y, h, k3));
        for (std::size_t i = 0; i < 7; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (y[6] < 0.0) {
            throw InfeasibleError("moment solver: concentration became negative at t = " +
                                  std::to_string(static_cast<double>(n + 1) * h) + " min");
        }
        tr.times.push_back(static_cast<double>(n + 1) * h);
        tr.states.push_back(MomentState::from_array(y));
    }
    return tr;
}

/// Analytic moments of the seed. Both shapes are parameterised by arithmetic
/// mean and standard deviation, so E[L] = mean and E[L^2] = mean^2 + sigma^2.
inline MomentState moments_of_seed(const SeedSpec& spec, const MaterialProperties& material, double c0 = 0.0) {
    spec.validate();
    const double e1 = spec.mean_L1;
    const double e2 = spec.mean_L2;
    const double e22 = spec.mean_L2 * spec.mean_L2 + spec.sigma_22 * spec.sigma_22;
    const double mu00 = spec.m0 / (material.rho_kv() * e1 * e22);
    return {mu00, mu00 * e1, mu00 * e2, mu00 * e1 * e2, mu00 * e22, mu00 * e1 * e22, c0};
}

}  // namespace popbal
