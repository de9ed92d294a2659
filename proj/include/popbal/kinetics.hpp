#pragma once

// Solubility, supersaturation and growth-rate laws over any scalar type.

#include "popbal/ad/scalar.hpp"
#include "popbal/core.hpp"
#include "popbal/error.hpp"

#include <array>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

namespace popbal {

inline double solubility(double temperature, const MaterialProperties& m) {
    return m.solubility_a * std::exp(m.solubility_b * temperature);
}

template <typename T>
T supersaturation(const T& c, double temperature, const MaterialProperties& m) {
    return c / solubility(temperature, m);
}

template <typename T>
struct ArrheniusRate {
    T k1 = T(0.0);  // µm/min
    T k2 = T(0.0);  // K
    T k3 = T(1.0);
};

/// G_m = k_m1 exp(-k_m2 / (T + 273.15)) (S - 1)^k_m3
template <typename T>
struct Arrhenius {
    std::array<ArrheniusRate<T>, 2> dim;
};

/// G_m = sum_j a_mj (S - 1)^j, j = 1..k
template <typename T>
struct Polynomial {
    std::array<std::vector<T>, 2> coeffs;
};

template <typename T>
struct GrowthLaw {
    std::variant<Arrhenius<T>, Polynomial<T>> model;
};

inline GrowthLaw<double> default_arrhenius() {
    Arrhenius<double> a;
    a.dim[0] = {8.86e6, 2450.0, 3.7};
    a.dim[1] = {4.088e5, 2400.0, 2.5};
    return {a};
}

template <typename T>
GrowthLaw<T> polynomial_law(std::vector<T> shared) {
    Polynomial<T> p;
    p.coeffs[0] = shared;
    p.coeffs[1] = std::move(shared);
    return {p};
}

template <typename T>
GrowthLaw<T> polynomial_law(std::vector<T> a1, std::vector<T> a2) {
    Polynomial<T> p;
    p.coeffs[0] = std::move(a1);
    p.coeffs[1] = std::move(a2);
    return {p};
}

template <typename To, typename From>
GrowthLaw<To> law_cast(const GrowthLaw<From>& law) {
    if (const auto* a = std::get_if<Arrhenius<From>>(&law.model)) {
        Arrhenius<To> out;
        for (std::size_t m = 0; m < 2; ++m) {
            out.dim[m] = {To(ad::primal(a->dim[m].k1)), To(ad::primal(a->dim[m].k2)), To(ad::primal(a->dim[m].k3))};
        }
        return {out};
    }
    const auto& p = std::get<Polynomial<From>>(law.model);
    Polynomial<To> out;
    for (std::size_t m = 0; m < 2; ++m) {
        for (const auto& v : p.coeffs[m]) out.coeffs[m].push_back(To(ad::primal(v)));
    }
    return {out};
}

template <typename T>
void validate(const GrowthLaw<T>& law) {
    if (const auto* a = std::get_if<Arrhenius<T>>(&law.model)) {
        for (const auto& d : a->dim) {
            if (!(ad::primal(d.k1) > 0.0) || !(ad::primal(d.k3) > 0.0)) {
                throw ConfigError("Arrhenius growth needs k_m1 > 0 and k_m3 > 0");
            }
        }
        return;
    }
    const auto& p = std::get<Polynomial<T>>(law.model);
    for (const auto& c : p.coeffs) {
        if (c.empty()) throw ConfigError("polynomial growth needs at least one coefficient per dimension");
        for (const auto& v : c) {
            if (!(ad::primal(v) >= 0.0)) throw ConfigError("polynomial growth coefficients must be non-negative");
        }
    }
}

/// Growth rate along dimension m (1 or 2) in µm/min. Zero, with zero
/// derivative, whenever S <= 1.
template <typename T>
T growth_rate(const GrowthLaw<T>& law, int m, const T& S, double temperature) {
    if (m != 1 && m != 2) throw ContractError("growth dimension index must be 1 or 2, got " + std::to_string(m));
    if (!(ad::primal(S) > 1.0)) return T(0.0);
    using std::exp;
    using std::log;
    const T s = S - 1.0;
    const auto idx = static_cast<std::size_t>(m - 1);
    if (const auto* a = std::get_if<Arrhenius<T>>(&law.model)) {
        const auto& d = a->dim[idx];
        return d.k1 * exp(-d.k2 / (temperature + 273.15)) * exp(d.k3 * log(s));
    }
    const auto& c = std::get<Polynomial<T>>(law.model).coeffs[idx];
    if (c.empty()) throw ConfigError("polynomial growth has no coefficients");
    T acc = c.back();
    for (std::size_t j = c.size() - 1; j-- > 0;) acc = c[j] + s * acc;
    return s * acc;
}

}  // namespace popbal
