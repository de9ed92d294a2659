#pragma once

#include <cmath>
#include <ostream>

namespace popbal::ad {

/// Forward-mode scalar: a primal value carrying one directional derivative.
///
/// Control flow must only branch on `value`; comparisons below ignore the
/// tangent.
struct Dual {
    double value = 0.0;
    double tangent = 0.0;

    constexpr Dual() = default;
    constexpr Dual(double v) : value(v) {}  // NOLINT(google-explicit-constructor)
    constexpr Dual(double v, double t) : value(v), tangent(t) {}

    Dual& operator+=(const Dual& o) { return *this = *this + o; }
    Dual& operator-=(const Dual& o) { return *this = *this - o; }
    Dual& operator*=(const Dual& o) { return *this = *this * o; }
    Dual& operator/=(const Dual& o) { return *this = *this / o; }

    friend Dual operator+(const Dual& a, const Dual& b) { return {a.value + b.value, a.tangent + b.tangent}; }
    friend Dual operator-(const Dual& a, const Dual& b) { return {a.value - b.value, a.tangent - b.tangent}; }
    friend Dual operator*(const Dual& a, const Dual& b) {
        return {a.value * b.value, a.tangent * b.value + a.value * b.tangent};
    }
    friend Dual operator/(const Dual& a, const Dual& b) {
        const double q = a.value / b.value;
        return {q, (a.tangent - q * b.tangent) / b.value};
    }
    friend Dual operator-(const Dual& a) { return {-a.value, -a.tangent}; }

    friend Dual operator+(const Dual& a, double b) { return {a.value + b, a.tangent}; }
    friend Dual operator+(double a, const Dual& b) { return {a + b.value, b.tangent}; }
    friend Dual operator-(const Dual& a, double b) { return {a.value - b, a.tangent}; }
    friend Dual operator-(double a, const Dual& b) { return {a - b.value, -b.tangent}; }
    friend Dual operator*(const Dual& a, double b) { return {a.value * b, a.tangent * b}; }
    friend Dual operator*(double a, const Dual& b) { return {a * b.value, a * b.tangent}; }
    friend Dual operator/(const Dual& a, double b) { return {a.value / b, a.tangent / b}; }
    friend Dual operator/(double a, const Dual& b) {
        const double q = a / b.value;
        return {q, -q * b.tangent / b.value};
    }

    friend bool operator==(const Dual& a, const Dual& b) { return a.value == b.value; }
    friend auto operator<=>(const Dual& a, const Dual& b) { return a.value <=> b.value; }
    friend bool operator==(const Dual& a, double b) { return a.value == b; }
    friend auto operator<=>(const Dual& a, double b) { return a.value <=> b; }

    friend std::ostream& operator<<(std::ostream& os, const Dual& d) {
        return os << d.value << " [" << d.tangent << "]";
    }
};

inline Dual exp(const Dual& a) {
    const double e = std::exp(a.value);
    return {e, e * a.tangent};
}
inline Dual log(const Dual& a) { return {std::log(a.value), a.tangent / a.value}; }
inline Dual sin(const Dual& a) { return {std::sin(a.value), std::cos(a.value) * a.tangent}; }
inline Dual cos(const Dual& a) { return {std::cos(a.value), -std::sin(a.value) * a.tangent}; }
inline Dual sqrt(const Dual& a) {
    const double r = std::sqrt(a.value);
    return {r, a.tangent / (2.0 * r)};
}
// sign(0) = 0, so |x| is flat at the kink.
inline Dual abs(const Dual& a) {
    const double s = a.value > 0.0 ? 1.0 : (a.value < 0.0 ? -1.0 : 0.0);
    return {std::abs(a.value), s * a.tangent};
}
inline Dual pow(const Dual& a, double p) {
    const double v = std::pow(a.value, p);
    return {v, p == 0.0 ? 0.0 : p * std::pow(a.value, p - 1.0) * a.tangent};
}
inline Dual pow(const Dual& a, const Dual& b) { return exp(b * log(a)); }

// Ties select the first argument.
inline Dual min(const Dual& a, const Dual& b) { return b.value < a.value ? b : a; }
inline Dual max(const Dual& a, const Dual& b) { return b.value > a.value ? b : a; }

}  // namespace popbal::ad
