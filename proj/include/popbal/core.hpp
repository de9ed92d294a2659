#pragma once

#include "popbal/ad/scalar.hpp"
#include "popbal/error.hpp"

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

namespace popbal {

/// Uniform 2D grid over (L1, L2) in µm.
struct Grid2D {
    std::size_t n1 = 0, n2 = 0;
    double dL1 = 0.0, dL2 = 0.0;
    double L1_max = 0.0, L2_max = 0.0;

    double L1_center(std::size_t i) const { return (static_cast<double>(i) + 0.5) * dL1; }
    double L2_center(std::size_t j) const { return (static_cast<double>(j) + 0.5) * dL2; }
    double cell_area() const { return dL1 * dL2; }
    std::size_t size() const { return n1 * n2; }

    friend bool operator==(const Grid2D&, const Grid2D&) = default;
};

namespace detail {

// ceil(extent / width), ignoring representation noise such as 0.3 / 0.1.
inline std::size_t bin_count(double extent, double width) {
    const double ratio = extent / width;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) <= 1e-9 * ratio) return static_cast<std::size_t>(nearest);
    return static_cast<std::size_t>(std::ceil(ratio));
}

}  // namespace detail

/// Bin counts round up; the reported extents are the effective ones.
inline Grid2D build_grid(double L1_max, double L2_max, double dL1, double dL2) {
    if (!(L1_max > 0.0 && L2_max > 0.0 && dL1 > 0.0 && dL2 > 0.0) || !std::isfinite(L1_max) ||
        !std::isfinite(L2_max)) {
        throw ConfigError("grid extents and bin widths must be positive and finite");
    }
    Grid2D g;
    g.n1 = detail::bin_count(L1_max, dL1);
    g.n2 = detail::bin_count(L2_max, dL2);
    g.dL1 = dL1;
    g.dL2 = dL2;
    g.L1_max = static_cast<double>(g.n1) * dL1;
    g.L2_max = static_cast<double>(g.n2) * dL2;
    return g;
}

/// Number density per µm² per kg solvent, row-major: f[i * n2 + j] holds bin
/// (L1 index i, L2 index j).
template <typename T>
struct PSSD {
    Grid2D grid;
    std::vector<T> f;

    PSSD() = default;
    explicit PSSD(const Grid2D& g) : grid(g), f(g.size(), T(0.0)) {}
    PSSD(const Grid2D& g, std::vector<T> values) : grid(g), f(std::move(values)) {
        if (f.size() != grid.size()) {
            throw ContractError("PSSD has " + std::to_string(f.size()) + " entries, grid needs " +
                                std::to_string(grid.size()));
        }
    }

    T& operator()(std::size_t i, std::size_t j) { return f[i * grid.n2 + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return f[i * grid.n2 + j]; }
};

template <typename To, typename From>
PSSD<To> pssd_cast(const PSSD<From>& p) {
    PSSD<To> out(p.grid);
    for (std::size_t k = 0; k < p.f.size(); ++k) out.f[k] = To(ad::primal(p.f[k]));
    return out;
}

template <typename T>
struct LiquidState {
    T c = T(0.0);               // g per kg solvent
    double temperature = 15.0;  // °C
};

struct MaterialProperties {
    double rho_c = 1.11e-12;  // g/µm³
    double k_v = std::numbers::pi / 4.0;
    double solubility_a = 3.37;   // g/kg
    double solubility_b = 0.036;  // 1/°C

    double rho_kv() const { return rho_c * k_v; }

    void validate() const {
        if (!(rho_c > 0.0)) throw ConfigError("rho_c must be positive");
        if (!(k_v > 0.0 && k_v <= 1.0)) throw ConfigError("k_v must lie in (0, 1]");
        if (!(solubility_a > 0.0) || !std::isfinite(solubility_b)) throw ConfigError("invalid solubility constants");
    }
};

enum class SeedShape { normal, log_normal };

/// Independent marginals in L1 and L2; mean and sigma are the arithmetic
/// mean and standard deviation for both shapes.
struct SeedSpec {
    SeedShape shape = SeedShape::normal;
    double mean_L1 = 400.0, mean_L2 = 250.0;  // µm
    double sigma_11 = 30.0, sigma_22 = 30.0;  // µm
    double m0 = 1.0;                          // g per kg solvent

    void validate() const {
        if (!(sigma_11 > 0.0 && sigma_22 > 0.0)) throw ConfigError("seed sigmas must be positive");
        if (!(mean_L1 > 0.0 && mean_L2 > 0.0)) throw ConfigError("seed means must be positive");
        if (!(m0 >= 0.0) || !std::isfinite(m0)) throw ConfigError("seed mass must be non-negative");
    }
};

enum class Kernel { serial, parallel };

inline std::string to_string(Kernel k) { return k == Kernel::serial ? "serial" : "parallel"; }

inline Kernel parse_kernel(const std::string& s) {
    if (s == "serial") return Kernel::serial;
    if (s == "parallel") return Kernel::parallel;
    throw ConfigError("unknown kernel '" + s + "' (expected serial or parallel)");
}

}  // namespace popbal
