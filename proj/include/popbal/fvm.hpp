#pragma once

// High-resolution finite-volume solver for growth-only 2D batch PBEs.
//
// Each step applies the limited upwind update along L1 for every column and
// then along L2 for every row (fixed order, no alternation). Two zero ghost
// cells sit on each side of every line. All routines are generic over the
// scalar type; double, Dual and Var runs follow the same primal arithmetic.

#include "popbal/ad/scalar.hpp"
#include "popbal/core.hpp"
#include "popbal/error.hpp"
#include "popbal/kinetics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace popbal {

inline constexpr double smoothness_eps = 1e-30;
// Negative densities smaller than this fraction of the line maximum are
// round-off and get clipped to zero.
inline constexpr double clip_tolerance = 1e-12;
inline constexpr double courant_slack = 1e-12;

namespace detail {

template <typename T>
T guard_denominator(const T& d) {
    const double p = ad::primal(d);
    if (std::abs(p) < smoothness_eps) return T(std::copysign(smoothness_eps, p));
    return d;
}

template <typename T>
T limiter_weight(const T& C) {
    return 0.5 * C * (1.0 - C);
}

}  // namespace detail

/// θ = (f_prev - f_prev2) / (f_here - f_prev), with a sign-preserving guard on
/// tiny denominators.
template <typename T>
T smoothness(const T& f_prev2, const T& f_prev, const T& f_here) {
    return (f_prev - f_prev2) / detail::guard_denominator(T(f_here - f_prev));
}

template <typename T>
T van_leer(const T& theta) {
    using std::abs;
    const T a = abs(theta);
    return (theta + a) / (1.0 + a);
}

/// Limited difference at a face: φ(up / down) · down, where `down` is the
/// jump across the face and `up` the jump across the upwind face.
template <typename T>
T face_flux(const T& up, const T& down) {
    return van_leer(T(up / detail::guard_denominator(down))) * down;
}

/// Update of one cell from its stencil f_{i-2}, f_{i-1}, f_i, f_{i+1}.
template <typename T>
T cell_update(const T& fm2, const T& fm1, const T& f0, const T& fp1, const T& C, const T& K) {
    const T dmm = fm1 - fm2;
    const T dm = f0 - fm1;
    const T dp = fp1 - f0;
    const T Fm = face_flux(dmm, dm);
    const T Fp = face_flux(dm, dp);
    return (1.0 - C) * f0 + C * fm1 - K * (Fp - Fm);
}

namespace detail {

inline double cell_value(std::span<const double> v) {
    return cell_update(v[0], v[1], v[2], v[3], v[4], limiter_weight(v[4]));
}

struct FaceDerivative {
    double value, d_up, d_down;
};

// Matches the tangent Dual arithmetic produces for face_flux, including the
// |θ| convention sign(0) = 0.
inline FaceDerivative face_flux_derivative(double up, double down) {
    const double g = guard_denominator(down);
    const double theta = up / g;
    const double a = std::abs(theta);
    const double phi = (theta + a) / (1.0 + a);
    const double s = theta > 0.0 ? 1.0 : (theta < 0.0 ? -1.0 : 0.0);
    const double dphi = ((1.0 + s) - phi * s) / (1.0 + a);
    const double guarded = std::abs(down) < smoothness_eps ? 0.0 : 1.0;
    return {phi * down, dphi * down / g, dphi * (-theta / g) * guarded * down + phi};
}

// One tape node per updated cell, with analytic partials with respect to the
// stencil and the Courant number.
inline ad::Var cell_update_fused(const ad::Var& fm2, const ad::Var& fm1, const ad::Var& f0, const ad::Var& fp1,
                                 const ad::Var& C) {
    const std::array<double, 5> v{fm2.value(), fm1.value(), f0.value(), fp1.value(), C.value()};
    const double value = cell_value(v);
    const std::array<ad::Var, 5> ops{fm2, fm1, f0, fp1, C};
    if (!(fm2.active() || fm1.active() || f0.active() || fp1.active() || C.active())) return ad::Var(value);
    const double c = v[4];
    const double K = limiter_weight(c);
    const double dK = 0.5 * (1.0 - 2.0 * c);
    const auto m = face_flux_derivative(v[1] - v[0], v[2] - v[1]);
    const auto p = face_flux_derivative(v[2] - v[1], v[3] - v[2]);
    const std::array<double, 5> partial{
        -K * m.d_up,
        c + K * (p.d_up + m.d_up - m.d_down),
        (1.0 - c) - K * (p.d_up - p.d_down - m.d_down),
        -K * p.d_down,
        v[1] - v[2] - dK * (p.value - m.value),
    };
    return ad::Var::custom(&cell_value, ops, partial, value);
}

/// Primal-nonzero extent [begin, end) of a strided line.
template <typename T>
std::pair<std::size_t, std::size_t> nonzero_extent(const T* line, std::size_t n, std::size_t stride) {
    std::size_t a = 0;
    while (a < n && ad::primal(line[a * stride]) == 0.0) ++a;
    if (a == n) return {n, n};
    std::size_t b = n;
    while (ad::primal(line[(b - 1) * stride]) == 0.0) --b;
    return {a, b};
}

template <typename T>
double line_max(const T* line, std::size_t begin, std::size_t end, std::size_t stride) {
    double m = 0.0;
    for (std::size_t k = begin; k < end; ++k) m = std::max(m, ad::primal(line[k * stride]));
    return m;
}

template <typename T>
void clip_cell(T& v, double input_max, std::size_t line, std::size_t cell) {
    const double p = ad::primal(v);
    if (p >= 0.0) return;
    if (-p < clip_tolerance * input_max) {
        v = T(0.0);
        return;
    }
    throw SolverError("negative density " + std::to_string(p) + " at line " + std::to_string(line) + ", cell " +
                      std::to_string(cell) + " exceeds round-off (line max " + std::to_string(input_max) + ")");
}

inline std::size_t thread_count() {
    if (const char* env = std::getenv("POPBAL_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) throw ConfigError("POPBAL_THREADS must be a positive integer");
        return static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs fn(begin, end) over contiguous chunks of [0, n) on worker threads.
/// Exceptions are collected per chunk and the first one in chunk order is
/// rethrown.
inline void parallel_chunks(std::size_t n, std::size_t threads, const std::function<void(std::size_t, std::size_t)>& fn) {
    threads = std::min(threads, n);
    if (threads <= 1) {
        if (n > 0) fn(0, n);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) {
            const std::size_t b = n * t / threads;
            const std::size_t e = n * (t + 1) / threads;
            pool.emplace_back([&, t, b, e] {
                try {
                    fn(b, e);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

// Naive per-cell kernel: one line at a time, out of place, every neighbour
// read bounds-checked against the zero ghost cells.
template <typename T>
void sweep_line_serial(T* line, std::size_t n, std::size_t stride, const T& C, const T& K, std::size_t line_id,
                       std::vector<T>& in) {
    const auto [a, b] = nonzero_extent(line, n, stride);
    if (a == b) return;
    const std::size_t end = std::min(n, b + 1);
    const std::size_t lo = a >= 2 ? a - 2 : 0;
    const std::size_t hi = std::min(n, end + 1);
    in.assign(n, T(0.0));
    for (std::size_t k = lo; k < hi; ++k) in[k] = line[k * stride];
    const double input_max = line_max(line, a, b, stride);
    auto at = [&](std::ptrdiff_t k) -> T {
        if (k < 0 || k >= static_cast<std::ptrdiff_t>(n)) return T(0.0);
        return in[static_cast<std::size_t>(k)];
    };
    for (std::size_t i = a; i < end; ++i) {
        const auto si = static_cast<std::ptrdiff_t>(i);
        T v;
        if constexpr (std::is_same_v<T, ad::Var>) {
            v = cell_update_fused(at(si - 2), at(si - 1), at(si), at(si + 1), C);
        } else {
            v = cell_update(at(si - 2), at(si - 1), at(si), at(si + 1), C, K);
        }
        clip_cell(v, input_max, line_id, i);
        line[i * stride] = v;
    }
}

// Batched kernel along L2: each row is copied into a ghost-padded buffer and
// every face flux is evaluated once.
template <typename T>
void sweep_rows_batched(PSSD<T>& p, const T& C, const T& K, std::size_t row_begin, std::size_t row_end) {
    const std::size_t n = p.grid.n2;
    std::vector<T> buf(n + 4, T(0.0));
    std::vector<T> flux(n + 2, T(0.0));  // flux[k] is the face between buf[k+1] and buf[k+2]
    for (std::size_t i = row_begin; i < row_end; ++i) {
        T* line = &p.f[i * n];
        const auto [a, b] = nonzero_extent(line, n, 1);
        if (a == b) continue;
        const std::size_t end = std::min(n, b + 1);
        const double input_max = line_max(line, a, b, 1);
        const std::size_t lo = a >= 2 ? a - 2 : 0;
        const std::size_t hi = std::min(n, end + 1);
        std::fill(buf.begin(), buf.end(), T(0.0));
        for (std::size_t k = lo; k < hi; ++k) buf[k + 2] = line[k];
        // faces k - 1/2 for k in [a, end]: flux index k
        for (std::size_t k = a; k <= end; ++k) {
            const T up = buf[k + 1] - buf[k];
            const T down = buf[k + 2] - buf[k + 1];
            flux[k] = face_flux(up, down);
        }
        const T one_minus_c = 1.0 - C;
        for (std::size_t k = a; k < end; ++k) {
            T v = one_minus_c * buf[k + 2] + C * buf[k + 1] - K * (flux[k + 1] - flux[k]);
            clip_cell(v, input_max, i, k);
            line[k] = v;
        }
    }
}

// Batched kernel along L1: rows are processed in order while the inner loop
// runs across a contiguous block of columns, carrying the previous face
// difference and flux per column.
template <typename T>
void sweep_columns_batched(PSSD<T>& p, const T& C, const T& K, std::size_t col_begin, std::size_t col_end) {
    const std::size_t n1 = p.grid.n1, n2 = p.grid.n2;
    const std::size_t w = col_end - col_begin;
    std::vector<std::size_t> a(w), e(w);
    std::vector<double> input_max(w, 0.0);
    std::size_t ilo = n1, ihi = 0;
    for (std::size_t c = 0; c < w; ++c) {
        const std::size_t j = col_begin + c;
        const auto [lo, hi] = nonzero_extent(&p.f[j], n1, n2);
        a[c] = lo;
        e[c] = lo == hi ? lo : std::min(n1, hi + 1);
        if (lo != hi) {
            input_max[c] = line_max(&p.f[j], lo, hi, n2);
            ilo = std::min(ilo, lo);
            ihi = std::max(ihi, e[c]);
        }
    }
    if (ilo >= ihi) return;

    auto get = [&](std::ptrdiff_t i, std::size_t j) -> T {
        if (i < 0 || i >= static_cast<std::ptrdiff_t>(n1)) return T(0.0);
        return p.f[static_cast<std::size_t>(i) * n2 + j];
    };
    const auto silo = static_cast<std::ptrdiff_t>(ilo);
    std::vector<T> d_prev(w), f_prev(w), row_prev(w), row_cur(w), out(w * (ihi - ilo));
    for (std::size_t c = 0; c < w; ++c) {
        const std::size_t j = col_begin + c;
        d_prev[c] = get(silo, j) - get(silo - 1, j);
        f_prev[c] = face_flux(T(get(silo - 1, j) - get(silo - 2, j)), d_prev[c]);
        row_prev[c] = get(silo - 1, j);
    }
    const T one_minus_c = 1.0 - C;
    for (std::size_t i = ilo; i < ihi; ++i) {
        const auto si = static_cast<std::ptrdiff_t>(i);
        for (std::size_t c = 0; c < w; ++c) {
            const std::size_t j = col_begin + c;
            const T here = get(si, j);
            const T d_next = get(si + 1, j) - here;
            const T f_next = face_flux(d_prev[c], d_next);
            out[(i - ilo) * w + c] = one_minus_c * here + C * row_prev[c] - K * (f_next - f_prev[c]);
            d_prev[c] = d_next;
            f_prev[c] = f_next;
            row_prev[c] = here;
        }
    }
    for (std::size_t c = 0; c < w; ++c) {
        const std::size_t j = col_begin + c;
        for (std::size_t i = a[c]; i < e[c]; ++i) {
            T v = out[(i - ilo) * w + c];
            clip_cell(v, input_max[c], j, i);
            p.f[i * n2 + j] = v;
        }
    }
}

template <typename T>
void check_courant(const T& C, const char* axis) {
    const double c = ad::primal(C);
    if (!(c >= 0.0)) throw ContractError(std::string("negative or undefined Courant number along ") + axis);
    if (c > 1.0 + courant_slack) {
        throw StabilityError(std::string("Courant number ") + std::to_string(c) + " along " + axis + " exceeds 1");
    }
}

}  // namespace detail

/// Δt = ν min(ΔL1/G1, ΔL2/G2); a zero rate contributes +∞.
template <typename T>
T cfl_dt(const T& G1, const T& G2, const Grid2D& grid, double courant) {
    const bool has1 = ad::primal(G1) > 0.0;
    const bool has2 = ad::primal(G2) > 0.0;
    if (!has1 && !has2) return T(std::numeric_limits<double>::infinity());
    if (has1 && has2) {
        const T r1 = grid.dL1 / G1;
        const T r2 = grid.dL2 / G2;
        using std::min;
        return courant * min(r1, r2);
    }
    return courant * (has1 ? T(grid.dL1 / G1) : T(grid.dL2 / G2));
}

/// One limited upwind update of a single line with zero ghost cells.
template <typename T>
std::vector<T> sweep_1d(std::vector<T> f_line, const T& G, const T& dt, double dL) {
    const T C = G * dt / dL;
    detail::check_courant(C, "line");
    std::vector<T> scratch;
    detail::sweep_line_serial(f_line.data(), f_line.size(), 1, C, detail::limiter_weight(C), 0, scratch);
    return f_line;
}

/// Sweeps every column along L1 with Courant number C1, then every row along
/// L2 with C2.
template <typename T>
void split_step(PSSD<T>& p, const T& C1, const T& C2, Kernel kernel = Kernel::serial) {
    detail::check_courant(C1, "L1");
    detail::check_courant(C2, "L2");
    const std::size_t n1 = p.grid.n1, n2 = p.grid.n2;
    const T K1 = detail::limiter_weight(C1);
    const T K2 = detail::limiter_weight(C2);
    constexpr bool taped = std::is_same_v<T, ad::Var>;
    if (kernel == Kernel::serial || taped) {
        // The tape is single-threaded, so Var always takes the per-cell path.
        std::vector<T> scratch;
        if (ad::primal(C1) != 0.0) {
            for (std::size_t j = 0; j < n2; ++j) detail::sweep_line_serial(&p.f[j], n1, n2, C1, K1, j, scratch);
        }
        if (ad::primal(C2) != 0.0) {
            for (std::size_t i = 0; i < n1; ++i) detail::sweep_line_serial(&p.f[i * n2], n2, 1, C2, K2, i, scratch);
        }
        return;
    }
    if constexpr (!taped) {
        const std::size_t threads = detail::thread_count();
        if (ad::primal(C1) != 0.0) {
            // column blocks of at least 16 keep the inner loop long
            const std::size_t blocks = (n2 + 15) / 16;
            detail::parallel_chunks(blocks, threads, [&](std::size_t b, std::size_t e) {
                detail::sweep_columns_batched(p, C1, K1, b * 16, std::min(n2, e * 16));
            });
        }
        if (ad::primal(C2) != 0.0) {
            detail::parallel_chunks(n1, threads,
                                    [&](std::size_t b, std::size_t e) { detail::sweep_rows_batched(p, C2, K2, b, e); });
        }
    }
}

namespace detail {

inline double ipow(double x, int p) {
    double r = 1.0;
    for (int k = 0; k < p; ++k) r = k == 0 ? x : r * x;
    return r;
}

/// Per-row sums r_q(i) = sum_j L2_j^q f_ij over the nonzero extent of each
/// row; rows with no mass are skipped.
template <typename T>
void row_sums(const PSSD<T>& p, const std::vector<int>& orders, std::vector<std::size_t>& rows,
              std::vector<std::vector<T>>& sums) {
    const std::size_t n2 = p.grid.n2;
    rows.clear();
    sums.assign(orders.size(), {});
    std::vector<double> w;
    for (std::size_t i = 0; i < p.grid.n1; ++i) {
        const T* line = &p.f[i * n2];
        const auto [a, b] = nonzero_extent(line, n2, 1);
        if (a == b) continue;
        rows.push_back(i);
        const std::span<const T> vals(line + a, b - a);
        for (std::size_t o = 0; o < orders.size(); ++o) {
            w.resize(b - a);
            for (std::size_t j = a; j < b; ++j) w[j - a] = ipow(p.grid.L2_center(j), orders[o]);
            sums[o].push_back(ad::weighted_sum(vals, std::span<const double>(w)));
        }
    }
}

template <typename T>
T reduce_rows(const Grid2D& g, const std::vector<std::size_t>& rows, const std::vector<T>& r, int p) {
    std::vector<double> w(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) w[k] = ipow(g.L1_center(rows[k]), p);
    if (rows.empty()) return T(0.0);
    return g.cell_area() * ad::weighted_sum(std::span<const T>(r), std::span<const double>(w));
}

}  // namespace detail

/// μ_pq by midpoint quadrature at cell centres.
template <typename T>
T cross_moment(const PSSD<T>& pssd, int p, int q) {
    if (p < 0 || q < 0) throw ContractError("moment orders must be non-negative");
    std::vector<std::size_t> rows;
    std::vector<std::vector<T>> sums;
    detail::row_sums(pssd, {q}, rows, sums);
    return detail::reduce_rows(pssd.grid, rows, sums[0], p);
}

/// The six tracked cross moments.
template <typename T>
struct Moments {
    T mu00 = T(0.0), mu10 = T(0.0), mu01 = T(0.0), mu11 = T(0.0), mu02 = T(0.0), mu12 = T(0.0);
};

inline constexpr std::array<const char*, 6> moment_names{"mu00", "mu10", "mu01", "mu11", "mu02", "mu12"};

template <typename T>
Moments<T> moments(const PSSD<T>& pssd) {
    std::vector<std::size_t> rows;
    std::vector<std::vector<T>> sums;
    detail::row_sums(pssd, {0, 1, 2}, rows, sums);
    const Grid2D& g = pssd.grid;
    return {detail::reduce_rows(g, rows, sums[0], 0), detail::reduce_rows(g, rows, sums[0], 1),
            detail::reduce_rows(g, rows, sums[1], 0), detail::reduce_rows(g, rows, sums[1], 1),
            detail::reduce_rows(g, rows, sums[2], 0), detail::reduce_rows(g, rows, sums[2], 1)};
}

/// c_new = c_old - ρc kv (μ12_new - μ12_old).
template <typename T>
T update_concentration(const T& c_old, const T& mu12_old, const T& mu12_new, const MaterialProperties& m) {
    const T c = c_old - m.rho_kv() * (mu12_new - mu12_old);
    if (ad::primal(c) < 0.0) {
        throw InfeasibleError("concentration became negative (" + std::to_string(ad::primal(c)) + " g/kg)");
    }
    return c;
}

template <typename T>
T update_concentration(const T& c_old, const PSSD<T>& before, const PSSD<T>& after, const MaterialProperties& m) {
    return update_concentration(c_old, cross_moment(before, 1, 2), cross_moment(after, 1, 2), m);
}

namespace detail {

inline double marginal_pdf(SeedShape shape, double x, double mean, double sigma) {
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    if (shape == SeedShape::normal) {
        const double z = (x - mean) / sigma;
        return inv_sqrt_2pi / sigma * std::exp(-0.5 * z * z);
    }
    const double s2 = std::log1p((sigma * sigma) / (mean * mean));
    const double s = std::sqrt(s2);
    const double mu = std::log(mean) - 0.5 * s2;
    const double z = (std::log(x) - mu) / s;
    return inv_sqrt_2pi / (x * s) * std::exp(-0.5 * z * z);
}

}  // namespace detail

// Seed densities below this fraction of the peak are set to zero so the
// solver's active extent stays compact.
inline constexpr double seed_cutoff = 1e-10;

/// Seed distribution scaled so that ρc kv μ12 equals the seed mass.
inline PSSD<double> seed_pssd(const SeedSpec& spec, const Grid2D& grid, const MaterialProperties& material) {
    spec.validate();
    material.validate();
    PSSD<double> p(grid);
    if (spec.m0 == 0.0) return p;
    std::vector<double> g1(grid.n1), g2(grid.n2);
    for (std::size_t i = 0; i < grid.n1; ++i)
        g1[i] = detail::marginal_pdf(spec.shape, grid.L1_center(i), spec.mean_L1, spec.sigma_11);
    for (std::size_t j = 0; j < grid.n2; ++j)
        g2[j] = detail::marginal_pdf(spec.shape, grid.L2_center(j), spec.mean_L2, spec.sigma_22);
    double peak = 0.0;
    for (std::size_t i = 0; i < grid.n1; ++i)
        for (std::size_t j = 0; j < grid.n2; ++j) {
            p(i, j) = g1[i] * g2[j];
            peak = std::max(peak, p(i, j));
        }
    for (double& v : p.f)
        if (v < seed_cutoff * peak) v = 0.0;
    const double mu12 = cross_moment(p, 1, 2);
    const double analytic = spec.mean_L1 * (spec.mean_L2 * spec.mean_L2 + spec.sigma_22 * spec.sigma_22);
    if (!(mu12 >= 0.999 * analytic)) {
        throw ConfigError("grid too small for the seed: only " + std::to_string(100.0 * mu12 / analytic) +
                          "% of the seed mass is resolved");
    }
    const double beta = spec.m0 / (material.rho_kv() * mu12);
    for (double& v : p.f) v *= beta;
    return p;
}

struct SimulationConfig {
    Grid2D grid = build_grid(1200.0, 600.0, 1.0, 1.0);
    SeedSpec seed;
    MaterialProperties material;
    GrowthLaw<double> growth = default_arrhenius();
    double t_max = 60000.0;      // min
    double temperature = 15.0;   // °C
    double c0 = 8.0;             // g/kg
    double courant = 0.9;
    std::size_t output_samples = 100;
    Kernel kernel = Kernel::serial;

    void validate() const {
        seed.validate();
        material.validate();
        popbal::validate(growth);
        if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ConfigError("t_max must be positive");
        if (!(courant > 0.0 && courant < 1.0)) throw ConfigError("Courant number must lie in (0, 1)");
        if (!(c0 >= 0.0)) throw ConfigError("c0 must be non-negative");
        if (!std::isfinite(temperature)) throw ConfigError("temperature must be finite");
        if (output_samples < 1) throw ConfigError("output_samples must be at least 1");
    }
};

/// State after a solver step.
template <typename T>
struct TracePoint {
    T t = T(0.0);
    T c = T(0.0);
    Moments<T> mu;
};

/// Samples of a simulation. Values at requested times are linearly
/// interpolated between the bracketing solver steps.
template <typename T>
struct TimeSeries {
    std::vector<double> times;
    std::vector<T> c;
    std::vector<Moments<T>> mu;
    std::vector<TracePoint<T>> steps;  // step 0 is the initial state
    std::size_t n_steps = 0;
    double dt_min = std::numeric_limits<double>::infinity();  // truncated final step excluded
    double dt_max = 0.0;
    std::vector<std::string> warnings;
    std::optional<PSSD<T>> final_pssd;

    std::size_t size() const { return times.size(); }
    T crystal_volume(std::size_t k) const { return mu[k].mu12; }
    T mean_L1(std::size_t k) const { return ad::primal(mu[k].mu00) == 0.0 ? T(0.0) : T(mu[k].mu10 / mu[k].mu00); }
    T mean_L2(std::size_t k) const { return ad::primal(mu[k].mu00) == 0.0 ? T(0.0) : T(mu[k].mu01 / mu[k].mu00); }
};

/// n uniformly spaced times k t_max / n for k = 1..n, with t = 0 prepended
/// when requested.
inline std::vector<double> uniform_times(double t_max, std::size_t n, bool include_zero) {
    std::vector<double> t;
    if (include_zero) t.push_back(0.0);
    for (std::size_t k = 1; k <= n; ++k) t.push_back(static_cast<double>(k) * t_max / static_cast<double>(n));
    return t;
}

namespace detail {

template <typename T>
Moments<T> lerp(const Moments<T>& a, const Moments<T>& b, const T& w) {
    auto l = [&](const T& x, const T& y) { return x + w * (y - x); };
    return {l(a.mu00, b.mu00), l(a.mu10, b.mu10), l(a.mu01, b.mu01),
            l(a.mu11, b.mu11), l(a.mu02, b.mu02), l(a.mu12, b.mu12)};
}

}  // namespace detail

/// Runs the coupled FVM / mass-balance loop from an explicit initial PSSD.
template <typename T>
TimeSeries<T> simulate(const SimulationConfig& cfg, const GrowthLaw<T>& law, PSSD<T> pssd,
                       const std::vector<double>& sample_times, bool keep_final_pssd = false) {
    cfg.validate();
    validate(law);
    for (std::size_t k = 0; k < sample_times.size(); ++k) {
        if (!(sample_times[k] >= 0.0 && sample_times[k] <= cfg.t_max) ||
            (k > 0 && !(sample_times[k] > sample_times[k - 1]))) {
            throw ConfigError("sample times must be strictly increasing within [0, t_max]");
        }
    }
    if (!(pssd.grid == cfg.grid)) throw ContractError("initial PSSD grid differs from the configured grid");

    TimeSeries<T> ts;
    const Grid2D& g = cfg.grid;
    const double t_max = cfg.t_max;
    T t(0.0);
    T c(cfg.c0);
    Moments<T> mu = moments(pssd);
    ts.steps.push_back({t, c, mu});

    if (!(ad::primal(supersaturation(c, cfg.temperature, cfg.material)) > 1.0)) {
        ts.warnings.push_back("initial supersaturation <= 1: no growth occurs");
    }

    while (ad::primal(t) < t_max) {
        const T S = supersaturation(c, cfg.temperature, cfg.material);
        const T G1 = growth_rate(law, 1, S, cfg.temperature);
        const T G2 = growth_rate(law, 2, S, cfg.temperature);
        T dt = cfl_dt(G1, G2, g, cfg.courant);
        if (!std::isfinite(ad::primal(dt))) {
            // nothing moves for the rest of the horizon
            t = T(t_max);
            ts.steps.push_back({t, c, mu});
            break;
        }
        const bool last = ad::primal(t) + ad::primal(dt) >= t_max;
        if (last) dt = t_max - t;
        const T C1 = G1 * dt / g.dL1;
        const T C2 = G2 * dt / g.dL2;
        split_step(pssd, C1, C2, cfg.kernel);
        const Moments<T> next = moments(pssd);
        c = update_concentration(c, mu.mu12, next.mu12, cfg.material);
        mu = next;
        t = last ? T(t_max) : T(t + dt);
        ++ts.n_steps;
        const double dtp = ad::primal(dt);
        if (!last || ts.n_steps == 1) ts.dt_min = std::min(ts.dt_min, dtp);
        ts.dt_max = std::max(ts.dt_max, dtp);
        ts.steps.push_back({t, c, mu});
    }

    std::size_t k = 0;
    for (double s : sample_times) {
        while (k + 2 < ts.steps.size() && ad::primal(ts.steps[k + 1].t) < s) ++k;
        const auto& a = ts.steps[k];
        if (k + 1 >= ts.steps.size() || s <= ad::primal(a.t)) {
            ts.times.push_back(s);
            ts.c.push_back(a.c);
            ts.mu.push_back(a.mu);
            continue;
        }
        const auto& b = ts.steps[k + 1];
        if (s == ad::primal(b.t)) {
            ts.times.push_back(s);
            ts.c.push_back(b.c);
            ts.mu.push_back(b.mu);
            continue;
        }
        const T w = (s - a.t) / (b.t - a.t);
        ts.times.push_back(s);
        ts.c.push_back(a.c + w * (b.c - a.c));
        ts.mu.push_back(detail::lerp(a.mu, b.mu, w));
    }
    if (keep_final_pssd) ts.final_pssd = std::move(pssd);
    return ts;
}

/// Seeds from the configuration and samples at `output_samples` uniform
/// times plus t = 0.
inline TimeSeries<double> simulate(const SimulationConfig& cfg, bool keep_final_pssd = true) {
    cfg.validate();
    return simulate<double>(cfg, cfg.growth, seed_pssd(cfg.seed, cfg.grid, cfg.material),
                            uniform_times(cfg.t_max, cfg.output_samples, true), keep_final_pssd);
}

}  // namespace popbal
