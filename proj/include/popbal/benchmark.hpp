#pragma once

// Timing sweeps over the growth-rate ratio G1/G2 (changes the CFL step count)
// and over the bin size (changes the cell count and the step count). Every
// point is verified against the moment solver before it is timed.

#include "popbal/config.hpp"
#include "popbal/fvm.hpp"
#include "popbal/io.hpp"
#include "popbal/kinetics.hpp"
#include "popbal/verification.hpp"

#include <chrono>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

namespace popbal {

/// Multiplies the dimension-1 rate by `factor`, so G1/G2 changes by the
/// same factor at every supersaturation.
inline GrowthLaw<double> scale_growth_ratio(const GrowthLaw<double>& law, double factor) {
    if (!(factor > 0.0)) throw ConfigError("growth ratio factor must be positive");
    GrowthLaw<double> out = law;
    if (auto* a = std::get_if<Arrhenius<double>>(&out.model)) {
        a->dim[0].k1 *= factor;
    } else {
        for (double& c : std::get<Polynomial<double>>(out.model).coeffs[0]) c *= factor;
    }
    return out;
}

struct BenchmarkPoint {
    std::string sweep_param;  // growth_ratio or bin_size
    double value = 0.0;
    SimulationConfig cfg;
};

inline std::vector<BenchmarkPoint> benchmark_points(const RunConfig& rc) {
    std::vector<BenchmarkPoint> pts;
    for (double r : rc.benchmark.growth_ratios) {
        BenchmarkPoint p{"growth_ratio", r, rc.sim};
        p.cfg.growth = scale_growth_ratio(rc.sim.growth, r);
        pts.push_back(std::move(p));
    }
    for (double b : rc.benchmark.bin_sizes) {
        BenchmarkPoint p{"bin_size", b, rc.sim};
        p.cfg.grid = build_grid(rc.sim.grid.L1_max, rc.sim.grid.L2_max, b, b);
        pts.push_back(std::move(p));
    }
    return pts;
}

struct BenchmarkResult {
    std::vector<BenchmarkRow> rows;
    VerificationReport report;
    bool passed = true;
    std::string failure;  // first failing point, when !passed
};

namespace detail {

inline void mean_stddev(const std::vector<double>& x, double& mean, double& sd) {
    mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    sd = x.size() > 1 ? std::sqrt(ss / static_cast<double>(x.size() - 1)) : 0.0;
}

}  // namespace detail

/// Verifies and times each point for each kernel. Stops at the first failed
/// check; rows gathered so far are discarded by callers that need
/// all-or-nothing output.
inline BenchmarkResult run_benchmark(const RunConfig& rc, std::size_t repeats) {
    if (repeats < 1) throw ConfigError("repeats must be at least 1");
    BenchmarkResult out;
    for (const auto& pt : benchmark_points(rc)) {
        const std::string tag = pt.sweep_param + "=" + std::to_string(pt.value);
        std::optional<PSSD<double>> reference;
        for (Kernel kernel : rc.benchmark.kernels) {
            SimulationConfig cfg = pt.cfg;
            cfg.kernel = kernel;
            OracleRun run = run_with_oracle(cfg, rc.mom_steps, rc.tolerance);
            for (auto& c : run.report.checks) c.name = tag + " " + to_string(kernel) + " " + c.name;
            out.report.append(run.report);
            if (!run.report.passed()) {
                out.passed = false;
                out.failure = tag + " (" + to_string(kernel) + ") deviates from the moment solver";
                return out;
            }
            if (!reference) {
                reference = *run.fvm.final_pssd;
            } else {
                auto cmp = compare_pssd(*reference, *run.fvm.final_pssd, 0.0, tag + " " + to_string(kernel) + " final_pssd");
                out.report.append(cmp);
                if (!cmp.passed()) {
                    out.passed = false;
                    out.failure = tag + ": kernels disagree on the final PSSD";
                    return out;
                }
            }

            const PSSD<double> seed = seed_pssd(cfg.seed, cfg.grid, cfg.material);
            const auto times = uniform_times(cfg.t_max, cfg.output_samples, true);
            std::vector<double> ms;
            std::size_t steps = 0;
            for (std::size_t r = 0; r < repeats; ++r) {
                const auto t0 = std::chrono::steady_clock::now();
                const auto ts = simulate<double>(cfg, cfg.growth, seed, times);
                ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
                steps = ts.n_steps;
            }
            BenchmarkRow row{pt.sweep_param, pt.value, kernel, 0.0, 0.0, steps};
            detail::mean_stddev(ms, row.mean_ms, row.stddev_ms);
            out.rows.push_back(row);
        }
    }
    return out;
}

}  // namespace popbal
