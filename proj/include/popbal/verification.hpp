#pragma once

// Mechanical checks of FVM output against the moment solver and between
// kernel variants.

#include "popbal/core.hpp"
#include "popbal/error.hpp"
#include "popbal/fvm.hpp"
#include "popbal/moments.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace popbal {

struct Check {
    std::string name;
    bool passed = true;
    double max_rel_deviation = 0.0;
    double tolerance = 0.0;
    std::optional<std::size_t> offending_index;  // first sample (or flat cell) beyond tolerance
    std::optional<double> offending_time;
};

struct VerificationReport {
    std::vector<Check> checks;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
    }
    void append(const VerificationReport& other) { checks.insert(checks.end(), other.checks.begin(), other.checks.end()); }
};

inline nlohmann::json to_json(const Check& c) {
    nlohmann::json j{{"check", c.name},
                     {"status", c.passed ? "pass" : "fail"},
                     {"max_rel_deviation", c.max_rel_deviation},
                     {"tolerance", c.tolerance}};
    j["offending_index"] = c.offending_index ? nlohmann::json(*c.offending_index) : nlohmann::json(nullptr);
    j["offending_time_min"] = c.offending_time ? nlohmann::json(*c.offending_time) : nlohmann::json(nullptr);
    return j;
}

/// One JSON object per line.
inline void write_jsonl(std::ostream& os, const VerificationReport& r) {
    for (const auto& c : r.checks) os << to_json(c).dump() << '\n';
}

inline constexpr double relative_floor = 1e-12;

namespace detail {

inline Check series_check(const std::string& name, const std::vector<double>& fvm, const std::vector<double>& ref,
                          const std::vector<double>& times, double tol) {
    Check c{name, true, 0.0, tol, std::nullopt, std::nullopt};
    for (std::size_t k = 0; k < fvm.size(); ++k) {
        const double dev = std::abs(fvm[k] - ref[k]) / std::max(std::abs(ref[k]), relative_floor);
        if (!(dev <= c.max_rel_deviation)) c.max_rel_deviation = dev;
        if (!(dev <= tol) && !c.offending_index) {
            c.passed = false;
            c.offending_index = k;
            c.offending_time = times[k];
        }
    }
    return c;
}

}  // namespace detail

/// Pairs each FVM sample with the nearest moment-solver time and compares the
/// concentration and μ12 series.
inline VerificationReport verify_against_mom(const TimeSeries<double>& fvm, const MomentTrace& mom,
                                             double tol_rel = 0.01) {
    if (mom.times.empty()) throw ComparisonError("empty moment trace");
    if (fvm.times.empty()) throw ComparisonError("empty FVM series");
    std::vector<double> c_f, c_m, v_f, v_m;
    for (std::size_t k = 0; k < fvm.size(); ++k) {
        const double t = fvm.times[k];
        auto it = std::lower_bound(mom.times.begin(), mom.times.end(), t);
        std::size_t idx = static_cast<std::size_t>(it - mom.times.begin());
        if (idx == mom.times.size() || (idx > 0 && t - mom.times[idx - 1] < mom.times[idx] - t)) {
            idx = idx == 0 ? 0 : idx - 1;
        }
        const double gap = std::abs(mom.times[idx] - t);
        if (!(gap < fvm.dt_min) && gap != 0.0) {
            throw ComparisonError("no moment sample within one FVM step of t = " + std::to_string(t) +
                                  " min (gap " + std::to_string(gap) + ")");
        }
        c_f.push_back(fvm.c[k]);
        c_m.push_back(mom.states[idx].c);
        v_f.push_back(fvm.mu[k].mu12);
        v_m.push_back(mom.states[idx].mu12);
    }
    VerificationReport r;
    r.checks.push_back(detail::series_check("concentration", c_f, c_m, fvm.times, tol_rel));
    r.checks.push_back(detail::series_check("mu12", v_f, v_m, fvm.times, tol_rel));
    return r;
}

/// Max |a - b| relative to max(a); pass iff within tol_abs.
inline VerificationReport compare_pssd(const PSSD<double>& a, const PSSD<double>& b, double tol_abs,
                                       const std::string& name = "final_pssd") {
    if (!(a.grid == b.grid) || a.f.size() != b.f.size()) throw ComparisonError("PSSD grids differ");
    double scale = 0.0;
    for (double v : a.f) scale = std::max(scale, std::abs(v));
    Check c{name, true, 0.0, tol_abs, std::nullopt, std::nullopt};
    const double limit = tol_abs * scale;
    for (std::size_t k = 0; k < a.f.size(); ++k) {
        const double diff = std::abs(a.f[k] - b.f[k]);
        const double rel = scale > 0.0 ? diff / scale : diff;
        if (!(rel <= c.max_rel_deviation)) c.max_rel_deviation = rel;
        if (!(diff <= limit) && !c.offending_index) {
            c.passed = false;
            c.offending_index = k;
        }
    }
    VerificationReport r;
    r.checks.push_back(c);
    return r;
}

/// Moment-solver initial state taken from the discrete seed, so quadrature
/// error in the seed does not enter the comparison.
inline MomentState discrete_initial_state(const PSSD<double>& seed, double c0) {
    return moment_state(moments(seed), c0);
}

/// FVM run plus moment-solver run of the same configuration and their
/// comparison.
struct OracleRun {
    TimeSeries<double> fvm;
    MomentTrace mom;
    VerificationReport report;
};

inline OracleRun run_with_oracle(const SimulationConfig& cfg, std::size_t mom_steps, double tol_rel) {
    cfg.validate();
    const PSSD<double> seed = seed_pssd(cfg.seed, cfg.grid, cfg.material);
    OracleRun out;
    out.fvm = simulate<double>(cfg, cfg.growth, seed, uniform_times(cfg.t_max, cfg.output_samples, true), true);
    out.mom = mom_solve(discrete_initial_state(seed, cfg.c0), cfg.temperature, cfg.growth, cfg.material, cfg.t_max,
                        mom_steps);
    out.report = verify_against_mom(out.fvm, out.mom, tol_rel);
    return out;
}

}  // namespace popbal
