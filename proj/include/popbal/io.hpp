#pragma once

// CSV writers. Every file has a header row, comma separators and round-trip
// precision.

#include "popbal/estimation.hpp"
#include "popbal/fvm.hpp"
#include "popbal/moments.hpp"

#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace popbal {

inline constexpr const char* timeseries_header = "t_min,c_g_per_kg,mu00,mu10,mu01,mu11,mu02,mu12";

namespace detail {

inline void full_precision(std::ostream& os) { os << std::setprecision(std::numeric_limits<double>::max_digits10); }

}  // namespace detail

inline void write_timeseries_csv(std::ostream& os, const TimeSeries<double>& ts) {
    detail::full_precision(os);
    os << timeseries_header << '\n';
    for (std::size_t k = 0; k < ts.size(); ++k) {
        const auto& m = ts.mu[k];
        os << ts.times[k] << ',' << ts.c[k] << ',' << m.mu00 << ',' << m.mu10 << ',' << m.mu01 << ',' << m.mu11 << ','
           << m.mu02 << ',' << m.mu12 << '\n';
    }
}

inline void write_moment_trace_csv(std::ostream& os, const MomentTrace& tr) {
    detail::full_precision(os);
    os << timeseries_header << '\n';
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        const auto& s = tr.states[k];
        os << tr.times[k] << ',' << s.c << ',' << s.mu00 << ',' << s.mu10 << ',' << s.mu01 << ',' << s.mu11 << ','
           << s.mu02 << ',' << s.mu12 << '\n';
    }
}

inline void write_pssd_csv(std::ostream& os, const PSSD<double>& p) {
    detail::full_precision(os);
    os << "i,j,L1_center,L2_center,f\n";
    for (std::size_t i = 0; i < p.grid.n1; ++i)
        for (std::size_t j = 0; j < p.grid.n2; ++j)
            os << i << ',' << j << ',' << p.grid.L1_center(i) << ',' << p.grid.L2_center(j) << ',' << p(i, j) << '\n';
}

struct BenchmarkRow {
    std::string sweep_param;
    double value = 0.0;
    Kernel kernel = Kernel::serial;
    double mean_ms = 0.0, stddev_ms = 0.0;
    std::size_t n_steps = 0;
};

inline void write_benchmark_csv(std::ostream& os, const std::vector<BenchmarkRow>& rows) {
    detail::full_precision(os);
    os << "sweep_param,value,kernel,mean_ms,stddev_ms,n_steps\n";
    for (const auto& r : rows)
        os << r.sweep_param << ',' << r.value << ',' << to_string(r.kernel) << ',' << r.mean_ms << ',' << r.stddev_ms
           << ',' << r.n_steps << '\n';
}

/// One row per iteration of every report, plus a final row holding the loss
/// after the last update. θ columns run to the largest k; shorter vectors
/// leave the remaining cells empty.
inline void write_estimation_csv(std::ostream& os, const std::vector<EstimationReport>& reports) {
    detail::full_precision(os);
    std::size_t kmax = 0;
    for (const auto& r : reports) kmax = std::max(kmax, r.k);
    os << "k,backend,iteration,loss";
    for (std::size_t i = 1; i <= kmax; ++i) os << ",theta_" << i;
    os << ",wall_ms\n";
    auto row = [&](const EstimationReport& r, std::size_t it, double loss, const std::vector<double>& theta,
                   double ms) {
        os << r.k << ',' << to_string(r.backend) << ',' << it << ',' << loss;
        for (std::size_t i = 0; i < kmax; ++i) {
            os << ',';
            if (i < theta.size()) os << theta[i];
        }
        os << ',' << ms << '\n';
    };
    for (const auto& r : reports) {
        for (const auto& rec : r.iterations) row(r, rec.iteration, rec.loss, rec.theta, rec.wall_ms);
        row(r, r.iterations.size(), r.final_loss, r.final_theta, 0.0);
    }
}

inline void write_iteration_timing_csv(std::ostream& os, const std::vector<EstimationReport>& reports) {
    detail::full_precision(os);
    os << "k,backend,mean_iter_ms\n";
    for (const auto& r : reports) os << r.k << ',' << to_string(r.backend) << ',' << r.mean_iter_ms << '\n';
}

}  // namespace popbal
