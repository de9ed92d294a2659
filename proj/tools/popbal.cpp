// popbal command-line driver. Exit codes: 0 success, 1 usage/config/solver
// error, 2 verification failure.

#include "popbal/popbal.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace popbal;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_error = 1;
constexpr int exit_verification = 2;

struct Options {
    std::string config;
    std::string out = ".";
    std::optional<std::size_t> repeats;
    std::optional<std::string> kernel;
};

// Files are rendered in memory first and written only once every
// computation has succeeded.
using Outputs = std::map<std::string, std::string>;

template <typename Fn>
std::string render(Fn&& fn) {
    std::ostringstream os;
    fn(os);
    return os.str();
}

void write_outputs(const std::string& dir, const Outputs& files) {
    fs::create_directories(dir);
    for (const auto& [name, body] : files) {
        const fs::path path = fs::path(dir) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ConfigError("cannot write '" + path.string() + "'");
        out << body;
        if (!out) throw ConfigError("failed writing '" + path.string() + "'");
    }
}

RunConfig load(const Options& o) {
    RunConfig rc = load_config(o.config);
    if (o.kernel) {
        rc.sim.kernel = parse_kernel(*o.kernel);
        rc.benchmark.kernels = {rc.sim.kernel};
    }
    if (o.repeats) {
        if (*o.repeats < 1) throw ConfigError("--repeats must be at least 1");
        rc.benchmark.repeats = *o.repeats;
    }
    return rc;
}

void print_report(const VerificationReport& r) {
    for (const auto& c : r.checks) {
        std::cerr << (c.passed ? "pass " : "FAIL ") << c.name << "  max deviation " << c.max_rel_deviation
                  << " (tolerance " << c.tolerance << ")";
        if (c.offending_time) std::cerr << " first at t = " << *c.offending_time << " min";
        std::cerr << '\n';
    }
}

int cmd_simulate(const Options& o) {
    const RunConfig rc = load(o);
    const TimeSeries<double> ts = simulate(rc.sim, true);
    for (const auto& w : ts.warnings) std::cerr << "warning: " << w << '\n';
    Outputs files;
    files["timeseries.csv"] = render([&](std::ostream& os) { write_timeseries_csv(os, ts); });
    files["final_pssd.csv"] = render([&](std::ostream& os) { write_pssd_csv(os, *ts.final_pssd); });
    write_outputs(o.out, files);
    std::cerr << ts.n_steps << " steps to t = " << rc.sim.t_max << " min\n";
    return exit_ok;
}

int cmd_moments(const Options& o) {
    const RunConfig rc = load(o);
    const SimulationConfig& s = rc.sim;
    s.validate();
    const MomentState init = moments_of_seed(s.seed, s.material, s.c0);
    const MomentTrace tr = mom_solve(init, s.temperature, s.growth, s.material, s.t_max, rc.mom_steps);
    write_outputs(o.out, {{"moments.csv", render([&](std::ostream& os) { write_moment_trace_csv(os, tr); })}});
    return exit_ok;
}

int cmd_verify(const Options& o) {
    const RunConfig rc = load(o);
    OracleRun run = run_with_oracle(rc.sim, rc.mom_steps, rc.tolerance);
    VerificationReport report = run.report;

    // kernel cross-check against the other variant
    SimulationConfig other = rc.sim;
    other.kernel = rc.sim.kernel == Kernel::serial ? Kernel::parallel : Kernel::serial;
    const TimeSeries<double> ts = simulate(other, true);
    report.append(compare_pssd(*run.fvm.final_pssd, *ts.final_pssd, 0.0, "kernel_final_pssd"));

    write_outputs(o.out, {{"verification.jsonl", render([&](std::ostream& os) { write_jsonl(os, report); })}});
    print_report(report);
    return report.passed() ? exit_ok : exit_verification;
}

int cmd_benchmark(const Options& o) {
    const RunConfig rc = load(o);
    const BenchmarkResult res = run_benchmark(rc, rc.benchmark.repeats);
    Outputs files;
    files["verification.jsonl"] = render([&](std::ostream& os) { write_jsonl(os, res.report); });
    if (!res.passed) {
        write_outputs(o.out, files);
        print_report(res.report);
        std::cerr << "benchmark aborted: " << res.failure << '\n';
        return exit_verification;
    }
    files["benchmark.csv"] = render([&](std::ostream& os) { write_benchmark_csv(os, res.rows); });
    write_outputs(o.out, files);
    return exit_ok;
}

int cmd_estimate(const Options& o) {
    const RunConfig rc = load(o);
    const EstimationSetup& setup = rc.estimation.setup;
    const GrowthLaw<double>& truth = rc.sim.growth;

    const VerificationReport pre = verify_forward_model(setup, truth, rc.tolerance);
    Outputs files;
    files["verification.jsonl"] = render([&](std::ostream& os) { write_jsonl(os, pre); });
    if (!pre.passed()) {
        write_outputs(o.out, files);
        print_report(pre);
        std::cerr << "estimation aborted: forward model deviates from the moment solver\n";
        return exit_verification;
    }

    const LossModel model(generate_experiments(truth, setup), setup);
    std::vector<EstimationReport> reports;
    for (std::size_t k : rc.estimation.k_values) {
        for (Backend b : rc.estimation.backends) {
            reports.push_back(estimate(model, k, b));
            const auto& r = reports.back();
            std::cerr << "k=" << k << ' ' << to_string(b) << ": loss " << r.initial_loss() << " -> " << r.final_loss
                      << ", " << r.mean_iter_ms << " ms/iteration\n";
        }
    }
    files["estimation.csv"] = render([&](std::ostream& os) { write_estimation_csv(os, reports); });
    files["iteration_timing.csv"] = render([&](std::ostream& os) { write_iteration_timing_csv(os, reports); });
    write_outputs(o.out, files);
    return exit_ok;
}

int guarded(const std::function<int()>& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
    } catch (const ComparisonError& e) {
        std::cerr << "comparison error: " << e.what() << '\n';
    } catch (const Error& e) {
        std::cerr << "solver error: " << e.what() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
    }
    return exit_error;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"2D population balance solver with moment-method verification and parameter estimation"};
    app.require_subcommand(1);
    Options o;

    const std::map<std::string, std::pair<std::string, std::function<int(const Options&)>>> commands{
        {"simulate", {"run the FVM solver; writes timeseries.csv and final_pssd.csv", cmd_simulate}},
        {"moments", {"run the method-of-moments solver; writes moments.csv", cmd_moments}},
        {"verify", {"check the FVM against the moment solver and across kernels", cmd_verify}},
        {"benchmark", {"verified timing sweeps; writes benchmark.csv", cmd_benchmark}},
        {"estimate", {"growth-parameter estimation; writes estimation.csv and iteration_timing.csv", cmd_estimate}},
    };
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, entry] : commands) {
        CLI::App* sub = app.add_subcommand(name, entry.first);
        sub->add_option("--config", o.config, "INI configuration file")->required();
        sub->add_option("--out", o.out, "output directory (created if missing)");
        sub->add_option("--repeats", o.repeats, "timing repeats per benchmark point");
        sub->add_option("--kernel", o.kernel, "sweep kernel: serial or parallel");
        subs[name] = sub;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_error;
    }
    for (const auto& [name, sub] : subs) {
        if (sub->parsed()) return guarded([&] { return commands.at(name).second(o); });
    }
    return exit_error;
}
