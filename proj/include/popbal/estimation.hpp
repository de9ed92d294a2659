#pragma once

// Growth-parameter estimation: in-silico experiments from the moment solver,
// an RMS-scaled least-squares loss over the FVM model, three gradient
// back-ends and projected Adam.

#include "popbal/ad/scalar.hpp"
#include "popbal/core.hpp"
#include "popbal/error.hpp"
#include "popbal/fvm.hpp"
#include "popbal/kinetics.hpp"
#include "popbal/moments.hpp"
#include "popbal/verification.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace popbal {

struct Experiment {
    double temperature = 15.0;  // °C
    double S0 = 1.0;
    double c0 = 0.0;  // g/kg
    std::vector<double> c, mean_L1, mean_L2;
};

struct ExperimentSet {
    std::vector<double> times;  // shared sample times, min
    std::vector<Experiment> experiments;
};

/// Everything the forward model needs besides the parameters.
struct EstimationSetup {
    Grid2D grid = build_grid(1200.0, 600.0, 5.0, 5.0);
    SeedSpec seed;
    MaterialProperties material;
    double courant = 0.9;
    double t_max = 600.0;  // min
    std::size_t n_samples = 600;
    std::size_t mom_steps = 12000;
    std::vector<double> temperatures{10.0, 15.0, 20.0};
    std::vector<double> supersaturations{1.15, 1.25, 1.5};
    bool independent_dimensions = false;
    double penalty = 1e20;
    double theta0 = 0.1;
    double learning_rate = 0.01;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::size_t iterations = 100;

    void validate() const {
        seed.validate();
        material.validate();
        if (!(t_max > 0.0)) throw ConfigError("estimation t_max must be positive");
        if (!(courant > 0.0 && courant < 1.0)) throw ConfigError("Courant number must lie in (0, 1)");
        if (n_samples < 1) throw ConfigError("n_samples must be at least 1");
        if (mom_steps < n_samples || mom_steps % n_samples != 0) {
            throw ConfigError("mom_steps must be a positive multiple of n_samples");
        }
        if (temperatures.empty() || supersaturations.empty()) throw ConfigError("no experiments configured");
        if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
        if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas in [0, 1)");
        if (!(theta0 >= 0.0)) throw ConfigError("initial coefficients must be non-negative");
    }
};

/// One experiment per (temperature, initial supersaturation) pair, solved
/// with the moment solver and sampled at n_samples uniform times.
inline ExperimentSet generate_experiments(const GrowthLaw<double>& truth, const EstimationSetup& setup) {
    setup.validate();
    validate(truth);
    ExperimentSet set;
    set.times = uniform_times(setup.t_max, setup.n_samples, false);
    const std::size_t stride = setup.mom_steps / setup.n_samples;
    for (double T : setup.temperatures) {
        for (double S0 : setup.supersaturations) {
            Experiment e;
            e.temperature = T;
            e.S0 = S0;
            e.c0 = S0 * solubility(T, setup.material);
            const MomentState init = moments_of_seed(setup.seed, setup.material, e.c0);
            const MomentTrace tr = mom_solve(init, T, truth, setup.material, setup.t_max, setup.mom_steps);
            for (std::size_t k = 1; k <= setup.n_samples; ++k) {
                const MomentState& s = tr.states[k * stride];
                e.c.push_back(s.c);
                e.mean_L1.push_back(s.mu00 == 0.0 ? 0.0 : s.mu10 / s.mu00);
                e.mean_L2.push_back(s.mu00 == 0.0 ? 0.0 : s.mu01 / s.mu00);
            }
            set.experiments.push_back(std::move(e));
        }
    }
    return set;
}

/// Maps a parameter vector onto the polynomial law: shared by both
/// dimensions, or split in halves when dimensions are independent.
template <typename T>
GrowthLaw<T> parameter_law(const std::vector<T>& theta, bool independent_dimensions) {
    if (theta.empty()) throw ConfigError("parameter vector is empty");
    if (!independent_dimensions) return polynomial_law(theta);
    if (theta.size() % 2 != 0) throw ConfigError("independent dimensions need an even parameter count");
    const auto h = static_cast<std::ptrdiff_t>(theta.size() / 2);
    return polynomial_law(std::vector<T>(theta.begin(), theta.begin() + h), std::vector<T>(theta.begin() + h, theta.end()));
}

namespace detail {

inline double rms(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    const double r = x.empty() ? 0.0 : std::sqrt(s / static_cast<double>(x.size()));
    return r > 0.0 ? r : 1.0;
}

}  // namespace detail

/// Forward-model configuration of one experiment.
inline SimulationConfig simulation_config(const EstimationSetup& s, double temperature, double c0,
                                          std::size_t output_samples) {
    SimulationConfig cfg;
    cfg.grid = s.grid;
    cfg.seed = s.seed;
    cfg.material = s.material;
    cfg.t_max = s.t_max;
    cfg.temperature = temperature;
    cfg.c0 = c0;
    cfg.courant = s.courant;
    cfg.kernel = Kernel::serial;
    cfg.output_samples = output_samples;
    return cfg;
}

/// Runs the FVM with the truth law for every experiment and checks it against
/// the moment solver started from the discrete seed.
inline VerificationReport verify_forward_model(const EstimationSetup& s, const GrowthLaw<double>& truth,
                                               double tol_rel) {
    s.validate();
    VerificationReport all;
    for (double T : s.temperatures) {
        for (double S0 : s.supersaturations) {
            SimulationConfig cfg = simulation_config(s, T, S0 * solubility(T, s.material), s.n_samples);
            cfg.growth = truth;
            OracleRun run = run_with_oracle(cfg, s.mom_steps, tol_rel);
            const std::string tag = "T=" + std::to_string(T) + " S0=" + std::to_string(S0) + " ";
            for (auto& c : run.report.checks) c.name = tag + c.name;
            all.append(run.report);
        }
    }
    return all;
}

/// Differentiable loss: sum over experiments, sample times and the three
/// channels (concentration, mean L1, mean L2) of squared residuals, each
/// channel divided by the RMS of its observed series. Forward-model
/// infeasibility returns `penalty` as a constant.
class LossModel {
public:
    LossModel(ExperimentSet data, EstimationSetup setup) : data_(std::move(data)), setup_(std::move(setup)) {
        setup_.validate();
        seed_ = seed_pssd(setup_.seed, setup_.grid, setup_.material);
        for (const auto& e : data_.experiments) {
            if (e.c.size() != data_.times.size() || e.mean_L1.size() != data_.times.size() ||
                e.mean_L2.size() != data_.times.size()) {
                throw ConfigError("experiment series length does not match the sample times");
            }
            scales_.push_back({detail::rms(e.c), detail::rms(e.mean_L1), detail::rms(e.mean_L2)});
        }
    }

    const ExperimentSet& data() const { return data_; }
    const EstimationSetup& setup() const { return setup_; }
    const PSSD<double>& seed() const { return seed_; }

    SimulationConfig experiment_config(const Experiment& e) const {
        return simulation_config(setup_, e.temperature, e.c0, data_.times.size());
    }

    template <typename T>
    T operator()(const std::vector<T>& theta) const {
        const GrowthLaw<T> law = parameter_law(theta, setup_.independent_dimensions);
        std::vector<T> sq;
        sq.reserve(data_.experiments.size() * data_.times.size() * 3);
        try {
            for (std::size_t x = 0; x < data_.experiments.size(); ++x) {
                const Experiment& e = data_.experiments[x];
                const SimulationConfig cfg = experiment_config(e);
                const TimeSeries<T> ts = simulate<T>(cfg, law, pssd_cast<T>(seed_), data_.times);
                const auto& sc = scales_[x];
                for (std::size_t k = 0; k < ts.size(); ++k) {
                    const T r1 = (ts.c[k] - e.c[k]) / sc[0];
                    const T r2 = (ts.mean_L1(k) - e.mean_L1[k]) / sc[1];
                    const T r3 = (ts.mean_L2(k) - e.mean_L2[k]) / sc[2];
                    sq.push_back(r1 * r1);
                    sq.push_back(r2 * r2);
                    sq.push_back(r3 * r3);
                }
            }
        } catch (const InfeasibleError&) {
            return T(setup_.penalty);
        }
        return ad::tree_sum(std::span<const T>(sq));
    }

private:
    ExperimentSet data_;
    EstimationSetup setup_;
    PSSD<double> seed_;
    std::vector<std::array<double, 3>> scales_;
};

enum class Backend { ad, nd_batched, nd_naive };

inline std::string to_string(Backend b) {
    switch (b) {
        case Backend::ad: return "ad";
        case Backend::nd_batched: return "nd-batched";
        case Backend::nd_naive: return "nd-naive";
    }
    return "?";
}

inline Backend parse_backend(const std::string& s) {
    if (s == "ad") return Backend::ad;
    if (s == "nd-batched") return Backend::nd_batched;
    if (s == "nd-naive") return Backend::nd_naive;
    throw ConfigError("unknown backend '" + s + "' (expected ad, nd-batched or nd-naive)");
}

struct LossGradient {
    double loss = 0.0;
    std::vector<double> gradient;
};

/// Reverse mode over one tape spanning every experiment. The tape is kept
/// per thread and cleared between calls: reusing its storage avoids page
/// faulting a fresh multi-megabyte buffer on every gradient.
inline LossGradient grad_ad(const LossModel& model, const std::vector<double>& theta) {
    thread_local ad::Tape tape;
    tape.clear();
    ad::TapeScope scope(tape);
    std::vector<ad::Var> x;
    x.reserve(theta.size());
    for (double v : theta) x.push_back(ad::Var::input(v));
    const ad::Var y = model(x);
    return {y.value(), tape.gradient(y.index())};
}

/// Forward differences with h_i = sqrt(eps) max(1, |θ_i|); `batched`
/// evaluates the perturbed points concurrently, otherwise strictly in order.
template <typename Fn>
LossGradient forward_difference(Fn&& fn, const std::vector<double>& theta, bool batched) {
    const double root_eps = std::sqrt(std::numeric_limits<double>::epsilon());
    LossGradient out;
    out.loss = fn(theta);
    out.gradient.assign(theta.size(), 0.0);
    auto one = [&](std::size_t i) {
        std::vector<double> x = theta;
        x[i] = theta[i] + root_eps * std::max(1.0, std::abs(theta[i]));
        const double h = x[i] - theta[i];
        out.gradient[i] = (fn(x) - out.loss) / h;
    };
    if (batched) {
        detail::parallel_chunks(theta.size(), detail::thread_count(), [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) one(i);
        });
    } else {
        for (std::size_t i = 0; i < theta.size(); ++i) one(i);
    }
    return out;
}

inline LossGradient grad_nd(const LossModel& model, const std::vector<double>& theta, bool batched) {
    return forward_difference([&](const std::vector<double>& x) { return model(x); }, theta, batched);
}

inline LossGradient loss_gradient(const LossModel& model, const std::vector<double>& theta, Backend b) {
    switch (b) {
        case Backend::ad: return grad_ad(model, theta);
        case Backend::nd_batched: return grad_nd(model, theta, true);
        case Backend::nd_naive: return grad_nd(model, theta, false);
    }
    throw ContractError("unknown backend");
}

struct AdamState {
    std::vector<double> theta, m, v;
    std::size_t step = 0;
    double lr = 0.01, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    AdamState() = default;
    AdamState(std::vector<double> theta0, double lr_, double b1, double b2, double eps_)
        : theta(std::move(theta0)), m(theta.size(), 0.0), v(theta.size(), 0.0), lr(lr_), beta1(b1), beta2(b2),
          eps(eps_) {}
};

/// Bias-corrected Adam update followed by projection onto θ >= 0.
inline void adam_step(AdamState& s, const std::vector<double>& g) {
    if (g.size() != s.theta.size()) throw ContractError("gradient size does not match the parameters");
    for (double x : g) {
        if (!std::isfinite(x)) throw SolverError("non-finite gradient passed to Adam");
    }
    ++s.step;
    const double t = static_cast<double>(s.step);
    const double c1 = 1.0 - std::pow(s.beta1, t);
    const double c2 = 1.0 - std::pow(s.beta2, t);
    for (std::size_t i = 0; i < g.size(); ++i) {
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g[i];
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g[i] * g[i];
        const double mh = s.m[i] / c1;
        const double vh = s.v[i] / c2;
        s.theta[i] = std::max(0.0, s.theta[i] - s.lr * mh / (std::sqrt(vh) + s.eps));
    }
}

struct IterationRecord {
    std::size_t iteration = 0;
    double loss = 0.0;
    std::vector<double> theta;
    double wall_ms = 0.0;
};

struct EstimationReport {
    std::size_t k = 0;
    Backend backend = Backend::ad;
    std::vector<IterationRecord> iterations;  // loss and θ before each update
    double final_loss = 0.0;
    std::vector<double> final_theta;
    double mean_iter_ms = 0.0;

    double initial_loss() const { return iterations.empty() ? final_loss : iterations.front().loss; }
};

/// Runs the configured number of Adam iterations from θ = theta0 everywhere.
inline EstimationReport estimate(const LossModel& model, std::size_t k, Backend backend) {
    if (k < 1) throw ConfigError("parameter count must be at least 1");
    const EstimationSetup& s = model.setup();
    AdamState st(std::vector<double>(k, s.theta0), s.learning_rate, s.beta1, s.beta2, s.adam_eps);
    EstimationReport rep;
    rep.k = k;
    rep.backend = backend;
    double total_ms = 0.0;
    for (std::size_t it = 0; it < s.iterations; ++it) {
        const auto t0 = std::chrono::steady_clock::now();
        const LossGradient lg = loss_gradient(model, st.theta, backend);
        IterationRecord rec{it, lg.loss, st.theta, 0.0};
        adam_step(st, lg.gradient);
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        total_ms += rec.wall_ms;
        rep.iterations.push_back(std::move(rec));
    }
    rep.final_theta = st.theta;
    rep.final_loss = model(st.theta);
    rep.mean_iter_ms = s.iterations > 0 ? total_ms / static_cast<double>(s.iterations) : 0.0;
    return rep;
}

}  // namespace popbal
