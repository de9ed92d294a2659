#include "popbal/ad.hpp"
#include "popbal/fvm.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>

using namespace popbal;

namespace {

double total_variation(const std::vector<double>& f) {
    double tv = std::abs(f.front()) + std::abs(f.back());  // jumps to the zero ghosts
    for (std::size_t i = 1; i < f.size(); ++i) tv += std::abs(f[i] - f[i - 1]);
    return tv;
}

// Sets POPBAL_THREADS for the lifetime of the guard.
struct ThreadsEnv {
    explicit ThreadsEnv(const char* v) {
        if (const char* old = std::getenv("POPBAL_THREADS")) previous = old;
        setenv("POPBAL_THREADS", v, 1);
    }
    ~ThreadsEnv() {
        if (previous.empty()) unsetenv("POPBAL_THREADS");
        else setenv("POPBAL_THREADS", previous.c_str(), 1);
    }
    std::string previous;
};

SimulationConfig desk_case(double t_max = 60.0) {
    SimulationConfig cfg;
    cfg.grid = build_grid(1200, 600, 5, 5);
    cfg.t_max = t_max;
    cfg.courant = 0.2;
    cfg.output_samples = 30;
    return cfg;
}

}  // namespace

TEST(Smoothness, Examples) {
    EXPECT_EQ(smoothness(0.0, 1.0, 2.0), 1.0);
    EXPECT_EQ(smoothness(0.0, 2.0, 3.0), 2.0);
    EXPECT_EQ(smoothness(4.0, 4.0, 4.0), 0.0);
    // guarded tiny denominator keeps its sign
    EXPECT_EQ(smoothness(0.0, 1e-20, 1e-20 - 1e-31), 1e-20 / -1e-30);
    EXPECT_EQ(smoothness(0.0, 1.0, 1.0), 1.0 / 1e-30);
}

TEST(VanLeer, Examples) {
    EXPECT_EQ(van_leer(1.0), 1.0);
    EXPECT_EQ(van_leer(-1.0), 0.0);
    EXPECT_EQ(van_leer(3.0), 1.5);
    EXPECT_EQ(van_leer(0.0), 0.0);
    EXPECT_LT(van_leer(1e12), 2.0);
}

TEST(CflDt, Examples) {
    const Grid2D g = build_grid(10, 10, 1, 1);
    EXPECT_DOUBLE_EQ(cfl_dt(2.0, 1.0, g, 0.9), 0.45);
    EXPECT_DOUBLE_EQ(cfl_dt(2.0, 0.0, g, 0.9), 0.45);
    EXPECT_DOUBLE_EQ(cfl_dt(0.0, 4.0, g, 0.9), 0.225);
    EXPECT_EQ(cfl_dt(0.0, 0.0, g, 0.9), std::numeric_limits<double>::infinity());
}

TEST(Sweep1d, ZeroGrowthIsIdentity) {
    const std::vector<double> f{0, 1, 3, 2, 0.5, 0};
    EXPECT_EQ(sweep_1d(f, 0.0, 1.0, 1.0), f);
}

TEST(Sweep1d, CourantOneShiftsExactly) {
    const std::vector<double> f{0, 1, 3, 2, 0.5, 0.25, 0};
    const auto g = sweep_1d(f, 2.0, 0.5, 1.0);
    EXPECT_EQ(g[0], 0.0);
    for (std::size_t i = 1; i < f.size(); ++i) EXPECT_EQ(g[i], f[i - 1]);
}

TEST(Sweep1d, TelescopingConservation) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> f(40, 0.0);
        for (std::size_t i = 5; i < 30; ++i) f[i] = u(rng);
        const double C = u(rng);
        const auto g = sweep_1d(f, C, 1.0, 1.0);
        double s0 = 0.0, s1 = 0.0;
        for (double v : f) s0 += v;
        for (double v : g) s1 += v;
        EXPECT_NEAR(s1, s0, 1e-12 * s0);
    }
}

TEST(Sweep1d, OutflowAtRightBoundary) {
    // mass leaving through the last face equals the first-order flux C f_{n-1}
    // plus the limited correction K (F_{n-1/2}) term
    const std::vector<double> f{0, 0, 1, 2, 3};
    const double C = 0.5;
    const auto g = sweep_1d(f, C, 1.0, 1.0);
    double s0 = 0.0, s1 = 0.0;
    for (double v : f) s0 += v;
    for (double v : g) s1 += v;
    const double K = 0.5 * C * (1 - C);
    const double outflow = C * f[4] + K * face_flux(f[4] - f[3], 0.0 - f[4]);
    EXPECT_NEAR(s0 - s1, outflow, 1e-14);
    EXPECT_GT(s0 - s1, 0.0);
}

TEST(Sweep1d, CourantAboveOneRejected) {
    EXPECT_THROW(sweep_1d(std::vector<double>{0, 1, 0}, 1.5, 1.0, 1.0), StabilityError);
    EXPECT_NO_THROW(sweep_1d(std::vector<double>{0, 1, 0}, 1.0 + 1e-13, 1.0, 1.0));
}

TEST(Sweep1d, TotalVariationDiminishing) {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> f(30, 0.0);
        for (std::size_t i = 3; i < 25; ++i) f[i] = u(rng) < 0.3 ? 0.0 : u(rng);
        const auto g = sweep_1d(f, u(rng), 1.0, 1.0);
        EXPECT_LE(total_variation(g), total_variation(f) * (1 + 1e-13));
        for (double v : g) EXPECT_GE(v, 0.0);
    }
}

TEST(SplitStep, ZeroCourantIsIdentity) {
    PSSD<double> p(build_grid(10, 10, 1, 1));
    p(4, 5) = 1.0;
    const auto before = p.f;
    split_step(p, 0.0, 0.0);
    EXPECT_EQ(p.f, before);
}

TEST(SplitStep, DeltaMovesDiagonally) {
    for (Kernel k : {Kernel::serial, Kernel::parallel}) {
        PSSD<double> p(build_grid(10, 10, 1, 1));
        p(4, 5) = 7.0;
        split_step(p, 1.0, 1.0, k);
        for (std::size_t i = 0; i < 10; ++i)
            for (std::size_t j = 0; j < 10; ++j) EXPECT_EQ(p(i, j), (i == 5 && j == 6) ? 7.0 : 0.0);
    }
}

TEST(SplitStep, CourantOneShiftsNCells) {
    const Grid2D g = build_grid(60, 40, 1, 1);
    PSSD<double> p(g);
    p(3, 2) = 1.0;
    p(4, 2) = 0.5;
    const std::size_t N = 25;
    for (std::size_t s = 0; s < N; ++s) split_step(p, 1.0, 1.0);
    for (std::size_t i = 0; i < g.n1; ++i)
        for (std::size_t j = 0; j < g.n2; ++j) {
            const double expect = (j == 2 + N && i == 3 + N) ? 1.0 : ((j == 2 + N && i == 4 + N) ? 0.5 : 0.0);
            EXPECT_EQ(p(i, j), expect);
        }
}

TEST(SplitStep, MeanAdvancesByGrowth) {
    const SimulationConfig cfg = desk_case();
    PSSD<double> p = seed_pssd(cfg.seed, cfg.grid, cfg.material);
    const auto m0 = moments(p);
    const double G1 = 3.0, G2 = 1.0, dt = 0.5;
    split_step(p, G1 * dt / cfg.grid.dL1, G2 * dt / cfg.grid.dL2);
    const auto m1 = moments(p);
    EXPECT_NEAR(m1.mu10 / m1.mu00 - m0.mu10 / m0.mu00, G1 * dt, 0.01 * G1 * dt);
    EXPECT_NEAR(m1.mu01 / m1.mu00 - m0.mu01 / m0.mu00, G2 * dt, 0.01 * G2 * dt);
}

TEST(SplitStep, KernelsAreBitIdentical) {
    ThreadsEnv env("3");
    const SimulationConfig cfg = desk_case();
    PSSD<double> a = seed_pssd(cfg.seed, cfg.grid, cfg.material);
    // add a ragged second population so line extents differ between rows
    for (std::size_t i = 10; i < 30; ++i)
        for (std::size_t j = 5 + i % 7; j < 20; ++j) a(i, j) = 1e3 * std::sin(0.3 * static_cast<double>(i * j));
    for (double& v : a.f) v = std::max(v, 0.0);
    PSSD<double> b = a;
    for (int s = 0; s < 12; ++s) {
        split_step(a, 0.83, 0.41, Kernel::serial);
        split_step(b, 0.83, 0.41, Kernel::parallel);
    }
    EXPECT_EQ(a.f, b.f);
}

TEST(Moments, SingleCell) {
    const Grid2D g = build_grid(400, 200, 2, 2);
    PSSD<double> p(g);
    p(49, 24) = 3.0;  // centre (99, 49)
    EXPECT_EQ(cross_moment(p, 0, 0), 3.0 * 4.0);
    EXPECT_EQ(cross_moment(p, 1, 1), 99.0 * 49.0 * 3.0 * 4.0);
    const auto m = moments(p);
    EXPECT_EQ(m.mu12, 99.0 * 49.0 * 49.0 * 3.0 * 4.0);
    EXPECT_THROW(cross_moment(p, -1, 0), ContractError);
}

TEST(Moments, MatchBruteForceQuadrature) {
    const Grid2D g = build_grid(100, 60, 5, 3);
    PSSD<double> p(g);
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : p.f) v = u(rng) < 0.5 ? 0.0 : u(rng);
    for (int pp = 0; pp <= 2; ++pp)
        for (int q = 0; q <= 3; ++q) {
            long double s = 0.0;
            for (std::size_t i = 0; i < g.n1; ++i)
                for (std::size_t j = 0; j < g.n2; ++j)
                    s += std::pow(static_cast<long double>(g.L1_center(i)), pp) *
                         std::pow(static_cast<long double>(g.L2_center(j)), q) * p(i, j) * g.cell_area();
            EXPECT_NEAR(cross_moment(p, pp, q), static_cast<double>(s), 1e-13 * static_cast<double>(s));
        }
}

TEST(UpdateConcentration, Examples) {
    const MaterialProperties m;
    EXPECT_EQ(update_concentration(5.0, 2e11, 2e11, m), 5.0);
    const double c = update_concentration(5.0, 2e11, 3e11, m);
    EXPECT_LT(c, 5.0);
    EXPECT_NEAR(c + m.rho_kv() * 3e11, 5.0 + m.rho_kv() * 2e11, 1e-15);
    EXPECT_THROW(update_concentration(0.01, 0.0, 1e12, m), InfeasibleError);

    PSSD<double> a(build_grid(10, 10, 1, 1));
    a(3, 3) = 1e9;
    EXPECT_EQ(update_concentration(4.0, a, a, m), 4.0);
}

TEST(Seed, ZeroMass) {
    SeedSpec s;
    s.m0 = 0.0;
    const auto p = seed_pssd(s, build_grid(1200, 600, 5, 5), MaterialProperties{});
    for (double v : p.f) EXPECT_EQ(v, 0.0);
}

TEST(Seed, DefaultsScaleToSeedMass) {
    const MaterialProperties m;
    for (double dl : {1.0, 5.0}) {
        const auto p = seed_pssd(SeedSpec{}, build_grid(1200, 600, dl, dl), m);
        EXPECT_NEAR(m.rho_kv() * cross_moment(p, 1, 2), 1.0, 1e-14);
        const auto mu = moments(p);
        EXPECT_NEAR(mu.mu10 / mu.mu00, 400.0, dl);
        EXPECT_NEAR(mu.mu01 / mu.mu00, 250.0, dl);
    }
}

TEST(Seed, LogNormalMean) {
    SeedSpec s;
    s.shape = SeedShape::log_normal;
    const auto p = seed_pssd(s, build_grid(1200, 600, 2, 2), MaterialProperties{});
    const auto mu = moments(p);
    EXPECT_NEAR(mu.mu10 / mu.mu00, 400.0, 2.0);
    EXPECT_NEAR(mu.mu01 / mu.mu00, 250.0, 2.0);
}

TEST(Seed, GridTooSmall) {
    EXPECT_THROW(seed_pssd(SeedSpec{}, build_grid(420, 600, 5, 5), MaterialProperties{}), ConfigError);
}

TEST(Simulate, SaturatedSolutionStaysConstant) {
    SimulationConfig cfg = desk_case(500.0);
    cfg.c0 = solubility(cfg.temperature, cfg.material);
    const auto ts = simulate(cfg);
    EXPECT_FALSE(ts.warnings.empty());
    for (std::size_t k = 0; k < ts.size(); ++k) {
        EXPECT_EQ(ts.c[k], cfg.c0);
        EXPECT_EQ(ts.mu[k].mu12, ts.mu[0].mu12);
    }
    EXPECT_EQ(ts.steps.back().t, cfg.t_max);
}

TEST(Simulate, BaseCaseMonotoneAndConservative) {
    const SimulationConfig cfg = desk_case();
    const auto ts = simulate(cfg);
    ASSERT_EQ(ts.size(), cfg.output_samples + 1);
    const double cstar = solubility(cfg.temperature, cfg.material);
    const double rk = cfg.material.rho_kv();
    const double invariant0 = ts.steps[0].c + rk * ts.steps[0].mu.mu12;
    for (std::size_t k = 1; k < ts.steps.size(); ++k) {
        const auto& s = ts.steps[k];
        EXPECT_LT(s.c, ts.steps[k - 1].c);
        EXPECT_GT(s.c, cstar);
        EXPECT_GT(s.mu.mu12, ts.steps[k - 1].mu.mu12);
        EXPECT_GT(s.t, ts.steps[k - 1].t);
        EXPECT_NEAR(s.mu.mu00, ts.steps[0].mu.mu00, 1e-9 * ts.steps[0].mu.mu00);
        EXPECT_NEAR(s.c + rk * s.mu.mu12, invariant0, 1e-12 * invariant0);
    }
    EXPECT_EQ(ts.steps.back().t, cfg.t_max);
    for (double v : ts.final_pssd->f) EXPECT_GE(v, 0.0);
    for (std::size_t k = 1; k < ts.size(); ++k) EXPECT_GT(ts.times[k], ts.times[k - 1]);
}

TEST(Simulate, SamplesInterpolateBetweenSteps) {
    const SimulationConfig cfg = desk_case(20.0);
    const auto seed = seed_pssd(cfg.seed, cfg.grid, cfg.material);
    const auto& steps = simulate<double>(cfg, cfg.growth, seed, {}).steps;
    const double t = 0.5 * (steps[3].t + steps[4].t);
    const auto ts = simulate<double>(cfg, cfg.growth, seed, {steps[2].t, t});
    EXPECT_EQ(ts.c[0], steps[2].c);
    EXPECT_NEAR(ts.c[1], 0.5 * (steps[3].c + steps[4].c), 1e-14);
}

TEST(Simulate, DualPrimalMatchesDouble) {
    const SimulationConfig cfg = desk_case(20.0);
    const auto seed = seed_pssd(cfg.seed, cfg.grid, cfg.material);
    const auto times = uniform_times(cfg.t_max, 10, true);
    const auto a = simulate<double>(cfg, cfg.growth, seed, times);
    const auto b = simulate<ad::Dual>(cfg, law_cast<ad::Dual>(cfg.growth), pssd_cast<ad::Dual>(seed), times);
    ASSERT_EQ(a.n_steps, b.n_steps);
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a.c[k], b.c[k].value);
        EXPECT_EQ(a.mu[k].mu12, b.mu[k].mu12.value);
        EXPECT_EQ(b.c[k].tangent, 0.0);
    }
}

TEST(Simulate, VarPrimalMatchesDouble) {
    const SimulationConfig cfg = desk_case(20.0);
    const auto seed = seed_pssd(cfg.seed, cfg.grid, cfg.material);
    const auto times = uniform_times(cfg.t_max, 10, true);
    const auto a = simulate<double>(cfg, cfg.growth, seed, times);
    ad::Tape tape;
    ad::TapeScope scope(tape);
    auto law = law_cast<ad::Var>(cfg.growth);
    auto& arr = std::get<Arrhenius<ad::Var>>(law.model);
    arr.dim[0].k1 = ad::Var::input(arr.dim[0].k1.value());
    const auto b = simulate<ad::Var>(cfg, law, pssd_cast<ad::Var>(seed), times);
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a.c[k], b.c[k].value());
        EXPECT_EQ(a.mu[k].mu11, b.mu[k].mu11.value());
    }
}

// d c(t_end) / d k11 by reverse mode through the whole simulation against a
// dual-number pass.
TEST(Simulate, ReverseAndForwardDerivativesAgree) {
    const SimulationConfig cfg = desk_case(20.0);
    const auto seed = seed_pssd(cfg.seed, cfg.grid, cfg.material);
    const std::vector<double> times{cfg.t_max};
    auto dual_law = law_cast<ad::Dual>(cfg.growth);
    std::get<Arrhenius<ad::Dual>>(dual_law.model).dim[0].k3.tangent = 1.0;
    const auto d = simulate<ad::Dual>(cfg, dual_law, pssd_cast<ad::Dual>(seed), times);

    ad::Tape tape;
    ad::TapeScope scope(tape);
    auto law = law_cast<ad::Var>(cfg.growth);
    auto& k3 = std::get<Arrhenius<ad::Var>>(law.model).dim[0].k3;
    k3 = ad::Var::input(k3.value());
    const auto r = simulate<ad::Var>(cfg, law, pssd_cast<ad::Var>(seed), times);
    const double g = tape.gradient(r.c[0].index())[0];
    EXPECT_NE(g, 0.0);
    EXPECT_NEAR(g, d.c[0].tangent, 1e-9 * std::abs(d.c[0].tangent));
}

TEST(Simulate, InvalidConfigRejected) {
    SimulationConfig cfg = desk_case();
    cfg.courant = 1.0;
    EXPECT_THROW(simulate(cfg), ConfigError);
    cfg.courant = 0.5;
    cfg.t_max = -1.0;
    EXPECT_THROW(simulate(cfg), ConfigError);
}

TEST(Threads, EnvironmentOverride) {
    {
        ThreadsEnv env("5");
        EXPECT_EQ(detail::thread_count(), 5u);
    }
    ThreadsEnv bad("zero");
    EXPECT_THROW(detail::thread_count(), ConfigError);
}

TEST(Threads, ChunkErrorsRethrownInOrder) {
    try {
        detail::parallel_chunks(8, 4, [](std::size_t b, std::size_t) {
            if (b >= 2) throw SolverError("chunk " + std::to_string(b));
        });
        FAIL();
    } catch (const SolverError& e) {
        EXPECT_STREQ(e.what(), "chunk 2");
    }
}
