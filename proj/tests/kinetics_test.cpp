#include "popbal/ad.hpp"
#include "popbal/kinetics.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace popbal;

namespace {
const MaterialProperties mat;
}

TEST(Solubility, Values) {
    EXPECT_EQ(solubility(0.0, mat), 3.37);
    EXPECT_NEAR(solubility(15.0, mat), 5.783, 5e-4);
    EXPECT_NEAR(solubility(20.0, mat), 6.923, 5e-4);
    EXPECT_LT(solubility(10.0, mat), solubility(10.5, mat));
}

TEST(Supersaturation, Values) {
    EXPECT_EQ(supersaturation(solubility(12.0, mat), 12.0, mat), 1.0);
    EXPECT_EQ(supersaturation(0.0, 15.0, mat), 0.0);
    EXPECT_NEAR(supersaturation(8.0, 15.0, mat), 1.3834, 1e-4);
}

TEST(GrowthRate, ArrheniusBaseCase) {
    const auto law = default_arrhenius();
    EXPECT_EQ(growth_rate(law, 1, 1.0, 15.0), 0.0);
    const double S = 8.0 / solubility(15.0, mat);
    const double expect = 8.86e6 * std::exp(-2450.0 / 288.15) * std::pow(S - 1.0, 3.7);
    EXPECT_NEAR(growth_rate(law, 1, S, 15.0), expect, 1e-12 * expect);
    EXPECT_NEAR(growth_rate(law, 1, S, 15.0), 51.8, 0.05);
    const double g2 = 4.088e5 * std::exp(-2400.0 / 288.15) * std::pow(S - 1.0, 2.5);
    EXPECT_NEAR(growth_rate(law, 2, S, 15.0), g2, 1e-12 * g2);
}

TEST(GrowthRate, Polynomial) {
    const auto law = polynomial_law(std::vector<double>{2.0, 3.0});
    EXPECT_NEAR(growth_rate(law, 1, 1.2, 15.0), 0.52, 1e-15);
    EXPECT_NEAR(growth_rate(law, 2, 1.2, 15.0), 0.52, 1e-15);
    const auto split = polynomial_law(std::vector<double>{1.0}, std::vector<double>{0.0, 5.0});
    EXPECT_NEAR(growth_rate(split, 1, 1.5, 15.0), 0.5, 1e-15);
    EXPECT_NEAR(growth_rate(split, 2, 1.5, 15.0), 1.25, 1e-15);
}

TEST(GrowthRate, ClampedBelowSaturation) {
    for (double S : {0.0, 0.5, 1.0}) {
        EXPECT_EQ(growth_rate(default_arrhenius(), 2, S, 10.0), 0.0);
        EXPECT_EQ(growth_rate(polynomial_law(std::vector<double>{1.0}), 1, S, 10.0), 0.0);
    }
    // continuity from above
    EXPECT_LT(growth_rate(polynomial_law(std::vector<double>{1.0}), 1, 1.0 + 1e-12, 10.0), 1e-11);
    EXPECT_LT(growth_rate(default_arrhenius(), 1, 1.0 + 1e-9, 10.0), 1e-20);
}

TEST(GrowthRate, BadDimension) {
    EXPECT_THROW(growth_rate(default_arrhenius(), 0, 1.5, 15.0), ContractError);
    EXPECT_THROW(growth_rate(default_arrhenius(), 3, 1.5, 15.0), ContractError);
}

TEST(GrowthRate, MonotoneInSupersaturation) {
    const auto a = default_arrhenius();
    const auto p = polynomial_law(std::vector<double>{0.3, 0.0, 2.0});
    double pa = 0.0, pp = 0.0;
    for (double S = 1.0; S <= 2.5; S += 0.01) {
        const double ga = growth_rate(a, 1, S, 15.0), gp = growth_rate(p, 2, S, 15.0);
        EXPECT_GE(ga, pa);
        EXPECT_GE(gp, pp);
        pa = ga;
        pp = gp;
    }
}

TEST(GrowthLaw, Validation) {
    EXPECT_NO_THROW(validate(default_arrhenius()));
    EXPECT_THROW(validate(polynomial_law(std::vector<double>{})), ConfigError);
    EXPECT_THROW(validate(polynomial_law(std::vector<double>{0.1, -0.2})), ConfigError);
    auto bad = default_arrhenius();
    std::get<Arrhenius<double>>(bad.model).dim[1].k3 = 0.0;
    EXPECT_THROW(validate(bad), ConfigError);
}

// Dual-number derivatives with respect to S and to every parameter against
// central differences.
TEST(Derivatives, MatchCentralDifferences) {
    using ad::Dual;
    const double h = 1e-6;
    for (double S : {1.1, 1.5, 2.0}) {
        for (int m : {1, 2}) {
            const auto law = default_arrhenius();
            const auto lawd = law_cast<Dual>(law);
            const double dS = growth_rate(lawd, m, Dual(S, 1.0), 15.0).tangent;
            const double fd = (growth_rate(law, m, S + h, 15.0) - growth_rate(law, m, S - h, 15.0)) / (2 * h);
            EXPECT_NEAR(dS, fd, 1e-6 * std::abs(fd));

            for (int param = 0; param < 3; ++param) {
                auto ld = law_cast<Dual>(law);
                auto& r = std::get<Arrhenius<Dual>>(ld.model).dim[m - 1];
                Dual* p = param == 0 ? &r.k1 : (param == 1 ? &r.k2 : &r.k3);
                p->tangent = 1.0;
                const double d = growth_rate(ld, m, Dual(S), 15.0).tangent;
                auto shifted = [&](double delta) {
                    auto l = law;
                    auto& q = std::get<Arrhenius<double>>(l.model).dim[m - 1];
                    double* v = param == 0 ? &q.k1 : (param == 1 ? &q.k2 : &q.k3);
                    const double step = delta * std::max(1.0, std::abs(*v));
                    *v += step;
                    return std::pair{growth_rate(l, m, S, 15.0), step};
                };
                const auto [up, hu] = shifted(h);
                const auto [dn, hd] = shifted(-h);
                const double fdp = (up - dn) / (hu - hd);
                EXPECT_NEAR(d, fdp, 1e-6 * std::abs(fdp)) << "S=" << S << " m=" << m << " param " << param;
            }
        }
        const auto poly = polynomial_law(std::vector<double>{0.4, 1.5, 0.7});
        const double dS = growth_rate(law_cast<Dual>(poly), 1, Dual(S, 1.0), 15.0).tangent;
        const double fd = (growth_rate(poly, 1, S + h, 15.0) - growth_rate(poly, 1, S - h, 15.0)) / (2 * h);
        EXPECT_NEAR(dS, fd, 1e-6 * std::abs(fd));
        const double dsol = supersaturation(Dual(8.0, 1.0), 15.0, mat).tangent;
        EXPECT_NEAR(dsol, 1.0 / solubility(15.0, mat), 1e-15);
    }
}

TEST(Derivatives, ZeroOnClampedBranch) {
    using ad::Dual;
    auto law = law_cast<Dual>(polynomial_law(std::vector<double>{1.0, 1.0}));
    auto& c = std::get<Polynomial<Dual>>(law.model).coeffs[0];
    c[0].tangent = 1.0;
    const Dual g = growth_rate(law, 1, Dual(0.9, 1.0), 15.0);
    EXPECT_EQ(g.value, 0.0);
    EXPECT_EQ(g.tangent, 0.0);
}
