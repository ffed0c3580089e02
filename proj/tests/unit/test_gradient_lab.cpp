#include <gtest/gtest.h>

#include <hessian_lab/gradient_lab.hpp>

#include <cmath>
#include <random>

#include "support/fixtures.hpp"

using namespace hessian_lab;
using fixtures::kTwoPi;

TEST(Tau, DerivativeIdentity)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const Tau t{1.0 + 4.0 * std::abs(u(rng))};
        const double phi = t.K * u(rng);
        // tau'' - 2 tau'^2 = tau'^2
        EXPECT_NEAR(t.d2(phi) - 2.0 * t.d1(phi) * t.d1(phi), t.d1(phi) * t.d1(phi), 1e-14);
        const double h = 1e-5;
        EXPECT_NEAR((t.value(phi + h) - t.value(phi - h)) / (2 * h), t.d1(phi), 1e-8);
    }
}

TEST(GradientProbe, ZeroPotentialHasNoMaximum)
{
    const auto grid = PeriodicGrid<2>::uniform(32);
    const auto p = gradient_probe(ScalarField<2>(grid, 0.0), MetricField<2>::identity(grid), 0, 0.25);
    EXPECT_EQ(p.K, 0.0);
    EXPECT_EQ(p.max_rho_grad, 0.0);
    EXPECT_FALSE(p.g_finite);
}

TEST(GradientProbe, NearlyLinearPotentialAtTheCentre)
{
    // phi = sin(2 pi x) / (2 pi) has unit slope at x = 0, where rho = 1
    const auto grid = PeriodicGrid<2>::uniform(128);
    const auto phi = ScalarField<2>::sample(grid, [](const auto& x) { return std::sin(kTwoPi * x[0]) / kTwoPi; });
    const auto p = gradient_probe(phi, MetricField<2>::identity(grid), 0, 0.125);
    EXPECT_NEAR(p.max_rho_grad, 1.0, 1e-6);
    EXPECT_NEAR(p.r, 0.125, 1e-15);
    EXPECT_TRUE(p.g_finite);
}

TEST(GradientProbe, RejectsOversizedBall)
{
    const auto grid = PeriodicGrid<2>::uniform(16);
    EXPECT_THROW(gradient_probe(ScalarField<2>(grid, 0.0), MetricField<2>::identity(grid), 0, 0.6), ArgumentError);
}

TEST(EuclideanConstant, FullSweepStaysBelowTheBound)
{
    for (int n : {2, 3}) {
        const auto rep = euclidean_constant_check(convex_sweep(n));
        EXPECT_TRUE(rep.pass) << n;
        EXPECT_EQ(rep.rejected, 0);
        EXPECT_LE(rep.worst_ratio, 1.0);
        EXPECT_GT(rep.rows.size(), 2000u);
    }
}

TEST(EuclideanConstant, ClosedFormRow)
{
    // phi = |x|^2 / 2 on B_1(0): K = 1/2, |D phi(0)| = 0
    const auto row = euclidean_constant_row({{0.0, 0.0}, 1.0, 1.0, {0.0, 0.0}, 1.0});
    EXPECT_DOUBLE_EQ(row.K, 0.5);
    EXPECT_DOUBLE_EQ(row.grad_norm, 0.0);
    EXPECT_DOUBLE_EQ(row.bound, 99.0 * std::sqrt(2.0) * 0.5);
    // phi = 3 x_1 + |x|^2 / 2 on B_1(0): sup |phi| = 3.5 at x = (1, 0)
    const auto lin = euclidean_constant_row({{3.0, 0.0}, 1.0, 1.0, {0.0, 0.0}, 1.0});
    EXPECT_DOUBLE_EQ(lin.K, 3.5);
    EXPECT_DOUBLE_EQ(lin.grad_norm, 3.0);
}

TEST(EuclideanConstant, MembersThatAreNotSolutionsAreRejected)
{
    std::vector<ConvexMember> fam{{{1.0, 0.0}, 2.0, 1.0, {0.0, 0.0}, 1.0}};
    const auto rep = euclidean_constant_check(fam);
    EXPECT_EQ(rep.rejected, 1);
    EXPECT_FALSE(rep.pass);
}

TEST(GrowthCondition, QuadraticGradientGrowthFails)
{
    const auto bad = growth_condition_check(PsiSpec::power(1.0, 2.0));
    EXPECT_FALSE(bad.pass);
    EXPECT_GE(bad.witness_omega, 1e4);
    EXPECT_TRUE(growth_condition_check(PsiSpec::power(1.0, 1.5)).pass);
    EXPECT_TRUE(growth_condition_check(PsiSpec::constant_in_gradient(3.0)).pass);
}

TEST(ConditionV, ConstantsSeparateTheLevelSet)
{
    for (auto op : {OperatorSpec::monge_ampere(2), OperatorSpec::monge_ampere(3), OperatorSpec::hessian_quotient(3, 1)}) {
        const double sup_psi = 2.5;
        const auto c = condition_v_constants(op, sup_psi);
        const std::vector<double> l(static_cast<std::size_t>(op.dim()), c.L);
        EXPECT_GT(op.value(l), sup_psi + c.eps);
    }
    EXPECT_THROW(condition_v_constants(OperatorSpec::monge_ampere(2), 0.0), ArgumentError);
}
