#include <gtest/gtest.h>

#include <hessian_lab/abp_toolkit.hpp>

#include <cmath>
#include <random>

#include "support/fixtures.hpp"

using namespace hessian_lab;

namespace {

template <int Dim>
BallField<Dim> paraboloid(int resolution, double scale)
{
    const BallDomain<Dim> ball(1.0, resolution);
    return BallField<Dim>::sample(ball, [&](const Vec<Dim>& x) { return scale * (x.squaredNorm() - 1.0); });
}

}  // namespace

TEST(ContactSet, ParaboloidMaskIsTheQuarterBall)
{
    const auto v = paraboloid<2>(64, 1.0);
    const auto cs = contact_set(v, 1.0);
    const auto& dom = v.domain();
    for (auto p : dom.interior()) EXPECT_EQ(cs.mask[p], dom.offset(p).norm() < 0.25 - 1e-12) << p;
    EXPECT_DOUBLE_EQ(cs.gradient_bound_used, 0.5);
    EXPECT_NEAR(cs.min_det, 4.0, 1e-9);
}

TEST(ContactSet, PreconditionViolationReportsValues)
{
    const auto v = paraboloid<2>(16, 1.0);
    try {
        contact_set(v, 1.5);
        FAIL() << "expected ArgumentError";
    } catch (const ArgumentError& e) {
        EXPECT_NE(std::string(e.what()).find("eps = 1.5"), std::string::npos);
    }
}

TEST(ContactSet, ConcaveBumpExcludesNearbyPoints)
{
    // paraboloid with a concave dent around (0.1, 0): the dent cannot carry a supporting plane
    const BallDomain<2> ball(1.0, 64);
    const auto v = BallField<2>::sample(ball, [](const Vec<2>& x) {
        const Vec<2> d = x - Vec<2>(0.1, 0.0);
        return x.squaredNorm() - 1.0 + 0.02 * std::exp(-d.squaredNorm() / 0.002);
    });
    const auto cs = contact_set(v, 0.9);
    for (auto p : cs.points) {
        EXPECT_GT((ball.offset(p) - Vec<2>(0.1, 0.0)).norm(), 0.02);
        EXPECT_GE(v.hessian(p).determinant(), -1e-8);
    }
}

TEST(ContactSet, MaskShrinksWithEpsilon)
{
    const BallDomain<2> ball(1.0, 64);
    const auto v = BallField<2>::sample(ball, [](const Vec<2>& x) {
        return x.squaredNorm() + 0.3 * x(0) * x(0) - 1.0 + 0.05 * std::sin(3 * x(1));
    });
    std::vector<bool> prev;
    for (double eps : {0.8, 0.4, 0.2, 0.1, 0.05}) {
        const auto cs = contact_set(v, eps);
        if (!prev.empty())
            for (std::size_t p = 0; p < prev.size(); ++p)
                if (cs.mask[p]) EXPECT_TRUE(prev[p]);
        prev = cs.mask;
    }
}

TEST(AbpCheck, EqualityCaseInTwoDimensions)
{
    const auto r = abp_check(paraboloid<2>(128, 1.0), 1.0);
    EXPECT_NEAR(r.c0_eps_n, M_PI / 4.0, 1e-15);
    EXPECT_NEAR(r.ma_mass / r.c0_eps_n, 1.0, 0.02);
    EXPECT_TRUE(r.pass);
}

TEST(AbpCheck, ScaledParaboloidIsEqualityAgain)
{
    const auto r = abp_check(paraboloid<2>(128, 2.0), 2.0);
    EXPECT_NEAR(r.ma_mass / M_PI, 1.0, 0.02);
    EXPECT_NEAR(r.c0_eps_n, M_PI, 1e-14);
    EXPECT_TRUE(r.pass);
}

TEST(AbpCheck, AffineInvariance)
{
    // at 128 the lattice count of P alone moves the mass by up to 2%
    const BallDomain<2> ball(1.0, 256);
    const auto v = BallField<2>::sample(ball, [](const Vec<2>& x) { return x.squaredNorm() - 1.0; });
    const auto w = BallField<2>::sample(ball, [](const Vec<2>& x) { return x.squaredNorm() - 1.0 + 0.1 * x(0) - 0.05 * x(1); });
    const auto a = contact_set(v, 0.8), b = contact_set(w, 0.8);
    EXPECT_NE(a.points, b.points);
    EXPECT_NEAR(b.ma_mass / a.ma_mass, 1.0, 0.01);
}

TEST(AbpCheck, RandomConvexFixtures)
{
    std::mt19937_64 rng(2024);
    int passes = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto fx = random_convex_fixture<2>(rng, 256);
        if (abp_check(fx.v, fx.eps).pass) ++passes;
    }
    EXPECT_EQ(passes, 20);
}

TEST(AbpCheck, RandomConvexFixturesInThreeDimensions)
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 3; ++trial) {
        const auto fx = random_convex_fixture<3>(rng, 48);
        EXPECT_TRUE(abp_check(fx.v, fx.eps).pass) << trial;
    }
}

TEST(AbpTestFunction, ZeroPotentialIsTheEqualityCase)
{
    const auto grid = PeriodicGrid<2>::uniform(32);
    const ScalarField<2> phi(grid, 0.0);
    const auto t = abp_test_function(phi, 0, 0.1, 0.25);
    EXPECT_DOUBLE_EQ(t.chart_radius, 0.25);
    EXPECT_NEAR(t.boundary_min, 0.1, 1e-15);
    EXPECT_TRUE(t.precondition_holds);
}

TEST(AbpTestFunction, InteriorMinimumIsStrict)
{
    const auto grid = PeriodicGrid<2>::uniform(32);
    const auto phi = ScalarField<2>::sample(grid, [](const auto& x) {
        return -std::cos(fixtures::kTwoPi * x[0]) - std::cos(fixtures::kTwoPi * x[1]);
    });
    const auto t = abp_test_function(phi, phi.argmin(), 0.1, 0.25);
    EXPECT_GT(t.boundary_min, 0.1 + 1e-3);
}

TEST(AbpOnSolution, ManufacturedInstance)
{
    const auto spec = OperatorSpec::monge_ampere(2, 1.0);
    const auto grid = PeriodicGrid<2>::uniform(32);
    const auto metric = MetricField<2>::sample(grid, fixtures::VariableMetric2::g);
    const auto chi = SymTensorField<2>::sample(grid, fixtures::manufactured_chi);
    const auto rhs = ScalarField<2>::sample(grid, [&](const auto& x) { return fixtures::manufactured_rhs(spec, x); });
    const Problem<2> prob(spec, chi, metric, rhs);
    const auto sol = solve_pair(prob).solution;
    const auto d = abp_on_solution(prob, sol);
    EXPECT_GT(d.contact.points.size(), 0u);
    EXPECT_LE(d.level_excess, 1e-14);
    EXPECT_LE(d.det_excess, 1e-8);
    EXPECT_TRUE(d.abp.pass);
    EXPECT_GT(d.metric_lambda_min, 0.0);
}
