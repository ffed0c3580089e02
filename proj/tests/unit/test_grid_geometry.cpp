#include <gtest/gtest.h>

#include <hessian_lab/grid_geometry.hpp>

#include <cmath>
#include <random>

#include "support/fixtures.hpp"

using namespace hessian_lab;
using fixtures::kTwoPi;

namespace {

MetricField<2> variable_metric(int n)
{
    return MetricField<2>::sample(PeriodicGrid<2>::uniform(n), fixtures::VariableMetric2::g);
}

double christoffel_error(const MetricField<2>& metric, Scheme scheme)
{
    const auto gamma = christoffels(metric, scheme);
    double worst = 0.0;
    for (std::size_t p = 0; p < metric.grid().num_points(); ++p) {
        const auto exact = fixtures::VariableMetric2::christoffel(metric.grid().coords(p));
        for (int k = 0; k < 2; ++k) worst = std::max(worst, (gamma[p][k] - exact[k]).cwiseAbs().maxCoeff());
    }
    return worst;
}

}  // namespace

TEST(PeriodicGrid, RejectsOddOrSmallSizes)
{
    EXPECT_THROW(PeriodicGrid<2>({8, 9}, {1.0, 1.0}), ArgumentError);
    EXPECT_THROW(PeriodicGrid<2>({6, 8}, {1.0, 1.0}), ArgumentError);
    EXPECT_THROW(PeriodicGrid<2>({8, 8}, {1.0, 0.0}), ArgumentError);
}

TEST(PeriodicGrid, IndexWrapsOnEveryAxis)
{
    const PeriodicGrid<3> g({8, 10, 12}, {1.0, 2.0, 3.0});
    EXPECT_EQ(g.index({-1, 0, 0}), g.index({7, 0, 0}));
    EXPECT_EQ(g.index({0, 10, 0}), g.index({0, 0, 0}));
    EXPECT_EQ(g.index({0, 0, -13}), g.index({0, 0, 11}));
    const std::size_t p = g.index({3, 4, 5});
    EXPECT_EQ(g.shifted(p, 2, 8), g.index({3, 4, 1}));
    EXPECT_EQ(g.shifted(p, 0, -4), g.index({7, 4, 5}));
    EXPECT_DOUBLE_EQ(g.spacing(1), 0.2);
}

TEST(ScalarField, RejectsNonFiniteValues)
{
    const auto g = PeriodicGrid<2>::uniform(8);
    std::vector<double> v(g.num_points(), 0.0);
    v[5] = std::nan("");
    EXPECT_THROW(ScalarField<2>(g, v), ArgumentError);
}

TEST(MetricField, NonPositiveDefiniteNamesThePoint)
{
    const auto grid = PeriodicGrid<2>::uniform(8);
    SymTensorField<2> t(grid, Mat<2>::Identity());
    Mat<2> bad = Mat<2>::Identity();
    bad(1, 1) = -0.5;
    t.set(13, bad);
    try {
        MetricField<2> m(t);
        FAIL() << "expected GeometryError";
    } catch (const GeometryError& e) {
        EXPECT_EQ(e.point(), 13u);
    }
}

TEST(MetricField, CachedDeterminantMatches)
{
    const auto m = variable_metric(16);
    for (std::size_t p = 0; p < m.grid().num_points(); ++p)
        EXPECT_NEAR(m.det(p), m.g(p).determinant(), 1e-12 * std::abs(m.g(p).determinant()));
}

TEST(Christoffels, VanishForConstantMetric)
{
    const auto grid = PeriodicGrid<3>::uniform(8);
    Mat<3> g0;
    g0 << 2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 1.5;
    const auto gamma = christoffels(MetricField<3>(SymTensorField<3>(grid, g0)));
    EXPECT_EQ(gamma.operator_norm_bound(), 0.0);
}

TEST(Christoffels, DiagonalMetricMatchesSymbolicAtRandomPoints)
{
    for (double period : {1.0, 2.0}) {
        const auto grid = PeriodicGrid<2>::uniform(128, period);
        const fixtures::DiagonalMetric2 fx{period};
        const auto metric = MetricField<2>::sample(grid, [&](const auto& x) { return fx.g(x); });
        const auto gamma = christoffels(metric);
        std::mt19937_64 rng(7);
        std::uniform_int_distribution<std::size_t> pick(0, grid.num_points() - 1);
        for (int s = 0; s < 20; ++s) {
            const std::size_t p = pick(rng);
            const auto x = grid.coords(p);
            EXPECT_NEAR(gamma[p][0](0, 0), fx.gamma111(x), 1e-6);
            EXPECT_NEAR(gamma[p][0](0, 1), 0.0, 1e-12);
            EXPECT_NEAR(gamma[p][0](1, 1), 0.0, 1e-12);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) EXPECT_NEAR(gamma[p][1](i, j), 0.0, 1e-12);
        }
    }
}

TEST(Christoffels, SymmetricInLowerIndices)
{
    const auto gamma = christoffels(variable_metric(32));
    for (std::size_t p = 0; p < gamma.size(); ++p)
        for (int k = 0; k < 2; ++k) EXPECT_EQ(gamma[p][k](0, 1), gamma[p][k](1, 0));
}

TEST(Christoffels, ConvergeAtStencilOrder)
{
    const double e2a = christoffel_error(variable_metric(32), Scheme::fd2);
    const double e2b = christoffel_error(variable_metric(64), Scheme::fd2);
    const double e4a = christoffel_error(variable_metric(32), Scheme::fd4);
    const double e4b = christoffel_error(variable_metric(64), Scheme::fd4);
    EXPECT_NEAR(e2a / e2b, 4.0, 0.4);
    EXPECT_NEAR(e4a / e4b, 16.0, 2.0);
    EXPECT_LT(christoffel_error(variable_metric(128), Scheme::fd4), 1e-6);
}

TEST(Christoffels, MetricCompatibilityAtStencilOrder)
{
    auto defect = [](int n) {
        const auto metric = variable_metric(n);
        const auto gamma = christoffels(metric);
        double worst = 0.0;
        for (std::size_t p = 0; p < metric.grid().num_points(); ++p) {
            const auto dg = fixtures::VariableMetric2::dg(metric.grid().coords(p));
            const Mat<2>& g = metric.g(p);
            for (int k = 0; k < 2; ++k)
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j) {
                        double v = dg[k](i, j);
                        for (int l = 0; l < 2; ++l) v -= gamma[p][l](k, i) * g(l, j) + gamma[p][l](k, j) * g(i, l);
                        worst = std::max(worst, std::abs(v));
                    }
        }
        return worst;
    };
    const double a = defect(32), b = defect(64);
    EXPECT_GT(a / b, 12.0);
    EXPECT_LT(b, 1e-4);
}

TEST(CovariantHessian, ConstantGivesZero)
{
    const auto metric = variable_metric(16);
    const auto gamma = christoffels(metric);
    const auto h = covariant_hessian(ScalarField<2>(metric.grid(), 3.25), metric, gamma);
    for (std::size_t p = 0; p < h.size(); ++p) EXPECT_EQ(h[p].cwiseAbs().maxCoeff(), 0.0);
}

TEST(CovariantHessian, FlatMetricIsCoordinateHessian)
{
    const auto grid = PeriodicGrid<2>::uniform(64, 2.0);
    const auto metric = MetricField<2>::identity(grid);
    const auto gamma = christoffels(metric);
    const auto phi = ScalarField<2>::sample(grid, [](const auto& x) { return std::sin(kTwoPi * x[0] / 2.0); });
    const auto h = covariant_hessian(phi, metric, gamma, Scheme::spectral);
    for (std::size_t p = 0; p < h.size(); ++p) {
        const double k = kTwoPi / 2.0;
        EXPECT_NEAR(h[p](0, 0), -k * k * std::sin(k * grid.coords(p)[0]), 1e-10);
        EXPECT_NEAR(h[p](0, 1), 0.0, 1e-10);
        EXPECT_NEAR(h[p](1, 1), 0.0, 1e-10);
    }
}

TEST(CovariantHessian, VariableMetricMatchesSymbolic)
{
    const auto metric = variable_metric(128);
    const auto gamma = christoffels(metric);
    const fixtures::TrigPotential2 pot;
    const auto phi = ScalarField<2>::sample(metric.grid(), [&](const auto& x) { return pot.value(x); });
    const auto h = covariant_hessian(phi, metric, gamma);
    double worst = 0.0;
    for (std::size_t p = 0; p < h.size(); ++p)
        worst = std::max(worst, (h[p] - pot.covariant_hessian(metric.grid().coords(p))).cwiseAbs().maxCoeff());
    EXPECT_LT(worst, 1e-5);
}

TEST(CovariantHessian, ShiftByConstant)
{
    const auto metric = variable_metric(32);
    const auto gamma = christoffels(metric);
    // dyadic samples keep phi + c exactly representable, so the stencil sums agree bit for bit
    const auto phi = ScalarField<2>::sample(metric.grid(), [](const auto& x) {
        return std::ldexp(std::round(std::ldexp(std::sin(kTwoPi * x[0]) * std::cos(kTwoPi * x[1]), 20)), -20);
    });
    const auto a = covariant_hessian(phi, metric, gamma);
    const auto b = covariant_hessian(phi + 8.0, metric, gamma);
    for (std::size_t p = 0; p < a.size(); ++p) EXPECT_EQ(a[p], b[p]);
}

TEST(Spectral, ExactOnTrigPolynomials)
{
    const PeriodicGrid<2> grid({32, 16}, {1.0, 0.5});
    auto f = [](const auto& x) { return std::sin(kTwoPi * 3 * x[0]) * std::cos(kTwoPi * 2 * x[1] / 0.5) + 0.5; };
    const auto phi = ScalarField<2>::sample(grid, f);
    const auto dxy = partial2(phi, 0, 1, Scheme::spectral);
    const auto dyy = partial2(phi, 1, 1, Scheme::spectral);
    const double kx = kTwoPi * 3, ky = kTwoPi * 4;
    for (std::size_t p = 0; p < grid.num_points(); ++p) {
        const auto x = grid.coords(p);
        EXPECT_NEAR(dxy[p], -kx * ky * std::cos(kx * x[0]) * std::sin(ky * x[1]), 1e-10 * kx * ky);
        EXPECT_NEAR(dyy[p], -ky * ky * std::sin(kx * x[0]) * std::cos(ky * x[1]), 1e-10 * ky * ky);
    }
}

TEST(Spectral, ThreeDimensionalFirstDerivative)
{
    const auto grid = PeriodicGrid<3>::uniform(8);
    const auto phi = ScalarField<3>::sample(grid, [](const auto& x) { return std::cos(kTwoPi * (x[0] + 2 * x[2])); });
    const auto dz = partial(phi, 2, Scheme::spectral);
    for (std::size_t p = 0; p < grid.num_points(); ++p) {
        const auto x = grid.coords(p);
        EXPECT_NEAR(dz[p], -2 * kTwoPi * std::sin(kTwoPi * (x[0] + 2 * x[2])), 1e-10 * kTwoPi);
    }
}

TEST(LpNorm, ConstantFields)
{
    const auto grid = PeriodicGrid<2>::uniform(16);
    const ScalarField<2> one(grid, 1.0);
    const auto flat = MetricField<2>::identity(grid);
    for (double p : {1.0, 2.0, 3.5, kInfinityNorm}) EXPECT_NEAR(lp_norm(one, p, flat), 1.0, 1e-14);
    const MetricField<2> four(SymTensorField<2>(grid, 4.0 * Mat<2>::Identity()));
    EXPECT_NEAR(lp_norm(one, 1.0, four), 4.0, 1e-13);
}

TEST(LpNorm, SineL2)
{
    const auto grid = PeriodicGrid<2>::uniform(32);
    const auto u = ScalarField<2>::sample(grid, [](const auto& x) { return std::sin(kTwoPi * x[0]); });
    EXPECT_NEAR(lp_norm(u, 2.0, MetricField<2>::identity(grid)), std::sqrt(0.5), 1e-10);
}

TEST(LpNorm, RejectsExponentBelowOne)
{
    const auto grid = PeriodicGrid<2>::uniform(8);
    EXPECT_THROW(lp_norm(ScalarField<2>(grid, 1.0), 0.5, MetricField<2>::identity(grid)), ArgumentError);
}

TEST(LpNorm, MonotoneAndHomogeneous)
{
    const auto metric = variable_metric(16);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a(metric.grid().num_points()), b(a.size());
        for (std::size_t p = 0; p < a.size(); ++p) {
            a[p] = d(rng);
            b[p] = (std::abs(a[p]) + std::abs(d(rng))) * (d(rng) < 0 ? -1.0 : 1.0);
        }
        const ScalarField<2> u(metric.grid(), a), w(metric.grid(), b);
        const double t = 3.0 * d(rng);
        for (double p : {1.0, 2.0, 4.0, kInfinityNorm}) {
            EXPECT_LE(lp_norm(u, p, metric), lp_norm(w, p, metric) * (1 + 1e-14));
            EXPECT_NEAR(lp_norm(t * u, p, metric), std::abs(t) * lp_norm(u, p, metric), 1e-12);
        }
    }
}

TEST(MetricEquivalence, BracketsEigenvalues)
{
    const auto [lo, hi] = metric_equivalence_constants(variable_metric(32));
    EXPECT_GT(lo, 0.4);
    EXPECT_LT(hi, 1.6);
    EXPECT_LT(lo, hi);
}

TEST(BallDomain, InteriorAndBoundaryPartitionTheBall)
{
    const BallDomain<2> ball(1.0, 32);
    std::vector<int> seen(ball.box_points(), 0);
    for (auto p : ball.interior()) {
        ++seen[p];
        EXPECT_LT(ball.offset(p).norm(), 1.0);
    }
    for (auto p : ball.boundary()) {
        ++seen[p];
        EXPECT_GE(ball.offset(p).norm(), 1.0 - 1e-15);
    }
    for (std::size_t p = 0; p < ball.box_points(); ++p) EXPECT_EQ(seen[p], ball.inside(p) ? 1 : 0);
    // every stencil neighbour of an interior node belongs to the ball set
    for (auto p : ball.interior())
        for (int a = -1; a <= 1; ++a)
            for (int b = -1; b <= 1; ++b) EXPECT_TRUE(ball.inside(ball.neighbour(ball.neighbour(p, 0, a), 1, b)));
    EXPECT_EQ(ball.offset(ball.center_index()).norm(), 0.0);
    EXPECT_THROW(BallDomain<2>(0.0, 8), ArgumentError);
    EXPECT_THROW(BallDomain<2>(1.0, 7), ArgumentError);
}

TEST(BallField, DifferencesExactOnQuadratics)
{
    const BallDomain<3> ball(0.5, 8, Vec<3>(0.1, -0.2, 0.3));
    Mat<3> a;
    a << 2.0, 0.5, -0.3, 0.5, 1.0, 0.2, -0.3, 0.2, 3.0;
    const Vec<3> lin(0.3, -1.0, 0.25);
    const auto f = BallField<3>::sample(ball, [&](const Vec<3>& x) { return 0.5 * x.dot(a * x) + lin.dot(x); });
    for (auto p : ball.interior()) {
        EXPECT_LE((f.hessian(p) - a).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LE((f.gradient(p) - (a * ball.position(p) + lin)).norm(), 1e-12);
    }
}

TEST(MaskCutoffRho, ClosedFormValues)
{
    const BallDomain<2> ball(2.0, 16);
    const auto rho = mask_cutoff_rho(ball);
    const std::size_t c = ball.center_index();
    EXPECT_DOUBLE_EQ(rho[c], 1.0);
    // r/2 along the first axis is 4 nodes from the center
    EXPECT_DOUBLE_EQ(rho[ball.neighbour(c, 0, 4)], 0.75);
    EXPECT_DOUBLE_EQ(rho[ball.neighbour(c, 0, 8)], 0.0);
    for (auto p : ball.boundary()) EXPECT_EQ(rho[p], 0.0);
}

TEST(UnitBallVolume, KnownValues)
{
    EXPECT_NEAR(unit_ball_volume(2), M_PI, 1e-14);
    EXPECT_NEAR(unit_ball_volume(3), 4.0 * M_PI / 3.0, 1e-14);
}
