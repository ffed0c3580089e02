#include <gtest/gtest.h>

#include <hessian_lab/weak_harness.hpp>

#include <cmath>

#include "support/fixtures.hpp"

using namespace hessian_lab;
using fixtures::kTwoPi;

namespace {

ScalarField<2> kinked(const PeriodicGrid<2>& grid)
{
    return ScalarField<2>::sample(grid, [](const auto& x) {
        return std::max(0.9 + 0.3 * std::sin(kTwoPi * x[0]), 1.0 + 0.2 * std::cos(kTwoPi * x[1]));
    });
}

Problem<2> flat_problem(const PeriodicGrid<2>& grid, ScalarField<2> rhs)
{
    auto metric = MetricField<2>::identity(grid);
    SymTensorField<2> chi(grid, Mat<2>(2.0 * Mat<2>::Identity()));
    return Problem<2>(OperatorSpec::monge_ampere(2), std::move(chi), std::move(metric), std::move(rhs));
}

}  // namespace

TEST(Mollify, AbsSineMeetsEveryTarget)
{
    const auto grid = PeriodicGrid<2>::uniform(256);
    const auto rhs = ScalarField<2>::sample(grid, [](const auto& x) { return std::abs(std::sin(kTwoPi * x[0])); });
    for (auto s : {Smoother::sharp, Smoother::raised_cosine}) {
        MollifierSchedule sched;
        sched.levels = 9;
        sched.smoother = s;
        const auto levels = mollify_sequence(rhs, MetricField<2>::identity(grid), sched);
        ASSERT_EQ(levels.size(), 9u);
        for (const auto& l : levels) {
            EXPECT_LT(l.error, std::ldexp(1.0, -l.level)) << to_string(s) << " level " << l.level;
            EXPECT_GT(l.field.min(), 0.0);
        }
    }
}

TEST(Mollify, HalfWaveMeetsEveryTarget)
{
    const auto grid = PeriodicGrid<2>::uniform(256);
    const auto rhs = ScalarField<2>::sample(grid, [](const auto& x) { return std::max(0.0, std::sin(kTwoPi * x[1])); });
    MollifierSchedule sched;
    sched.levels = 9;
    const auto levels = mollify_sequence(rhs, MetricField<2>::identity(grid), sched);
    for (const auto& l : levels) EXPECT_LT(l.error, std::ldexp(1.0, -l.level)) << l.level;
    for (std::size_t i = 1; i < levels.size(); ++i) EXPECT_LE(levels[i].floor, levels[i - 1].floor);
}

TEST(Mollify, SmoothRhsIsReproducedExactly)
{
    const auto grid = PeriodicGrid<2>::uniform(32);
    const auto rhs = ScalarField<2>::sample(grid, [](const auto& x) { return 2.0 + std::cos(kTwoPi * x[0]); });
    const auto levels = mollify_sequence(rhs, MetricField<2>::identity(grid), MollifierSchedule{});
    for (const auto& l : levels) EXPECT_LT(l.error, 1e-13) << l.level;
}

TEST(Mollify, RejectsNegativeOrNullData)
{
    const auto grid = PeriodicGrid<2>::uniform(16);
    const auto metric = MetricField<2>::identity(grid);
    EXPECT_THROW(mollify_sequence(ScalarField<2>(grid, -1.0), metric, MollifierSchedule{}), ArgumentError);
    EXPECT_THROW(mollify_sequence(ScalarField<2>(grid, 0.0), metric, MollifierSchedule{}), ArgumentError);
    MollifierSchedule bad;
    bad.q = 1.0;
    EXPECT_THROW(mollify_sequence(ScalarField<2>(grid, 1.0), metric, bad), ArgumentError);
}

TEST(Mollify, ExhaustedBudgetIsNonConvergence)
{
    const auto grid = PeriodicGrid<2>::uniform(16);
    const auto rhs = ScalarField<2>::sample(grid, [](const auto& x) { return x[0] < 0.5 ? 1.0 : 0.0; });
    // floor 4 * 2^-i on the zero half keeps the error above 2^-i until it has halved three times
    MollifierSchedule sched;
    sched.base_floor = 4.0;
    sched.max_refinements = 1;
    EXPECT_THROW(mollify_sequence(rhs, MetricField<2>::identity(grid), sched), NonConvergence);
}

TEST(WeakSolve, KinkedRhsIsCertified)
{
    const auto grid = PeriodicGrid<2>::uniform(32);
    const auto rough = kinked(grid).map([](double v) { return v; });
    const auto prob = flat_problem(grid, ScalarField<2>(grid, 1.0));
    MollifierSchedule sched;
    sched.levels = 6;
    const auto w = weak_solve(prob, rough, sched);
    const auto& c = w.certificate;
    EXPECT_TRUE(c.pass) << c.note;
    ASSERT_EQ(c.envelope.size(), 5u);
    for (std::size_t k = 1; k < c.envelope.size(); ++k) EXPECT_LE(c.envelope[k], c.envelope[k - 1]);
    EXPECT_TRUE(c.gradient_energy_ok);
    EXPECT_EQ(w.solution.b, c.b_per_level.back());
}

TEST(WeakSolve, SmoothRhsGivesAFlatSequence)
{
    // F(2 I) = 2, so e^f = 2 is solved by (0, 0)
    const auto grid = PeriodicGrid<2>::uniform(16);
    const auto prob = flat_problem(grid, ScalarField<2>(grid, 2.0));
    MollifierSchedule sched;
    sched.levels = 4;
    const auto w = weak_solve(prob, ScalarField<2>(grid, 2.0), sched);
    for (double e : w.certificate.envelope) EXPECT_LT(e, 1e-12);
    EXPECT_TRUE(w.certificate.pass);
    EXPECT_NEAR(w.solution.b, 0.0, 1e-12);
}

TEST(Viscosity, ZeroPotentialIsTheEqualityCase)
{
    const auto grid = PeriodicGrid<2>::uniform(16);
    const auto prob = flat_problem(grid, ScalarField<2>(grid, 2.0));
    const SolutionPair<2> sol{ScalarField<2>(grid, 0.0), 0.0, 0.0, 0};
    const auto rep = viscosity_check(prob, sol, lattice_samples(grid, 4));
    ASSERT_EQ(rep.samples.size(), 16u);
    EXPECT_TRUE(rep.pass);
    for (const auto& s : rep.samples) {
        EXPECT_NEAR(s.fit_value, 2.0, 1e-12);
        EXPECT_EQ(s.kappa_up, 0.0);
        EXPECT_EQ(s.kappa_down, 0.0);
    }
}

TEST(Viscosity, WrongConstantFailsTheSubsolutionTest)
{
    // phi = 0 with e^b e^f = 4 but F(chi) = 2: F of every touching quadratic from above is 2 < 4
    const auto grid = PeriodicGrid<2>::uniform(16);
    const auto prob = flat_problem(grid, ScalarField<2>(grid, 4.0));
    const SolutionPair<2> sol{ScalarField<2>(grid, 0.0), 0.0, 0.0, 0};
    const auto rep = viscosity_check(prob, sol, lattice_samples(grid, 2));
    EXPECT_EQ(rep.sub_passes, 0);
    EXPECT_EQ(rep.super_passes, 4);
    EXPECT_FALSE(rep.pass);
}

TEST(Viscosity, ConcaveRidgeIsVacuousForSupersolutions)
{
    // phi = -|x - 1/2| along x: the supersolution quadratic is pushed far out of the cone
    const auto grid = PeriodicGrid<2>::uniform(32);
    const auto prob = flat_problem(grid, ScalarField<2>(grid, 1.0));
    const auto phi = ScalarField<2>::sample(grid, [](const auto& x) { return -0.5 * std::abs(x[0] - 0.5); });
    const SolutionPair<2> sol{phi, 0.0, 0.0, 0};
    typename PeriodicGrid<2>::MultiIndex ridge{16, 8};
    const auto rep = viscosity_check(prob, sol, {grid.index(ridge)});
    ASSERT_EQ(rep.samples.size(), 1u);
    EXPECT_TRUE(rep.samples[0].super_outside_cone);
    EXPECT_TRUE(rep.samples[0].super_pass);
    EXPECT_GT(rep.samples[0].kappa_down, 0.0);
}

TEST(Viscosity, ManufacturedSolutionPassesEverywhere)
{
    const auto grid = PeriodicGrid<2>::uniform(64);
    const auto spec = OperatorSpec::monge_ampere(2);
    auto metric = MetricField<2>::sample(grid, fixtures::VariableMetric2::g);
    SymTensorField<2> chi = SymTensorField<2>::sample(grid, fixtures::manufactured_chi);
    const auto rhs = ScalarField<2>::sample(grid, [&](const auto& x) { return fixtures::manufactured_rhs(spec, x); });
    const Problem<2> prob(spec, std::move(chi), std::move(metric), rhs);
    const auto sol = solve_pair(prob).solution;
    const auto rep = viscosity_check(prob, sol, lattice_samples(grid, 8));
    EXPECT_EQ(rep.sub_passes, 64);
    EXPECT_EQ(rep.super_passes, 64);
}
