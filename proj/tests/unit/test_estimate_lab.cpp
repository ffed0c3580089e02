#include <gtest/gtest.h>

#include <hessian_lab/estimate_lab.hpp>

#include <cmath>

#include "support/fixtures.hpp"

using namespace hessian_lab;
using fixtures::kTwoPi;

namespace {

Problem<2> identity_problem(int size, double rhs, double sigma)
{
    const auto grid = PeriodicGrid<2>::uniform(size);
    return Problem<2>(OperatorSpec::monge_ampere(2, sigma), SymTensorField<2>(grid, Mat<2>::Identity()),
                      MetricField<2>::identity(grid), ScalarField<2>(grid, rhs));
}

Problem<2> manufactured_problem(int size)
{
    const auto grid = PeriodicGrid<2>::uniform(size);
    const auto spec = OperatorSpec::monge_ampere(2);
    auto metric = MetricField<2>::sample(grid, fixtures::VariableMetric2::g);
    auto chi = SymTensorField<2>::sample(grid, fixtures::manufactured_chi);
    auto rhs = ScalarField<2>::sample(grid, [&](const auto& x) { return fixtures::manufactured_rhs(spec, x); });
    return Problem<2>(spec, std::move(chi), std::move(metric), std::move(rhs));
}

}  // namespace

TEST(StabilityExponent, MatchesTheClosedForm)
{
    EXPECT_DOUBLE_EQ(stability_exponent(2, 2, 2), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(stability_exponent(2, 1, 2), 1.0 / 5.0);
    EXPECT_DOUBLE_EQ(stability_exponent(3, 3, 2), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(stability_exponent(3, 1, 3), 2.0 / 11.0);
    EXPECT_THROW(stability_exponent(2, 2, 1), ArgumentError);
    EXPECT_THROW(stability_exponent(2, 0, 2), ArgumentError);
}

TEST(StabilityRow, ZeroBranchForOrderedPotentials)
{
    const auto grid = PeriodicGrid<2>::uniform(16);
    const auto metric = MetricField<2>::identity(grid);
    const auto phi1 = ScalarField<2>::sample(grid, [](const auto& x) { return std::sin(kTwoPi * x[0]); });
    const auto row = stability_row(phi1, phi1 - 0.5 * ScalarField<2>(grid, 1.0), metric, 2, 2);
    EXPECT_EQ(row.branch, StabilityBranch::zero);
    EXPECT_TRUE(row.branch_holds);
    EXPECT_EQ(row.r, 0.0);
}

TEST(StabilityRow, LargeBranchWhenRExceedsOneHalf)
{
    const auto grid = PeriodicGrid<2>::uniform(16);
    const auto metric = MetricField<2>::identity(grid);
    const auto phi1 = ScalarField<2>::sample(grid, [](const auto& x) { return -1.0 - std::cos(kTwoPi * x[0]); });
    const auto row = stability_row(phi1, phi1 + ScalarField<2>(grid, 0.2), metric, 2, 2);
    // r = 0.2^(1/3) > 1/2
    EXPECT_NEAR(row.r, std::cbrt(0.2), 1e-12);
    EXPECT_EQ(row.branch, StabilityBranch::large);
    EXPECT_TRUE(row.branch_holds);
}

TEST(StabilityRow, MainBranchRatio)
{
    const auto grid = PeriodicGrid<2>::uniform(16);
    const auto metric = MetricField<2>::identity(grid);
    const ScalarField<2> phi1(grid, -1.0);
    const auto row = stability_row(phi1, phi1 + ScalarField<2>(grid, 1e-3), metric, 2, 2);
    EXPECT_EQ(row.branch, StabilityBranch::main);
    EXPECT_NEAR(row.ratio, 1e-3 / std::cbrt(1e-3), 1e-12);
}

TEST(StabilityExperiment, EmptyDeltaGridIsANoOp)
{
    const auto prob = identity_problem(16, 1.0, 0.5);
    const auto rep = stability_experiment(prob, ScalarField<2>(prob.grid(), 1.0), {}, 2, 2);
    EXPECT_TRUE(rep.pass);
    EXPECT_TRUE(rep.rows.empty());
    EXPECT_EQ(rep.warnings.size(), 1u);
}

TEST(BBounds, ClosedFormFixtureHasMarginTwo)
{
    const auto prob = identity_problem(16, 1.0, 0.5);
    const auto sol = solve_pair(prob).solution;
    const auto r = b_bounds_check(prob, sol);
    EXPECT_NEAR(r.e_b, 1.0, 1e-12);
    EXPECT_NEAR(r.upper_bound, 2.0, 1e-12);
    EXPECT_NEAR(r.margin, 2.0, 1e-12);
    EXPECT_TRUE(r.pass);
}

TEST(BBounds, RhsScalingMovesBothSidesTogether)
{
    for (double kappa : {0.25, 4.0}) {
        const auto prob = identity_problem(16, kappa, 0.5);
        const auto r = b_bounds_check(prob, solve_pair(prob).solution);
        EXPECT_NEAR(r.e_b, 1.0 / kappa, 1e-12);
        EXPECT_NEAR(r.upper_bound, 2.0 / kappa, 1e-12);
        EXPECT_NEAR(r.margin, 2.0, 1e-12);
    }
}

TEST(BBounds, ManufacturedSolveSatisfiesAllChecks)
{
    const auto prob = manufactured_problem(32);
    const auto r = b_bounds_check(prob, solve_pair(prob).solution);
    EXPECT_TRUE(r.upper_pass);
    EXPECT_LT(std::abs(r.laplacian_integral), 1e-8);
    EXPECT_TRUE(r.pointwise_pass);
    EXPECT_GT(r.implied_lower_constant, 0.0);
}

TEST(BBounds, ViolationIsReported)
{
    const auto prob = identity_problem(16, 1.0, 0.5);
    auto sol = solve_pair(prob).solution;
    sol.b = std::log(3.0);
    EXPECT_THROW(b_bounds_check(prob, sol), EstimateViolation);
}

TEST(DivergenceLaplacian, IntegratesToZero)
{
    const auto grid = PeriodicGrid<2>::uniform(32);
    const auto metric = MetricField<2>::sample(grid, fixtures::VariableMetric2::g);
    const auto phi = ScalarField<2>::sample(grid, [](const auto& x) { return std::exp(std::sin(kTwoPi * x[0]) * std::cos(kTwoPi * x[1])); });
    for (auto s : {Scheme::fd2, Scheme::fd4}) EXPECT_LT(std::abs(integrate(divergence_laplacian(phi, metric, s), metric)), 1e-13);
}

TEST(Equicontinuity, RejectsMembersOutsideRK)
{
    const auto prob = identity_problem(16, 1.0, 0.5);
    const auto spike = ScalarField<2>::sample(prob.grid(), [](const auto& x) { return x[0] < 0.07 && x[1] < 0.07 ? 100.0 : 0.01; });
    std::vector<std::pair<std::string, ScalarField<2>>> fam{{"spike", spike}};
    EXPECT_THROW(equicontinuity_probe(prob, fam, 2.0, 2.0), ArgumentError);
}

TEST(Equicontinuity, SmoothFamilyDecays)
{
    const auto prob = identity_problem(32, 1.0, 0.5);
    std::vector<std::pair<std::string, ScalarField<2>>> fam;
    for (double a : {0.1, 0.3})
        fam.emplace_back("wave", ScalarField<2>::sample(prob.grid(), [a](const auto& x) { return 1.0 + a * std::sin(kTwoPi * x[0]); }));
    const auto rep = equicontinuity_probe(prob, fam, 2.0, 2.0);
    EXPECT_TRUE(rep.pass);
    EXPECT_LT(rep.envelope[2], rep.envelope[0]);
}

TEST(BUniqueness, IdenticalSchedulesAgreeExactly)
{
    const auto prob = identity_problem(16, 1.0, 0.5);
    const auto rough = ScalarField<2>::sample(prob.grid(), [](const auto& x) { return 1.0 + 0.3 * std::abs(std::sin(kTwoPi * x[0])); });
    MollifierSchedule s;
    s.levels = 4;
    const auto rep = b_uniqueness_probe(prob, rough, s, s);
    for (double g : rep.gap) EXPECT_EQ(g, 0.0);
    EXPECT_TRUE(rep.pass);
    MollifierSchedule other = s;
    other.levels = 5;
    EXPECT_THROW(b_uniqueness_probe(prob, rough, s, other), ArgumentError);
}

TEST(Linf, EmptyFamilyIsANoOp)
{
    ProblemSetup<2> setup;
    const auto rep = linf_experiment(setup, std::vector<RhsMember<2>>{}, {16}, 2.0, 2.0);
    EXPECT_TRUE(rep.pass);
    EXPECT_FALSE(rep.warnings.empty());
}

TEST(Linf, RatioIsStableUnderRefinement)
{
    ProblemSetup<2> setup;
    std::vector<RhsMember<2>> fam{{"wave", [](const auto& x) { return 4.0 + std::sin(kTwoPi * x[0]) * std::cos(kTwoPi * x[1]); }}};
    const auto rep = linf_experiment(setup, fam, {16, 32}, 2.0, 2.0);
    ASSERT_EQ(rep.rows.size(), 2u);
    EXPECT_TRUE(rep.pass);
    EXPECT_LT(rep.max_refinement_change, 0.05);
}
