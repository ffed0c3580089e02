#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "hessian_lab/grid_geometry.hpp"
#include "hessian_lab/parallel.hpp"
#include "hessian_lab/solver.hpp"

namespace hessian_lab {

/// Lower contact set P = {|Dv| < eps/2, v(y) >= v(x) + Dv(x).(y - x) for all ball nodes y}.
template <int Dim>
struct ContactSet {
    std::vector<bool> mask;  // indexed like the ball lattice
    std::vector<std::size_t> points;
    double ma_mass = 0.0;         // sum over P of det D^2 v h^n
    double boundary_layer_mass = 0.0;  // part of ma_mass on P nodes with an axis neighbour outside P
    double min_det = std::numeric_limits<double>::infinity();
    double epsilon = 0.0;
    double gradient_bound_used = 0.0;
};

/// c0 = omega_n 2^{-n}
inline double abp_constant(int n) { return unit_ball_volume(n) * std::pow(2.0, -n); }

template <int Dim>
void require_abp_precondition(const BallField<Dim>& v, double eps)
{
    if (!(eps > 0.0)) throw ArgumentError(detail::concat("epsilon must be positive, got ", eps));
    const double v0 = v[v.domain().center_index()];
    const double bmin = v.boundary_min();
    const double slack = 1e-12 * std::max({1.0, std::abs(v0), std::abs(bmin)});
    if (v0 + eps > bmin + slack)
        throw ArgumentError(detail::concat("ABP precondition v(0) + eps <= min over the boundary fails: v(0) = ", v0,
                                           ", eps = ", eps, ", boundary min = ", bmin));
}

/// Exhaustive supporting-plane test over every pair (candidate, ball node).
template <int Dim>
ContactSet<Dim> contact_set(const BallField<Dim>& v, double eps)
{
    require_abp_precondition(v, eps);
    const auto& dom = v.domain();
    const double bound = 0.5 * eps;

    std::vector<std::size_t> members;
    for (std::size_t p = 0; p < dom.box_points(); ++p)
        if (dom.inside(p)) members.push_back(p);
    std::vector<Vec<Dim>> pos(members.size());
    std::vector<double> val(members.size());
    double scale = 0.0;
    for (std::size_t m = 0; m < members.size(); ++m) {
        pos[m] = dom.offset(members[m]);
        val[m] = v[members[m]];
        scale = std::max(scale, std::abs(val[m]));
    }
    const double tol = 1e-12 * std::max(1.0, scale);

    std::vector<std::size_t> candidates;
    std::vector<Vec<Dim>> grads;
    for (auto p : dom.interior()) {
        const Vec<Dim> d = v.gradient(p);
        if (d.norm() < bound) {
            candidates.push_back(p);
            grads.push_back(d);
        }
    }
    std::vector<char> supported(candidates.size(), 0);
    parallel_for(candidates.size(), [&](std::size_t c) {
        const Vec<Dim> x = dom.offset(candidates[c]);
        const double vx = v[candidates[c]];
        const Vec<Dim>& d = grads[c];
        for (std::size_t m = 0; m < pos.size(); ++m)
            if (val[m] < vx + d.dot(pos[m] - x) - tol) return;
        supported[c] = 1;
    });

    ContactSet<Dim> out;
    out.epsilon = eps;
    out.gradient_bound_used = bound;
    out.mask.assign(dom.box_points(), false);
    for (std::size_t c = 0; c < candidates.size(); ++c)
        if (supported[c]) {
            out.mask[candidates[c]] = true;
            out.points.push_back(candidates[c]);
        }
    const double cell = dom.cell_volume();
    for (auto p : out.points) {
        const double det = v.hessian(p).determinant();
        out.min_det = std::min(out.min_det, det);
        out.ma_mass += det * cell;
        bool edge = false;
        for (int a = 0; a < Dim && !edge; ++a)
            for (int s : {-1, 1})
                if (!out.mask[dom.neighbour(p, a, s)]) edge = true;
        if (edge) out.boundary_layer_mass += det * cell;
    }
    return out;
}

struct AbpReport {
    double epsilon = 0.0;
    double c0 = 0.0;
    double c0_eps_n = 0.0;
    double ma_mass = 0.0;
    /// Allowed quadrature shortfall: the mass carried by the one-node edge layer of P.
    double quadrature_slack = 0.0;
    std::size_t mask_count = 0;
    bool pass = false;
};

/// ma_mass >= c0 eps^n - quadrature_slack
template <int Dim>
AbpReport abp_check(const BallField<Dim>& v, double eps)
{
    const auto cs = contact_set(v, eps);
    AbpReport r;
    r.epsilon = eps;
    r.c0 = abp_constant(Dim);
    r.c0_eps_n = r.c0 * std::pow(eps, Dim);
    r.ma_mass = cs.ma_mass;
    r.quadrature_slack = cs.boundary_layer_mass;
    r.mask_count = cs.points.size();
    r.pass = r.ma_mass >= r.c0_eps_n - r.quadrature_slack;
    return r;
}

/// u(y) = phi(x0 + r y) - phi(x0) + eps |y|^2 on the unit ball, with the
/// chart radius r rounded to a whole number of grid steps so every lattice
/// node is a torus grid node.
template <int Dim>
struct AbpTestFunction {
    BallField<Dim> u;
    std::size_t x0 = 0;  // torus index of the ball center
    double chart_radius = 0.0;
    double epsilon = 0.0;
    double christoffel_bound = 0.0;  // C(g) in unit-ball coordinates
    double boundary_min = 0.0;
    bool precondition_holds = false;
};

/// eps = sigma / (8 + C(g)) with C(g) the measured Christoffel bound rescaled to the unit ball.
template <int Dim>
double abp_default_epsilon(double sigma, const ChristoffelField<Dim>& gamma, double chart_radius)
{
    return sigma / (8.0 + chart_radius * gamma.operator_norm_bound());
}

/// Radius r with 1/2 <= r^2 lambda and r^2 lambda <= 2 for every g-eigenvalue
/// lambda, taken as the geometric middle r^2 = 1/sqrt(lambda_min lambda_max);
/// the unit-ball rescaling then satisfies the normal-coordinate comparison
/// when lambda_max / lambda_min <= 4. Returns 0 when no such r exists.
template <int Dim>
double normal_chart_radius(const MetricField<Dim>& metric)
{
    const auto [lo, hi] = metric_equivalence_constants(metric);
    if (hi > 4.0 * lo) return 0.0;
    return std::pow(lo * hi, -0.25);
}

template <int Dim>
AbpTestFunction<Dim> abp_test_function(const ScalarField<Dim>& phi, std::size_t x0, double eps, double chart_radius)
{
    const auto& grid = phi.grid();
    for (int a = 1; a < Dim; ++a)
        if (std::abs(grid.spacing(a) - grid.spacing(0)) > 1e-14 * grid.spacing(0))
            throw ArgumentError("abp_test_function needs equal grid spacing on every axis");
    if (!(eps > 0.0)) throw ArgumentError(detail::concat("epsilon must be positive, got ", eps));
    const double h = grid.spacing(0);
    const int half = std::max(2, static_cast<int>(std::lround(chart_radius / h)));
    const double r = half * h;
    const BallDomain<Dim> dom(1.0, 2 * half);
    BallField<Dim> u(dom);
    const auto base = grid.multi_index(x0);
    for (std::size_t p = 0; p < dom.box_points(); ++p) {
        auto idx = base;
        const auto off = dom.lattice_offset(p);
        for (int a = 0; a < Dim; ++a) idx[a] += off[a];
        u[p] = phi[grid.index(idx)] - phi[x0] + eps * dom.offset(p).squaredNorm();
    }
    AbpTestFunction<Dim> out{std::move(u), x0, r, eps, 0.0, 0.0, false};
    out.boundary_min = out.u.boundary_min();
    out.precondition_holds = out.u[dom.center_index()] + eps <= out.boundary_min + 1e-14;
    return out;
}

/// Pointwise diagnostics of the L-infinity argument on a solved instance.
template <int Dim>
struct AbpSolutionDiagnostics {
    AbpTestFunction<Dim> test;
    ContactSet<Dim> contact;
    AbpReport abp;
    /// max over P of phi(x) - inf phi - eps/2; must be <= 0
    double level_excess = -std::numeric_limits<double>::infinity();
    /// max over P of the largest eigenvalue of D^2u - r^2 (sigma g + nabla^2 phi), in unit-ball coordinates
    double hessian_order_excess = -std::numeric_limits<double>::infinity();
    /// max over P of det(sigma g + nabla^2 phi) - e^{n b} rhs^n det g / (n^n c)
    double det_excess = -std::numeric_limits<double>::infinity();
    double metric_lambda_min = 0.0;
    double metric_lambda_max = 0.0;
};

template <int Dim>
AbpSolutionDiagnostics<Dim> abp_on_solution(const Problem<Dim>& prob, const SolutionPair<Dim>& sol,
                                            double chart_radius = 0.0)
{
    const auto& grid = prob.grid();
    const auto [lo, hi] = metric_equivalence_constants(prob.metric());
    if (chart_radius <= 0.0) chart_radius = normal_chart_radius(prob.metric());
    if (chart_radius <= 0.0)
        throw GeometryError(detail::concat("metric eigenvalue ratio ", hi / lo,
                                           " exceeds 4; no chart radius meets the normal-coordinate comparison"));
    const std::size_t x0 = sol.phi.argmin();
    const double eps = abp_default_epsilon(prob.op().sigma(), prob.gamma(), chart_radius);
    auto test = abp_test_function(sol.phi, x0, eps, chart_radius);
    if (!test.precondition_holds)
        throw EstimateViolation(detail::concat("u(0) + eps <= min over the boundary fails: eps = ", eps,
                                               ", boundary min = ", test.boundary_min));
    auto contact = contact_set(test.u, eps);
    auto abp = abp_check(test.u, eps);

    const auto st = stencil(prob.scheme());
    const auto& dom = test.u.domain();
    const double r = test.chart_radius;
    const double sigma = prob.op().sigma();
    const double c = prob.op().product_bound();
    const double inf_phi = sol.phi.min();
    AbpSolutionDiagnostics<Dim> out{std::move(test), std::move(contact), abp, -std::numeric_limits<double>::infinity(),
                                    -std::numeric_limits<double>::infinity(),
                                    -std::numeric_limits<double>::infinity(), lo, hi};
    const auto base = grid.multi_index(x0);
    for (auto p : out.contact.points) {
        auto idx = base;
        const auto off = dom.lattice_offset(p);
        for (int a = 0; a < Dim; ++a) idx[a] += off[a];
        const std::size_t q = grid.index(idx);
        out.level_excess = std::max(out.level_excess, sol.phi[q] - inf_phi - 0.5 * eps);
        const Mat<Dim> shifted = sigma * prob.metric().g(q) + covariant_hessian_at(sol.phi, prob.gamma(), q, st);
        const Mat<Dim> gap = out.test.u.hessian(p) - r * r * shifted;
        Eigen::SelfAdjointEigenSolver<Mat<Dim>> es(gap, Eigen::EigenvaluesOnly);
        out.hessian_order_excess = std::max(out.hessian_order_excess, es.eigenvalues()(Dim - 1));
        const double rhs = std::exp(sol.b) * prob.rhs()[q];
        const double bound = std::pow(rhs, Dim) / (std::pow(static_cast<double>(Dim), Dim) * c) * prob.metric().det(q);
        out.det_excess = std::max(out.det_excess, shifted.determinant() - bound);
    }
    return out;
}

/// Randomized convex fixture: v = x.Ax/2 + a sin(k.x) - 2 with spec(A) in [1, 3]
/// under a random rotation, eps drawn in [1/2, 1] of the largest admissible value.
template <int Dim>
struct ConvexFixture {
    BallField<Dim> v;
    double eps = 0.0;
};

template <int Dim>
ConvexFixture<Dim> random_convex_fixture(std::mt19937_64& rng, int resolution)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> gauss;
    Mat<Dim> m;
    for (int i = 0; i < Dim; ++i)
        for (int j = 0; j < Dim; ++j) m(i, j) = gauss(rng);
    const Mat<Dim> rot = Eigen::HouseholderQR<Mat<Dim>>(m).householderQ();
    Vec<Dim> l, k;
    for (int i = 0; i < Dim; ++i) l(i) = 1.0 + 2.0 * u(rng);
    const Mat<Dim> a = rot * l.asDiagonal() * rot.transpose();
    for (int i = 0; i < Dim; ++i) k(i) = 1.0 + 2.0 * u(rng);
    const double amp = 0.02 * u(rng);
    const BallDomain<Dim> ball(1.0, resolution);
    auto v = BallField<Dim>::sample(ball, [&](const Vec<Dim>& x) { return 0.5 * x.dot(a * x) + amp * std::sin(k.dot(x)) - 2.0; });
    const double eps = (0.5 + 0.5 * u(rng)) * (v.boundary_min() - v[ball.center_index()]);
    return {std::move(v), eps};
}

}  // namespace hessian_lab
