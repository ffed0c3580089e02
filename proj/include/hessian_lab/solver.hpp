#pragma once

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hessian_lab/grid_geometry.hpp"
#include "hessian_lab/symmetric_operators.hpp"

namespace hessian_lab {

/// F(chi + nabla^2 phi) = e^b rhs on the torus, together with the cached
/// connection and the base right-hand side F(chi) anchoring the continuity path.
template <int Dim>
class Problem {
public:
    Problem(OperatorSpec op, SymTensorField<Dim> chi, MetricField<Dim> metric, ScalarField<Dim> rhs,
            Scheme scheme = Scheme::fd4)
        : op_(std::move(op)), chi_(std::move(chi)), metric_(std::move(metric)), rhs_(std::move(rhs)),
          scheme_(scheme), gamma_(christoffels(metric_, scheme == Scheme::spectral ? Scheme::fd4 : scheme)),
          base_(metric_.grid())
    {
        if (op_.dim() != Dim)
            throw ArgumentError(detail::concat("operator dimension ", op_.dim(), " does not match grid dimension ", Dim));
        if (scheme_ == Scheme::spectral) throw ArgumentError("the solver needs a finite-difference scheme (fd2 or fd4)");
        require_same_grid(chi_.grid(), metric_.grid(), "Problem(chi, metric)");
        require_same_grid(rhs_.grid(), metric_.grid(), "Problem(rhs, metric)");
        const double sigma = op_.sigma();
        for (std::size_t p = 0; p < rhs_.size(); ++p) {
            if (!(rhs_[p] > 0.0))
                throw ArgumentError(detail::concat("rhs must be strictly positive; rhs = ", rhs_[p], " at point ", p));
            const auto s = eigenvalues_wrt_metric<Dim>(chi_[p] - sigma * metric_.g(p), metric_.g(p));
            if (!op_.in_cone(s.values()))
                throw ConeViolation(detail::concat("lambda(chi - sigma g) is outside the cone at point ", p,
                                                   " (margin ", op_.cone_margin(s.values()), ")"),
                                    {s.values().begin(), s.values().end()}, p, op_.cone_margin(s.values()));
            base_[p] = F_eval<Dim>(op_, chi_[p], metric_.g(p));
        }
    }

    const OperatorSpec& op() const { return op_; }
    const SymTensorField<Dim>& chi() const { return chi_; }
    const MetricField<Dim>& metric() const { return metric_; }
    const ChristoffelField<Dim>& gamma() const { return gamma_; }
    const ScalarField<Dim>& rhs() const { return rhs_; }
    /// F(chi), i.e. e^{f~}: the right-hand side solved by (0, 0).
    const ScalarField<Dim>& base_rhs() const { return base_; }
    const PeriodicGrid<Dim>& grid() const { return metric_.grid(); }
    Scheme scheme() const { return scheme_; }

    /// e^{t f + (1 - t) f~}
    ScalarField<Dim> path_rhs(double t) const
    {
        if (t == 1.0) return rhs_;
        ScalarField<Dim> out(grid());
        for (std::size_t p = 0; p < out.size(); ++p)
            out[p] = std::exp(t * std::log(rhs_[p]) + (1.0 - t) * std::log(base_[p]));
        return out;
    }

    /// Same geometry and operator, different right-hand side.
    Problem with_rhs(ScalarField<Dim> rhs) const
    {
        Problem p = *this;
        require_same_grid(rhs.grid(), grid(), "Problem::with_rhs");
        for (std::size_t q = 0; q < rhs.size(); ++q)
            if (!(rhs[q] > 0.0))
                throw ArgumentError(detail::concat("rhs must be strictly positive; rhs = ", rhs[q], " at point ", q));
        p.rhs_ = std::move(rhs);
        return p;
    }

private:
    OperatorSpec op_;
    SymTensorField<Dim> chi_;
    MetricField<Dim> metric_;
    ScalarField<Dim> rhs_;
    Scheme scheme_;
    ChristoffelField<Dim> gamma_;
    ScalarField<Dim> base_;
};

template <int Dim>
struct SolutionPair {
    ScalarField<Dim> phi;
    double b = 0.0;
    double residual = 0.0;  // infinity norm at acceptance
    int newton_iters = 0;
};

enum class LinearSolver { automatic, direct, bicgstab };

inline const char* to_string(LinearSolver s)
{
    switch (s) {
        case LinearSolver::automatic: return "automatic";
        case LinearSolver::direct: return "direct";
        case LinearSolver::bicgstab: return "bicgstab";
    }
    return "?";
}

struct SolveOptions {
    int continuity_steps = 2;
    double newton_tol = 1e-10;
    int max_newton_iters = 40;
    double damping_floor = 0x1p-20;
    double linear_tol = 1e-12;
    int max_bisections = 10;
    LinearSolver linear = LinearSolver::automatic;
    /// Slack on the path check b_t <= t max(f~ - f).
    double path_bound_tol = 1e-6;

    void validate() const
    {
        if (continuity_steps < 1) throw ArgumentError("continuity_steps must be >= 1");
        if (!(newton_tol > 0.0) || !(linear_tol > 0.0)) throw ArgumentError("tolerances must be positive");
        if (max_newton_iters < 1) throw ArgumentError("max_newton_iters must be >= 1");
        if (!(damping_floor > 0.0 && damping_floor < 1.0)) throw ArgumentError("damping_floor must lie in (0, 1)");
        if (max_bisections < 0) throw ArgumentError("max_bisections must be >= 0");
    }
};

struct PathStep {
    double t = 0.0;
    double b = 0.0;
    int newton_iters = 0;
    double residual = 0.0;
};

template <int Dim>
struct PathResult {
    SolutionPair<Dim> solution;
    std::vector<PathStep> path;
    double seconds = 0.0;
};

namespace detail {

template <int Dim>
struct Evaluation {
    bool in_cone = true;
    std::size_t worst_point = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    std::vector<double> worst_lambda;
    std::vector<double> value;       // F(chi + nabla^2 phi)
    std::vector<Mat<Dim>> deriv;     // dF/dA, only when requested
    std::vector<double> residual;
    double residual_norm = std::numeric_limits<double>::infinity();
};

template <int Dim>
Evaluation<Dim> evaluate(const Problem<Dim>& prob, const ScalarField<Dim>& rhs, const ScalarField<Dim>& phi,
                         double b, bool with_deriv)
{
    const auto& grid = prob.grid();
    const std::size_t n = grid.num_points();
    const auto st = stencil(prob.scheme());
    Evaluation<Dim> ev;
    ev.value.resize(n);
    if (with_deriv) ev.deriv.resize(n);
    std::vector<double> margin(n);
    std::vector<Vec<Dim>> lam(n);
    parallel_for(n, [&](std::size_t p) {
        const Mat<Dim> a = prob.chi()[p] + covariant_hessian_at(phi, prob.gamma(), p, st);
        const auto s = eigenvalues_wrt_metric<Dim>(a, prob.metric().g(p));
        lam[p] = s.lambda;
        margin[p] = prob.op().cone_margin(s.values());
        if (!(margin[p] > 0.0)) return;
        ev.value[p] = prob.op().value(s.values());
        if (with_deriv) ev.deriv[p] = F_deriv_from_spectrum(prob.op(), s);
    });
    for (std::size_t p = 0; p < n; ++p)
        if (margin[p] < ev.min_margin) {
            ev.min_margin = margin[p];
            ev.worst_point = p;
        }
    ev.worst_lambda.assign(lam[ev.worst_point].data(), lam[ev.worst_point].data() + Dim);
    ev.in_cone = ev.min_margin > 0.0;
    if (!ev.in_cone) return ev;
    const double eb = std::exp(b);
    ev.residual.resize(n);
    ev.residual_norm = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        ev.residual[p] = ev.value[p] - eb * rhs[p];
        ev.residual_norm = std::max(ev.residual_norm, std::abs(ev.residual[p]));
    }
    return ev;
}

template <int Dim>
[[noreturn]] void throw_cone(const Evaluation<Dim>& ev, const char* what)
{
    throw ConeViolation(concat(what, ": lambda(chi + nabla^2 phi) leaves the cone at point ", ev.worst_point,
                               " with margin ", ev.min_margin),
                        ev.worst_lambda, ev.worst_point, ev.min_margin);
}

/// Bordered Jacobian [[L, -e^b rhs], [1^T / N, 0]] of (phi, b) -> F(chi + nabla^2 phi) - e^b rhs
/// with the mean-zero row closing the constant kernel of L.
template <int Dim>
Eigen::SparseMatrix<double> jacobian(const Problem<Dim>& prob, const Evaluation<Dim>& ev, const ScalarField<Dim>& rhs,
                                     double b)
{
    const auto& grid = prob.grid();
    const std::size_t n = grid.num_points();
    const auto st = stencil(prob.scheme());
    using Triplet = Eigen::Triplet<double>;
    std::vector<Triplet> trip;
    std::size_t per_row = 1;
    for (int i = 0; i < Dim; ++i) per_row += st.second.size() + st.first.size();
    per_row += Dim * (Dim - 1) / 2 * st.first.size() * st.first.size();
    trip.reserve(n * per_row + 2 * n);
    const double eb = std::exp(b);
    for (std::size_t p = 0; p < n; ++p) {
        const Mat<Dim>& d = ev.deriv[p];
        const auto& gam = prob.gamma()[p];
        const auto row = static_cast<Eigen::Index>(p);
        for (int i = 0; i < Dim; ++i) {
            const double hi = grid.spacing(i);
            const double cii = d(i, i) / (hi * hi);
            for (const auto& tap : st.second)
                trip.emplace_back(row, static_cast<Eigen::Index>(grid.shifted(p, i, tap.offset)), cii * tap.weight);
            for (int j = i + 1; j < Dim; ++j) {
                const double cij = 2.0 * d(i, j) / (hi * grid.spacing(j));
                if (cij == 0.0) continue;
                for (const auto& ta : st.first) {
                    const std::size_t q = grid.shifted(p, i, ta.offset);
                    for (const auto& tb : st.first)
                        trip.emplace_back(row, static_cast<Eigen::Index>(grid.shifted(q, j, tb.offset)),
                                          cij * ta.weight * tb.weight);
                }
            }
        }
        for (int k = 0; k < Dim; ++k) {
            const double ck = -d.cwiseProduct(gam[k]).sum() / grid.spacing(k);
            if (ck == 0.0) continue;
            for (const auto& tap : st.first)
                trip.emplace_back(row, static_cast<Eigen::Index>(grid.shifted(p, k, tap.offset)), ck * tap.weight);
        }
        trip.emplace_back(row, static_cast<Eigen::Index>(n), -eb * rhs[p]);
        trip.emplace_back(static_cast<Eigen::Index>(n), row, 1.0 / static_cast<double>(n));
    }
    Eigen::SparseMatrix<double> j(static_cast<Eigen::Index>(n + 1), static_cast<Eigen::Index>(n + 1));
    j.setFromTriplets(trip.begin(), trip.end());
    j.makeCompressed();
    return j;
}

/// Factorization cache: the sparsity pattern is the same for every Newton
/// iteration on a grid, so the symbolic analysis is done once.
class LinearSystem {
public:
    LinearSystem(LinearSolver kind, double tol) : kind_(kind), tol_(tol) {}

    Eigen::VectorXd solve(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& rhs)
    {
        Eigen::VectorXd x;
        if (kind_ == LinearSolver::bicgstab) {
            Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> it;
            it.preconditioner().setDroptol(1e-4);
            it.preconditioner().setFillfactor(20);
            it.setTolerance(tol_);
            it.setMaxIterations(2000);
            it.compute(a);
            x = it.solve(rhs);
            if (it.info() != Eigen::Success && it.error() > 1e3 * tol_)
                throw NonConvergence(concat("BiCGSTAB stopped at relative residual ", it.error()), {it.error()});
            return x;
        }
        if (!analyzed_) {
            lu_.analyzePattern(a);
            analyzed_ = true;
        }
        lu_.factorize(a);
        if (lu_.info() != Eigen::Success) throw NonConvergence("sparse LU factorization failed", {});
        x = lu_.solve(rhs);
        // one step of iterative refinement keeps the relative residual at the requested level
        const double norm = std::max(rhs.norm(), std::numeric_limits<double>::min());
        Eigen::VectorXd r = rhs - a * x;
        if (r.norm() > tol_ * norm) x += lu_.solve(r);
        return x;
    }

private:
    LinearSolver kind_;
    double tol_;
    bool analyzed_ = false;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

template <int Dim>
LinearSolver resolve_linear_solver(LinearSolver requested, std::size_t points)
{
    if (requested != LinearSolver::automatic) return requested;
    return (Dim == 3 && points > 20000) ? LinearSolver::bicgstab : LinearSolver::direct;
}

inline void remove_mean(std::span<double> v)
{
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    for (double& x : v) x -= m;
}

}  // namespace detail

/// Pointwise F(chi + nabla^2 phi) - e^b rhs. Throws ConeViolation (worst point
/// and margin) if some eigenvalue vector leaves the cone.
template <int Dim>
ScalarField<Dim> residual(const Problem<Dim>& prob, const ScalarField<Dim>& phi, double b)
{
    require_same_grid(phi.grid(), prob.grid(), "residual");
    const auto ev = detail::evaluate(prob, prob.rhs(), phi, b, false);
    if (!ev.in_cone) detail::throw_cone(ev, "residual");
    return ScalarField<Dim>(prob.grid(), ev.residual);
}

/// Damped Newton for the path point t, started from `warm`. The returned phi
/// has sup exactly 0.
template <int Dim>
SolutionPair<Dim> solve_fixed_path_point(const Problem<Dim>& prob, double t, const SolutionPair<Dim>& warm,
                                         const SolveOptions& opts = {})
{
    opts.validate();
    if (!(t >= 0.0 && t <= 1.0)) throw ArgumentError(detail::concat("path parameter t must lie in [0, 1], got ", t));
    require_same_grid(warm.phi.grid(), prob.grid(), "solve_fixed_path_point");
    const auto rhs = prob.path_rhs(t);
    ScalarField<Dim> phi = warm.phi;
    detail::remove_mean(phi.values());
    double b = warm.b;

    auto ev = detail::evaluate(prob, rhs, phi, b, true);
    if (!ev.in_cone) detail::throw_cone(ev, "warm start");
    std::vector<double> history{ev.residual_norm};
    const std::size_t n = prob.grid().num_points();
    detail::LinearSystem linear(detail::resolve_linear_solver<Dim>(opts.linear, n), opts.linear_tol);

    int iters = 0;
    while (ev.residual_norm > opts.newton_tol) {
        if (iters >= opts.max_newton_iters)
            throw NonConvergence(detail::concat("Newton did not reach ", opts.newton_tol, " in ", iters,
                                                " iterations at t = ", t, " (residual ", ev.residual_norm, ")"),
                                 history);
        const auto jac = detail::jacobian(prob, ev, rhs, b);
        Eigen::VectorXd r(static_cast<Eigen::Index>(n + 1));
        for (std::size_t p = 0; p < n; ++p) r(static_cast<Eigen::Index>(p)) = -ev.residual[p];
        r(static_cast<Eigen::Index>(n)) = 0.0;
        const Eigen::VectorXd step = linear.solve(jac, r);

        double alpha = 1.0;
        for (;;) {
            ScalarField<Dim> trial = phi;
            for (std::size_t p = 0; p < n; ++p) trial[p] += alpha * step(static_cast<Eigen::Index>(p));
            const double tb = b + alpha * step(static_cast<Eigen::Index>(n));
            auto tev = detail::evaluate(prob, rhs, trial, tb, true);
            if (tev.in_cone && tev.residual_norm < ev.residual_norm) {
                phi = std::move(trial);
                detail::remove_mean(phi.values());
                b = tb;
                ev = std::move(tev);
                break;
            }
            alpha *= 0.5;
            if (alpha < opts.damping_floor) {
                history.push_back(ev.residual_norm);
                throw NonConvergence(detail::concat("Newton damping fell below ", opts.damping_floor, " at t = ", t,
                                                    " (residual ", ev.residual_norm, ")"),
                                     history);
            }
        }
        ++iters;
        history.push_back(ev.residual_norm);
    }

    phi += -phi.max();
    return {std::move(phi), b, ev.residual_norm, iters};
}

/// Continuity path t = 0 -> 1 with uniform steps, bisecting a failed step up
/// to 2^max_bisections times. Each accepted point is checked against
/// b_t <= t max(f~ - f), which follows from the maximum principle.
template <int Dim>
PathResult<Dim> solve_pair(const Problem<Dim>& prob, const SolveOptions& opts = {})
{
    opts.validate();
    const auto start = std::chrono::steady_clock::now();
    const auto& grid = prob.grid();
    double max_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < grid.num_points(); ++p)
        max_gap = std::max(max_gap, std::log(prob.base_rhs()[p]) - std::log(prob.rhs()[p]));

    std::vector<PathStep> path;
    SolutionPair<Dim> current{ScalarField<Dim>(grid), 0.0, 0.0, 0};
    const double base_step = 1.0 / opts.continuity_steps;
    const double min_step = base_step / std::pow(2.0, opts.max_bisections);
    double t = 0.0;
    double step = base_step;
    while (t < 1.0) {
        const double target = std::min(1.0, t + step);
        try {
            auto next = solve_fixed_path_point(prob, target, current, opts);
            const double bound = target * max_gap + opts.path_bound_tol;
            if (next.b > bound)
                throw EstimateViolation(detail::concat("path bound violated at t = ", target, ": b_t = ", next.b,
                                                       " exceeds t max(f~ - f) = ", target * max_gap));
            path.push_back({target, next.b, next.newton_iters, next.residual});
            current = std::move(next);
            t = target;
            // one success lets the step grow back toward the uniform size
            step = std::min(base_step, 2.0 * step);
        } catch (const NonConvergence& e) {
            step *= 0.5;
            if (step < min_step * (1.0 - 1e-12))
                throw NonConvergence(detail::concat("continuity path failed near t = ", t, " after ",
                                                    opts.max_bisections, " bisections: ", e.what()),
                                     e.residual_history());
        } catch (const ConeViolation& e) {
            step *= 0.5;
            if (step < min_step * (1.0 - 1e-12)) throw;
        }
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(current), std::move(path), seconds};
}

}  // namespace hessian_lab
