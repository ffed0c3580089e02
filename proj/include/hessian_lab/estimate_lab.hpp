#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "hessian_lab/abp_toolkit.hpp"
#include "hessian_lab/grid_geometry.hpp"
#include "hessian_lab/solver.hpp"
#include "hessian_lab/weak_harness.hpp"

namespace hessian_lab {

/// Geometry and operator given in closed form so that problems can be built
/// on any grid size.
template <int Dim>
struct ProblemSetup {
    using Point = typename PeriodicGrid<Dim>::Point;

    OperatorSpec op = OperatorSpec::monge_ampere(Dim);
    std::array<double, Dim> periods = filled(1.0);
    std::function<Mat<Dim>(const Point&)> metric = [](const Point&) { return Mat<Dim>::Identity(); };
    /// chi(x, g(x))
    std::function<Mat<Dim>(const Point&, const Mat<Dim>&)> chi = [](const Point&, const Mat<Dim>& g) {
        return Mat<Dim>(2.0 * g);
    };
    Scheme scheme = Scheme::fd4;

    PeriodicGrid<Dim> grid(int size) const
    {
        std::array<int, Dim> s;
        s.fill(size);
        return PeriodicGrid<Dim>(s, periods);
    }

    Problem<Dim> problem(const PeriodicGrid<Dim>& grid, ScalarField<Dim> rhs) const
    {
        auto g = MetricField<Dim>::sample(grid, metric);
        SymTensorField<Dim> c(grid);
        for (std::size_t p = 0; p < grid.num_points(); ++p) c.set(p, chi(grid.coords(p), g.g(p)));
        return Problem<Dim>(op, std::move(c), std::move(g), std::move(rhs), scheme);
    }

    /// rhs = F(chi), solved by (0, 0).
    ScalarField<Dim> base_rhs(const PeriodicGrid<Dim>& grid) const
    {
        auto g = MetricField<Dim>::sample(grid, metric);
        ScalarField<Dim> out(grid);
        for (std::size_t p = 0; p < grid.num_points(); ++p) out[p] = F_eval<Dim>(op, chi(grid.coords(p), g.g(p)), g.g(p));
        return out;
    }

private:
    static std::array<double, Dim> filled(double v)
    {
        std::array<double, Dim> a;
        a.fill(v);
        return a;
    }
};

/// (1/sqrt g) d_i (sqrt g g^{ij} d_j phi) with the same centred first-derivative
/// stencil applied twice. The flux differences telescope, so the discrete
/// integral against sqrt g dx vanishes up to round-off.
template <int Dim>
ScalarField<Dim> divergence_laplacian(const ScalarField<Dim>& phi, const MetricField<Dim>& metric, Scheme scheme)
{
    const auto st = stencil(scheme == Scheme::spectral ? Scheme::fd4 : scheme);
    const auto& grid = phi.grid();
    std::vector<ScalarField<Dim>> flux(Dim, ScalarField<Dim>(grid));
    for (std::size_t p = 0; p < grid.num_points(); ++p) {
        Vec<Dim> d;
        for (int a = 0; a < Dim; ++a) d(a) = partial_at(phi, p, a, st);
        const Vec<Dim> f = metric.volume_density(p) * (metric.inv(p) * d);
        for (int i = 0; i < Dim; ++i) flux[i][p] = f(i);
    }
    ScalarField<Dim> out(grid);
    for (std::size_t p = 0; p < grid.num_points(); ++p) {
        double s = 0.0;
        for (int i = 0; i < Dim; ++i) s += partial_at(flux[i], p, i, st);
        out[p] = s / metric.volume_density(p);
    }
    return out;
}

// ---------------------------------------------------------------- L-infinity

template <int Dim>
struct RhsMember {
    std::string label;
    std::function<double(const typename PeriodicGrid<Dim>::Point&)> rhs;
};

struct LinfRow {
    int size = 0;
    std::string label;
    bool converged = false;
    std::string error;
    double enf_lnq = 0.0;     // ||e^{f+b}||_{L^{nq}}
    double functional = 0.0;  // integral of e^{n(f+b)} (1 + n|f+b|)^p
    double phi_inf = 0.0;
    double b = 0.0;
    double residual = 0.0;
    double ratio = 0.0;       // phi_inf / (1 + functional)
};

struct LinfReport {
    std::vector<LinfRow> rows;
    double q = 0.0, p = 0.0;
    double fitted_C = 0.0;        // max ratio over converged rows
    double coarsest_max = 0.0;    // max ratio at the coarsest grid
    double max_refinement_change = 0.0;  // relative change of phi_inf between successive grids
    std::vector<std::string> warnings;
    bool pass = false;
};

template <int Dim>
LinfReport linf_experiment(const ProblemSetup<Dim>& setup, const std::vector<RhsMember<Dim>>& family,
                           std::vector<int> sizes, double q, double p, const SolveOptions& opts = {})
{
    if (!(q > 1.0)) throw ArgumentError(detail::concat("q must exceed 1, got ", q));
    if (!(p > 0.0)) throw ArgumentError(detail::concat("p must be positive, got ", p));
    LinfReport rep;
    rep.q = q;
    rep.p = p;
    if (family.empty() || sizes.empty()) {
        rep.warnings.push_back("empty rhs family or size list; nothing to do");
        rep.pass = true;
        return rep;
    }
    std::sort(sizes.begin(), sizes.end());
    for (int size : sizes) {
        const auto grid = setup.grid(size);
        for (const auto& m : family) {
            LinfRow row;
            row.size = size;
            row.label = m.label;
            try {
                auto rhs = ScalarField<Dim>::sample(grid, m.rhs);
                const auto prob = setup.problem(grid, rhs);
                const auto sol = solve_pair(prob, opts).solution;
                row.b = sol.b;
                row.residual = sol.residual;
                row.converged = sol.residual <= opts.newton_tol;
                const auto normalized = std::exp(sol.b) * rhs;
                row.enf_lnq = lp_norm(normalized, Dim * q, prob.metric());
                const auto integrand = normalized.map([&](double v) {
                    return std::pow(v, Dim) * std::pow(1.0 + Dim * std::abs(std::log(v)), p);
                });
                row.functional = integrate(integrand, prob.metric());
                row.phi_inf = sol.phi.abs_max();
                row.ratio = row.phi_inf / (1.0 + row.functional);
            } catch (const Error& e) {
                row.error = e.what();
                rep.warnings.push_back(detail::concat("size ", size, ", ", m.label, ": excluded (", e.what(), ")"));
            }
            rep.rows.push_back(std::move(row));
        }
    }
    bool any = false;
    for (const auto& r : rep.rows) {
        if (!r.converged) continue;
        any = true;
        rep.fitted_C = std::max(rep.fitted_C, r.ratio);
        if (r.size == sizes.front()) rep.coarsest_max = std::max(rep.coarsest_max, r.ratio);
    }
    for (std::size_t i = 0; i < rep.rows.size(); ++i)
        for (std::size_t j = i + 1; j < rep.rows.size(); ++j) {
            const auto& a = rep.rows[i];
            const auto& b = rep.rows[j];
            if (a.label != b.label || !a.converged || !b.converged || b.size <= a.size) continue;
            const double scale = std::max(a.phi_inf, 1e-12);
            if (a.phi_inf > 1e-12 || b.phi_inf > 1e-12)
                rep.max_refinement_change = std::max(rep.max_refinement_change, std::abs(b.phi_inf - a.phi_inf) / scale);
            break;
        }
    rep.pass = any && rep.fitted_C <= 10.0 * rep.coarsest_max + 1e-14;
    return rep;
}

// ----------------------------------------------------------------- stability

/// p(q-1) / (nq + p(q-1))
inline double stability_exponent(int n, double p, double q)
{
    if (n < 1) throw ArgumentError("dimension must be positive");
    if (!(p > 0.0)) throw ArgumentError(detail::concat("p must be positive, got ", p));
    if (!(q > 1.0)) throw ArgumentError(detail::concat("q must exceed 1, got ", q));
    const double a = p * (q - 1.0);
    return a / (n * q + a);
}

enum class StabilityBranch { zero, large, main };

inline const char* to_string(StabilityBranch b)
{
    switch (b) {
        case StabilityBranch::zero: return "r=0";
        case StabilityBranch::large: return "r>=1/2";
        case StabilityBranch::main: return "main";
    }
    return "?";
}

struct StabilityRow {
    double delta = 0.0;
    double sup_diff = 0.0;   // sup(phi2 - phi1)
    double lp_plus = 0.0;    // ||(phi2 - phi1)^+||_{L^p}
    double r = 0.0;          // lp_plus^exponent
    double ratio = 0.0;      // sup_diff / r on the main branch
    StabilityBranch branch = StabilityBranch::main;
    bool branch_holds = true;
    double b1 = 0.0, b2 = 0.0;
    double residual1 = 0.0, residual2 = 0.0;
    bool converged = true;
    std::string error;
};

/// Classifies one pair of sup-normalized potentials:
///   r = 0      -> phi2 - phi1 <= 0 everywhere
///   r >= 1/2   -> phi2 - phi1 <= 2 ||phi1||_inf r
///   otherwise  -> ratio sup(phi2 - phi1) / r
template <int Dim>
StabilityRow stability_row(const ScalarField<Dim>& phi1, const ScalarField<Dim>& phi2, const MetricField<Dim>& metric,
                           double p, double q)
{
    const double e = stability_exponent(Dim, p, q);
    const auto d = phi2 - phi1;
    StabilityRow row;
    row.sup_diff = d.max();
    row.lp_plus = lp_norm(d.map([](double v) { return std::max(v, 0.0); }), p, metric);
    row.r = row.lp_plus > 0.0 ? std::pow(row.lp_plus, e) : 0.0;
    const double slack = 1e-12 * std::max(1.0, phi1.abs_max());
    if (row.lp_plus == 0.0) {
        row.branch = StabilityBranch::zero;
        row.branch_holds = row.sup_diff <= slack;
    } else if (row.r >= 0.5) {
        row.branch = StabilityBranch::large;
        row.branch_holds = row.sup_diff <= 2.0 * phi1.abs_max() * row.r + slack;
    } else {
        row.branch = StabilityBranch::main;
        row.ratio = row.sup_diff / row.r;
    }
    return row;
}

struct StabilityReport {
    std::vector<StabilityRow> rows;
    int n = 0;
    double p = 0.0, q = 0.0;
    double exponent = 0.0;
    double max_ratio = 0.0;
    double min_ratio = 0.0;
    double spread = 1.0;  // max/min over positive main-branch ratios
    std::vector<std::string> warnings;
    bool pass = false;
};

/// prob carries e^f; each delta solves with e^{f + delta eta}. Both potentials
/// come out with sup = 0 and their own b, so each is an instance of the b-free
/// equation with b folded into f.
template <int Dim>
StabilityReport stability_experiment(const Problem<Dim>& prob, const ScalarField<Dim>& eta,
                                     const std::vector<double>& deltas, double p, double q,
                                     const SolveOptions& opts = {})
{
    require_same_grid(eta.grid(), prob.grid(), "stability_experiment");
    StabilityReport rep;
    rep.n = Dim;
    rep.p = p;
    rep.q = q;
    rep.exponent = stability_exponent(Dim, p, q);
    if (deltas.empty()) {
        rep.warnings.push_back("empty delta grid; nothing to do");
        rep.pass = true;
        return rep;
    }
    const auto base = solve_pair(prob, opts).solution;
    for (double delta : deltas) {
        StabilityRow row;
        try {
            ScalarField<Dim> rhs(prob.grid());
            for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = prob.rhs()[i] * std::exp(delta * eta[i]);
            const auto sol = solve_pair(prob.with_rhs(std::move(rhs)), opts).solution;
            row = stability_row(base.phi, sol.phi, prob.metric(), p, q);
            row.b2 = sol.b;
            row.residual2 = sol.residual;
        } catch (const Error& e) {
            row.converged = false;
            row.error = e.what();
            rep.warnings.push_back(detail::concat("delta ", delta, ": ", e.what()));
        }
        row.delta = delta;
        row.b1 = base.b;
        row.residual1 = base.residual;
        rep.rows.push_back(std::move(row));
    }
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    bool ok = true;
    for (const auto& r : rep.rows) {
        ok = ok && r.converged && r.branch_holds;
        if (r.converged && r.branch == StabilityBranch::main && r.ratio > 0.0) {
            lo = std::min(lo, r.ratio);
            hi = std::max(hi, r.ratio);
        }
    }
    if (hi > 0.0) {
        rep.max_ratio = hi;
        rep.min_ratio = lo;
        rep.spread = hi / lo;
    }
    rep.pass = ok && rep.spread <= 50.0;
    return rep;
}

// ------------------------------------------------------------------ b-bounds

struct BBoundsReport {
    double upper_bound = 0.0;  // (f_1(1) int S_1(lambda(chi)) + f(1) vol) / int e^f
    double e_b = 0.0;
    double margin = 0.0;       // upper_bound / e^b
    bool upper_pass = false;
    double laplacian_integral = 0.0;
    bool laplacian_integral_pass = false;
    /// min over points of Delta phi - [(e^b e^f - f(1)) / f_1(1) - S_1 + n]
    double min_pointwise_slack = 0.0;
    double pointwise_tolerance = 0.0;
    bool pointwise_pass = false;
    /// c0 eps^n / (e^{nb} int e^{nf}); measured, not asserted
    double implied_lower_constant = 0.0;
    double epsilon = 0.0;
    double residual = 0.0;
    bool pass = false;
};

/// Throws EstimateViolation when the strict upper bound fails.
template <int Dim>
BBoundsReport b_bounds_check(const Problem<Dim>& prob, const SolutionPair<Dim>& sol)
{
    require_same_grid(sol.phi.grid(), prob.grid(), "b_bounds_check");
    const auto& op = prob.op();
    const auto& metric = prob.metric();
    const double f1 = op.gradient_at_ones();
    const double f0 = op.value_at_ones();
    const auto st = stencil(prob.scheme());

    ScalarField<Dim> s1(prob.grid()), slack(prob.grid());
    for (std::size_t p = 0; p < s1.size(); ++p) {
        const Mat<Dim>& ginv = metric.inv(p);
        s1[p] = (ginv * prob.chi()[p]).trace();
        const double lap = (ginv * covariant_hessian_at(sol.phi, prob.gamma(), p, st)).trace();
        const double rhs = std::exp(sol.b) * prob.rhs()[p];
        slack[p] = lap - ((rhs - f0) / f1 - s1[p] + Dim);
    }
    BBoundsReport rep;
    rep.residual = sol.residual;
    rep.upper_bound = (f1 * integrate(s1, metric) + f0 * volume(metric)) / integrate(prob.rhs(), metric);
    rep.e_b = std::exp(sol.b);
    rep.margin = rep.upper_bound / rep.e_b;
    rep.upper_pass = rep.e_b < rep.upper_bound;
    rep.laplacian_integral = integrate(divergence_laplacian(sol.phi, metric, prob.scheme()), metric);
    rep.laplacian_integral_pass = std::abs(rep.laplacian_integral) <= 1e-8;
    rep.min_pointwise_slack = slack.min();
    rep.pointwise_tolerance = sol.residual / f1 + 1e-9 * std::max(1.0, s1.abs_max());
    rep.pointwise_pass = rep.min_pointwise_slack >= -rep.pointwise_tolerance;

    double r = normal_chart_radius(metric);
    if (r <= 0.0) r = 1.0;
    rep.epsilon = abp_default_epsilon(op.sigma(), prob.gamma(), r);
    const auto enf = prob.rhs().map([](double v) { return std::pow(v, Dim); });
    rep.implied_lower_constant =
        abp_constant(Dim) * std::pow(rep.epsilon, Dim) / (std::exp(Dim * sol.b) * integrate(enf, metric));
    rep.pass = rep.upper_pass && rep.laplacian_integral_pass && rep.pointwise_pass;
    if (!rep.upper_pass)
        throw EstimateViolation(detail::concat("upper bound for b violated: e^b = ", rep.e_b, " >= ", rep.upper_bound));
    return rep;
}

// -------------------------------------------------------------- b-uniqueness

struct BUniquenessReport {
    std::vector<double> b_a, b_b, gap;
    double final_gap = 0.0;
    bool decreasing = false;
    bool pass = false;
};

/// Two approximation sequences of the same rough rhs; |b_i - b~_i| per level.
template <int Dim>
BUniquenessReport b_uniqueness_probe(const Problem<Dim>& prob, const ScalarField<Dim>& rough_rhs,
                                     const MollifierSchedule& a, const MollifierSchedule& b,
                                     const SolveOptions& opts = {})
{
    if (a.levels != b.levels) throw ArgumentError("both schedules need the same number of levels");
    const auto ra = weak_solve(prob, rough_rhs, a, opts);
    const auto rb = weak_solve(prob, rough_rhs, b, opts);
    BUniquenessReport rep;
    rep.b_a = ra.certificate.b_per_level;
    rep.b_b = rb.certificate.b_per_level;
    for (std::size_t i = 0; i < rep.b_a.size(); ++i) rep.gap.push_back(std::abs(rep.b_a[i] - rep.b_b[i]));
    rep.final_gap = rep.gap.back();
    rep.decreasing = true;
    for (std::size_t i = 1; i < rep.gap.size(); ++i)
        if (rep.gap[i] > rep.gap[i - 1] + 1e-12) rep.decreasing = false;
    rep.pass = rep.decreasing && rep.final_gap <= 1e-3;
    return rep;
}

// ----------------------------------------------------------- equicontinuity

struct EquicontinuityRow {
    std::string label;
    double rk_ratio = 0.0;  // ||e^f||_{L^{nq}} / ||e^f||_{L^1}
    double b = 0.0;
    double residual = 0.0;
    std::array<double, 3> omega{};  // at h = 4, 2, 1 grid spacings
};

struct EquicontinuityReport {
    std::vector<EquicontinuityRow> rows;
    std::array<double, 3> h{};
    std::array<double, 3> envelope{};
    double K = 0.0, q = 0.0;
    std::vector<std::string> warnings;
    bool pass = false;
};

/// max |phi(x) - phi(y)| over grid pairs whose straight chart segment has
/// length <= h in the metric averaged between the endpoints.
template <int Dim>
double modulus_of_continuity(const ScalarField<Dim>& phi, const MetricField<Dim>& metric, double h)
{
    const auto& grid = phi.grid();
    const auto [lo, hi] = metric_equivalence_constants(metric);
    (void)hi;
    std::array<int, Dim> reach;
    for (int a = 0; a < Dim; ++a) reach[a] = static_cast<int>(std::ceil(h / std::sqrt(lo) / grid.spacing(a)));
    std::vector<std::array<int, Dim>> offsets;
    std::array<int, Dim> o;
    for (int a = 0; a < Dim; ++a) o[a] = -reach[a];
    for (;;) {
        bool zero = true;
        for (int v : o) zero = zero && v == 0;
        if (!zero) offsets.push_back(o);
        int a = Dim - 1;
        while (a >= 0 && o[a] == reach[a]) {
            o[a] = -reach[a];
            --a;
        }
        if (a < 0) break;
        ++o[a];
    }
    double w = 0.0;
    for (std::size_t p = 0; p < grid.num_points(); ++p) {
        const auto base = grid.multi_index(p);
        for (const auto& off : offsets) {
            auto idx = base;
            Vec<Dim> d;
            for (int a = 0; a < Dim; ++a) {
                idx[a] += off[a];
                d(a) = off[a] * grid.spacing(a);
            }
            const std::size_t q = grid.index(idx);
            const double len = std::sqrt(d.dot(0.5 * (metric.g(p) + metric.g(q)) * d));
            if (len <= h * (1.0 + 1e-12)) w = std::max(w, std::abs(phi[p] - phi[q]));
        }
    }
    return w;
}

/// Every rhs must satisfy ||e^f||_{L^{nq}} / ||e^f||_{L^1} < K. Passes when
/// all solves converge and the family envelope decays at least like h^{1/2}
/// from h = 4 to h = 1 grid spacings.
template <int Dim>
EquicontinuityReport equicontinuity_probe(const Problem<Dim>& prob,
                                          const std::vector<std::pair<std::string, ScalarField<Dim>>>& family,
                                          double K, double q, const SolveOptions& opts = {})
{
    if (!(q > 1.0)) throw ArgumentError(detail::concat("q must exceed 1, got ", q));
    const auto& metric = prob.metric();
    EquicontinuityReport rep;
    rep.K = K;
    rep.q = q;
    double h0 = prob.grid().spacing(0);
    for (int a = 1; a < Dim; ++a) h0 = std::min(h0, prob.grid().spacing(a));
    rep.h = {4.0 * h0, 2.0 * h0, h0};
    for (const auto& [label, rhs] : family) {
        const double ratio = lp_norm(rhs, Dim * q, metric) / lp_norm(rhs, 1.0, metric);
        if (!(ratio < K))
            throw ArgumentError(detail::concat("rhs \"", label, "\" is outside R_K: ||e^f||_{L^", Dim * q,
                                               "} / ||e^f||_{L^1} = ", ratio, " >= K = ", K));
    }
    if (family.empty()) {
        rep.warnings.push_back("empty rhs family; nothing to do");
        rep.pass = true;
        return rep;
    }
    for (const auto& [label, rhs] : family) {
        EquicontinuityRow row;
        row.label = label;
        row.rk_ratio = lp_norm(rhs, Dim * q, metric) / lp_norm(rhs, 1.0, metric);
        const auto sol = solve_pair(prob.with_rhs(rhs), opts).solution;
        row.b = sol.b;
        row.residual = sol.residual;
        for (int i = 0; i < 3; ++i) row.omega[i] = modulus_of_continuity(sol.phi, metric, rep.h[i]);
        for (int i = 0; i < 3; ++i) rep.envelope[i] = std::max(rep.envelope[i], row.omega[i]);
        rep.rows.push_back(row);
    }
    bool ok = true;
    for (const auto& r : rep.rows) ok = ok && r.residual <= opts.newton_tol;
    const bool decays = rep.envelope[2] <= rep.envelope[0] * std::sqrt(rep.h[2] / rep.h[0]) + 1e-14;
    rep.pass = ok && std::isfinite(rep.envelope[0]) && decays;
    return rep;
}

}  // namespace hessian_lab
