#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "hessian_lab/grid_geometry.hpp"
#include "hessian_lab/solver.hpp"
#include "hessian_lab/spectral.hpp"
#include "hessian_lab/symmetric_operators.hpp"

namespace hessian_lab {

enum class Smoother { sharp, raised_cosine };

inline const char* to_string(Smoother s) { return s == Smoother::sharp ? "sharp" : "raised_cosine"; }

/// Level i (1-based) starts from cutoff base_cutoff 2^i and floor base_floor 2^-i;
/// a level that misses its target doubles the cutoff (until the filter is the
/// identity) and then halves the floor.
struct MollifierSchedule {
    int levels = 8;
    Smoother smoother = Smoother::sharp;
    double base_cutoff = 1.0;
    double base_floor = 0.25;
    double q = 2.0;  // target norm is L^{nq}
    int max_refinements = 40;

    void validate() const
    {
        if (levels < 3) throw ArgumentError(detail::concat("a mollifier schedule needs at least 3 levels, got ", levels));
        if (!(base_cutoff > 0.0)) throw ArgumentError("base_cutoff must be positive");
        if (!(base_floor > 0.0)) throw ArgumentError("base_floor must be positive");
        if (!(q > 1.0)) throw ArgumentError(detail::concat("q must exceed 1, got ", q));
        if (max_refinements < 0) throw ArgumentError("max_refinements must be >= 0");
    }
};

template <int Dim>
struct MollifiedLevel {
    int level = 0;
    double cutoff = 0.0;
    double floor = 0.0;
    double error = 0.0;  // ||e^{f_i} - e^f||_{L^{nq}}
    int refinements = 0;
    double mass = 0.0;   // integral of e^{f_i}
    bool mass_ok = false;
    double power_norm = 0.0;  // ||e^{n f_i}||_{L^q}
    bool power_norm_ok = false;
    ScalarField<Dim> field;
};

namespace detail {

template <int Dim>
int nyquist(const PeriodicGrid<Dim>& g)
{
    int m = 0;
    for (int a = 0; a < Dim; ++a) m = std::max(m, g.size(a) / 2);
    return m;
}

template <int Dim>
ScalarField<Dim> low_pass(const ScalarField<Dim>& f, double cutoff, Smoother s)
{
    return spectral_filter(f, [&](const std::array<int, Dim>& m) {
        int r = 0;
        for (int a = 0; a < Dim; ++a) r = std::max(r, std::abs(m[a]));
        if (s == Smoother::sharp) return r <= cutoff ? 1.0 : 0.0;
        const double x = r / cutoff;
        if (x <= 0.5) return 1.0;
        if (x >= 1.0) return 0.0;
        const double c = std::cos(std::numbers::pi * (x - 0.5));
        return c * c;
    });
}

}  // namespace detail

/// Smooth positive approximants e^{f_i} = max(lowpass_i(rhs), floor_i) with
/// ||e^{f_i} - e^f||_{L^{nq}} < 2^-i at every level.
template <int Dim>
std::vector<MollifiedLevel<Dim>> mollify_sequence(const ScalarField<Dim>& rhs, const MetricField<Dim>& metric,
                                                  const MollifierSchedule& schedule)
{
    schedule.validate();
    require_same_grid(rhs.grid(), metric.grid(), "mollify_sequence");
    for (std::size_t p = 0; p < rhs.size(); ++p)
        if (!(rhs[p] >= 0.0))
            throw ArgumentError(detail::concat("rough rhs must be non-negative; rhs = ", rhs[p], " at point ", p));
    const double mass = integrate(rhs, metric);
    if (!(mass > 0.0)) throw ArgumentError("rough rhs has zero integral; the equation has no solution pair");

    const double nq = Dim * schedule.q;
    const double vol = volume(metric);
    const double rhs_power = lp_norm(rhs.map([](double v) { return std::pow(v, Dim); }), schedule.q, metric);
    const double cap = schedule.smoother == Smoother::sharp ? detail::nyquist(rhs.grid()) : 2.0 * detail::nyquist(rhs.grid());

    std::vector<MollifiedLevel<Dim>> out;
    double cutoff = 0.0, floor = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= schedule.levels; ++i) {
        cutoff = std::min(cap, std::max(cutoff, schedule.base_cutoff * std::ldexp(1.0, i)));
        floor = std::min(floor, schedule.base_floor * std::ldexp(1.0, -i));
        const double target = std::ldexp(1.0, -i);
        int refinements = 0;
        std::vector<double> history;
        for (;;) {
            auto smooth = detail::low_pass(rhs, cutoff, schedule.smoother);
            const double fl = floor;
            auto field = smooth.map([fl](double v) { return std::max(v, fl); });
            const double err = lp_norm(field - rhs, nq, metric);
            history.push_back(err);
            if (err < target) {
                MollifiedLevel<Dim> lv{i, cutoff, floor, err, refinements, integrate(field, metric), false, 0.0, false,
                                       std::move(field)};
                lv.mass_ok = lv.mass >= 0.5 * mass && lv.mass <= mass + target * std::pow(vol, (nq - 1.0) / nq);
                lv.power_norm = lp_norm(lv.field.map([](double v) { return std::pow(v, Dim); }), schedule.q, metric);
                lv.power_norm_ok = lv.power_norm <= 2.0 * rhs_power;
                out.push_back(std::move(lv));
                break;
            }
            if (++refinements > schedule.max_refinements)
                throw NonConvergence(detail::concat("mollifier level ", i, " reached L^", nq, " error ", err,
                                                    " against target ", target, " after ", schedule.max_refinements,
                                                    " refinements"),
                                     history);
            if (cutoff < cap)
                cutoff = std::min(cap, 2.0 * cutoff);
            else
                floor *= 0.5;
        }
    }
    return out;
}

struct WeakCertificate {
    int levels = 0;
    std::vector<double> b_per_level;
    std::vector<double> residual_per_level;
    /// cauchy[l][k] = ||phi_l - phi_k||_inf for k < l (0-based levels), empty otherwise
    std::vector<std::vector<double>> cauchy;
    /// E_k = max over k' >= k, l > k' of cauchy[l][k']; nonincreasing
    std::vector<double> envelope;
    double fitted_C = 0.0;     // smallest C with E_k <= C 2^-k (k 1-based)
    double decay_slope = 0.0;  // least-squares slope of log2 E_k; certification needs <= -1/2
    double tail_bound = 0.0;   // C 2^-K / (1 - 1/2) at the finest level K
    /// ||grad phi_i||^2_{L^2} and ||phi_i||_inf * int S_1(lambda(chi)) per level
    std::vector<double> gradient_energy;
    std::vector<double> gradient_energy_bound;
    bool gradient_energy_ok = true;
    bool mollifier_bounds_ok = true;
    bool pass = false;
    std::string note;
};

template <int Dim>
struct WeakResult {
    SolutionPair<Dim> solution;  // finest level
    WeakCertificate certificate;
    std::vector<MollifiedLevel<Dim>> levels;
    std::vector<SolutionPair<Dim>> level_solutions;
};

namespace detail {

/// Warm start from the previous level at t = 1, falling back to the full path.
template <int Dim>
SolutionPair<Dim> solve_level(const Problem<Dim>& prob, const SolutionPair<Dim>* warm, const SolveOptions& opts)
{
    if (warm) {
        try {
            return solve_fixed_path_point(prob, 1.0, *warm, opts);
        } catch (const NonConvergence&) {
        } catch (const ConeViolation&) {
        }
    }
    return solve_pair(prob, opts).solution;
}

template <int Dim>
double gradient_energy(const ScalarField<Dim>& phi, const MetricField<Dim>& metric, Scheme scheme)
{
    const auto st = stencil(scheme == Scheme::spectral ? Scheme::fd4 : scheme);
    ScalarField<Dim> e(phi.grid());
    for (std::size_t p = 0; p < phi.size(); ++p) {
        Vec<Dim> d;
        for (int a = 0; a < Dim; ++a) d(a) = partial_at(phi, p, a, st);
        e[p] = d.dot(metric.inv(p) * d);
    }
    return integrate(e, metric);
}

template <int Dim>
double trace_integral(const SymTensorField<Dim>& chi, const MetricField<Dim>& metric)
{
    ScalarField<Dim> s(chi.grid());
    for (std::size_t p = 0; p < chi.size(); ++p) s[p] = (metric.inv(p) * chi[p]).trace();
    return integrate(s, metric);
}

}  // namespace detail

/// Solves every mollified level and certifies geometric Cauchy decay in L^inf.
/// `prob` supplies the geometry and operator; its rhs is replaced level by level.
template <int Dim>
WeakResult<Dim> weak_solve(const Problem<Dim>& prob, const ScalarField<Dim>& rough_rhs, const MollifierSchedule& schedule,
                           const SolveOptions& opts = {})
{
    auto levels = mollify_sequence(rough_rhs, prob.metric(), schedule);
    const int L = static_cast<int>(levels.size());
    std::vector<SolutionPair<Dim>> sols;
    WeakCertificate cert;
    cert.levels = L;
    const double s1 = detail::trace_integral(prob.chi(), prob.metric());
    for (int i = 0; i < L; ++i) {
        const auto pi = prob.with_rhs(levels[i].field);
        sols.push_back(detail::solve_level(pi, sols.empty() ? nullptr : &sols.back(), opts));
        cert.b_per_level.push_back(sols.back().b);
        cert.residual_per_level.push_back(sols.back().residual);
        const double energy = detail::gradient_energy(sols.back().phi, prob.metric(), prob.scheme());
        const double bound = sols.back().phi.abs_max() * s1;
        cert.gradient_energy.push_back(energy);
        cert.gradient_energy_bound.push_back(bound);
        if (energy > bound * (1.0 + 1e-6) + 1e-14) cert.gradient_energy_ok = false;
        if (!levels[i].mass_ok || !levels[i].power_norm_ok) cert.mollifier_bounds_ok = false;
    }

    cert.cauchy.assign(L, std::vector<double>(L, 0.0));
    std::vector<double> e(L > 0 ? L - 1 : 0, 0.0);
    for (int l = 0; l < L; ++l)
        for (int k = 0; k < l; ++k) {
            cert.cauchy[l][k] = (sols[l].phi - sols[k].phi).abs_max();
            e[k] = std::max(e[k], cert.cauchy[l][k]);
        }
    cert.envelope.assign(e.size(), 0.0);
    double run = 0.0;
    for (int k = static_cast<int>(e.size()) - 1; k >= 0; --k) {
        run = std::max(run, e[k]);
        cert.envelope[k] = run;
    }
    for (std::size_t k = 0; k < cert.envelope.size(); ++k)
        cert.fitted_C = std::max(cert.fitted_C, cert.envelope[k] * std::ldexp(1.0, static_cast<int>(k) + 1));
    cert.tail_bound = 2.0 * cert.fitted_C * std::ldexp(1.0, -L);

    const double scale = 1.0 + sols.back().phi.abs_max();
    const double biggest = cert.envelope.empty() ? 0.0 : cert.envelope.front();
    if (biggest <= 1e-10 * scale) {
        cert.decay_slope = -std::numeric_limits<double>::infinity();
        cert.note = "all level gaps at round-off; trivially geometric";
        cert.pass = true;
    } else {
        // gaps at round-off carry no rate information; clamp them to the floor
        const double floor = 1e-13 * scale;
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double m = static_cast<double>(cert.envelope.size());
        for (std::size_t k = 0; k < cert.envelope.size(); ++k) {
            const double x = static_cast<double>(k + 1), y = std::log2(std::max(cert.envelope[k], floor));
            sx += x, sy += y, sxx += x * x, sxy += x * y;
        }
        cert.decay_slope = m > 1 ? (m * sxy - sx * sy) / (m * sxx - sx * sx) : -std::numeric_limits<double>::infinity();
        cert.pass = cert.decay_slope <= -0.5;
        if (!cert.pass) cert.note = detail::concat("Cauchy decay slope ", cert.decay_slope, " is worse than 2^{-k/2}");
    }
    WeakResult<Dim> out{sols.back(), std::move(cert), std::move(levels), std::move(sols)};
    return out;
}

struct ViscositySample {
    std::size_t point = 0;
    double target = 0.0;      // e^b rhs(x)
    double fit_value = 0.0;   // f(lambda(chi + nabla^2 q)) for the untouched fit
    double tolerance = 0.0;
    double sub_value = 0.0;   // f at the test function touching from above (u - phi has a local min)
    double super_value = 0.0; // f at the test function touching from below (u - phi has a local max)
    double kappa_up = 0.0;
    double kappa_down = 0.0;
    bool sub_pass = false;
    bool super_pass = false;
    bool super_outside_cone = false;
};

struct ViscosityReport {
    std::vector<ViscositySample> samples;
    std::vector<std::string> warnings;
    int skipped = 0;
    int sub_passes = 0;
    int super_passes = 0;
    int super_outside_cone = 0;
    bool pass = false;
};

namespace detail {

template <int Dim>
struct QuadraticFit {
    Vec<Dim> a;
    Mat<Dim> h;
    bool ok = false;
};

/// Least squares phi(x + d) - phi(x) ~ a.d + d^T H d / 2 over lattice offsets |d| <= radius steps.
template <int Dim>
QuadraticFit<Dim> quadratic_fit(const ScalarField<Dim>& phi, std::size_t x, const std::vector<std::array<int, Dim>>& offsets)
{
    constexpr int nh = Dim * (Dim + 1) / 2;
    QuadraticFit<Dim> fit;
    if (static_cast<int>(offsets.size()) < Dim + nh + 2) return fit;
    const auto& grid = phi.grid();
    Eigen::MatrixXd A(static_cast<Eigen::Index>(offsets.size()), Dim + nh);
    Eigen::VectorXd y(static_cast<Eigen::Index>(offsets.size()));
    const auto base = grid.multi_index(x);
    for (std::size_t r = 0; r < offsets.size(); ++r) {
        Vec<Dim> d;
        auto idx = base;
        for (int k = 0; k < Dim; ++k) {
            d(k) = offsets[r][k] * grid.spacing(k);
            idx[k] += offsets[r][k];
        }
        const auto row = static_cast<Eigen::Index>(r);
        for (int k = 0; k < Dim; ++k) A(row, k) = d(k);
        int c = Dim;
        for (int i = 0; i < Dim; ++i)
            for (int j = i; j < Dim; ++j) A(row, c++) = (i == j ? 0.5 : 1.0) * d(i) * d(j);
        y(row) = phi[grid.index(idx)] - phi[x];
    }
    const Eigen::VectorXd s = A.colPivHouseholderQr().solve(y);
    for (int k = 0; k < Dim; ++k) fit.a(k) = s(k);
    int c = Dim;
    for (int i = 0; i < Dim; ++i)
        for (int j = i; j < Dim; ++j) fit.h(i, j) = fit.h(j, i) = s(c++);
    fit.ok = true;
    return fit;
}

template <int Dim>
std::vector<std::array<int, Dim>> ball_offsets(int radius)
{
    std::vector<std::array<int, Dim>> out;
    std::array<int, Dim> o;
    o.fill(-radius);
    for (;;) {
        int sq = 0;
        bool zero = true;
        for (int v : o) {
            sq += v * v;
            zero = zero && v == 0;
        }
        if (!zero && sq <= radius * radius) out.push_back(o);
        int a = Dim - 1;
        while (a >= 0 && o[a] == radius) o[a--] = -radius;
        if (a < 0) break;
        ++o[a];
    }
    return out;
}

/// f(lambda_g(M)) or NaN outside the cone.
template <int Dim>
double f_or_nan(const OperatorSpec& op, const Mat<Dim>& m, const Mat<Dim>& g, bool& inside)
{
    const auto s = eigenvalues_wrt_metric<Dim>(m, g);
    inside = op.in_cone(s.values());
    return inside ? op.value(s.values()) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

/// Quadratic test functions through phi(x): the least-squares quadratic q over
/// the probe ball, raised by kappa |y - x|^2 until it lies above phi (subsolution
/// test) or lowered until it lies below (supersolution test). The tolerance is
/// tol_factor times a Richardson estimate of the fit error, |F(q_R) - F(q_2R)| / 3,
/// plus the solve residual.
template <int Dim>
ViscosityReport viscosity_check(const Problem<Dim>& prob, const SolutionPair<Dim>& sol,
                                const std::vector<std::size_t>& sample_points, int probe_radius = 3,
                                double tol_factor = 10.0)
{
    if (probe_radius < 1) throw ArgumentError("probe radius must be at least one grid step");
    require_same_grid(sol.phi.grid(), prob.grid(), "viscosity_check");
    const auto& grid = prob.grid();
    const auto& op = prob.op();
    const auto near = detail::ball_offsets<Dim>(probe_radius);
    const auto far = detail::ball_offsets<Dim>(2 * probe_radius);

    ViscosityReport rep;
    for (std::size_t x : sample_points) {
        if (x >= grid.num_points()) throw ArgumentError(detail::concat("sample point ", x, " is off the grid"));
        const auto f1 = detail::quadratic_fit<Dim>(sol.phi, x, near);
        const auto f2 = detail::quadratic_fit<Dim>(sol.phi, x, far);
        if (!f1.ok || !f2.ok) {
            ++rep.skipped;
            rep.warnings.push_back(detail::concat("sample ", x, " skipped: too few probe points"));
            continue;
        }
        const Mat<Dim>& g = prob.metric().g(x);
        const auto& gam = prob.gamma()[x];
        auto covariant = [&](const detail::QuadraticFit<Dim>& f) {
            Mat<Dim> m = prob.chi()[x] + f.h;
            for (int k = 0; k < Dim; ++k) m -= gam[k] * f.a(k);
            return m;
        };
        ViscositySample s;
        s.point = x;
        s.target = std::exp(sol.b) * prob.rhs()[x];
        bool in1 = false, in2 = false;
        s.fit_value = detail::f_or_nan(op, covariant(f1), g, in1);
        const double v2 = detail::f_or_nan(op, covariant(f2), g, in2);
        const double richardson = (in1 && in2) ? std::abs(s.fit_value - v2) / 3.0 : 0.0;
        s.tolerance = tol_factor * (richardson + sol.residual) + 1e-12 * std::max(1.0, s.target);

        const auto base = grid.multi_index(x);
        for (const auto& o : near) {
            Vec<Dim> d;
            auto idx = base;
            for (int k = 0; k < Dim; ++k) {
                d(k) = o[k] * grid.spacing(k);
                idx[k] += o[k];
            }
            const double q = sol.phi[x] + f1.a.dot(d) + 0.5 * d.dot(f1.h * d);
            const double gap = (sol.phi[grid.index(idx)] - q) / d.squaredNorm();
            s.kappa_up = std::max(s.kappa_up, gap);
            s.kappa_down = std::max(s.kappa_down, -gap);
        }
        const Mat<Dim> id = Mat<Dim>::Identity();
        bool in_up = false, in_down = false;
        s.sub_value = detail::f_or_nan(op, Mat<Dim>(covariant(f1) + 2.0 * s.kappa_up * id), g, in_up);
        s.super_value = detail::f_or_nan(op, Mat<Dim>(covariant(f1) - 2.0 * s.kappa_down * id), g, in_down);
        s.sub_pass = in_up && s.sub_value >= s.target - s.tolerance;
        s.super_outside_cone = !in_down;
        s.super_pass = !in_down || s.super_value <= s.target + s.tolerance;
        rep.sub_passes += s.sub_pass;
        rep.super_passes += s.super_pass;
        rep.super_outside_cone += s.super_outside_cone;
        rep.samples.push_back(s);
    }
    rep.pass = !rep.samples.empty() && rep.sub_passes == static_cast<int>(rep.samples.size()) &&
               rep.super_passes == static_cast<int>(rep.samples.size());
    return rep;
}

/// n_side^Dim sample points on a uniform sub-lattice of the grid.
template <int Dim>
std::vector<std::size_t> lattice_samples(const PeriodicGrid<Dim>& grid, int per_axis)
{
    if (per_axis < 1) throw ArgumentError("per_axis must be >= 1");
    std::vector<std::size_t> out;
    std::array<int, Dim> c{};
    for (;;) {
        typename PeriodicGrid<Dim>::MultiIndex idx;
        for (int a = 0; a < Dim; ++a) idx[a] = c[a] * grid.size(a) / per_axis + grid.size(a) / (2 * per_axis);
        out.push_back(grid.index(idx));
        int a = Dim - 1;
        while (a >= 0 && c[a] == per_axis - 1) c[a--] = 0;
        if (a < 0) break;
        ++c[a];
    }
    return out;
}

}  // namespace hessian_lab
