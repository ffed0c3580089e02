#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "hessian_lab/grid_geometry.hpp"
#include "hessian_lab/solver.hpp"
#include "hessian_lab/weak_harness.hpp"

namespace hessian_lab {

/// tau(phi) = -ln(2K - phi) / 3 and its first two derivatives.
struct Tau {
    double K = 0.0;

    double value(double phi) const { return -std::log(2.0 * K - phi) / 3.0; }
    double d1(double phi) const { return 1.0 / (3.0 * (2.0 * K - phi)); }
    double d2(double phi) const
    {
        const double s = 2.0 * K - phi;
        return 1.0 / (3.0 * s * s);
    }
};

template <int Dim>
struct GradientProbe {
    double K = 0.0;  // sup |phi| over the probe ball
    double r = 0.0;  // probe radius, rounded to whole grid steps
    std::size_t center = 0;
    double max_rho_grad = 0.0;  // max over the ball of rho |grad phi|_g
    bool g_finite = false;      // false when grad phi vanishes on the whole open ball
    double g_max = -std::numeric_limits<double>::infinity();
    std::size_t g_argmax = 0;   // torus index
    Vec<Dim> g_argmax_offset = Vec<Dim>::Zero();
    double rho_grad_at_gmax = 0.0;
    double grad_at_gmax = 0.0;
    /// sqrt(18 sup chi(xi, xi) K) + 36 K / r
    double threshold = 0.0;
    bool threshold_exceeded = false;
    double x_nn = 0.0;          // smallest g-eigenvalue of chi + nabla^2 phi at the G max
    double x_nn_bound = 0.0;    // -|grad phi|^2 / (18 K)
    bool x_nn_holds = true;     // vacuous unless the threshold is exceeded
};

/// G = ln|grad phi|_g + tau(phi) + ln rho on the chart ball of radius r around
/// `center`, rho = (1 - |x|^2 / r^2)^+. G = -inf where grad phi = 0. When chi
/// is given, the X_nn comparison at the G max is evaluated too.
template <int Dim>
GradientProbe<Dim> gradient_probe(const ScalarField<Dim>& phi, const MetricField<Dim>& metric, std::size_t center,
                                  double r, const SymTensorField<Dim>* chi = nullptr,
                                  const ChristoffelField<Dim>* gamma = nullptr, Scheme scheme = Scheme::fd4,
                                  double stencil_tol = 1e-6)
{
    require_same_grid(phi.grid(), metric.grid(), "gradient_probe");
    const auto& grid = phi.grid();
    for (int a = 1; a < Dim; ++a)
        if (std::abs(grid.spacing(a) - grid.spacing(0)) > 1e-14 * grid.spacing(0))
            throw ArgumentError("gradient_probe needs equal grid spacing on every axis");
    const double h = grid.spacing(0);
    const int half = std::max(1, static_cast<int>(std::lround(r / h)));
    for (int a = 0; a < Dim; ++a)
        if (2 * half >= grid.size(a)) throw ArgumentError("probe ball does not fit inside one chart period");
    GradientProbe<Dim> out;
    out.r = half * h;
    out.center = center;
    const auto st = stencil(scheme == Scheme::spectral ? Scheme::fd4 : scheme);
    const auto base = grid.multi_index(center);

    std::vector<std::size_t> nodes;
    std::vector<Vec<Dim>> offs;
    std::array<int, Dim> o;
    o.fill(-half);
    for (;;) {
        Vec<Dim> x;
        for (int a = 0; a < Dim; ++a) x(a) = o[a] * h;
        if (x.squaredNorm() < out.r * out.r * (1.0 - 1e-12)) {
            auto idx = base;
            for (int a = 0; a < Dim; ++a) idx[a] += o[a];
            nodes.push_back(grid.index(idx));
            offs.push_back(x);
        }
        int a = Dim - 1;
        while (a >= 0 && o[a] == half) o[a--] = -half;
        if (a < 0) break;
        ++o[a];
    }
    for (auto p : nodes) out.K = std::max(out.K, std::abs(phi[p]));
    const Tau tau{out.K};

    for (std::size_t m = 0; m < nodes.size(); ++m) {
        const std::size_t p = nodes[m];
        Vec<Dim> d;
        for (int a = 0; a < Dim; ++a) d(a) = partial_at(phi, p, a, st);
        const double grad = std::sqrt(std::max(0.0, d.dot(metric.inv(p) * d)));
        const double rho = std::max(0.0, 1.0 - offs[m].squaredNorm() / (out.r * out.r));
        out.max_rho_grad = std::max(out.max_rho_grad, rho * grad);
        if (grad == 0.0 || rho == 0.0 || out.K == 0.0) continue;
        const double G = std::log(grad) + tau.value(phi[p]) + std::log(rho);
        if (G > out.g_max) {
            out.g_max = G;
            out.g_finite = true;
            out.g_argmax = p;
            out.g_argmax_offset = offs[m];
            out.rho_grad_at_gmax = rho * grad;
            out.grad_at_gmax = grad;
        }
    }
    if (chi && out.g_finite) {
        double sup_chi = -std::numeric_limits<double>::infinity();
        for (auto p : nodes) {
            const auto s = eigenvalues_wrt_metric<Dim>((*chi)[p], metric.g(p));
            sup_chi = std::max(sup_chi, s.lambda(0));
        }
        out.threshold = std::sqrt(18.0 * std::max(sup_chi, 0.0) * out.K) + 36.0 * out.K / out.r;
        out.threshold_exceeded = out.rho_grad_at_gmax > out.threshold;
        const std::size_t p = out.g_argmax;
        Mat<Dim> hess;
        if (gamma)
            hess = covariant_hessian_at(phi, *gamma, p, st);
        else
            hess = covariant_hessian_at(phi, ChristoffelField<Dim>(grid), p, st);
        const auto s = eigenvalues_wrt_metric<Dim>(Mat<Dim>((*chi)[p] + hess), metric.g(p));
        out.x_nn = s.lambda(Dim - 1);
        out.x_nn_bound = -out.grad_at_gmax * out.grad_at_gmax / (18.0 * out.K);
        out.x_nn_holds = !out.threshold_exceeded || out.x_nn <= out.x_nn_bound + stencil_tol;
    }
    return out;
}

/// phi = a.x + s|x|^2/2 = s |x + a/s|^2 / 2 - |a|^2 / (2s), a claimed solution
/// of det D^2 phi = psi, probed on B_r(c).
struct ConvexMember {
    std::vector<double> a;
    double s = 1.0;
    double psi = 1.0;
    std::vector<double> center;
    double r = 1.0;
};

struct EuclideanConstantRow {
    double grad_norm = 0.0;  // |D phi(c)|
    double K = 0.0;          // sup over B_r(c) of |phi|
    double bound = 0.0;      // 99 sqrt(n) K / r
    double ratio = 0.0;      // grad_norm / bound
    double residual = 0.0;
};

struct EuclideanConstantReport {
    std::vector<EuclideanConstantRow> rows;
    double worst_ratio = 0.0;
    std::size_t worst_index = 0;
    int rejected = 0;
    bool pass = false;
};

inline EuclideanConstantRow euclidean_constant_row(const ConvexMember& m)
{
    const std::size_t n = m.a.size();
    if (n == 0 || m.center.size() != n) throw ArgumentError("convex member needs matching a and center dimensions");
    if (!(m.s > 0.0) || !(m.r > 0.0)) throw ArgumentError("convex member needs s > 0 and r > 0");
    EuclideanConstantRow row;
    // |x + a/s| ranges over [max(0, |c + a/s| - r), |c + a/s| + r] on the ball
    double shift = 0.0, grad = 0.0, a2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ci = m.center[i] + m.a[i] / m.s;
        shift += ci * ci;
        const double gi = m.a[i] + m.s * m.center[i];
        grad += gi * gi;
        a2 += m.a[i] * m.a[i];
    }
    shift = std::sqrt(shift);
    const double lo = std::max(0.0, shift - m.r), hi = shift + m.r;
    const double sup = 0.5 * m.s * hi * hi - a2 / (2.0 * m.s);
    const double inf = 0.5 * m.s * lo * lo - a2 / (2.0 * m.s);
    row.K = std::max(std::abs(sup), std::abs(inf));
    row.grad_norm = std::sqrt(grad);
    row.bound = 99.0 * std::sqrt(static_cast<double>(n)) * row.K / m.r;
    row.ratio = row.bound > 0.0 ? row.grad_norm / row.bound : (row.grad_norm > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    // D^2 phi = s I
    row.residual = std::abs(std::pow(m.s, static_cast<double>(n)) - m.psi);
    return row;
}

/// |D phi(c)| rho(c) <= 99 sqrt(n) K / r over the family.
inline EuclideanConstantReport euclidean_constant_check(const std::vector<ConvexMember>& family)
{
    EuclideanConstantReport rep;
    for (std::size_t i = 0; i < family.size(); ++i) {
        auto row = euclidean_constant_row(family[i]);
        if (row.residual > 1e-12) {
            ++rep.rejected;
            continue;
        }
        if (row.ratio > rep.worst_ratio) {
            rep.worst_ratio = row.ratio;
            rep.worst_index = rep.rows.size();
        }
        rep.rows.push_back(row);
    }
    rep.pass = !rep.rows.empty() && rep.worst_ratio <= 1.0;
    return rep;
}

/// |a| log-spaced in [0, a_max] (plus 0), r log-spaced in [r_min, r_max],
/// directions and centers from a fixed lattice.
inline std::vector<ConvexMember> convex_sweep(int n, double a_max = 100.0, double r_min = 0.1, double r_max = 10.0,
                                              int a_steps = 25, int r_steps = 21)
{
    std::vector<ConvexMember> out;
    std::vector<double> mags{0.0};
    for (int i = 0; i < a_steps; ++i) mags.push_back(a_max * std::pow(10.0, -4.0 * (a_steps - 1 - i) / (a_steps - 1)));
    for (double mag : mags)
        for (int j = 0; j < r_steps; ++j) {
            const double r = r_min * std::pow(r_max / r_min, static_cast<double>(j) / (r_steps - 1));
            for (int dir = 0; dir < 4; ++dir) {
                ConvexMember m;
                m.a.assign(static_cast<std::size_t>(n), 0.0);
                m.center.assign(static_cast<std::size_t>(n), 0.0);
                const double th = dir * std::numbers::pi / 4.0;
                m.a[0] = mag * std::cos(th);
                m.a[1 % n] += mag * std::sin(th);
                if (dir >= 2) m.center[0] = 0.5 * r;  // off-centre ball
                m.r = r;
                out.push_back(m);
            }
        }
    return out;
}

/// Right side psi(x, t, omega) described through the left side of the growth
/// condition as a function of |omega|: |d^H psi| + |psi_t||omega| + |psi_omega||omega|^2.
struct PsiSpec {
    std::string name;
    std::function<double(double)> growth;

    /// psi = e^b e^f: no t or omega dependence, |d^H psi| = sup |grad e^{b+f}|.
    static PsiSpec constant_in_gradient(double dh_sup)
    {
        return {"exp(b+f)", [dh_sup](double) { return std::abs(dh_sup); }};
    }

    /// psi = c |p|^alpha, so |psi_omega| |omega|^2 = c alpha |omega|^{alpha+1}.
    static PsiSpec power(double c, double alpha)
    {
        return {detail::concat(c, "|p|^", alpha),
                [c, alpha](double w) { return std::abs(c * alpha) * std::pow(w, alpha + 1.0); }};
    }
};

struct GrowthReport {
    std::vector<double> omega;
    std::vector<double> ratio;  // growth / |omega|^3
    bool pass = false;
    double witness_omega = 0.0;  // first sample in the top two decades where the ratio fails to drop
    double witness_ratio = 0.0;
};

/// |omega| log-spaced over [1, 1e6] with 10 samples per decade; passes when
/// growth / |omega|^3 decreases strictly across the top two decades.
inline GrowthReport growth_condition_check(const PsiSpec& psi)
{
    GrowthReport rep;
    for (int i = 0; i <= 60; ++i) {
        const double w = std::pow(10.0, i / 10.0);
        rep.omega.push_back(w);
        rep.ratio.push_back(psi.growth(w) / (w * w * w));
    }
    rep.pass = true;
    for (std::size_t i = 41; i < rep.omega.size(); ++i)
        if (!(rep.ratio[i] < rep.ratio[i - 1] * (1.0 - 1e-9))) {
            rep.pass = false;
            rep.witness_omega = rep.omega[i];
            rep.witness_ratio = rep.ratio[i];
            break;
        }
    return rep;
}

/// Condition (v) constants for the homogeneous families: L = 4 sup psi / f(1)
/// and eps = f(1) L / 2, so f(L 1) = L f(1) > sup psi + eps.
struct ConditionVConstants {
    double L = 0.0;
    double eps = 0.0;
};

inline ConditionVConstants condition_v_constants(const OperatorSpec& op, double sup_psi)
{
    if (!(sup_psi > 0.0)) throw ArgumentError("sup psi must be positive");
    const double f1 = op.value_at_ones();
    ConditionVConstants c;
    c.L = 4.0 * sup_psi / f1;
    c.eps = 0.5 * f1 * c.L;
    return c;
}

struct LevelSweepRow {
    int level = 0;
    double max_rho_grad = 0.0;
    double K = 0.0;
    double b = 0.0;
    std::size_t g_argmax = 0;
    bool x_nn_holds = true;
};

struct LevelSweepReport {
    std::vector<LevelSweepRow> rows;
    double envelope_ratio = 0.0;  // max / min of max_rho_grad over levels
    bool pass = false;
};

/// Gradient probe on every level of a weak solve; the Lipschitz claim is read
/// as max rho|grad phi| staying within a factor 2 across levels.
template <int Dim>
LevelSweepReport gradient_level_sweep(const WeakResult<Dim>& weak, const Problem<Dim>& prob, std::size_t center,
                                      double r)
{
    LevelSweepReport rep;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < weak.level_solutions.size(); ++i) {
        const auto& s = weak.level_solutions[i];
        const auto pr = gradient_probe(s.phi, prob.metric(), center, r, &prob.chi(), &prob.gamma(), prob.scheme());
        rep.rows.push_back({weak.levels[i].level, pr.max_rho_grad, pr.K, s.b, pr.g_argmax, pr.x_nn_holds});
        lo = std::min(lo, pr.max_rho_grad);
        hi = std::max(hi, pr.max_rho_grad);
    }
    rep.envelope_ratio = hi > 0.0 ? hi / lo : 1.0;
    bool xnn = true;
    for (const auto& r0 : rep.rows) xnn = xnn && r0.x_nn_holds;
    rep.pass = !rep.rows.empty() && rep.envelope_ratio <= 2.0 && xnn;
    return rep;
}

}  // namespace hessian_lab
