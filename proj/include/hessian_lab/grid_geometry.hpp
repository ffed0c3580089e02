#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "hessian_lab/grid.hpp"
#include "hessian_lab/parallel.hpp"
#include "hessian_lab/spectral.hpp"

namespace hessian_lab {

/// Derivative discretization. fd2/fd4 are central finite differences of
/// order 2 and 4; spectral differentiates in Fourier space.
enum class Scheme { fd2, fd4, spectral };

inline const char* to_string(Scheme s)
{
    switch (s) {
        case Scheme::fd2: return "fd2";
        case Scheme::fd4: return "fd4";
        case Scheme::spectral: return "spectral";
    }
    return "?";
}

struct StencilTap {
    int offset;
    double weight;
};

/// Unscaled central-difference taps; first derivative weights are divided by h,
/// second derivative weights by h^2.
struct Stencil {
    std::span<const StencilTap> first;
    std::span<const StencilTap> second;
};

namespace detail {
inline constexpr std::array<StencilTap, 2> kFirst2{{{-1, -0.5}, {1, 0.5}}};
inline constexpr std::array<StencilTap, 3> kSecond2{{{-1, 1.0}, {0, -2.0}, {1, 1.0}}};
inline constexpr std::array<StencilTap, 4> kFirst4{{{-2, 1.0 / 12}, {-1, -8.0 / 12}, {1, 8.0 / 12}, {2, -1.0 / 12}}};
inline constexpr std::array<StencilTap, 5> kSecond4{
    {{-2, -1.0 / 12}, {-1, 16.0 / 12}, {0, -30.0 / 12}, {1, 16.0 / 12}, {2, -1.0 / 12}}};
}  // namespace detail

inline Stencil stencil(Scheme s)
{
    if (s == Scheme::fd2) return {detail::kFirst2, detail::kSecond2};
    if (s == Scheme::fd4) return {detail::kFirst4, detail::kSecond4};
    throw ArgumentError("spectral scheme has no finite stencil");
}

/// First derivative along `axis` at a single point (finite-difference schemes only).
template <int Dim>
double partial_at(const ScalarField<Dim>& f, std::size_t p, int axis, const Stencil& st)
{
    const auto& g = f.grid();
    const double c = f[p];
    double s = 0.0;
    for (const auto& tap : st.first) s += tap.weight * (f[g.shifted(p, axis, tap.offset)] - c);
    return s / g.spacing(axis);
}

/// Second derivative d^2 f / dx_i dx_j at a single point. Mixed derivatives
/// use the tensor product of first-derivative stencils. Taps act on
/// differences from the centre value, so constants give exactly zero.
template <int Dim>
double partial2_at(const ScalarField<Dim>& f, std::size_t p, int i, int j, const Stencil& st)
{
    const auto& g = f.grid();
    const double c = f[p];
    double s = 0.0;
    if (i == j) {
        for (const auto& tap : st.second) s += tap.weight * (f[g.shifted(p, i, tap.offset)] - c);
        return s / (g.spacing(i) * g.spacing(i));
    }
    for (const auto& a : st.first) {
        const std::size_t q = g.shifted(p, i, a.offset);
        for (const auto& b : st.first) s += a.weight * b.weight * (f[g.shifted(q, j, b.offset)] - c);
    }
    return s / (g.spacing(i) * g.spacing(j));
}

template <int Dim>
ScalarField<Dim> partial(const ScalarField<Dim>& f, int axis, Scheme scheme)
{
    if (scheme == Scheme::spectral) {
        std::array<int, Dim> o{};
        o[axis] = 1;
        return spectral_derivative<Dim>(f, o);
    }
    const auto st = stencil(scheme);
    ScalarField<Dim> out(f.grid());
    parallel_for(f.size(), [&](std::size_t p) { out[p] = partial_at(f, p, axis, st); });
    return out;
}

template <int Dim>
ScalarField<Dim> partial2(const ScalarField<Dim>& f, int i, int j, Scheme scheme)
{
    if (scheme == Scheme::spectral) {
        std::array<int, Dim> o{};
        o[i] += 1;
        o[j] += 1;
        return spectral_derivative<Dim>(f, o);
    }
    const auto st = stencil(scheme);
    ScalarField<Dim> out(f.grid());
    parallel_for(f.size(), [&](std::size_t p) { out[p] = partial2_at(f, p, i, j, st); });
    return out;
}

/// Riemannian metric sampled on the grid, with cached determinant and inverse.
template <int Dim>
class MetricField {
public:
    explicit MetricField(SymTensorField<Dim> g) : g_(std::move(g))
    {
        const std::size_t n = g_.size();
        det_.resize(n);
        inv_.resize(n);
        for (std::size_t p = 0; p < n; ++p) {
            const Mat<Dim>& m = g_[p];
            if (!m.allFinite())
                throw GeometryError(detail::concat("metric is not finite at point ", p), p);
            Eigen::SelfAdjointEigenSolver<Mat<Dim>> es(m, Eigen::EigenvaluesOnly);
            if (!(es.eigenvalues()(0) > 0.0))
                throw GeometryError(detail::concat("metric is not positive definite at point ", p,
                                                   " (smallest eigenvalue ", es.eigenvalues()(0), ")"),
                                    p);
            det_[p] = m.determinant();
            inv_[p] = SymTensorField<Dim>::symmetrized(m.inverse());
        }
    }

    static MetricField identity(const PeriodicGrid<Dim>& grid)
    {
        return MetricField(SymTensorField<Dim>(grid, Mat<Dim>::Identity()));
    }

    template <class Fn>
    static MetricField sample(const PeriodicGrid<Dim>& grid, Fn&& fn)
    {
        return MetricField(SymTensorField<Dim>::sample(grid, std::forward<Fn>(fn)));
    }

    const PeriodicGrid<Dim>& grid() const { return g_.grid(); }
    const SymTensorField<Dim>& tensor() const { return g_; }
    const Mat<Dim>& g(std::size_t p) const { return g_[p]; }
    const Mat<Dim>& inv(std::size_t p) const { return inv_[p]; }
    double det(std::size_t p) const { return det_[p]; }
    double volume_density(std::size_t p) const { return std::sqrt(det_[p]); }

    /// True when the metric is the same matrix at every point.
    bool is_constant() const
    {
        for (std::size_t p = 1; p < g_.size(); ++p)
            if (g_[p] != g_[0]) return false;
        return true;
    }

private:
    SymTensorField<Dim> g_;
    std::vector<double> det_;
    std::vector<Mat<Dim>> inv_;
};

/// Christoffel symbols Gamma^k_{ij}; gamma(p)[k](i, j).
template <int Dim>
class ChristoffelField {
public:
    using Symbols = std::array<Mat<Dim>, Dim>;

    explicit ChristoffelField(const PeriodicGrid<Dim>& grid)
        : grid_(grid), gamma_(grid.num_points(), zero_symbols())
    {
    }

    const PeriodicGrid<Dim>& grid() const { return grid_; }
    const Symbols& operator[](std::size_t p) const { return gamma_[p]; }
    Symbols& operator[](std::size_t p) { return gamma_[p]; }
    std::size_t size() const { return gamma_.size(); }

    /// Grid max of the Frobenius norm of (Gamma^k_{ij})_{ijk}, an upper bound
    /// for the operator norm of v -> (Gamma^k_{ij} v_k)_{ij}.
    double operator_norm_bound() const
    {
        double worst = 0.0;
        for (const auto& s : gamma_) {
            double sq = 0.0;
            for (int k = 0; k < Dim; ++k) sq += s[k].squaredNorm();
            worst = std::max(worst, std::sqrt(sq));
        }
        return worst;
    }

private:
    static Symbols zero_symbols()
    {
        Symbols s;
        for (auto& m : s) m.setZero();
        return s;
    }

    PeriodicGrid<Dim> grid_;
    std::vector<Symbols> gamma_;
};

/// Levi-Civita connection of g with derivatives of g taken by `scheme`.
template <int Dim>
ChristoffelField<Dim> christoffels(const MetricField<Dim>& metric, Scheme scheme = Scheme::fd4)
{
    const auto& grid = metric.grid();
    ChristoffelField<Dim> out(grid);
    if (metric.is_constant()) return out;

    // dg[l](i, j) = d_l g_ij per point
    std::vector<std::array<Mat<Dim>, Dim>> dg(grid.num_points());
    for (int i = 0; i < Dim; ++i) {
        for (int j = i; j < Dim; ++j) {
            ScalarField<Dim> comp(grid);
            for (std::size_t p = 0; p < grid.num_points(); ++p) comp[p] = metric.g(p)(i, j);
            for (int l = 0; l < Dim; ++l) {
                const auto d = partial(comp, l, scheme);
                for (std::size_t p = 0; p < grid.num_points(); ++p) {
                    dg[p][l](i, j) = d[p];
                    dg[p][l](j, i) = d[p];
                }
            }
        }
    }
    parallel_for(grid.num_points(), [&](std::size_t p) {
        const Mat<Dim>& ginv = metric.inv(p);
        auto& s = out[p];
        for (int i = 0; i < Dim; ++i) {
            for (int j = i; j < Dim; ++j) {
                Vec<Dim> lowered;
                for (int l = 0; l < Dim; ++l) lowered(l) = dg[p][i](j, l) + dg[p][j](i, l) - dg[p][l](i, j);
                const Vec<Dim> raised = 0.5 * ginv * lowered;
                for (int k = 0; k < Dim; ++k) {
                    s[k](i, j) = raised(k);
                    s[k](j, i) = raised(k);
                }
            }
        }
    });
    return out;
}

template <int Dim>
Mat<Dim> covariant_hessian_at(const ScalarField<Dim>& phi, const ChristoffelField<Dim>& gamma, std::size_t p,
                              const Stencil& st)
{
    Mat<Dim> h;
    for (int i = 0; i < Dim; ++i)
        for (int j = i; j < Dim; ++j) h(i, j) = partial2_at(phi, p, i, j, st);
    h = SymTensorField<Dim>::symmetrized(h);
    for (int k = 0; k < Dim; ++k) {
        const double dk = partial_at(phi, p, k, st);
        if (dk != 0.0) h -= gamma[p][k] * dk;
    }
    return h;
}

/// Covariant Hessian: nabla^2_ij phi = d_i d_j phi - Gamma^k_ij d_k phi.
template <int Dim>
SymTensorField<Dim> covariant_hessian(const ScalarField<Dim>& phi, const MetricField<Dim>& metric,
                                      const ChristoffelField<Dim>& gamma, Scheme scheme = Scheme::fd4)
{
    require_same_grid(phi.grid(), metric.grid(), "covariant_hessian");
    require_same_grid(phi.grid(), gamma.grid(), "covariant_hessian");
    const auto& grid = phi.grid();
    SymTensorField<Dim> out(grid);
    if (scheme == Scheme::spectral) {
        std::vector<ScalarField<Dim>> d1;
        for (int k = 0; k < Dim; ++k) d1.push_back(partial(phi, k, scheme));
        std::vector<Mat<Dim>> h(grid.num_points());
        for (int i = 0; i < Dim; ++i)
            for (int j = i; j < Dim; ++j) {
                const auto d2 = partial2(phi, i, j, scheme);
                for (std::size_t p = 0; p < grid.num_points(); ++p) {
                    h[p](i, j) = d2[p];
                    h[p](j, i) = d2[p];
                }
            }
        for (std::size_t p = 0; p < grid.num_points(); ++p) {
            for (int k = 0; k < Dim; ++k) h[p] -= gamma[p][k] * d1[k][p];
            out.set(p, h[p]);
        }
        return out;
    }
    const auto st = stencil(scheme);
    parallel_for(grid.num_points(), [&](std::size_t p) { out.set(p, covariant_hessian_at(phi, gamma, p, st)); });
    return out;
}

/// Integral of u against the Riemannian volume form, periodic midpoint rule.
template <int Dim>
double integrate(const ScalarField<Dim>& u, const MetricField<Dim>& metric)
{
    require_same_grid(u.grid(), metric.grid(), "integrate");
    double s = 0.0;
    for (std::size_t p = 0; p < u.size(); ++p) s += u[p] * metric.volume_density(p);
    return s * u.grid().cell_volume();
}

template <int Dim>
double volume(const MetricField<Dim>& metric)
{
    double s = 0.0;
    for (std::size_t p = 0; p < metric.grid().num_points(); ++p) s += metric.volume_density(p);
    return s * metric.grid().cell_volume();
}

inline constexpr double kInfinityNorm = std::numeric_limits<double>::infinity();

/// (integral |u|^p dvol)^(1/p); p = infinity returns the grid max of |u|.
template <int Dim>
double lp_norm(const ScalarField<Dim>& u, double p, const MetricField<Dim>& metric)
{
    if (std::isnan(p) || p < 1.0) throw ArgumentError(detail::concat("L^p norm needs p >= 1, got ", p));
    require_same_grid(u.grid(), metric.grid(), "lp_norm");
    if (std::isinf(p)) return u.abs_max();
    double s = 0.0;
    for (std::size_t q = 0; q < u.size(); ++q) s += std::pow(std::abs(u[q]), p) * metric.volume_density(q);
    return std::pow(s * u.grid().cell_volume(), 1.0 / p);
}

/// Smallest and largest g-eigenvalue over the grid, i.e. the constants in
/// lambda_min |v|^2 <= g(v, v) <= lambda_max |v|^2 relating g to the flat chart metric.
template <int Dim>
std::pair<double, double> metric_equivalence_constants(const MetricField<Dim>& metric)
{
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (std::size_t p = 0; p < metric.grid().num_points(); ++p) {
        Eigen::SelfAdjointEigenSolver<Mat<Dim>> es(metric.g(p), Eigen::EigenvaluesOnly);
        lo = std::min(lo, es.eigenvalues()(0));
        hi = std::max(hi, es.eigenvalues()(Dim - 1));
    }
    return {lo, hi};
}

/// Cartesian lattice around the Euclidean ball B_r(center) with spacing
/// h = 2r/m. The center is a node. Interior nodes lie strictly inside the
/// ball; the boundary ring is every other node within one step (in each axis,
/// diagonals included) of an interior node, so it sits on or just outside the
/// sphere and holds every stencil neighbour of an interior node.
template <int Dim>
class BallDomain {
public:
    using MultiIndex = std::array<int, Dim>;

    BallDomain(double radius, int resolution, Vec<Dim> center = Vec<Dim>::Zero())
        : radius_(radius), resolution_(resolution), center_(center)
    {
        if (!(radius > 0.0)) throw ArgumentError(detail::concat("ball radius must be positive, got ", radius));
        if (resolution < 4 || resolution % 2 != 0)
            throw ArgumentError(detail::concat("ball resolution must be even and >= 4, got ", resolution));
        spacing_ = 2.0 * radius / resolution;
        side_ = resolution + 3;
        mid_ = resolution / 2 + 1;
        total_ = 1;
        for (int a = 0; a < Dim; ++a) total_ *= static_cast<std::size_t>(side_);
        std::vector<char> interior(total_, 0);
        // integer test |i - mid|^2 < m^2 / 4 keeps nodes exactly on the sphere out of the interior
        const long long r2 = static_cast<long long>(resolution / 2) * (resolution / 2);
        for (std::size_t p = 0; p < total_; ++p) {
            const auto idx = multi_index(p);
            long long d2 = 0;
            for (int a = 0; a < Dim; ++a) d2 += static_cast<long long>(idx[a] - mid_) * (idx[a] - mid_);
            interior[p] = d2 < r2;
        }
        member_.assign(total_, false);
        for (std::size_t p = 0; p < total_; ++p) {
            if (interior[p]) {
                interior_.push_back(p);
                member_[p] = true;
                continue;
            }
            const auto idx = multi_index(p);
            bool touches = false;
            MultiIndex step{};
            step.fill(-1);
            for (;;) {
                MultiIndex j = idx;
                for (int a = 0; a < Dim; ++a) j[a] += step[a];
                if (valid(j) && interior[linear(j)]) {
                    touches = true;
                    break;
                }
                int a = 0;
                while (a < Dim && step[a] == 1) step[a++] = -1;
                if (a == Dim) break;
                ++step[a];
            }
            if (touches) {
                boundary_.push_back(p);
                member_[p] = true;
            }
        }
    }

    double radius() const { return radius_; }
    int resolution() const { return resolution_; }
    double spacing() const { return spacing_; }
    const Vec<Dim>& center() const { return center_; }
    int side() const { return side_; }
    std::size_t box_points() const { return total_; }
    /// Interior or boundary ring.
    bool inside(std::size_t p) const { return member_[p]; }
    const std::vector<std::size_t>& interior() const { return interior_; }
    const std::vector<std::size_t>& boundary() const { return boundary_; }
    std::size_t center_index() const
    {
        MultiIndex m;
        m.fill(mid_);
        return linear(m);
    }
    double cell_volume() const { return std::pow(spacing_, Dim); }

    MultiIndex multi_index(std::size_t p) const
    {
        MultiIndex idx;
        for (int a = Dim - 1; a >= 0; --a) {
            idx[a] = static_cast<int>(p % side_);
            p /= side_;
        }
        return idx;
    }
    std::size_t linear(const MultiIndex& idx) const
    {
        std::size_t p = 0;
        for (int a = 0; a < Dim; ++a) p = p * side_ + static_cast<std::size_t>(idx[a]);
        return p;
    }
    bool valid(const MultiIndex& idx) const
    {
        for (int v : idx)
            if (v < 0 || v >= side_) return false;
        return true;
    }
    std::size_t neighbour(std::size_t p, int axis, int step) const
    {
        auto idx = multi_index(p);
        idx[axis] += step;
        return linear(idx);
    }
    /// Integer lattice offset of node p from the center.
    MultiIndex lattice_offset(std::size_t p) const
    {
        auto idx = multi_index(p);
        for (int& v : idx) v -= mid_;
        return idx;
    }

    /// Position relative to the center.
    Vec<Dim> offset(std::size_t p) const
    {
        const auto idx = multi_index(p);
        Vec<Dim> y;
        for (int a = 0; a < Dim; ++a) y(a) = (idx[a] - mid_) * spacing_;
        return y;
    }
    Vec<Dim> position(std::size_t p) const { return center_ + offset(p); }

private:
    double radius_;
    int resolution_;
    Vec<Dim> center_;
    double spacing_ = 0.0;
    int side_ = 0;
    int mid_ = 0;
    std::size_t total_ = 0;
    std::vector<bool> member_;
    std::vector<std::size_t> interior_;
    std::vector<std::size_t> boundary_;
};

/// Values on the lattice of a BallDomain; entries off the ball are kept
/// but carry no meaning.
template <int Dim>
class BallField {
public:
    explicit BallField(BallDomain<Dim> domain, double value = 0.0)
        : domain_(std::move(domain)), values_(domain_.box_points(), value)
    {
    }

    /// fn receives the absolute position of each node.
    template <class Fn>
    static BallField sample(const BallDomain<Dim>& domain, Fn&& fn)
    {
        BallField f(domain);
        for (std::size_t p = 0; p < domain.box_points(); ++p) f.values_[p] = fn(domain.position(p));
        return f;
    }

    const BallDomain<Dim>& domain() const { return domain_; }
    double operator[](std::size_t p) const { return values_[p]; }
    double& operator[](std::size_t p) { return values_[p]; }

    /// Central-difference gradient (exact on quadratics); p must be an interior node.
    Vec<Dim> gradient(std::size_t p) const
    {
        Vec<Dim> d;
        for (int a = 0; a < Dim; ++a)
            d(a) = (values_[domain_.neighbour(p, a, 1)] - values_[domain_.neighbour(p, a, -1)]) /
                   (2.0 * domain_.spacing());
        return d;
    }

    /// Second-order central-difference Hessian (exact on quadratics); p must be an interior node.
    Mat<Dim> hessian(std::size_t p) const
    {
        const double h2 = domain_.spacing() * domain_.spacing();
        Mat<Dim> m;
        for (int a = 0; a < Dim; ++a) {
            m(a, a) = (values_[domain_.neighbour(p, a, 1)] - 2.0 * values_[p] +
                       values_[domain_.neighbour(p, a, -1)]) /
                      h2;
            for (int b = a + 1; b < Dim; ++b) {
                const auto pp = domain_.neighbour(domain_.neighbour(p, a, 1), b, 1);
                const auto pm = domain_.neighbour(domain_.neighbour(p, a, 1), b, -1);
                const auto mp = domain_.neighbour(domain_.neighbour(p, a, -1), b, 1);
                const auto mm = domain_.neighbour(domain_.neighbour(p, a, -1), b, -1);
                m(a, b) = (values_[pp] - values_[pm] - values_[mp] + values_[mm]) / (4.0 * h2);
                m(b, a) = m(a, b);
            }
        }
        return m;
    }

    double boundary_min() const
    {
        double m = std::numeric_limits<double>::infinity();
        for (auto p : domain_.boundary()) m = std::min(m, values_[p]);
        return m;
    }

private:
    BallDomain<Dim> domain_;
    std::vector<double> values_;
};

/// rho(x) = (1 - |x - center|^2 / r^2)^+ on the ball lattice.
template <int Dim>
BallField<Dim> mask_cutoff_rho(const BallDomain<Dim>& domain)
{
    BallField<Dim> rho(domain);
    const double r2 = domain.radius() * domain.radius();
    for (std::size_t p = 0; p < domain.box_points(); ++p)
        rho[p] = std::max(0.0, 1.0 - domain.offset(p).squaredNorm() / r2);
    return rho;
}

/// Volume of the Euclidean unit ball in R^n.
inline double unit_ball_volume(int n) { return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0); }

}  // namespace hessian_lab
