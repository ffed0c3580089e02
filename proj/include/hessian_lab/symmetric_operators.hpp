#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hessian_lab/grid_geometry.hpp"

namespace hessian_lab {

/// Elementary symmetric polynomial sigma_k of the entries of lambda
/// (sigma_0 = 1, sigma_k = 0 for k < 0 or k > n).
inline double elementary_symmetric(std::span<const double> lambda, int k)
{
    const int n = static_cast<int>(lambda.size());
    if (k < 0 || k > n) return 0.0;
    if (k > 7) throw ArgumentError("elementary_symmetric supports k <= 7");
    std::array<double, 8> e{};
    e[0] = 1.0;
    for (int i = 0; i < n; ++i)
        for (int j = std::min(i + 1, k); j >= 1; --j) e[j] += lambda[i] * e[j - 1];
    return e[k];
}

/// sigma_k of lambda with entry `skip` removed, i.e. d sigma_{k+1} / d lambda_skip.
inline double elementary_symmetric_without(std::span<const double> lambda, int k, int skip)
{
    std::array<double, 8> rest{};
    std::size_t m = 0;
    for (int i = 0; i < static_cast<int>(lambda.size()) && m < rest.size(); ++i)
        if (i != skip) rest[m++] = lambda[i];
    return elementary_symmetric(std::span<const double>(rest.data(), m), k);
}

enum class OperatorFamily { monge_ampere, hessian_quotient };

/// A concave symmetric function f on the positive cone Gamma^n:
///   monge_ampere:           sigma_n^{1/n}
///   hessian_quotient(k):    (sigma_n / sigma_k)^{1/(n-k)},  0 <= k < n
/// together with the product lower bound c on prod_i df/dlambda_i and the
/// shift sigma with lambda(chi - sigma g) in the cone.
class OperatorSpec {
public:
    static OperatorSpec monge_ampere(int n, double sigma = 1.0)
    {
        OperatorSpec s(OperatorFamily::monge_ampere, n, 0, sigma);
        s.c_ = std::pow(static_cast<double>(n), -n);
        s.c_exact_ = true;
        return s;
    }

    /// For k = 0 the product bound n^{-n} is exact; otherwise c is measured
    /// on Gamma^n samples (see estimate_product_bound) and is only empirical.
    static OperatorSpec hessian_quotient(int n, int k, double sigma = 1.0)
    {
        if (k < 0 || k >= n)
            throw ArgumentError(detail::concat("hessian_quotient needs 0 <= k < n, got k = ", k, ", n = ", n));
        OperatorSpec s(OperatorFamily::hessian_quotient, n, k, sigma);
        if (k == 0) {
            s.c_ = std::pow(static_cast<double>(n), -n);
            s.c_exact_ = true;
        } else {
            s.c_ = s.measure_product_bound(20000, 0x5eedULL);
            s.c_exact_ = false;
        }
        return s;
    }

    int dim() const { return n_; }
    OperatorFamily family() const { return family_; }
    int k() const { return k_; }
    double sigma() const { return sigma_; }
    double product_bound() const { return c_; }
    bool product_bound_exact() const { return c_exact_; }

    std::string name() const
    {
        if (family_ == OperatorFamily::monge_ampere) return "monge_ampere";
        return detail::concat("hessian_quotient(", k_, ")");
    }

    bool in_cone(std::span<const double> lambda) const { return cone_margin(lambda) > 0.0; }

    /// Distance to the boundary of Gamma^n in the min-eigenvalue sense.
    double cone_margin(std::span<const double> lambda) const
    {
        return *std::min_element(lambda.begin(), lambda.end());
    }

    double value(std::span<const double> lambda) const
    {
        require_in_cone(lambda);
        return value_unchecked(lambda);
    }

    std::vector<double> gradient(std::span<const double> lambda) const
    {
        std::vector<double> out(lambda.size());
        gradient(lambda, out);
        return out;
    }

    void gradient(std::span<const double> lambda, std::span<double> out) const
    {
        require_in_cone(lambda);
        const double f = value_unchecked(lambda);
        const int n = n_;
        if (family_ == OperatorFamily::monge_ampere) {
            for (int i = 0; i < n; ++i) out[i] = f / (n * lambda[i]);
            return;
        }
        const double sn = elementary_symmetric(lambda, n);
        const double sk = elementary_symmetric(lambda, k_);
        for (int i = 0; i < n; ++i) {
            const double dn = elementary_symmetric_without(lambda, n - 1, i) / sn;
            const double dk = k_ == 0 ? 0.0 : elementary_symmetric_without(lambda, k_ - 1, i) / sk;
            out[i] = f / (n - k_) * (dn - dk);
        }
    }

    /// f(1, ..., 1)
    double value_at_ones() const
    {
        std::vector<double> ones(static_cast<std::size_t>(n_), 1.0);
        return value(ones);
    }

    /// df/dlambda_1 at (1, ..., 1); equal in every component by symmetry.
    double gradient_at_ones() const
    {
        std::vector<double> ones(static_cast<std::size_t>(n_), 1.0);
        return gradient(ones)[0];
    }

    /// Empirical min of prod_i df/dlambda_i over Gamma^n samples with
    /// log-uniform radial scale in [1e-3, 1e3].
    double measure_product_bound(int samples, std::uint64_t seed) const;

private:
    OperatorSpec(OperatorFamily family, int n, int k, double sigma) : family_(family), n_(n), k_(k), sigma_(sigma)
    {
        if (n < 2 || n > 3) throw ArgumentError(detail::concat("operator dimension must be 2 or 3, got ", n));
        if (!(sigma > 0.0)) throw ArgumentError(detail::concat("sigma must be positive, got ", sigma));
    }

    void require_in_cone(std::span<const double> lambda) const
    {
        if (static_cast<int>(lambda.size()) != n_)
            throw ArgumentError(detail::concat("eigenvalue vector has length ", lambda.size(), ", expected ", n_));
        if (!in_cone(lambda))
            throw ConeViolation(detail::concat("eigenvalues ",
                                               detail::format_vector({lambda.begin(), lambda.end()}),
                                               " lie outside the cone Gamma^n"),
                                {lambda.begin(), lambda.end()}, static_cast<std::size_t>(-1), cone_margin(lambda));
    }

    double value_unchecked(std::span<const double> lambda) const
    {
        if (family_ == OperatorFamily::monge_ampere)
            return std::pow(elementary_symmetric(lambda, n_), 1.0 / n_);
        return std::pow(elementary_symmetric(lambda, n_) / elementary_symmetric(lambda, k_), 1.0 / (n_ - k_));
    }

    OperatorFamily family_;
    int n_;
    int k_;
    double sigma_;
    double c_ = 0.0;
    bool c_exact_ = false;
};

/// Any symmetric-function candidate that check_conditions can interrogate.
template <class F>
concept SymmetricFunction = requires(const F& f, std::span<const double> l) {
    { f.dim() } -> std::convertible_to<int>;
    { f.value(l) } -> std::convertible_to<double>;
    { f.gradient(l) } -> std::convertible_to<std::vector<double>>;
    { f.product_bound() } -> std::convertible_to<double>;
};

/// Draws a point of Gamma^n: exponentials of uniforms for the direction, then
/// a log-uniform radial scale in [10^lo, 10^hi].
inline std::vector<double> sample_positive_cone(int n, std::mt19937_64& rng, double lo_exp = -3.0,
                                                double hi_exp = 3.0)
{
    std::uniform_real_distribution<double> shape(-3.0, 3.0);
    std::uniform_real_distribution<double> scale(lo_exp, hi_exp);
    std::vector<double> l(static_cast<std::size_t>(n));
    double norm = 0.0;
    for (auto& v : l) {
        v = std::exp(shape(rng));
        norm += v * v;
    }
    const double s = std::pow(10.0, scale(rng)) / std::sqrt(norm);
    for (auto& v : l) v *= s;
    return l;
}

inline double OperatorSpec::measure_product_bound(int samples, std::uint64_t seed) const
{
    std::mt19937_64 rng(seed);
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> grad(static_cast<std::size_t>(n_));
    for (int s = 0; s < samples; ++s) {
        const auto l = sample_positive_cone(n_, rng);
        gradient(l, grad);
        best = std::min(best, std::accumulate(grad.begin(), grad.end(), 1.0, std::multiplies<>()));
    }
    return best;
}

/// Eigenvalues of A with respect to g (A v = lambda g v), sorted descending,
/// and the g-orthonormal frame E with A = g E diag(lambda) E^T g.
template <int Dim>
struct Spectrum {
    Vec<Dim> lambda;
    Mat<Dim> frame;

    std::span<const double> values() const { return {lambda.data(), static_cast<std::size_t>(Dim)}; }
};

template <int Dim>
Spectrum<Dim> eigenvalues_wrt_metric(const Mat<Dim>& a, const Mat<Dim>& g)
{
    Eigen::LLT<Mat<Dim>> llt(g);
    if (llt.info() != Eigen::Success) throw GeometryError("metric is not positive definite");
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat<Dim>> es(a, g, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    if (es.info() != Eigen::Success) throw GeometryError("generalized eigenproblem did not converge");
    Spectrum<Dim> s;
    for (int i = 0; i < Dim; ++i) {
        s.lambda(i) = es.eigenvalues()(Dim - 1 - i);
        s.frame.col(i) = es.eigenvectors().col(Dim - 1 - i);
    }
    return s;
}

struct ConeMembership {
    bool inside;
    double margin;
};

inline ConeMembership cone_membership(std::span<const double> lambda, const OperatorSpec& spec)
{
    return {spec.in_cone(lambda), spec.cone_margin(lambda)};
}

/// Eigenvalue gaps below this are treated as a degenerate cluster when
/// assembling the derivative of F.
inline constexpr double kEigenGapThreshold = 1e-8;

/// F(A) = f(lambda(A)) with respect to g.
template <int Dim>
double F_eval(const OperatorSpec& spec, const Mat<Dim>& a, const Mat<Dim>& g)
{
    return spec.value(eigenvalues_wrt_metric<Dim>(a, g).values());
}

/// dF/dA_ij for a spectrum already computed. For a spectral function the
/// first Daleckii-Krein divided difference reduces to E diag(f_i) E^T; inside
/// a cluster of eigenvalues closer than the gap threshold the divided
/// difference tends to the common derivative, which is taken as the cluster
/// average so the result does not depend on the basis chosen inside the cluster.
template <int Dim>
Mat<Dim> F_deriv_from_spectrum(const OperatorSpec& spec, const Spectrum<Dim>& s)
{
    std::array<double, Dim> grad;
    spec.gradient(s.values(), grad);
    std::array<double, Dim> smoothed = grad;
    int start = 0;
    while (start < Dim) {
        int end = start + 1;
        const double scale = std::max(1.0, std::abs(s.lambda(start)));
        while (end < Dim && s.lambda(end - 1) - s.lambda(end) < kEigenGapThreshold * scale) ++end;
        if (end - start > 1) {
            double avg = 0.0;
            for (int i = start; i < end; ++i) avg += grad[i];
            avg /= (end - start);
            for (int i = start; i < end; ++i) smoothed[i] = avg;
        }
        start = end;
    }
    Mat<Dim> d = Mat<Dim>::Zero();
    for (int i = 0; i < Dim; ++i) d += smoothed[i] * s.frame.col(i) * s.frame.col(i).transpose();
    return SymTensorField<Dim>::symmetrized(d);
}

template <int Dim>
Mat<Dim> F_deriv(const OperatorSpec& spec, const Mat<Dim>& a, const Mat<Dim>& g)
{
    return F_deriv_from_spectrum(spec, eigenvalues_wrt_metric<Dim>(a, g));
}

struct ConditionVerdict {
    std::string name;
    bool pass = true;
    double measured = 0.0;  // the worst value seen for this condition
    std::vector<double> witness;  // set whenever pass is false
};

struct ConditionReport {
    std::vector<ConditionVerdict> verdicts;
    int samples = 0;
    double min_gradient_product = std::numeric_limits<double>::infinity();
    double max_gradient_product = 0.0;
    double max_concavity_defect = -std::numeric_limits<double>::infinity();
    double min_gradient_sum_slack = std::numeric_limits<double>::infinity();
    double gradient_sum_at_ones = 0.0;
    double gradient_sum_lower_bound = 0.0;  // n c^{1/n}

    bool all_pass() const
    {
        return std::all_of(verdicts.begin(), verdicts.end(), [](const auto& v) { return v.pass; });
    }

    const ConditionVerdict& verdict(const std::string& name) const
    {
        for (const auto& v : verdicts)
            if (v.name == name) return v;
        throw ArgumentError("no condition verdict named " + name);
    }
};

namespace detail {
inline void record_failure(ConditionVerdict& v, double measured, const std::vector<double>& witness)
{
    if (v.pass) v.witness = witness;
    v.pass = false;
    v.measured = measured;
}
}  // namespace detail

/// Randomized verification of the structural conditions on samples of Gamma^n:
/// boundary vanishing, permutation symmetry, ellipticity, the product bound
/// prod f_i >= c, concavity, plus sum f_i >= n c^{1/n} and the AM-GM chain
/// f(lambda) >= n (c prod mu_i)^{1/n} whenever lambda - mu in Gamma, mu in Gamma^n.
template <SymmetricFunction F>
ConditionReport check_conditions(const F& f, int sample_count, std::uint64_t seed = 0)
{
    if (sample_count < 1000) throw ArgumentError(detail::concat("need at least 1000 samples, got ", sample_count));
    const int n = f.dim();
    const double c = f.product_bound();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    ConditionReport rep;
    rep.samples = sample_count;
    rep.gradient_sum_lower_bound = n * std::pow(c, 1.0 / n);
    ConditionVerdict boundary{"boundary_vanishing"}, symmetry{"symmetry"}, ellipticity{"ellipticity"},
        product{"product_bound"}, concavity{"concavity"}, gsum{"gradient_sum_bound"}, amgm{"am_gm_chain"};

    for (int s = 0; s < sample_count; ++s) {
        const auto l = sample_positive_cone(n, rng);
        const double fl = f.value(l);
        const auto grad = f.gradient(l);

        if (!(fl > 0.0)) detail::record_failure(boundary, fl, l);
        // approach the boundary by shrinking the smallest component by 1e-12
        {
            auto lb = l;
            auto it = std::min_element(lb.begin(), lb.end());
            *it *= 1e-12;
            const double ratio = f.value(lb) / fl;
            boundary.measured = std::max(boundary.measured, ratio);
            if (!(ratio < 1e-3)) detail::record_failure(boundary, ratio, lb);
        }

        {
            auto perm = l;
            std::shuffle(perm.begin(), perm.end(), rng);
            if (perm == l) std::reverse(perm.begin(), perm.end());
            const double d = std::abs(f.value(perm) - fl) / std::max(1.0, std::abs(fl));
            symmetry.measured = std::max(symmetry.measured, d);
            if (d > 1e-12) detail::record_failure(symmetry, d, l);
        }

        double prod = 1.0, sum = 0.0;
        double min_grad = std::numeric_limits<double>::infinity();
        for (double gi : grad) {
            prod *= gi;
            sum += gi;
            min_grad = std::min(min_grad, gi);
        }
        if (!(min_grad > 0.0)) detail::record_failure(ellipticity, min_grad, l);
        rep.min_gradient_product = std::min(rep.min_gradient_product, prod);
        rep.max_gradient_product = std::max(rep.max_gradient_product, prod);
        if (prod < c * (1.0 - 1e-12)) detail::record_failure(product, prod, l);

        const double slack = sum - rep.gradient_sum_lower_bound;
        rep.min_gradient_sum_slack = std::min(rep.min_gradient_sum_slack, slack);
        if (slack < -1e-12 * std::max(1.0, sum)) detail::record_failure(gsum, slack, l);

        // concavity along a random segment inside the cone
        {
            const auto m = sample_positive_cone(n, rng);
            const double t = unit(rng);
            std::vector<double> mid(l.size());
            for (std::size_t i = 0; i < l.size(); ++i) mid[i] = t * l[i] + (1.0 - t) * m[i];
            const double fm = f.value(m);
            const double defect = t * fl + (1.0 - t) * fm - f.value(mid);
            const double tol = 1e-10 * std::max({1.0, std::abs(fl), std::abs(fm)});
            rep.max_concavity_defect = std::max(rep.max_concavity_defect, defect);
            if (defect > tol) detail::record_failure(concavity, defect, mid);

            // directional second difference at lambda along the segment direction
            std::vector<double> dir(l.size());
            double dn = 0.0;
            for (std::size_t i = 0; i < l.size(); ++i) {
                dir[i] = m[i] - l[i];
                dn += dir[i] * dir[i];
            }
            const double step = 1e-3 * *std::min_element(l.begin(), l.end()) / std::max(1e-300, std::sqrt(dn));
            auto plus = l, minus = l;
            for (std::size_t i = 0; i < l.size(); ++i) {
                plus[i] += step * dir[i];
                minus[i] -= step * dir[i];
            }
            const double second = f.value(plus) - 2.0 * fl + f.value(minus);
            const double stol = 1e-12 * std::max(1.0, std::abs(fl));
            concavity.measured = std::max(concavity.measured, second);
            if (second > stol) detail::record_failure(concavity, second, l);
        }

        // AM-GM chain: mu in Gamma^n with lambda - mu in Gamma^n
        {
            std::vector<double> mu(l.size());
            double prod_mu = 1.0;
            for (std::size_t i = 0; i < l.size(); ++i) {
                mu[i] = unit(rng) * l[i];
                prod_mu *= mu[i];
            }
            const double rhs = n * std::pow(c * prod_mu, 1.0 / n);
            const double gap = fl - rhs;
            if (gap < -1e-12 * std::max(1.0, fl)) detail::record_failure(amgm, gap, l);
        }
    }

    std::vector<double> ones(static_cast<std::size_t>(n), 1.0);
    const auto g1 = f.gradient(ones);
    rep.gradient_sum_at_ones = std::accumulate(g1.begin(), g1.end(), 0.0);

    product.measured = rep.min_gradient_product;
    gsum.measured = rep.min_gradient_sum_slack;
    rep.verdicts = {boundary, symmetry, ellipticity, product, concavity, gsum, amgm};
    return rep;
}

/// Bounds on the eigenvalue excess max_i(lambda_i - lambda'_i) of any
/// admissible lambda with f(lambda) = e^f <= rhs_sup and lambda - lambda' in
/// Gamma^n, where lambda' = lambda(chi).
struct CSubsolutionReport {
    /// rhs_sup^n / (n^n c sigma^{n-1}) - sigma: drops the f(lambda' - sigma 1)
    /// term, so it is the same at every point.
    double uniform_bound = 0.0;
    /// Per point bound keeping f(lambda' - sigma 1); -inf when the admissible set is empty.
    std::vector<double> pointwise_bound;
    double max_pointwise_bound = -std::numeric_limits<double>::infinity();
    /// True when no admissible lambda can exist anywhere (uniform bound <= 0).
    bool admissible_empty = false;
};

template <int Dim>
CSubsolutionReport check_csubsolution(const OperatorSpec& spec, const SymTensorField<Dim>& chi,
                                      const MetricField<Dim>& metric, double rhs_sup)
{
    require_same_grid(chi.grid(), metric.grid(), "check_csubsolution");
    if (!(rhs_sup >= 0.0)) throw ArgumentError(detail::concat("rhs_sup must be non-negative, got ", rhs_sup));
    const int n = Dim;
    const double sigma = spec.sigma();
    const double denom = std::pow(static_cast<double>(n), n) * spec.product_bound() * std::pow(sigma, n - 1);

    CSubsolutionReport rep;
    rep.uniform_bound = std::pow(rhs_sup, n) / denom - sigma;
    rep.admissible_empty = rep.uniform_bound <= 0.0;
    rep.pointwise_bound.resize(chi.size());
    for (std::size_t p = 0; p < chi.size(); ++p) {
        const auto s = eigenvalues_wrt_metric<Dim>(chi[p], metric.g(p));
        Vec<Dim> shifted = s.lambda - Vec<Dim>::Constant(sigma);
        std::span<const double> sv(shifted.data(), Dim);
        if (!spec.in_cone(sv))
            throw ConeViolation(detail::concat("lambda(chi - sigma g) leaves the cone at point ", p),
                                {sv.begin(), sv.end()}, p, spec.cone_margin(sv));
        const double base = rhs_sup - spec.value(sv);
        rep.pointwise_bound[p] =
            base > 0.0 ? std::pow(base, n) / denom - sigma : -std::numeric_limits<double>::infinity();
        rep.max_pointwise_bound = std::max(rep.max_pointwise_bound, rep.pointwise_bound[p]);
    }
    return rep;
}

}  // namespace hessian_lab
