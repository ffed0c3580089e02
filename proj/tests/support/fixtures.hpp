#pragma once

// Closed-form fixtures with hand-derived derivatives. They serve as oracles:
// nothing here goes through the library's finite-difference or spectral
// derivative code.

#include <hessian_lab/grid_geometry.hpp>
#include <hessian_lab/symmetric_operators.hpp>

#include <array>
#include <cmath>
#include <numbers>

namespace fixtures {

using hessian_lab::Mat;
using hessian_lab::Vec;
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Point2 = std::array<double, 2>;

/// g11 = 1 + sin(2 pi x)/2, g12 = 0.1 sin(2 pi x) cos(2 pi y), g22 = 1 + cos(2 pi y)/4 on the unit torus.
struct VariableMetric2 {
    static Mat<2> g(const Point2& p)
    {
        const double x = p[0], y = p[1];
        Mat<2> m;
        m(0, 0) = 1.0 + 0.5 * std::sin(kTwoPi * x);
        m(0, 1) = m(1, 0) = 0.1 * std::sin(kTwoPi * x) * std::cos(kTwoPi * y);
        m(1, 1) = 1.0 + 0.25 * std::cos(kTwoPi * y);
        return m;
    }

    /// dg[l] = d g / d x_l
    static std::array<Mat<2>, 2> dg(const Point2& p)
    {
        const double x = p[0], y = p[1];
        std::array<Mat<2>, 2> d;
        d[0](0, 0) = kPi * std::cos(kTwoPi * x);
        d[0](0, 1) = d[0](1, 0) = 0.2 * kPi * std::cos(kTwoPi * x) * std::cos(kTwoPi * y);
        d[0](1, 1) = 0.0;
        d[1](0, 0) = 0.0;
        d[1](0, 1) = d[1](1, 0) = -0.2 * kPi * std::sin(kTwoPi * x) * std::sin(kTwoPi * y);
        d[1](1, 1) = -0.5 * kPi * std::sin(kTwoPi * y);
        return d;
    }

    /// gamma[k](i, j) from the analytic metric derivatives.
    static std::array<Mat<2>, 2> christoffel(const Point2& p)
    {
        const Mat<2> ginv = g(p).inverse();
        const auto d = dg(p);
        std::array<Mat<2>, 2> out;
        for (int k = 0; k < 2; ++k)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    double s = 0.0;
                    for (int l = 0; l < 2; ++l) s += ginv(k, l) * (d[i](j, l) + d[j](i, l) - d[l](i, j));
                    out[k](i, j) = 0.5 * s;
                }
        return out;
    }
};

/// The single-coefficient metric diag(1 + sin(2 pi x / L)/2, 1); its only
/// nonzero symbol is Gamma^1_11 = a' / (2 a).
struct DiagonalMetric2 {
    double period = 1.0;
    Mat<2> g(const Point2& p) const
    {
        Mat<2> m = Mat<2>::Identity();
        m(0, 0) = 1.0 + 0.5 * std::sin(kTwoPi * p[0] / period);
        return m;
    }
    double gamma111(const Point2& p) const
    {
        const double a = 1.0 + 0.5 * std::sin(kTwoPi * p[0] / period);
        const double da = kPi / period * std::cos(kTwoPi * p[0] / period);
        return da / (2.0 * a);
    }
};

/// phi = A sin(2 pi x) cos(2 pi y) + B cos(2 pi (x + y)) with analytic derivatives.
struct TrigPotential2 {
    double a = 0.01;
    double b = 0.004;

    double value(const Point2& p) const
    {
        const double x = p[0], y = p[1];
        return a * std::sin(kTwoPi * x) * std::cos(kTwoPi * y) + b * std::cos(kTwoPi * (x + y));
    }
    Vec<2> gradient(const Point2& p) const
    {
        const double x = p[0], y = p[1];
        Vec<2> d;
        d(0) = a * kTwoPi * std::cos(kTwoPi * x) * std::cos(kTwoPi * y) - b * kTwoPi * std::sin(kTwoPi * (x + y));
        d(1) = -a * kTwoPi * std::sin(kTwoPi * x) * std::sin(kTwoPi * y) - b * kTwoPi * std::sin(kTwoPi * (x + y));
        return d;
    }
    Mat<2> hessian(const Point2& p) const
    {
        const double x = p[0], y = p[1];
        const double w2 = kTwoPi * kTwoPi;
        const double cxy = std::cos(kTwoPi * (x + y));
        Mat<2> h;
        h(0, 0) = -a * w2 * std::sin(kTwoPi * x) * std::cos(kTwoPi * y) - b * w2 * cxy;
        h(1, 1) = -a * w2 * std::sin(kTwoPi * x) * std::cos(kTwoPi * y) - b * w2 * cxy;
        h(0, 1) = h(1, 0) = -a * w2 * std::cos(kTwoPi * x) * std::sin(kTwoPi * y) - b * w2 * cxy;
        return h;
    }
    /// Covariant Hessian under VariableMetric2.
    Mat<2> covariant_hessian(const Point2& p) const
    {
        const auto gam = VariableMetric2::christoffel(p);
        const Vec<2> d = gradient(p);
        return hessian(p) - gam[0] * d(0) - gam[1] * d(1);
    }
};

/// chi = 2 g + 0.1 diag(cos 2 pi y, sin 2 pi x); lambda(chi - g) stays in Gamma^2.
inline Mat<2> manufactured_chi(const Point2& p)
{
    Mat<2> c = 2.0 * VariableMetric2::g(p);
    c(0, 0) += 0.1 * std::cos(kTwoPi * p[1]);
    c(1, 1) += 0.1 * std::sin(kTwoPi * p[0]);
    return c;
}

/// e^f := F(chi + nabla^2 phi*) evaluated from closed forms, so the exact pair is (phi*, 0).
inline double manufactured_rhs(const hessian_lab::OperatorSpec& spec, const Point2& p)
{
    const TrigPotential2 phi;
    const Mat<2> a = manufactured_chi(p) + phi.covariant_hessian(p);
    // closed-form 2x2 generalized eigenvalues: det(A - l g) = 0
    const Mat<2> g = VariableMetric2::g(p);
    const double qa = g.determinant();
    const double qb = -(a(0, 0) * g(1, 1) + a(1, 1) * g(0, 0) - 2.0 * a(0, 1) * g(0, 1));
    const double qc = a.determinant();
    const double disc = std::sqrt(qb * qb - 4.0 * qa * qc);
    const double l1 = (-qb + disc) / (2.0 * qa);
    const double l2 = qc / (qa * l1);
    const std::array<double, 2> lam{l1, l2};
    return spec.value(lam);
}

}  // namespace fixtures
