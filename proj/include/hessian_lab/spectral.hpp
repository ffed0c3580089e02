#pragma once

#include <fftw3.h>

#include <array>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <vector>

#include "hessian_lab/grid.hpp"

namespace hessian_lab {

namespace detail {

struct FftwFree {
    void operator()(fftw_complex* p) const { fftw_free(p); }
};

template <int Dim>
class FourierBuffer {
public:
    explicit FourierBuffer(const PeriodicGrid<Dim>& grid)
        : grid_(grid), n_(grid.num_points()),
          data_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * grid.num_points())))
    {
        for (int a = 0; a < Dim; ++a) dims_[a] = grid.size(a);
    }

    void load(const ScalarField<Dim>& f)
    {
        for (std::size_t p = 0; p < n_; ++p) {
            data_.get()[p][0] = f[p];
            data_.get()[p][1] = 0.0;
        }
    }

    void transform(int sign)
    {
        fftw_plan plan = fftw_plan_dft(Dim, dims_.data(), data_.get(), data_.get(), sign, FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }

    std::complex<double> coefficient(std::size_t p) const { return {data_.get()[p][0], data_.get()[p][1]}; }
    void set(std::size_t p, std::complex<double> c)
    {
        data_.get()[p][0] = c.real();
        data_.get()[p][1] = c.imag();
    }

    /// Signed mode number along each axis, in (-N/2, N/2].
    std::array<int, Dim> mode(std::size_t p) const
    {
        auto idx = grid_.multi_index(p);
        for (int a = 0; a < Dim; ++a)
            if (idx[a] > grid_.size(a) / 2) idx[a] -= grid_.size(a);
        return idx;
    }

    ScalarField<Dim> real_part_normalized() const
    {
        std::vector<double> v(n_);
        const double scale = 1.0 / static_cast<double>(n_);
        for (std::size_t p = 0; p < n_; ++p) v[p] = data_.get()[p][0] * scale;
        return ScalarField<Dim>(grid_, std::move(v));
    }

    std::size_t size() const { return n_; }

private:
    PeriodicGrid<Dim> grid_;
    std::size_t n_;
    std::array<int, Dim> dims_{};
    std::unique_ptr<fftw_complex[], FftwFree> data_;
};

}  // namespace detail

/// Spectral partial derivative of order orders[a] along each axis a. Exact for
/// trigonometric polynomials whose modes lie strictly below the Nyquist index.
template <int Dim>
ScalarField<Dim> spectral_derivative(const ScalarField<Dim>& f, const std::array<int, Dim>& orders)
{
    const auto& grid = f.grid();
    detail::FourierBuffer<Dim> buf(grid);
    buf.load(f);
    buf.transform(FFTW_FORWARD);
    for (std::size_t p = 0; p < buf.size(); ++p) {
        const auto m = buf.mode(p);
        std::complex<double> factor{1.0, 0.0};
        for (int a = 0; a < Dim; ++a) {
            if (orders[a] == 0) continue;
            if (orders[a] % 2 == 1 && m[a] == grid.size(a) / 2) {
                factor = 0.0;
                break;
            }
            const double k = 2.0 * std::numbers::pi * m[a] / grid.period(a);
            factor *= std::pow(std::complex<double>(0.0, k), orders[a]);
        }
        buf.set(p, buf.coefficient(p) * factor);
    }
    buf.transform(FFTW_BACKWARD);
    return buf.real_part_normalized();
}

/// Multiplies each Fourier coefficient by weight(mode) where mode holds the
/// signed mode numbers. The weight must be even in each mode for the result
/// to stay real.
template <int Dim, class WeightFn>
ScalarField<Dim> spectral_filter(const ScalarField<Dim>& f, WeightFn&& weight)
{
    detail::FourierBuffer<Dim> buf(f.grid());
    buf.load(f);
    buf.transform(FFTW_FORWARD);
    for (std::size_t p = 0; p < buf.size(); ++p) buf.set(p, buf.coefficient(p) * weight(buf.mode(p)));
    buf.transform(FFTW_BACKWARD);
    return buf.real_part_normalized();
}

/// Largest |mode| (max over axes) carrying a coefficient above tol * max coefficient.
template <int Dim>
int spectral_band(const ScalarField<Dim>& f, double tol = 1e-12)
{
    detail::FourierBuffer<Dim> buf(f.grid());
    buf.load(f);
    buf.transform(FFTW_FORWARD);
    double largest = 0.0;
    for (std::size_t p = 0; p < buf.size(); ++p) largest = std::max(largest, std::abs(buf.coefficient(p)));
    int band = 0;
    for (std::size_t p = 0; p < buf.size(); ++p) {
        if (std::abs(buf.coefficient(p)) <= tol * largest) continue;
        for (int m : buf.mode(p)) band = std::max(band, std::abs(m));
    }
    return band;
}

}  // namespace hessian_lab
