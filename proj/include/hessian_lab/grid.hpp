#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "hessian_lab/errors.hpp"

namespace hessian_lab {

template <int Dim>
using Vec = Eigen::Matrix<double, Dim, 1>;
template <int Dim>
using Mat = Eigen::Matrix<double, Dim, Dim>;

/// Discrete flat-chart torus. Point coordinates are x_a = i_a * h_a with
/// i_a in [0, size_a); all indexing wraps modulo the sizes. Linear indices
/// are row-major (axis 0 slowest).
template <int Dim>
class PeriodicGrid {
    static_assert(Dim == 2 || Dim == 3, "only 2- and 3-dimensional tori are supported");

public:
    using MultiIndex = std::array<int, Dim>;
    using Point = std::array<double, Dim>;

    PeriodicGrid(std::array<int, Dim> sizes, std::array<double, Dim> periods)
        : sizes_(sizes), periods_(periods)
    {
        for (int a = 0; a < Dim; ++a) {
            if (sizes_[a] < 8 || sizes_[a] % 2 != 0)
                throw ArgumentError(detail::concat("grid size along axis ", a, " must be even and >= 8, got ",
                                                   sizes_[a]));
            if (!(periods_[a] > 0.0) || !std::isfinite(periods_[a]))
                throw ArgumentError(detail::concat("grid period along axis ", a, " must be positive, got ",
                                                   periods_[a]));
            spacing_[a] = periods_[a] / sizes_[a];
        }
        strides_[Dim - 1] = 1;
        for (int a = Dim - 2; a >= 0; --a) strides_[a] = strides_[a + 1] * static_cast<std::size_t>(sizes_[a + 1]);
        count_ = strides_[0] * static_cast<std::size_t>(sizes_[0]);
    }

    static PeriodicGrid uniform(int size, double period = 1.0)
    {
        std::array<int, Dim> s;
        std::array<double, Dim> p;
        s.fill(size);
        p.fill(period);
        return PeriodicGrid(s, p);
    }

    static constexpr int dim() { return Dim; }
    int size(int axis) const { return sizes_[axis]; }
    double period(int axis) const { return periods_[axis]; }
    double spacing(int axis) const { return spacing_[axis]; }
    const std::array<int, Dim>& sizes() const { return sizes_; }
    const std::array<double, Dim>& periods() const { return periods_; }
    std::size_t num_points() const { return count_; }
    std::size_t stride(int axis) const { return strides_[axis]; }

    double cell_volume() const
    {
        double v = 1.0;
        for (double h : spacing_) v *= h;
        return v;
    }

    double chart_volume() const
    {
        double v = 1.0;
        for (double l : periods_) v *= l;
        return v;
    }

    std::size_t index(const MultiIndex& idx) const
    {
        std::size_t p = 0;
        for (int a = 0; a < Dim; ++a) p += static_cast<std::size_t>(wrap(idx[a], a)) * strides_[a];
        return p;
    }

    MultiIndex multi_index(std::size_t p) const
    {
        MultiIndex idx;
        for (int a = 0; a < Dim; ++a) {
            idx[a] = static_cast<int>(p / strides_[a]);
            p %= strides_[a];
        }
        return idx;
    }

    Point coords(std::size_t p) const
    {
        const auto idx = multi_index(p);
        Point x;
        for (int a = 0; a < Dim; ++a) x[a] = idx[a] * spacing_[a];
        return x;
    }

    /// Linear index of the point displaced by `offset` grid steps along `axis`.
    std::size_t shifted(std::size_t p, int axis, int offset) const
    {
        const int i = static_cast<int>((p / strides_[axis]) % static_cast<std::size_t>(sizes_[axis]));
        const int j = wrap(i + offset, axis);
        return p + (static_cast<std::ptrdiff_t>(j) - i) * static_cast<std::ptrdiff_t>(strides_[axis]);
    }

    int wrap(int i, int axis) const
    {
        const int n = sizes_[axis];
        i %= n;
        return i < 0 ? i + n : i;
    }

    bool operator==(const PeriodicGrid& other) const
    {
        return sizes_ == other.sizes_ && periods_ == other.periods_;
    }

private:
    std::array<int, Dim> sizes_;
    std::array<double, Dim> periods_;
    std::array<double, Dim> spacing_{};
    std::array<std::size_t, Dim> strides_{};
    std::size_t count_ = 0;
};

template <int Dim>
void require_same_grid(const PeriodicGrid<Dim>& a, const PeriodicGrid<Dim>& b, const char* what)
{
    if (!(a == b)) throw GeometryError(detail::concat(what, ": fields live on different grids"));
}

/// One real per grid point.
template <int Dim>
class ScalarField {
public:
    explicit ScalarField(PeriodicGrid<Dim> grid, double value = 0.0)
        : grid_(std::move(grid)), values_(grid_.num_points(), value)
    {
        if (!std::isfinite(value)) throw ArgumentError("scalar field value must be finite");
    }

    ScalarField(PeriodicGrid<Dim> grid, std::vector<double> values)
        : grid_(std::move(grid)), values_(std::move(values))
    {
        if (values_.size() != grid_.num_points())
            throw ArgumentError(detail::concat("scalar field has ", values_.size(), " values for ",
                                               grid_.num_points(), " grid points"));
        require_finite();
    }

    /// Evaluates fn(coords) at every grid point.
    template <class Fn>
    static ScalarField sample(const PeriodicGrid<Dim>& grid, Fn&& fn)
    {
        std::vector<double> v(grid.num_points());
        for (std::size_t p = 0; p < v.size(); ++p) v[p] = fn(grid.coords(p));
        return ScalarField(grid, std::move(v));
    }

    const PeriodicGrid<Dim>& grid() const { return grid_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t p) const { return values_[p]; }
    double& operator[](std::size_t p) { return values_[p]; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    double max() const { return *std::max_element(values_.begin(), values_.end()); }
    double min() const { return *std::min_element(values_.begin(), values_.end()); }
    std::size_t argmax() const
    {
        return static_cast<std::size_t>(std::max_element(values_.begin(), values_.end()) - values_.begin());
    }
    std::size_t argmin() const
    {
        return static_cast<std::size_t>(std::min_element(values_.begin(), values_.end()) - values_.begin());
    }
    double abs_max() const
    {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }
    double mean() const { return std::accumulate(values_.begin(), values_.end(), 0.0) / values_.size(); }

    void require_finite() const
    {
        for (std::size_t p = 0; p < values_.size(); ++p)
            if (!std::isfinite(values_[p]))
                throw ArgumentError(detail::concat("scalar field is not finite at point ", p));
    }

    template <class Fn>
    ScalarField map(Fn&& fn) const
    {
        ScalarField out(grid_);
        for (std::size_t p = 0; p < values_.size(); ++p) out.values_[p] = fn(values_[p]);
        return out;
    }

    ScalarField& operator+=(double c)
    {
        for (double& v : values_) v += c;
        return *this;
    }
    ScalarField& operator*=(double c)
    {
        for (double& v : values_) v *= c;
        return *this;
    }
    ScalarField& operator+=(const ScalarField& o)
    {
        require_same_grid(grid_, o.grid_, "operator+=");
        for (std::size_t p = 0; p < values_.size(); ++p) values_[p] += o.values_[p];
        return *this;
    }
    ScalarField& operator-=(const ScalarField& o)
    {
        require_same_grid(grid_, o.grid_, "operator-=");
        for (std::size_t p = 0; p < values_.size(); ++p) values_[p] -= o.values_[p];
        return *this;
    }

    friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
    friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
    friend ScalarField operator*(double c, ScalarField a) { return a *= c; }
    friend ScalarField operator+(ScalarField a, double c) { return a += c; }

private:
    PeriodicGrid<Dim> grid_;
    std::vector<double> values_;
};

/// A symmetric Dim x Dim matrix per grid point; the (j,i) entry is always a copy of (i,j).
template <int Dim>
class SymTensorField {
public:
    explicit SymTensorField(PeriodicGrid<Dim> grid, const Mat<Dim>& value = Mat<Dim>::Zero())
        : grid_(std::move(grid)), values_(grid_.num_points(), symmetrized(value))
    {
    }

    template <class Fn>
    static SymTensorField sample(const PeriodicGrid<Dim>& grid, Fn&& fn)
    {
        SymTensorField t(grid);
        for (std::size_t p = 0; p < grid.num_points(); ++p) t.set(p, fn(grid.coords(p)));
        return t;
    }

    const PeriodicGrid<Dim>& grid() const { return grid_; }
    std::size_t size() const { return values_.size(); }
    const Mat<Dim>& operator[](std::size_t p) const { return values_[p]; }
    void set(std::size_t p, const Mat<Dim>& m) { values_[p] = symmetrized(m); }

    /// Upper triangle is authoritative.
    static Mat<Dim> symmetrized(const Mat<Dim>& m)
    {
        Mat<Dim> s = m;
        for (int i = 0; i < Dim; ++i)
            for (int j = 0; j < i; ++j) s(i, j) = s(j, i);
        return s;
    }

private:
    PeriodicGrid<Dim> grid_;
    std::vector<Mat<Dim>> values_;
};

}  // namespace hessian_lab
