#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hessian_lab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad argument or violated precondition supplied by the caller.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Metric not positive definite, mismatched grids, and similar geometric failures.
class GeometryError : public Error {
public:
    GeometryError(const std::string& what, std::size_t point = static_cast<std::size_t>(-1))
        : Error(what), point_(point) {}
    std::size_t point() const { return point_; }

private:
    std::size_t point_;
};

/// Eigenvalue vector outside the admissible cone.
class ConeViolation : public Error {
public:
    ConeViolation(const std::string& what, std::vector<double> lambda,
                  std::size_t point = static_cast<std::size_t>(-1), double margin = 0.0)
        : Error(what), lambda_(std::move(lambda)), point_(point), margin_(margin) {}

    const std::vector<double>& lambda() const { return lambda_; }
    std::size_t point() const { return point_; }
    double margin() const { return margin_; }

private:
    std::vector<double> lambda_;
    std::size_t point_;
    double margin_;
};

/// Newton stagnation or exhausted continuity refinement.
class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, std::vector<double> history)
        : Error(what), history_(std::move(history)) {}
    const std::vector<double>& residual_history() const { return history_; }

private:
    std::vector<double> history_;
};

/// An estimate that must hold on every converged solve was violated.
class EstimateViolation : public Error {
public:
    using Error::Error;
};

namespace detail {

template <class... Args>
std::string concat(Args&&... args)
{
    std::ostringstream os;
    os.precision(17);
    (os << ... << std::forward<Args>(args));
    return os.str();
}

inline std::string format_vector(const std::vector<double>& v)
{
    std::ostringstream os;
    os.precision(17);
    os << '(';
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ", ";
        os << v[i];
    }
    os << ')';
    return os.str();
}

}  // namespace detail
}  // namespace hessian_lab
