#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <string_view>

namespace hgfnd {

template <typename Real>
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Real>
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

enum class Precision { F32, F64 };

Precision parse_precision(std::string_view text);
std::string_view to_string(Precision p);

inline constexpr double kLeakySlope = 0.01;

template <typename Real>
Matrix<Real> relu(const Matrix<Real>& z) {
    return z.cwiseMax(Real(0));
}

/// d/dz relu(z) * g, with the derivative at 0 taken as 0.
template <typename Real>
Matrix<Real> relu_backward(const Matrix<Real>& z, const Matrix<Real>& g) {
    return g.binaryExpr(z, [](Real gv, Real zv) { return zv > Real(0) ? gv : Real(0); });
}

template <typename Real>
Matrix<Real> leaky_relu(const Matrix<Real>& z) {
    return z.unaryExpr([](Real v) { return v >= Real(0) ? v : Real(kLeakySlope) * v; });
}

/// The derivative at 0 is taken as 1 (positive branch).
template <typename Real>
Matrix<Real> leaky_relu_backward(const Matrix<Real>& z, const Matrix<Real>& g) {
    return g.binaryExpr(z, [](Real gv, Real zv) { return zv >= Real(0) ? gv : Real(kLeakySlope) * gv; });
}

/// Uniform in +/- sqrt(6 / (fan_in + fan_out)).
template <typename Real>
Matrix<Real> glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix<Real> m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = static_cast<Real>(dist(rng));
    return m;
}

/// Inverted-dropout mask: entries are 0 with probability `rate`, else 1/(1-rate).
template <typename Real>
Matrix<Real> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng) {
    Matrix<Real> m(rows, cols);
    std::bernoulli_distribution drop(rate);
    const Real keep = static_cast<Real>(1.0 / (1.0 - rate));
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = drop(rng) ? Real(0) : keep;
    return m;
}

} // namespace hgfnd
