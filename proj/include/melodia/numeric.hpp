#pragma once

#include <Eigen/Dense>

#include <functional>

#include "melodia/error.hpp"
#include "melodia/rng.hpp"

namespace melodia {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Mat = MatrixX<double>;
using Vec = VectorX<double>;
using Index = Eigen::Index;

// Dimension-checked product. Eigen's operator* only asserts in debug builds;
// the numeric kernel contract is to reject mismatches in every build.
inline Mat matmul(const Mat& a, const Mat& b) {
    require(a.cols() == b.rows(), Errc::shape_mismatch,
            "matmul: inner dimensions disagree");
    return a * b;
}

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x) {
    using Plain = typename Derived::PlainObject;
    return Plain(1.0 / (1.0 + (-x.array()).exp()));
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

template <typename Derived>
auto tanh(const Eigen::MatrixBase<Derived>& x) {
    using Plain = typename Derived::PlainObject;
    return Plain(x.array().tanh());
}

inline Mat add(const Mat& a, const Mat& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), Errc::shape_mismatch,
            "add: shapes disagree");
    return a + b;
}

inline Mat mul(const Mat& a, const Mat& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), Errc::shape_mismatch,
            "mul: shapes disagree");
    return a.cwiseProduct(b);
}

// Numerically stable softmax: shift by the maximum before exponentiating.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& x) {
    require(x.size() > 0, Errc::empty_input, "softmax: empty input");
    using S = typename Derived::Scalar;
    VectorX<S> e = (x.array() - x.maxCoeff()).exp();
    return e / e.sum();
}

// Inverted dropout: entries are 0 with probability `rate`, else 1/(1-rate),
// so expectations match at inference without rescaling.
inline Mat dropout_mask(Index rows, Index cols, double rate, Rng& rng) {
    require(rate >= 0.0 && rate < 1.0, Errc::bad_rate, "dropout rate must be in [0,1)");
    Mat m(rows, cols);
    const double keep = 1.0 / (1.0 - rate);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c)
            m(r, c) = rng.next_double() < rate ? 0.0 : keep;
    return m;
}

// Central-difference check of an analytic gradient. Returns the maximum
// relative error over coordinates: |a-n| / max(1e-8, |a|+|n|).
inline double grad_check(const std::function<double(const Vec&)>& f, const Vec& x,
                         const Vec& analytic, double eps = 1e-5) {
    double worst = 0.0;
    Vec probe = x;
    for (Index k = 0; k < x.size(); ++k) {
        probe(k) = x(k) + eps;
        const double hi = f(probe);
        probe(k) = x(k) - eps;
        const double lo = f(probe);
        probe(k) = x(k);
        const double numeric = (hi - lo) / (2.0 * eps);
        const double a = analytic(k);
        const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
        worst = std::max(worst, rel);
    }
    return worst;
}

} // namespace melodia
