#pragma once
// Row-major dense matrix of doubles plus the handful of kernels the
// predictor and policy need. Deliberately minimal: shapes here are small
// (hundreds of rows, dim < 256) and exact reproducibility matters more
// than BLAS throughput.

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "lrgcn/rng.hpp"

namespace lrgcn {

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    std::span<double> row_span(std::size_t r) { return {row(r), cols}; }
    std::span<const double> row_span(std::size_t r) const { return {row(r), cols}; }

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    void zero() { std::fill(data.begin(), data.end(), 0.0); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    // Xavier-style uniform init over [-a, a], a = sqrt(6 / (fan_in + fan_out)).
    void xavier_init(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& v : data) v = rng.next_uniform(-a, a);
    }
};

// y = W x  (W: m x n, x: n, y: m)
inline void matvec(const Matrix& w, std::span<const double> x, std::span<double> y) {
    assert(w.cols == x.size() && w.rows == y.size());
    for (std::size_t i = 0; i < w.rows; ++i) {
        const double* wi = w.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < w.cols; ++j) acc += wi[j] * x[j];
        y[i] = acc;
    }
}

// y = W^T x  (W: m x n, x: m, y: n)
inline void matvec_t(const Matrix& w, std::span<const double> x, std::span<double> y) {
    assert(w.rows == x.size() && w.cols == y.size());
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t i = 0; i < w.rows; ++i) {
        const double* wi = w.row(i);
        const double xi = x[i];
        for (std::size_t j = 0; j < w.cols; ++j) y[j] += wi[j] * xi;
    }
}

// W += scale * (x outer y)  (x: rows of W, y: cols of W)
inline void add_outer(Matrix& w, std::span<const double> x, std::span<const double> y,
                      double scale = 1.0) {
    assert(w.rows == x.size() && w.cols == y.size());
    for (std::size_t i = 0; i < w.rows; ++i) {
        double* wi = w.row(i);
        const double s = scale * x[i];
        for (std::size_t j = 0; j < w.cols; ++j) wi[j] += s * y[j];
    }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double clamp_prob(double p, double eps = 1e-7) {
    if (p < eps) return eps;
    if (p > 1.0 - eps) return 1.0 - eps;
    return p;
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace lrgcn
