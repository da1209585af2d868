#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "ffagent/errors.hpp"

namespace ffagent::nn {

using Vec = std::vector<double>;

// Row-major dense matrix. 64-bit throughout; checkpoints store 32-bit.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    const double* row(std::size_t i) const { return data.data() + i * cols; }
    double* row(std::size_t i) { return data.data() + i * cols; }

    std::size_t size() const { return rows * cols; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }
};

inline Matrix uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in,
                           std::mt19937_64& rng) {
    Matrix m(rows, cols);
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in == 0 ? 1 : fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : m.data) v = dist(rng);
    return m;
}

// y = W x
inline Vec matvec(const Matrix& W, const Vec& x) {
    if (x.size() != W.cols)
        throw ConfigError("matvec: size mismatch (" + std::to_string(W.rows) + "x" +
                          std::to_string(W.cols) + " vs " + std::to_string(x.size()) + ")");
    Vec y(W.rows, 0.0);
    for (std::size_t i = 0; i < W.rows; ++i) {
        const double* wr = W.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < W.cols; ++j) acc += wr[j] * x[j];
        y[i] = acc;
    }
    return y;
}

// y = W^T x
inline Vec matvec_t(const Matrix& W, const Vec& x) {
    if (x.size() != W.rows)
        throw ConfigError("matvec_t: size mismatch");
    Vec y(W.cols, 0.0);
    for (std::size_t i = 0; i < W.rows; ++i) {
        const double xi = x[i];
        const double* wr = W.row(i);
        for (std::size_t j = 0; j < W.cols; ++j) y[j] += wr[j] * xi;
    }
    return y;
}

// A += u v^T
inline void add_outer(Matrix& A, const Vec& u, const Vec& v) {
    for (std::size_t i = 0; i < A.rows; ++i) {
        double* ar = A.row(i);
        const double ui = u[i];
        for (std::size_t j = 0; j < A.cols; ++j) ar[j] += ui * v[j];
    }
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline void axpy(double a, const Vec& x, Vec& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline double norm2(const Vec& x) { return std::sqrt(dot(x, x)); }

inline Vec concat(const Vec& a, const Vec& b) {
    Vec out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

// Shift-invariant softmax.
inline Vec softmax(const Vec& z) {
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    Vec p(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - mx);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

inline bool all_finite(const Vec& x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

inline bool all_finite(const Matrix& m) { return all_finite(m.data); }

// Named view into a parameter and its gradient accumulator.
struct ParamRef {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    double* value = nullptr;
    double* grad = nullptr;

    std::size_t size() const { return rows * cols; }
};

inline ParamRef param_ref(const std::string& name, Matrix& value, Matrix& grad) {
    return ParamRef{name, value.rows, value.cols, value.data.data(), grad.data.data()};
}

inline ParamRef param_ref(const std::string& name, Vec& value, Vec& grad) {
    return ParamRef{name, value.size(), 1, value.data(), grad.data()};
}

}  // namespace ffagent::nn
