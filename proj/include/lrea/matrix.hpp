#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "lrea/errors.hpp"

namespace lrea {

// Dense row-major matrix. double for training/tests, float for the
// serving benchmarks.
template <typename T>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<T> data;

    Mat() = default;

    Mat(int r, int c) : rows(r), cols(c), data(check_dims(r, c), T(0)) {}

    Mat(int r, int c, std::initializer_list<T> values)
        : rows(r), cols(c), data(values) {
        check_dims(r, c);
        if (data.size() != static_cast<std::size_t>(r) * c) {
            throw ShapeError("matrix literal: " + std::to_string(data.size()) +
                             " values for shape " + shape_str());
        }
    }

    Mat(int r, int c, std::vector<T> values)
        : rows(r), cols(c), data(std::move(values)) {
        check_dims(r, c);
        if (data.size() != static_cast<std::size_t>(r) * c) {
            throw ShapeError("matrix data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str());
        }
    }

    static Mat zeros(int r, int c) { return Mat(r, c); }

    static Mat filled(int r, int c, T v) {
        Mat m(r, c);
        std::fill(m.data.begin(), m.data.end(), v);
        return m;
    }

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = T(1);
        return m;
    }

    T& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    T operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    std::string shape_str() const {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }

    bool operator==(const Mat& o) const {
        return rows == o.rows && cols == o.cols && data == o.data;
    }

private:
    static std::size_t check_dims(int r, int c) {
        if (r <= 0 || c <= 0) {
            throw ShapeError("matrix dimensions must be positive, got " +
                             std::to_string(r) + "x" + std::to_string(c));
        }
        return static_cast<std::size_t>(r) * c;
    }
};

using Matrix = Mat<double>;
using MatrixF = Mat<float>;

namespace detail {
template <typename T>
inline void require_same_shape(const Mat<T>& a, const Mat<T>& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shape " + a.shape_str() +
                         " does not match " + b.shape_str());
    }
}
}  // namespace detail

template <typename T>
Mat<T> matmul(const Mat<T>& a, const Mat<T>& b) {
    if (a.cols != b.rows) {
        throw ShapeError("matmul: lhs " + a.shape_str() + " incompatible with rhs " +
                         b.shape_str());
    }
    Mat<T> c(a.rows, b.cols);
    const int n = b.cols;
    for (int i = 0; i < a.rows; ++i) {
        const T* arow = &a.data[static_cast<std::size_t>(i) * a.cols];
        T* crow = &c.data[static_cast<std::size_t>(i) * n];
        for (int k = 0; k < a.cols; ++k) {
            const T aik = arow[k];
            if (aik == T(0)) continue;
            const T* brow = &b.data[static_cast<std::size_t>(k) * n];
            for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

// c += a * b, same kernel as matmul. Used by the backward pass to
// accumulate into existing gradient buffers.
template <typename T>
void matmul_acc(Mat<T>& c, const Mat<T>& a, const Mat<T>& b) {
    if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols) {
        throw ShapeError("matmul_acc: " + a.shape_str() + " * " + b.shape_str() +
                         " -> " + c.shape_str());
    }
    const int n = b.cols;
    for (int i = 0; i < a.rows; ++i) {
        const T* arow = &a.data[static_cast<std::size_t>(i) * a.cols];
        T* crow = &c.data[static_cast<std::size_t>(i) * n];
        for (int k = 0; k < a.cols; ++k) {
            const T aik = arow[k];
            if (aik == T(0)) continue;
            const T* brow = &b.data[static_cast<std::size_t>(k) * n];
            for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

template <typename T>
Mat<T> transpose(const Mat<T>& a) {
    Mat<T> t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

template <typename T>
Mat<T> add(const Mat<T>& a, const Mat<T>& b) {
    detail::require_same_shape(a, b, "add");
    Mat<T> c(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) c.data[i] = a.data[i] + b.data[i];
    return c;
}

template <typename T>
Mat<T> sub(const Mat<T>& a, const Mat<T>& b) {
    detail::require_same_shape(a, b, "sub");
    Mat<T> c(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) c.data[i] = a.data[i] - b.data[i];
    return c;
}

template <typename T>
Mat<T> hadamard(const Mat<T>& a, const Mat<T>& b) {
    detail::require_same_shape(a, b, "hadamard");
    Mat<T> c(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) c.data[i] = a.data[i] * b.data[i];
    return c;
}

template <typename T>
Mat<T> scale(const Mat<T>& a, T s) {
    Mat<T> c(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) c.data[i] = a.data[i] * s;
    return c;
}

// Replicates a 1xN row `count` times. Broadcasting is always this
// explicit op; binary ops never broadcast implicitly.
template <typename T>
Mat<T> broadcast_row(const Mat<T>& row, int count) {
    if (row.rows != 1) {
        throw ShapeError("broadcast_row: expected 1xN row, got " + row.shape_str());
    }
    if (count <= 0) throw ShapeError("broadcast_row: count must be positive");
    Mat<T> c(count, row.cols);
    for (int i = 0; i < count; ++i)
        std::copy(row.data.begin(), row.data.end(),
                  c.data.begin() + static_cast<std::size_t>(i) * row.cols);
    return c;
}

// Column-wise sums, the adjoint of broadcast_row.
template <typename T>
Mat<T> sum_rows(const Mat<T>& a) {
    Mat<T> s(1, a.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) s(0, j) += a(i, j);
    return s;
}

// max(x, slope*x). Subgradient at 0 is taken as 1 (positive branch).
template <typename T>
Mat<T> leaky_relu(const Mat<T>& a, T slope) {
    Mat<T> c(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const T x = a.data[i];
        c.data[i] = x >= T(0) ? x : slope * x;
    }
    return c;
}

// Sum of squared negative parts: sum_ij max(0, -a_ij)^2.
template <typename T>
T neg_part_sq_norm(const Mat<T>& a) {
    T s = T(0);
    for (T x : a.data) {
        if (x < T(0)) s += x * x;
    }
    return s;
}

template <typename T>
T max_abs(const Mat<T>& a) {
    T m = T(0);
    for (T x : a.data) m = std::max(m, std::abs(x));
    return m;
}

template <typename T>
T max_abs_diff(const Mat<T>& a, const Mat<T>& b) {
    detail::require_same_shape(a, b, "max_abs_diff");
    T m = T(0);
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

template <typename T>
bool all_finite(const Mat<T>& a) {
    for (T x : a.data)
        if (!std::isfinite(x)) return false;
    return true;
}

template <typename T>
void abs_inplace(Mat<T>& a) {
    for (T& x : a.data) x = std::abs(x);
}

template <typename To, typename From>
Mat<To> convert(const Mat<From>& a) {
    Mat<To> c(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) c.data[i] = static_cast<To>(a.data[i]);
    return c;
}

}  // namespace lrea
