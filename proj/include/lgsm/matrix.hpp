#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <new>
#include <vector>

#include "lgsm/error.hpp"
#include "lgsm/rng.hpp"

namespace lgsm {

// Dense row-major double matrix. Vectors are 1×n matrices.
// 64-byte-aligned buffers so vectorized loops see the same alignment for
// every allocation; keeps results bit-reproducible run to run.
template <class T, std::size_t kAlign = 64>
struct AlignedAlloc {
    using value_type = T;
    template <class U>
    struct rebind {
        using other = AlignedAlloc<U, kAlign>;
    };
    AlignedAlloc() = default;
    template <class U>
    AlignedAlloc(const AlignedAlloc<U, kAlign>&) {}
    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(kAlign)));
    }
    void deallocate(T* p, std::size_t n) {
        ::operator delete(p, n * sizeof(T), std::align_val_t(kAlign));
    }
    friend bool operator==(const AlignedAlloc&, const AlignedAlloc&) { return true; }
};

using DVec = std::vector<double, AlignedAlloc<double>>;

inline bool operator==(const DVec& a, const std::vector<double>& b) {
    return std::equal(a.begin(), a.end(), b.begin(), b.end());
}

struct Matrix {
    int rows = 0;
    int cols = 0;
    DVec data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}
    Matrix(int r, int c, std::initializer_list<double> v) : rows(r), cols(c), data(v) {
        if (data.size() != static_cast<size_t>(r) * c) throw ShapeError("matrix literal size");
    }

    double& operator()(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }
    double* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }
    size_t size() const { return data.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    void zero() { std::fill(data.begin(), data.end(), 0.0); }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix filled(int r, int c, double v) {
        Matrix m(r, c);
        std::fill(m.data.begin(), m.data.end(), v);
        return m;
    }
};

inline void check_shape(bool ok, const std::string& what) {
    if (!ok) throw ShapeError("shape mismatch: " + what);
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

// c = a·b (or c += with accumulate). ikj order so the inner loop streams rows.
inline void matmul_into(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false) {
    check_shape(a.cols == b.rows, "matmul inner");
    check_shape(c.rows == a.rows && c.cols == b.cols, "matmul out");
    if (!accumulate) c.zero();
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (int k = 0; k < a.cols; ++k) {
            double av = ar[k];
            if (av == 0.0) continue;
            const double* br = b.row(k);
            for (int j = 0; j < b.cols; ++j) cr[j] += av * br[j];
        }
    }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows, b.cols);
    matmul_into(a, b, c);
    return c;
}

// c = a·bᵀ with b given row-major (n×k): c[i][j] = <a.row(i), b.row(j)>.
inline void matmul_nt_into(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false) {
    check_shape(a.cols == b.cols, "matmul_nt inner");
    check_shape(c.rows == a.rows && c.cols == b.rows, "matmul_nt out");
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* br = b.row(j);
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += ar[k] * br[k];
            cr[j] = accumulate ? cr[j] + s : s;
        }
    }
}

// c = aᵀ·b: c[k][j] = Σ_i a[i][k]·b[i][j].
inline void matmul_tn_into(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false) {
    check_shape(a.rows == b.rows, "matmul_tn inner");
    check_shape(c.rows == a.cols && c.cols == b.cols, "matmul_tn out");
    if (!accumulate) c.zero();
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        const double* br = b.row(i);
        for (int k = 0; k < a.cols; ++k) {
            double av = ar[k];
            if (av == 0.0) continue;
            double* cr = c.row(k);
            for (int j = 0; j < b.cols; ++j) cr[j] += av * br[j];
        }
    }
}

inline void add_into(Matrix& a, const Matrix& b, double scale = 1.0) {
    check_shape(a.same_shape(b), "add");
    for (size_t i = 0; i < a.size(); ++i) a.data[i] += scale * b.data[i];
}

inline Matrix add(const Matrix& a, const Matrix& b) {
    Matrix c = a;
    add_into(c, b);
    return c;
}

inline Matrix sub(const Matrix& a, const Matrix& b) {
    Matrix c = a;
    add_into(c, b, -1.0);
    return c;
}

inline void scale_into(Matrix& a, double s) {
    for (double& v : a.data) v *= s;
}

inline void hadamard_into(Matrix& a, const Matrix& b) {
    check_shape(a.same_shape(b), "hadamard");
    for (size_t i = 0; i < a.size(); ++i) a.data[i] *= b.data[i];
}

inline double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.data) m = std::max(m, std::abs(v));
    return m;
}

inline double sqnorm(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return s;
}

inline double frobenius_norm(const Matrix& a) { return std::sqrt(sqnorm(a)); }

inline bool all_finite(const Matrix& a) {
    for (double v : a.data)
        if (!std::isfinite(v)) return false;
    return true;
}

inline void fill_uniform(Matrix& a, Rng& rng, double scale) {
    for (double& v : a.data) v = rng.uniform_scaled(scale);
}

}  // namespace lgsm
