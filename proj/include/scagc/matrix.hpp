#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "scagc/common.hpp"

namespace scagc {

/// Dense row-major matrix of doubles. Deliberately minimal: the project
/// works at desk scale, so plain loops over contiguous storage are enough.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

    double& operator()(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

    double* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    size_t size() const { return data.size(); }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void require_shape(const Matrix& m, int r, int c, const char* what) {
    if (m.rows != r || m.cols != c)
        throw ContractViolation(std::string(what) + ": expected " + std::to_string(r) + "x" +
                                std::to_string(c) + ", got " + std::to_string(m.rows) + "x" +
                                std::to_string(m.cols));
}

// ---------------------------------------------------------------------------
// Dense kernels. C is overwritten unless `acc` is set, in which case the
// product is accumulated into C (used by reverse-mode gradient passes).
// ---------------------------------------------------------------------------

/// C = A * B  (ikj order keeps the inner loop contiguous in B and C).
inline void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool acc = false) {
    if (a.cols != b.rows) throw ContractViolation("gemm_nn: inner dimensions differ");
    if (!acc) c = Matrix(a.rows, b.cols);
    else if (c.rows != a.rows || c.cols != b.cols) throw ContractViolation("gemm_nn: bad accumulator shape");
    const int n = a.rows, m = a.cols, p = b.cols;
    for (int i = 0; i < n; ++i) {
        double* ci = c.row(i);
        const double* ai = a.row(i);
        for (int k = 0; k < m; ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            const double* bk = b.row(k);
            for (int j = 0; j < p; ++j) ci[j] += aik * bk[j];
        }
    }
}

/// C = A * B^T  (rows of A against rows of B; contiguous dot products).
inline void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool acc = false) {
    if (a.cols != b.cols) throw ContractViolation("gemm_nt: inner dimensions differ");
    if (!acc) c = Matrix(a.rows, b.rows);
    else if (c.rows != a.rows || c.cols != b.rows) throw ContractViolation("gemm_nt: bad accumulator shape");
    const int n = a.rows, m = a.cols, p = b.rows;
    for (int i = 0; i < n; ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (int j = 0; j < p; ++j) {
            const double* bj = b.row(j);
            double s = 0.0;
            for (int k = 0; k < m; ++k) s += ai[k] * bj[k];
            ci[j] += s;
        }
    }
}

/// C = A^T * B  (i outermost so both B and C are walked row-contiguously).
inline void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool acc = false) {
    if (a.rows != b.rows) throw ContractViolation("gemm_tn: inner dimensions differ");
    if (!acc) c = Matrix(a.cols, b.cols);
    else if (c.rows != a.cols || c.cols != b.cols) throw ContractViolation("gemm_tn: bad accumulator shape");
    const int n = a.rows, m = a.cols, p = b.cols;
    for (int i = 0; i < n; ++i) {
        const double* ai = a.row(i);
        const double* bi = b.row(i);
        for (int k = 0; k < m; ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            double* ck = c.row(k);
            for (int j = 0; j < p; ++j) ck[j] += aik * bi[j];
        }
    }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix c;
    gemm_nn(a, b, c);
    return c;
}

inline Matrix transposed(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

// ---------------------------------------------------------------------------
// Sparse matrix (CSR). Used for the symmetric propagation operators; all
// sparse matrices flowing through training are symmetric by construction.
// ---------------------------------------------------------------------------

struct CsrMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<int> row_ptr;   // size rows + 1
    std::vector<int> col_idx;   // size nnz, ascending within each row
    std::vector<double> values; // size nnz

    int nnz() const { return static_cast<int>(col_idx.size()); }

    Matrix to_dense() const {
        Matrix d(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) d(i, col_idx[p]) = values[p];
        return d;
    }
};

/// Y += S * X for CSR S and dense X.
inline void spmm_acc(const CsrMatrix& s, const Matrix& x, Matrix& y) {
    if (s.cols != x.rows) throw ContractViolation("spmm: inner dimensions differ");
    if (y.rows != s.rows || y.cols != x.cols) throw ContractViolation("spmm: bad output shape");
    const int c = x.cols;
    for (int i = 0; i < s.rows; ++i) {
        double* yi = y.row(i);
        for (int p = s.row_ptr[i]; p < s.row_ptr[i + 1]; ++p) {
            const double v = s.values[p];
            const double* xr = x.row(s.col_idx[p]);
            for (int j = 0; j < c; ++j) yi[j] += v * xr[j];
        }
    }
}

/// Y = S * X.
inline Matrix spmm(const CsrMatrix& s, const Matrix& x) {
    Matrix y(s.rows, x.cols);
    spmm_acc(s, x, y);
    return y;
}

}  // namespace scagc
