#include "astrolm/tensor.hpp"

#include <cassert>
#include <cmath>

namespace astrolm {

// ikj loop order: the inner j loop runs over contiguous memory in both w and
// out, which the compiler vectorizes. Per-row accumulation order is fixed, so
// permuting input rows permutes output rows bitwise.

void matmul(const Matrix& x, const Matrix& w, Matrix& out) {
    out = Matrix(x.rows(), w.cols());
    matmul_add(x, w, out);
}

void matmul_add(const Matrix& x, const Matrix& w, Matrix& out) {
    assert(x.cols() == w.rows());
    assert(out.rows() == x.rows() && out.cols() == w.cols());
    const std::size_t m = x.rows(), k = x.cols(), n = w.cols();
    for (std::size_t i = 0; i < m; ++i) {
        const double* xi = x.data() + i * k;
        double* oi = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double a = xi[p];
            if (a == 0.0) continue;
            const double* wp = w.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                oi[j] += a * wp[j];
            }
        }
    }
}

void matmul_at_add(const Matrix& x, const Matrix& dy, Matrix& out) {
    assert(x.rows() == dy.rows());
    assert(out.rows() == x.cols() && out.cols() == dy.cols());
    const std::size_t m = x.rows(), k = x.cols(), n = dy.cols();
    for (std::size_t i = 0; i < m; ++i) {
        const double* xi = x.data() + i * k;
        const double* di = dy.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double a = xi[p];
            if (a == 0.0) continue;
            double* op = out.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                op[j] += a * di[j];
            }
        }
    }
}

void matmul_bt(const Matrix& dy, const Matrix& w, Matrix& out) {
    assert(dy.cols() == w.cols());
    out = Matrix(dy.rows(), w.rows());
    const std::size_t m = dy.rows(), n = dy.cols(), k = w.rows();
    for (std::size_t i = 0; i < m; ++i) {
        const double* di = dy.data() + i * n;
        double* oi = out.data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double* wp = w.data() + p * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                acc += di[j] * wp[j];
            }
            oi[p] = acc;
        }
    }
}

void affine(const Matrix& x, const Matrix& w, const Matrix& b, Matrix& out) {
    assert(b.rows() == 1 && b.cols() == w.cols());
    out = Matrix(x.rows(), w.cols());
    for (std::size_t i = 0; i < out.rows(); ++i) {
        double* oi = out.data() + i * out.cols();
        for (std::size_t j = 0; j < out.cols(); ++j) oi[j] = b[j];
    }
    matmul_add(x, w, out);
}

bool all_finite(const Matrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!std::isfinite(m[i])) return false;
    }
    return true;
}

}  // namespace astrolm
