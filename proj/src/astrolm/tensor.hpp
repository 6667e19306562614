#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace astrolm {

// Dense row-major matrix of doubles. All model math runs in 64-bit so that
// finite-difference gradient checks hold at tight tolerances.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(0.0); }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// out = x * w           (m x k) * (k x n) -> (m x n)
void matmul(const Matrix& x, const Matrix& w, Matrix& out);
// out += x * w
void matmul_add(const Matrix& x, const Matrix& w, Matrix& out);
// out += x^T * dy       (m x k)^T * (m x n) -> (k x n); the weight-gradient shape
void matmul_at_add(const Matrix& x, const Matrix& dy, Matrix& out);
// out = dy * w^T        (m x n) * (k x n)^T -> (m x k); the input-gradient shape
void matmul_bt(const Matrix& dy, const Matrix& w, Matrix& out);

// y = x * w + b with b broadcast across rows (b is 1 x n).
void affine(const Matrix& x, const Matrix& w, const Matrix& b, Matrix& out);

bool all_finite(const Matrix& m);

}  // namespace astrolm
