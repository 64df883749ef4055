#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ntrojan {

using Vector = std::vector<float>;

/// Dense row-major float32 matrix. Row index = input, column index = output.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f);
    Matrix(std::size_t rows, std::size_t cols, std::vector<float> cells);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    float operator()(std::size_t r, std::size_t c) const { return cells_[r * cols_ + c]; }
    float& operator()(std::size_t r, std::size_t c) { return cells_[r * cols_ + c]; }

    std::span<const float> cells() const noexcept { return cells_; }
    std::span<float> cells() noexcept { return cells_; }
    std::span<const float> row(std::size_t r) const {
        return std::span<const float>(cells_).subspan(r * cols_, cols_);
    }

    bool all_finite() const noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> cells_;
};

/// out[k] = sum_i v[i] * W(i, k), accumulated in float for i = 0..n-1 in order.
/// The fixed order makes identity products exact copies of `v`.
Vector row_vec_mat_mul(std::span<const float> v, const Matrix& w);

/// Index of the largest component; ties go to the lowest index.
std::size_t argmax(std::span<const float> v);

/// True when the maximum component occurs exactly once.
bool unique_max(std::span<const float> v);

Vector softmax(std::span<const float> v);
Vector relu(std::span<const float> v);

bool all_finite(std::span<const float> v) noexcept;

}  // namespace ntrojan
