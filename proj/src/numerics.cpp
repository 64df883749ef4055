#include "ntrojan/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ntrojan/errors.hpp"

namespace ntrojan {

Matrix::Matrix(std::size_t rows, std::size_t cols, float fill)
    : rows_(rows), cols_(cols), cells_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> cells)
    : rows_(rows), cols_(cols), cells_(std::move(cells)) {
    if (cells_.size() != rows_ * cols_) {
        throw DimensionError("matrix of " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                             " given " + std::to_string(cells_.size()) + " cells");
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0f;
    return m;
}

bool Matrix::all_finite() const noexcept { return ntrojan::all_finite(cells_); }

bool all_finite(std::span<const float> v) noexcept {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

Vector row_vec_mat_mul(std::span<const float> v, const Matrix& w) {
    if (v.size() != w.rows()) {
        throw DimensionError("vector of length " + std::to_string(v.size()) +
                             " cannot multiply a matrix with " + std::to_string(w.rows()) + " rows");
    }
    Vector out(w.cols(), 0.0f);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const float vi = v[i];
        const auto row = w.row(i);
        for (std::size_t k = 0; k < out.size(); ++k) {
            out[k] += vi * row[k];
        }
    }
    return out;
}

std::size_t argmax(std::span<const float> v) {
    if (v.empty()) throw DimensionError("argmax of an empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

bool unique_max(std::span<const float> v) {
    const float top = v[argmax(v)];
    return std::count(v.begin(), v.end(), top) == 1;
}

Vector softmax(std::span<const float> v) {
    if (v.empty()) return {};
    const float top = v[argmax(v)];
    Vector out(v.size());
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - top);
        total += out[i];
    }
    for (auto& x : out) x = static_cast<float>(x / total);
    return out;
}

Vector relu(std::span<const float> v) {
    Vector out(v.begin(), v.end());
    for (auto& x : out) x = std::max(0.0f, x);
    return out;
}

}  // namespace ntrojan
