#pragma once

// Dense row-major matrices and reduced row echelon form over any ordered
// field (double, or boost::multiprecision::cpp_rational for the exact path).

#include <cstddef>
#include <utility>
#include <vector>

namespace sfcmc {

template <class T>
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, const T& fill = T(0))
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    void swap_rows(std::size_t a, std::size_t b) {
        if (a == b) return;
        for (std::size_t c = 0; c < cols_; ++c) std::swap((*this)(a, c), (*this)(b, c));
    }

    const std::vector<T>& data() const noexcept { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

template <class T>
T abs_value(const T& x) {
    return x < T(0) ? T(-x) : x;
}

// Gauss-Jordan elimination with partial pivoting, restricted to the first
// `pivot_cols` columns (the remaining columns, e.g. an augmented right-hand
// side, are carried along). Entries with magnitude <= `tolerance` count as
// zero; leftover coefficient entries that small are flushed. Returns the pivot columns in row order.
template <class T>
std::vector<std::size_t> rref_in_place(DenseMatrix<T>& a, std::size_t pivot_cols, const T& tolerance) {
    std::vector<std::size_t> pivots;
    std::size_t row = 0;
    for (std::size_t col = 0; col < pivot_cols && row < a.rows(); ++col) {
        std::size_t best = row;
        T best_abs = abs_value(a(row, col));
        for (std::size_t r = row + 1; r < a.rows(); ++r) {
            T v = abs_value(a(r, col));
            if (best_abs < v) {
                best = r;
                best_abs = v;
            }
        }
        if (!(tolerance < best_abs)) {
            for (std::size_t r = row; r < a.rows(); ++r) a(r, col) = T(0);
            continue;
        }
        a.swap_rows(row, best);
        const T pivot = a(row, col);
        for (std::size_t c = col; c < a.cols(); ++c) a(row, c) /= pivot;
        a(row, col) = T(1);
        for (std::size_t r = 0; r < a.rows(); ++r) {
            if (r == row) continue;
            const T factor = a(r, col);
            if (factor == T(0)) continue;
            for (std::size_t c = col; c < a.cols(); ++c) a(r, c) -= factor * a(row, c);
            a(r, col) = T(0);
        }
        pivots.push_back(col);
        ++row;
    }
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < pivot_cols; ++c)
            if (!(tolerance < abs_value(a(r, c)))) a(r, c) = T(0);
    return pivots;
}

}  // namespace sfcmc
