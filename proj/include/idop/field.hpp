#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <vector>

#include "idop/errors.hpp"

namespace idop {

/// The two-element field.
struct Z2 {
    std::uint8_t v = 0;

    Z2() = default;
    Z2(int x) : v(static_cast<std::uint8_t>(x & 1)) {}

    friend Z2 operator+(Z2 a, Z2 b) { return Z2(a.v ^ b.v); }
    friend Z2 operator-(Z2 a, Z2 b) { return Z2(a.v ^ b.v); }
    friend Z2 operator*(Z2 a, Z2 b) { return Z2(a.v & b.v); }
    friend Z2 operator/(Z2 a, Z2 b) {
        if (!b.v) throw NumericError("division by zero in Z/2");
        return a;
    }
    Z2 operator-() const { return *this; }
    Z2& operator+=(Z2 o) { v ^= o.v; return *this; }
    Z2& operator-=(Z2 o) { v ^= o.v; return *this; }
    Z2& operator*=(Z2 o) { v &= o.v; return *this; }
    friend bool operator==(Z2 a, Z2 b) { return a.v == b.v; }
    friend bool operator!=(Z2 a, Z2 b) { return a.v != b.v; }
};

/// Exact rationals for sign-sensitive homology; arbitrary precision so
/// elimination cannot overflow.
using Rational = boost::multiprecision::cpp_rational;

template <class F>
inline bool is_zero(const F& x) { return x == F(0); }

/// Dense matrix over an exact field with just enough linear algebra for
/// chain-complex ranks: row-reduction, rank, and nullspace bases. No
/// pivoting heuristics are needed because arithmetic is exact.
template <class F>
class FieldMatrix {
public:
    FieldMatrix() = default;
    FieldMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, F(0)) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    F& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const F& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    /// this * other
    FieldMatrix multiply(const FieldMatrix& other) const {
        if (cols_ != other.rows_) throw ValidationError("field matrix shape mismatch");
        FieldMatrix out(rows_, other.cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = 0; k < cols_; ++k) {
                const F& a = (*this)(i, k);
                if (is_zero(a)) continue;
                for (std::size_t j = 0; j < other.cols_; ++j) {
                    const F& b = other(k, j);
                    if (!is_zero(b)) out(i, j) += a * b;
                }
            }
        return out;
    }

    /// Columns of `extra` appended on the right.
    FieldMatrix augment(const FieldMatrix& extra) const {
        if (rows_ != extra.rows_) throw ValidationError("field matrix row mismatch");
        FieldMatrix out(rows_, cols_ + extra.cols_);
        for (std::size_t i = 0; i < rows_; ++i) {
            for (std::size_t j = 0; j < cols_; ++j) out(i, j) = (*this)(i, j);
            for (std::size_t j = 0; j < extra.cols_; ++j) out(i, cols_ + j) = extra(i, j);
        }
        return out;
    }

    bool is_zero_matrix() const {
        for (const F& x : data_)
            if (!is_zero(x)) return false;
        return true;
    }

    std::size_t rank() const {
        FieldMatrix copy = *this;
        return copy.reduce();
    }

    /// Basis of the right nullspace, one kernel vector per column.
    FieldMatrix nullspace() const {
        FieldMatrix rref = *this;
        const std::size_t r = rref.reduce();
        // pivot column per reduced row
        std::vector<std::size_t> pivot_col(r);
        std::vector<bool> is_pivot(cols_, false);
        for (std::size_t i = 0; i < r; ++i) {
            std::size_t c = 0;
            while (c < cols_ && is_zero(rref(i, c))) ++c;
            pivot_col[i] = c;
            is_pivot[c] = true;
        }
        const std::size_t free_count = cols_ - r;
        FieldMatrix basis(cols_, free_count);
        std::size_t out_col = 0;
        for (std::size_t c = 0; c < cols_; ++c) {
            if (is_pivot[c]) continue;
            basis(c, out_col) = F(1);
            for (std::size_t i = 0; i < r; ++i)
                basis(pivot_col[i], out_col) = -rref(i, c);
            ++out_col;
        }
        return basis;
    }

private:
    /// In-place reduction to reduced row echelon form; returns the rank.
    std::size_t reduce() {
        std::size_t pivot_row = 0;
        for (std::size_t col = 0; col < cols_ && pivot_row < rows_; ++col) {
            std::size_t sel = pivot_row;
            while (sel < rows_ && is_zero((*this)(sel, col))) ++sel;
            if (sel == rows_) continue;
            if (sel != pivot_row)
                for (std::size_t j = 0; j < cols_; ++j)
                    std::swap((*this)(sel, j), (*this)(pivot_row, j));
            const F inv = F(1) / (*this)(pivot_row, col);
            for (std::size_t j = col; j < cols_; ++j) (*this)(pivot_row, j) *= inv;
            for (std::size_t i = 0; i < rows_; ++i) {
                if (i == pivot_row) continue;
                const F factor = (*this)(i, col);
                if (is_zero(factor)) continue;
                for (std::size_t j = col; j < cols_; ++j)
                    (*this)(i, j) -= factor * (*this)(pivot_row, j);
            }
            ++pivot_row;
        }
        return pivot_row;
    }

    std::size_t rows_ = 0, cols_ = 0;
    std::vector<F> data_;
};

}  // namespace idop
