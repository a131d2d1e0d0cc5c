#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "treechar/errors.hpp"
#include "treechar/exact.hpp"

namespace treechar {

// Dense exact rational matrix. All elimination is exact; no tolerances anywhere.
class QMat {
public:
    QMat() = default;
    QMat(std::size_t rows, std::size_t cols) : r_(rows), c_(cols), a_(rows * cols, Rat(0)) {}

    static QMat identity(std::size_t n) {
        QMat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1;
        return m;
    }

    std::size_t rows() const { return r_; }
    std::size_t cols() const { return c_; }

    Rat& at(std::size_t i, std::size_t j) { return a_[i * c_ + j]; }
    const Rat& at(std::size_t i, std::size_t j) const { return a_[i * c_ + j]; }

    QMat operator*(const QMat& o) const {
        if (c_ != o.r_) throw Error("QMat: shape mismatch in product");
        QMat out(r_, o.c_);
        for (std::size_t i = 0; i < r_; ++i)
            for (std::size_t k = 0; k < c_; ++k) {
                const Rat& x = at(i, k);
                if (x == 0) continue;
                for (std::size_t j = 0; j < o.c_; ++j) {
                    const Rat& y = o.at(k, j);
                    if (y != 0) out.at(i, j) += x * y;
                }
            }
        return out;
    }

    QMat operator+(const QMat& o) const {
        QMat out = *this;
        for (std::size_t i = 0; i < a_.size(); ++i) out.a_[i] += o.a_[i];
        return out;
    }

    QMat operator-(const QMat& o) const {
        QMat out = *this;
        for (std::size_t i = 0; i < a_.size(); ++i) out.a_[i] -= o.a_[i];
        return out;
    }

    QMat scaled(const Rat& s) const {
        QMat out = *this;
        for (auto& x : out.a_) x *= s;
        return out;
    }

    std::vector<Rat> apply(const std::vector<Rat>& v) const {
        if (v.size() != c_) throw Error("QMat: apply shape mismatch");
        std::vector<Rat> out(r_, Rat(0));
        for (std::size_t i = 0; i < r_; ++i)
            for (std::size_t j = 0; j < c_; ++j)
                if (at(i, j) != 0 && v[j] != 0) out[i] += at(i, j) * v[j];
        return out;
    }

    QMat transpose() const {
        QMat out(c_, r_);
        for (std::size_t i = 0; i < r_; ++i)
            for (std::size_t j = 0; j < c_; ++j) out.at(j, i) = at(i, j);
        return out;
    }

    Rat trace() const {
        Rat t = 0;
        for (std::size_t i = 0; i < std::min(r_, c_); ++i) t += at(i, i);
        return t;
    }

    bool is_zero() const {
        for (const auto& x : a_)
            if (x != 0) return false;
        return true;
    }

    bool operator==(const QMat& o) const { return r_ == o.r_ && c_ == o.c_ && a_ == o.a_; }

    void set_column(std::size_t j, const std::vector<Rat>& v) {
        for (std::size_t i = 0; i < r_; ++i) at(i, j) = v[i];
    }
    std::vector<Rat> column(std::size_t j) const {
        std::vector<Rat> v(r_);
        for (std::size_t i = 0; i < r_; ++i) v[i] = at(i, j);
        return v;
    }

    static QMat from_columns(std::size_t rows, const std::vector<std::vector<Rat>>& cols) {
        QMat m(rows, cols.size());
        for (std::size_t j = 0; j < cols.size(); ++j) m.set_column(j, cols[j]);
        return m;
    }

private:
    std::size_t r_ = 0, c_ = 0;
    std::vector<Rat> a_;
};

// Row-reduce in place; returns pivot columns. Optionally carries a companion
// matrix through the same row operations (for solving / inverting).
inline std::vector<std::size_t> rref(QMat& m, QMat* companion = nullptr) {
    std::vector<std::size_t> pivots;
    std::size_t row = 0;
    for (std::size_t col = 0; col < m.cols() && row < m.rows(); ++col) {
        std::size_t sel = row;
        while (sel < m.rows() && m.at(sel, col) == 0) ++sel;
        if (sel == m.rows()) continue;
        if (sel != row) {
            for (std::size_t j = 0; j < m.cols(); ++j) std::swap(m.at(sel, j), m.at(row, j));
            if (companion)
                for (std::size_t j = 0; j < companion->cols(); ++j)
                    std::swap(companion->at(sel, j), companion->at(row, j));
        }
        Rat inv = Rat(1) / m.at(row, col);
        for (std::size_t j = col; j < m.cols(); ++j)
            if (m.at(row, j) != 0) m.at(row, j) *= inv;
        if (companion)
            for (std::size_t j = 0; j < companion->cols(); ++j)
                if (companion->at(row, j) != 0) companion->at(row, j) *= inv;
        for (std::size_t i = 0; i < m.rows(); ++i) {
            if (i == row) continue;
            const Rat f = m.at(i, col);
            if (f == 0) continue;
            for (std::size_t j = col; j < m.cols(); ++j)
                if (m.at(row, j) != 0) m.at(i, j) -= f * m.at(row, j);
            if (companion)
                for (std::size_t j = 0; j < companion->cols(); ++j)
                    if (companion->at(row, j) != 0) companion->at(i, j) -= f * companion->at(row, j);
        }
        pivots.push_back(col);
        ++row;
    }
    return pivots;
}

inline std::size_t rank(QMat m) { return rref(m).size(); }

inline QMat inverse(const QMat& m) {
    if (m.rows() != m.cols()) throw Error("inverse: not square");
    QMat a = m;
    QMat inv = QMat::identity(m.rows());
    auto piv = rref(a, &inv);
    if (piv.size() != m.rows()) throw SingularMatrix("inverse: rank deficient");
    return inv;
}

// Kernel basis (columns of the result span ker m).
inline QMat kernel_basis(QMat m) {
    std::size_t n = m.cols();
    auto piv = rref(m);
    std::vector<char> is_pivot(n, 0);
    for (auto c : piv) is_pivot[c] = 1;
    std::vector<std::size_t> free_cols;
    for (std::size_t j = 0; j < n; ++j)
        if (!is_pivot[j]) free_cols.push_back(j);
    QMat out(n, free_cols.size());
    for (std::size_t k = 0; k < free_cols.size(); ++k) {
        std::size_t f = free_cols[k];
        out.at(f, k) = 1;
        for (std::size_t r = 0; r < piv.size(); ++r) out.at(piv[r], k) = -m.at(r, f);
    }
    return out;
}

// Solve A x = b exactly; nullopt if inconsistent. (Any solution; A need not
// have full rank.)
inline std::optional<std::vector<Rat>> solve(const QMat& A, const std::vector<Rat>& b) {
    QMat m(A.rows(), A.cols() + 1);
    for (std::size_t i = 0; i < A.rows(); ++i) {
        for (std::size_t j = 0; j < A.cols(); ++j) m.at(i, j) = A.at(i, j);
        m.at(i, A.cols()) = b[i];
    }
    auto piv = rref(m);
    if (!piv.empty() && piv.back() == A.cols()) return std::nullopt;
    std::vector<Rat> x(A.cols(), Rat(0));
    for (std::size_t r = 0; r < piv.size(); ++r) x[piv[r]] = m.at(r, A.cols());
    return x;
}

// Columns of B that lie in the column space of A (true/false per column).
inline bool in_column_space(const QMat& A, const std::vector<Rat>& v) {
    return solve(A, v).has_value();
}

// Precomputed solver for repeated solves against a fixed full-column-rank A.
class Solver {
public:
    explicit Solver(const QMat& A) : A_(A), red_(A), comp_(QMat::identity(A.rows())) {
        pivots_ = rref(red_, &comp_);
    }

    std::size_t rank() const { return pivots_.size(); }

    // x with A x = b, or nullopt. When A has full column rank, x is unique.
    std::optional<std::vector<Rat>> solve(const std::vector<Rat>& b) const {
        std::vector<Rat> rb = comp_.apply(b);
        std::vector<Rat> x(A_.cols(), Rat(0));
        for (std::size_t r = 0; r < pivots_.size(); ++r) x[pivots_[r]] = rb[r];
        // consistency: rows beyond rank must vanish
        for (std::size_t r = pivots_.size(); r < A_.rows(); ++r)
            if (rb[r] != 0) return std::nullopt;
        // free-column correction is unnecessary for full column rank; otherwise
        // the particular solution with zero free part is checked below.
        if (pivots_.size() != A_.cols()) {
            auto back = A_.apply(x);
            for (std::size_t i = 0; i < back.size(); ++i)
                if (back[i] != b[i]) return std::nullopt;
        }
        return x;
    }

private:
    QMat A_;
    QMat red_;
    QMat comp_;
    std::vector<std::size_t> pivots_;
};

}  // namespace treechar
