#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace lensproxy::nn {

/// Dense row-major matrix.
template <typename T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T(0)) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    T operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    /// Keeps capacity; contents are unspecified afterwards.
    void resize(std::size_t rows, std::size_t cols) {
        rows_ = rows;
        cols_ = cols;
        data_.resize(rows * cols);
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

namespace detail {

template <typename T>
void gemm_panel(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
                std::size_t ldb, T* c, std::size_t ldc) {
    constexpr std::size_t MR = 4;
    constexpr std::size_t NR = 128 / sizeof(T);

    std::size_t i = 0;
    for (; i + MR <= m; i += MR) {
        std::size_t j = 0;
        for (; j + NR <= n; j += NR) {
            T acc[MR][NR];
            for (std::size_t r = 0; r < MR; ++r)
                for (std::size_t q = 0; q < NR; ++q) acc[r][q] = c[(i + r) * ldc + j + q];
            for (std::size_t p = 0; p < k; ++p) {
                const T* brow = b + p * ldb + j;
                for (std::size_t r = 0; r < MR; ++r) {
                    const T av = a[(i + r) * lda + p];
                    for (std::size_t q = 0; q < NR; ++q) acc[r][q] += av * brow[q];
                }
            }
            for (std::size_t r = 0; r < MR; ++r)
                for (std::size_t q = 0; q < NR; ++q) c[(i + r) * ldc + j + q] = acc[r][q];
        }
        for (std::size_t r = 0; r < MR && j < n; ++r) {
            T* crow = c + (i + r) * ldc;
            for (std::size_t p = 0; p < k; ++p) {
                const T av = a[(i + r) * lda + p];
                const T* brow = b + p * ldb;
                for (std::size_t q = j; q < n; ++q) crow[q] += av * brow[q];
            }
        }
    }
    for (; i < m; ++i) {
        T* crow = c + i * ldc;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = a[i * lda + p];
            const T* brow = b + p * ldb;
            for (std::size_t q = 0; q < n; ++q) crow[q] += av * brow[q];
        }
    }
}

}  // namespace detail

/// C(m x n) += A(m x k) * B(k x n); all row-major with the given leading dimensions.
/// Accumulation order depends only on the shapes, never on data or threads.
template <typename T>
void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
                     std::size_t ldb, T* c, std::size_t ldc) {
    constexpr std::size_t KC = 256;
    for (std::size_t p = 0; p < k; p += KC)
        detail::gemm_panel(m, n, std::min(KC, k - p), a + p, lda, b + p * ldb, ldb, c, ldc);
}

template <typename T>
void transpose_into(const T* src, std::size_t rows, std::size_t cols, T* dst) {
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

}  // namespace lensproxy::nn
