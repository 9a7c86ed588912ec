// matrix.hpp - minimal row-major dense matrix used across the pipeline
#pragma once

#include <cstddef>
#include <vector>

#include "flowguard/errors.hpp"

namespace flowguard {

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    bool operator==(const Matrix& o) const = default;
};

// y = M x + b, one output row per input row
inline void affine_row(const Matrix& w, const std::vector<double>& b,
                       const double* x, double* y) {
    for (std::size_t o = 0; o < w.rows; ++o) {
        double acc = b[o];
        const double* wr = w.row(o);
        for (std::size_t i = 0; i < w.cols; ++i) acc += wr[i] * x[i];
        y[o] = acc;
    }
}

inline Matrix select_columns(const Matrix& m, const std::vector<std::size_t>& idx) {
    for (std::size_t c : idx)
        if (c >= m.cols) throw DimensionMismatch("column index out of range");
    Matrix out(m.rows, idx.size());
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* src = m.row(r);
        double* dst = out.row(r);
        for (std::size_t k = 0; k < idx.size(); ++k) dst[k] = src[idx[k]];
    }
    return out;
}

inline Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), m.cols);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const double* src = m.row(idx[r]);
        double* dst = out.row(r);
        for (std::size_t c = 0; c < m.cols; ++c) dst[c] = src[c];
    }
    return out;
}

} // namespace flowguard
