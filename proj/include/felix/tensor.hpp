// Row-major double matrix with the three matmul kernels backprop needs.

#pragma once

#include <cassert>
#include <cstddef>
#include <string>
#include <vector>

#include "felix/core.hpp"

namespace felix {

struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c, double fill = 0.0)
        : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

    double& at(int i, int j) { return v[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const {
        return v[static_cast<std::size_t>(i) * cols + j];
    }

    double* row(int i) { return v.data() + static_cast<std::size_t>(i) * cols; }
    const double* row(int i) const {
        return v.data() + static_cast<std::size_t>(i) * cols;
    }

    std::size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const {
        return rows == o.rows && cols == o.cols;
    }

    double scalar() const {
        if (rows != 1 || cols != 1) throw DataError("tensor: not a scalar");
        return v[0];
    }

    static Tensor zeros_like(const Tensor& o) { return Tensor(o.rows, o.cols); }
};

// out (+)= a * b
inline void matmul_nn(const Tensor& a, const Tensor& b, Tensor& out,
                      bool accumulate = false) {
    assert(a.cols == b.rows && out.rows == a.rows && out.cols == b.cols);
    if (!accumulate) std::fill(out.v.begin(), out.v.end(), 0.0);
    for (int i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        double* oi = out.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            const double* bk = b.row(k);
            for (int j = 0; j < b.cols; ++j) oi[j] += aik * bk[j];
        }
    }
}

// out (+)= a * b^T
inline void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out,
                      bool accumulate = false) {
    assert(a.cols == b.cols && out.rows == a.rows && out.cols == b.rows);
    if (!accumulate) std::fill(out.v.begin(), out.v.end(), 0.0);
    for (int i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        double* oi = out.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* bj = b.row(j);
            double acc = 0.0;
            for (int k = 0; k < a.cols; ++k) acc += ai[k] * bj[k];
            oi[j] += acc;
        }
    }
}

// out (+)= a^T * b
inline void matmul_tn(const Tensor& a, const Tensor& b, Tensor& out,
                      bool accumulate = false) {
    assert(a.rows == b.rows && out.rows == a.cols && out.cols == b.cols);
    if (!accumulate) std::fill(out.v.begin(), out.v.end(), 0.0);
    for (int i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        const double* bi = b.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            double* ok = out.row(k);
            for (int j = 0; j < b.cols; ++j) ok[j] += aik * bi[j];
        }
    }
}

}  // namespace felix
