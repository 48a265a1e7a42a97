#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace affect {

using Vec = std::vector<double>;

// Row-major dense matrix of doubles. Deliberately small: the models in this
// library only need gemv-style products and elementwise loops.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0)
        : rows(r), cols(c), a(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

    double& operator()(int r, int c) {
        return a[static_cast<std::size_t>(r) * cols + c];
    }
    double operator()(int r, int c) const {
        return a[static_cast<std::size_t>(r) * cols + c];
    }
    double* row(int r) { return a.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return a.data() + static_cast<std::size_t>(r) * cols; }

    bool empty() const { return rows == 0 || cols == 0; }
    std::size_t size() const { return a.size(); }
};

inline double dot(const double* x, const double* y, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        s += x[i] * y[i];
    }
    return s;
}

// out = m * x
inline void matvec(const Mat& m, const double* x, double* out) {
    for (int r = 0; r < m.rows; ++r) {
        out[r] = dot(m.row(r), x, m.cols);
    }
}

// out += m * x
inline void matvec_add(const Mat& m, const double* x, double* out) {
    for (int r = 0; r < m.rows; ++r) {
        out[r] += dot(m.row(r), x, m.cols);
    }
}

// out += m^T * x  (out has m.cols entries, x has m.rows entries)
inline void tmatvec_add(const Mat& m, const double* x, double* out) {
    for (int r = 0; r < m.rows; ++r) {
        const double xr = x[r];
        if (xr == 0.0) {
            continue;
        }
        const double* mr = m.row(r);
        for (int c = 0; c < m.cols; ++c) {
            out[c] += xr * mr[c];
        }
    }
}

// m += u * v^T
inline void outer_add(Mat& m, const double* u, const double* v) {
    for (int r = 0; r < m.rows; ++r) {
        const double ur = u[r];
        if (ur == 0.0) {
            continue;
        }
        double* mr = m.row(r);
        for (int c = 0; c < m.cols; ++c) {
            mr[c] += ur * v[c];
        }
    }
}

inline bool all_finite(const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x[i])) {
            return false;
        }
    }
    return true;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
    return std::mt19937_64(seed);
}

}  // namespace affect
