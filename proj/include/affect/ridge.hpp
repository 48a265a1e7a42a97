#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "affect/matrix.hpp"

namespace affect {

// Closed-form regularized least squares on centered data, the stand-in
// behind the valence-arousal regressor contract.
struct RidgeParams {
    Mat weights;  // outputs x features
    Vec bias;     // outputs
    double lambda = 0.0;

    int input_dim() const { return weights.cols; }
    int output_dim() const { return weights.rows; }
};

namespace detail {

// Cholesky solve of the SPD system A x = b (A is modified in place to hold L).
inline void cholesky_factor(Mat& a, double lambda) {
    const int n = a.rows;
    double max_diag = 0.0;
    for (int i = 0; i < n; ++i) {
        max_diag = std::max(max_diag, std::abs(a(i, i)));
    }
    const double tol = 1e-12 * std::max(max_diag, 1.0);
    for (int j = 0; j < n; ++j) {
        double d = a(j, j);
        for (int k = 0; k < j; ++k) {
            d -= a(j, k) * a(j, k);
        }
        if (d <= tol) {
            if (lambda == 0.0) {
                throw std::runtime_error(
                    "ridge_fit: singular normal equations; use lambda > 0");
            }
            throw std::runtime_error("ridge_fit: system not positive definite");
        }
        a(j, j) = std::sqrt(d);
        for (int i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (int k = 0; k < j; ++k) {
                s -= a(i, k) * a(j, k);
            }
            a(i, j) = s / a(j, j);
        }
    }
}

inline void cholesky_solve(const Mat& l, Vec& b) {
    const int n = l.rows;
    for (int i = 0; i < n; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k) {
            s -= l(i, k) * b[k];
        }
        b[i] = s / l(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int k = i + 1; k < n; ++k) {
            s -= l(k, i) * b[k];
        }
        b[i] = s / l(i, i);
    }
}

}  // namespace detail

inline RidgeParams ridge_fit(const Mat& x, const Mat& y, double lambda) {
    if (x.rows < 1 || x.rows != y.rows) {
        throw std::invalid_argument("ridge_fit: need matching non-empty X and Y");
    }
    if (lambda < 0.0) {
        throw std::invalid_argument("ridge_fit: lambda must be >= 0");
    }
    const int f = x.cols;
    const int outputs = y.cols;
    Vec x_mean(f, 0.0);
    Vec y_mean(outputs, 0.0);
    for (int r = 0; r < x.rows; ++r) {
        for (int c = 0; c < f; ++c) {
            x_mean[c] += x(r, c);
        }
        for (int c = 0; c < outputs; ++c) {
            y_mean[c] += y(r, c);
        }
    }
    for (double& v : x_mean) {
        v /= x.rows;
    }
    for (double& v : y_mean) {
        v /= x.rows;
    }
    // gram = Xc^T Xc + lambda I, rhs = Xc^T Yc
    Mat gram(f, f);
    Mat rhs(outputs, f);
    Vec xc(f);
    for (int r = 0; r < x.rows; ++r) {
        for (int c = 0; c < f; ++c) {
            xc[c] = x(r, c) - x_mean[c];
        }
        for (int i = 0; i < f; ++i) {
            if (xc[i] == 0.0) {
                continue;
            }
            for (int j = i; j < f; ++j) {
                gram(i, j) += xc[i] * xc[j];
            }
        }
        for (int o = 0; o < outputs; ++o) {
            const double yc = y(r, o) - y_mean[o];
            if (yc == 0.0) {
                continue;
            }
            double* row = rhs.row(o);
            for (int c = 0; c < f; ++c) {
                row[c] += yc * xc[c];
            }
        }
    }
    for (int i = 0; i < f; ++i) {
        for (int j = 0; j < i; ++j) {
            gram(i, j) = gram(j, i);
        }
        gram(i, i) += lambda;
    }
    detail::cholesky_factor(gram, lambda);
    RidgeParams params;
    params.lambda = lambda;
    params.weights = Mat(outputs, f);
    params.bias.assign(outputs, 0.0);
    Vec col(f);
    for (int o = 0; o < outputs; ++o) {
        std::copy(rhs.row(o), rhs.row(o) + f, col.begin());
        detail::cholesky_solve(gram, col);
        std::copy(col.begin(), col.end(), params.weights.row(o));
        double dot_mean = 0.0;
        for (int c = 0; c < f; ++c) {
            dot_mean += col[c] * x_mean[c];
        }
        params.bias[o] = y_mean[o] - dot_mean;
    }
    return params;
}

inline Mat ridge_predict(const RidgeParams& params, const Mat& x) {
    if (x.cols != params.input_dim()) {
        throw std::invalid_argument("ridge_predict: input has dimension " +
                                    std::to_string(x.cols) + ", model expects " +
                                    std::to_string(params.input_dim()));
    }
    Mat out(x.rows, params.output_dim());
    for (int r = 0; r < x.rows; ++r) {
        for (int o = 0; o < params.output_dim(); ++o) {
            out(r, o) = params.bias[o] + dot(params.weights.row(o), x.row(r), x.cols);
        }
    }
    return out;
}

}  // namespace affect
