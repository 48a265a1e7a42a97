#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "affect/matrix.hpp"

namespace affect {

struct PcaModel {
    Vec mean;                 // D
    Mat components;           // K x D, rows orthonormal
    Vec explained_variance;   // K, non-increasing (sample covariance eigenvalues)

    int dim() const { return static_cast<int>(mean.size()); }
    int num_components() const { return components.rows; }
};

namespace detail {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenpairs are
// returned sorted by eigenvalue, descending; eigenvectors are the rows of
// `vectors`.
inline void jacobi_eigen_sym(Mat a, Vec& values, Mat& vectors) {
    const int n = a.rows;
    if (n != a.cols) {
        throw std::invalid_argument("jacobi_eigen_sym: matrix must be square");
    }
    vectors = Mat(n, n);
    for (int i = 0; i < n; ++i) {
        vectors(i, i) = 1.0;
    }
    double scale = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            scale = std::max(scale, std::abs(a(i, j)));
        }
    }
    if (scale == 0.0) {
        values.assign(n, 0.0);
        return;
    }
    const double tol = 1e-15 * scale;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                off += a(p, q) * a(p, q);
            }
        }
        if (std::sqrt(2.0 * off) <= tol * n) {
            break;
        }
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= tol / n) {
                    continue;
                }
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vpk = vectors(p, k);
                    const double vqk = vectors(q, k);
                    vectors(p, k) = c * vpk - s * vqk;
                    vectors(q, k) = s * vpk + c * vqk;
                }
            }
        }
    }
    values.resize(n);
    for (int i = 0; i < n; ++i) {
        values[i] = a(i, i);
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return values[x] > values[y]; });
    Vec sorted_values(n);
    Mat sorted_vectors(n, n);
    for (int i = 0; i < n; ++i) {
        sorted_values[i] = values[order[i]];
        for (int k = 0; k < n; ++k) {
            sorted_vectors(i, k) = vectors(order[i], k);
        }
    }
    values = std::move(sorted_values);
    vectors = std::move(sorted_vectors);
}

// Largest-magnitude entry of each row made positive (first occurrence wins ties).
inline void fix_component_signs(Mat& components) {
    for (int r = 0; r < components.rows; ++r) {
        double best = 0.0;
        int best_c = 0;
        for (int c = 0; c < components.cols; ++c) {
            if (std::abs(components(r, c)) > std::abs(best)) {
                best = components(r, c);
                best_c = c;
            }
        }
        (void)best_c;
        if (best < 0.0) {
            for (int c = 0; c < components.cols; ++c) {
                components(r, c) = -components(r, c);
            }
        }
    }
}

}  // namespace detail

// Fit PCA on a seeded uniform row subsample. Components are the leading
// eigenvectors of the sample covariance (divide by m-1) of the mean-centered
// subsample; the eigenproblem is solved in whichever of the covariance (DxD)
// or Gram (mxm) space is smaller.
inline PcaModel pca_fit(const Mat& samples, int k, double sample_fraction, std::uint64_t seed) {
    if (samples.rows < 1 || samples.cols < 1) {
        throw std::invalid_argument("pca_fit: empty sample matrix");
    }
    if (!(sample_fraction > 0.0) || sample_fraction > 1.0) {
        throw std::invalid_argument("pca_fit: sample_fraction must be in (0, 1]");
    }
    const int total = samples.rows;
    const int d = samples.cols;
    int count = static_cast<int>(std::llround(sample_fraction * total));
    count = std::clamp(count, 1, total);
    if (count < 2) {
        throw std::invalid_argument("pca_fit: subsample has " + std::to_string(count) +
                                    " rows; need at least 2");
    }
    const int max_k = std::min(count - 1, d);
    if (k < 1 || k > max_k) {
        throw std::invalid_argument("pca_fit: k=" + std::to_string(k) +
                                    " not achievable; maximum is min(sampled rows - 1, dim) = " +
                                    std::to_string(max_k));
    }

    std::vector<int> indices(total);
    std::iota(indices.begin(), indices.end(), 0);
    std::vector<int> picked;
    picked.reserve(count);
    auto rng = make_rng(seed);
    std::sample(indices.begin(), indices.end(), std::back_inserter(picked), count, rng);

    PcaModel model;
    model.mean.assign(d, 0.0);
    for (int idx : picked) {
        const double* row = samples.row(idx);
        for (int c = 0; c < d; ++c) {
            model.mean[c] += row[c];
        }
    }
    for (double& m : model.mean) {
        m /= count;
    }
    Mat centered(count, d);
    for (int r = 0; r < count; ++r) {
        const double* src = samples.row(picked[r]);
        double* dst = centered.row(r);
        for (int c = 0; c < d; ++c) {
            dst[c] = src[c] - model.mean[c];
        }
    }

    const double denom = static_cast<double>(count - 1);
    Vec values;
    Mat vectors;
    model.components = Mat(k, d);
    model.explained_variance.assign(k, 0.0);
    if (d <= count) {
        Mat cov(d, d);
        for (int i = 0; i < d; ++i) {
            for (int j = i; j < d; ++j) {
                double s = 0.0;
                for (int r = 0; r < count; ++r) {
                    s += centered(r, i) * centered(r, j);
                }
                cov(i, j) = s / denom;
                cov(j, i) = cov(i, j);
            }
        }
        detail::jacobi_eigen_sym(std::move(cov), values, vectors);
        for (int i = 0; i < k; ++i) {
            model.explained_variance[i] = std::max(0.0, values[i]);
            for (int c = 0; c < d; ++c) {
                model.components(i, c) = vectors(i, c);
            }
        }
    } else {
        Mat gram(count, count);
        for (int i = 0; i < count; ++i) {
            for (int j = i; j < count; ++j) {
                gram(i, j) = dot(centered.row(i), centered.row(j), d);
                gram(j, i) = gram(i, j);
            }
        }
        detail::jacobi_eigen_sym(std::move(gram), values, vectors);
        for (int i = 0; i < k; ++i) {
            const double mu = std::max(0.0, values[i]);  // squared singular value
            if (mu <= 1e-12 * std::max(1.0, values[0])) {
                throw std::invalid_argument(
                    "pca_fit: k=" + std::to_string(k) +
                    " exceeds the numerical rank of the subsample; maximum is " +
                    std::to_string(i));
            }
            model.explained_variance[i] = mu / denom;
            const double inv_sigma = 1.0 / std::sqrt(mu);
            double* comp = model.components.row(i);
            for (int r = 0; r < count; ++r) {
                const double w = vectors(i, r) * inv_sigma;
                if (w == 0.0) {
                    continue;
                }
                const double* src = centered.row(r);
                for (int c = 0; c < d; ++c) {
                    comp[c] += w * src[c];
                }
            }
        }
    }
    detail::fix_component_signs(model.components);
    return model;
}

// Project rows onto the components: (x - mean) * components^T.
inline Mat pca_transform(const PcaModel& model, const Mat& rows) {
    if (rows.cols != model.dim()) {
        throw std::invalid_argument("pca_transform: rows have dimension " +
                                    std::to_string(rows.cols) + ", model expects " +
                                    std::to_string(model.dim()));
    }
    const int k = model.num_components();
    Mat out(rows.rows, k);
    Vec centered(model.dim());
    for (int r = 0; r < rows.rows; ++r) {
        const double* src = rows.row(r);
        for (int c = 0; c < model.dim(); ++c) {
            centered[c] = src[c] - model.mean[c];
        }
        for (int i = 0; i < k; ++i) {
            out(r, i) = dot(model.components.row(i), centered.data(), model.dim());
        }
    }
    return out;
}

inline Mat pca_inverse_transform(const PcaModel& model, const Mat& projected) {
    if (projected.cols != model.num_components()) {
        throw std::invalid_argument("pca_inverse_transform: dimension mismatch");
    }
    const int d = model.dim();
    Mat out(projected.rows, d);
    for (int r = 0; r < projected.rows; ++r) {
        double* dst = out.row(r);
        for (int c = 0; c < d; ++c) {
            dst[c] = model.mean[c];
        }
        for (int i = 0; i < projected.cols; ++i) {
            const double z = projected(r, i);
            if (z == 0.0) {
                continue;
            }
            const double* comp = model.components.row(i);
            for (int c = 0; c < d; ++c) {
                dst[c] += z * comp[c];
            }
        }
    }
    return out;
}

// CSV layout: first row = mean, then one row per component, last row =
// explained variances.
inline void save_pca_csv(const std::string& path, const PcaModel& model) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error(path + ": cannot open for writing");
    }
    char buf[32];
    auto write_row = [&](const double* row, int n) {
        for (int i = 0; i < n; ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[i]);
            out << (i ? "," : "") << buf;
        }
        out << "\n";
    };
    write_row(model.mean.data(), model.dim());
    for (int r = 0; r < model.components.rows; ++r) {
        write_row(model.components.row(r), model.components.cols);
    }
    write_row(model.explained_variance.data(),
              static_cast<int>(model.explained_variance.size()));
    if (!out) {
        throw std::runtime_error(path + ": write failed");
    }
}

inline PcaModel load_pca_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(path + ": cannot open");
    }
    std::vector<Vec> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        Vec row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            row.push_back(std::stod(cell));
        }
        rows.push_back(std::move(row));
    }
    if (rows.size() < 3) {
        throw std::runtime_error(path + ": PCA file needs mean, components and variances");
    }
    PcaModel model;
    model.mean = rows.front();
    model.explained_variance = rows.back();
    const int k = static_cast<int>(rows.size()) - 2;
    const int d = static_cast<int>(model.mean.size());
    if (static_cast<int>(model.explained_variance.size()) != k) {
        throw std::runtime_error(path + ": explained variance row has wrong length");
    }
    model.components = Mat(k, d);
    for (int r = 0; r < k; ++r) {
        if (static_cast<int>(rows[r + 1].size()) != d) {
            throw std::runtime_error(path + ": component row " + std::to_string(r) +
                                     " has wrong length");
        }
        for (int c = 0; c < d; ++c) {
            model.components(r, c) = rows[r + 1][c];
        }
    }
    return model;
}

}  // namespace affect
