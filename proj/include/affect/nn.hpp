#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "affect/matrix.hpp"

namespace affect {

enum class Optimizer { sgd, adam };

struct TrainConfig {
    std::uint64_t seed = 1;
    int epochs = 30;
    int batch_size = 64;
    double learning_rate = 1e-3;
    Optimizer optimizer = Optimizer::adam;
    double clip_norm = 5.0;  // global gradient norm; <= 0 disables clipping

    void validate() const {
        if (epochs < 0 || batch_size < 1 || !(learning_rate >= 0.0)) {
            throw std::invalid_argument("train config: invalid epochs/batch size/learning rate");
        }
    }
};

inline Vec softmax(const Vec& logits) {
    Vec p(logits.size());
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (double& v : p) {
        v /= sum;
    }
    return p;
}

// Argmax with ties broken toward the lowest index.
inline int argmax_tie_low(const Vec& values) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(values.size()); ++i) {
        if (values[i] > values[best]) {
            best = i;
        }
    }
    return best;
}

struct Prediction {
    int category = 0;
    Vec probabilities;
};

inline Prediction predict_from_logits(const Vec& logits) {
    Prediction p;
    p.probabilities = softmax(logits);
    p.category = argmax_tie_low(p.probabilities);
    return p;
}

// Glorot uniform: +-sqrt(6 / (fan_in + fan_out)), fan_in = cols, fan_out = rows.
inline void glorot_init(Mat& m, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / (m.cols + m.rows));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (double& v : m.a) {
        v = u(rng);
    }
}

using ParamViews = std::vector<std::span<double>>;

inline double global_norm(const ParamViews& views) {
    double sq = 0.0;
    for (const auto& v : views) {
        for (double x : v) {
            sq += x * x;
        }
    }
    return std::sqrt(sq);
}

inline void scale_views(const ParamViews& views, double s) {
    for (const auto& v : views) {
        for (double& x : v) {
            x *= s;
        }
    }
}

inline void zero_views(const ParamViews& views) {
    for (const auto& v : views) {
        std::fill(v.begin(), v.end(), 0.0);
    }
}

inline void clip_global_norm(const ParamViews& grads, double max_norm) {
    if (max_norm <= 0.0) {
        return;
    }
    const double norm = global_norm(grads);
    if (norm > max_norm) {
        scale_views(grads, max_norm / norm);
    }
}

// Adaptive-moment state laid out parallel to the parameter views.
struct AdamState {
    std::vector<Vec> m;
    std::vector<Vec> v;
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void init(const ParamViews& params) {
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.emplace_back(p.size(), 0.0);
            v.emplace_back(p.size(), 0.0);
        }
        t = 0;
    }
};

inline void optimizer_step(const ParamViews& params, const ParamViews& grads,
                           const TrainConfig& cfg, AdamState& adam) {
    if (cfg.optimizer == Optimizer::sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            for (std::size_t j = 0; j < params[i].size(); ++j) {
                params[i][j] -= cfg.learning_rate * grads[i][j];
            }
        }
        return;
    }
    ++adam.t;
    const double bc1 = 1.0 - std::pow(adam.beta1, adam.t);
    const double bc2 = 1.0 - std::pow(adam.beta2, adam.t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        for (std::size_t j = 0; j < params[i].size(); ++j) {
            const double g = grads[i][j];
            adam.m[i][j] = adam.beta1 * adam.m[i][j] + (1.0 - adam.beta1) * g;
            adam.v[i][j] = adam.beta2 * adam.v[i][j] + (1.0 - adam.beta2) * g * g;
            const double mhat = adam.m[i][j] / bc1;
            const double vhat = adam.v[i][j] / bc2;
            params[i][j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + adam.eps);
        }
    }
}

// Deterministic epoch shuffling for mini-batch iteration.
inline std::vector<int> shuffled_indices(int n, std::mt19937_64& rng) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

}  // namespace affect
