#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "affect/metrics.hpp"
#include "affect/nn.hpp"

namespace affect {

enum class Activation { relu, identity };

// Two-layer single-frame network: hidden = act(W1 x + b1), logits = W2 h + b2.
// The hidden layer is the exported intermediate feature.
struct MlpParams {
    Mat w1;
    Vec b1;
    Mat w2;
    Vec b2;
    Activation activation = Activation::relu;

    int input_dim() const { return w1.cols; }
    int hidden_dim() const { return w1.rows; }
    int output_dim() const { return w2.rows; }

    ParamViews views() {
        return {std::span<double>(w1.a), std::span<double>(b1), std::span<double>(w2.a),
                std::span<double>(b2)};
    }
};

inline MlpParams init_mlp(int input_dim, int hidden, int outputs, std::uint64_t seed,
                          Activation activation = Activation::relu) {
    if (input_dim < 1 || hidden < 1 || outputs < 1) {
        throw std::invalid_argument("init_mlp: dimensions must be positive");
    }
    MlpParams p;
    p.w1 = Mat(hidden, input_dim);
    p.b1.assign(hidden, 0.0);
    p.w2 = Mat(outputs, hidden);
    p.b2.assign(outputs, 0.0);
    p.activation = activation;
    auto rng = make_rng(seed);
    glorot_init(p.w1, rng);
    glorot_init(p.w2, rng);
    return p;
}

struct MlpForward {
    Vec hidden_pre;
    Vec hidden;
    Vec logits;
};

inline MlpForward mlp_forward(const MlpParams& p, const double* x, int n) {
    if (n != p.input_dim()) {
        throw std::invalid_argument("mlp_forward: input has dimension " + std::to_string(n) +
                                    ", model expects " + std::to_string(p.input_dim()));
    }
    MlpForward f;
    f.hidden_pre.assign(p.hidden_dim(), 0.0);
    matvec(p.w1, x, f.hidden_pre.data());
    for (int i = 0; i < p.hidden_dim(); ++i) {
        f.hidden_pre[i] += p.b1[i];
    }
    f.hidden = f.hidden_pre;
    if (p.activation == Activation::relu) {
        for (double& v : f.hidden) {
            v = v > 0.0 ? v : 0.0;
        }
    }
    f.logits.assign(p.output_dim(), 0.0);
    matvec(p.w2, f.hidden.data(), f.logits.data());
    for (int i = 0; i < p.output_dim(); ++i) {
        f.logits[i] += p.b2[i];
    }
    return f;
}

inline MlpForward mlp_forward(const MlpParams& p, const Vec& x) {
    return mlp_forward(p, x.data(), static_cast<int>(x.size()));
}

struct MlpGrads {
    Mat w1;
    Vec b1;
    Mat w2;
    Vec b2;

    explicit MlpGrads(const MlpParams& p)
        : w1(p.w1.rows, p.w1.cols),
          b1(p.b1.size(), 0.0),
          w2(p.w2.rows, p.w2.cols),
          b2(p.b2.size(), 0.0) {}

    ParamViews views() {
        return {std::span<double>(w1.a), std::span<double>(b1), std::span<double>(w2.a),
                std::span<double>(b2)};
    }
};

// Softmax cross-entropy loss and gradients, summed over the given rows.
inline double mlp_ce_gradients(const MlpParams& p, const Mat& x, const std::vector<int>& y,
                               std::span<const int> rows, MlpGrads& grads) {
    double loss = 0.0;
    Vec dlogits(p.output_dim());
    Vec dhidden(p.hidden_dim());
    for (int idx : rows) {
        const auto f = mlp_forward(p, x.row(idx), x.cols);
        const Vec probs = softmax(f.logits);
        loss -= std::log(std::max(probs[y[idx]], 1e-300));
        for (int c = 0; c < p.output_dim(); ++c) {
            dlogits[c] = probs[c] - (c == y[idx] ? 1.0 : 0.0);
        }
        outer_add(grads.w2, dlogits.data(), f.hidden.data());
        for (int c = 0; c < p.output_dim(); ++c) {
            grads.b2[c] += dlogits[c];
        }
        std::fill(dhidden.begin(), dhidden.end(), 0.0);
        tmatvec_add(p.w2, dlogits.data(), dhidden.data());
        if (p.activation == Activation::relu) {
            for (int i = 0; i < p.hidden_dim(); ++i) {
                if (f.hidden_pre[i] <= 0.0) {
                    dhidden[i] = 0.0;
                }
            }
        }
        outer_add(grads.w1, dhidden.data(), x.row(idx));
        for (int i = 0; i < p.hidden_dim(); ++i) {
            grads.b1[i] += dhidden[i];
        }
    }
    return loss;
}

// Seeded mini-batch descent on mean softmax cross-entropy.
inline MlpParams train_single_frame(const Mat& x, const std::vector<int>& y, int hidden,
                                    const TrainConfig& cfg,
                                    Activation activation = Activation::relu,
                                    std::vector<double>* epoch_loss = nullptr) {
    cfg.validate();
    if (x.rows < 1) {
        throw std::invalid_argument("train_single_frame: empty training set");
    }
    if (static_cast<int>(y.size()) != x.rows) {
        throw std::invalid_argument("train_single_frame: labels do not match rows");
    }
    for (int label : y) {
        if (label < 0 || label >= kNumCategories) {
            throw std::invalid_argument("train_single_frame: label out of range {0..6}");
        }
    }
    MlpParams params = init_mlp(x.cols, hidden, kNumCategories, cfg.seed, activation);
    auto rng = make_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    AdamState adam;
    adam.init(params.views());
    MlpGrads grads(params);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = shuffled_indices(x.rows, rng);
        double loss_sum = 0.0;
        for (int start = 0; start < x.rows; start += cfg.batch_size) {
            const int count = std::min(cfg.batch_size, x.rows - start);
            zero_views(grads.views());
            loss_sum += mlp_ce_gradients(params, x, y,
                                         std::span<const int>(order.data() + start, count), grads);
            scale_views(grads.views(), 1.0 / count);
            clip_global_norm(grads.views(), cfg.clip_norm);
            optimizer_step(params.views(), grads.views(), cfg, adam);
        }
        if (epoch_loss != nullptr) {
            epoch_loss->push_back(loss_sum / x.rows);
        }
    }
    return params;
}

// Hidden-layer outputs for every row; the multi-frame model's image-side input.
inline Mat extract_intermediate(const MlpParams& p, const Mat& x) {
    Mat out(x.rows, p.hidden_dim());
    for (int r = 0; r < x.rows; ++r) {
        const auto f = mlp_forward(p, x.row(r), x.cols);
        std::copy(f.hidden.begin(), f.hidden.end(), out.row(r));
    }
    return out;
}

inline Prediction predict_expression(const MlpParams& p, const double* x, int n) {
    return predict_from_logits(mlp_forward(p, x, n).logits);
}

inline Prediction predict_expression(const MlpParams& p, const Vec& x) {
    return predict_expression(p, x.data(), static_cast<int>(x.size()));
}

}  // namespace affect
