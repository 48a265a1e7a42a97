#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "affect/features.hpp"
#include "affect/metrics.hpp"
#include "affect/nn.hpp"

namespace affect {

// Single-layer unidirectional GRU with a linear readout on the final hidden
// state. Gating follows h_t = (1 - z_t) . h_{t-1} + z_t . htilde_t with
//   z_t = sigmoid(Wz x_t + Uz h_{t-1} + bz)
//   r_t = sigmoid(Wr x_t + Ur h_{t-1} + br)
//   htilde_t = tanh(Wh x_t + Uh (r_t . h_{t-1}) + bh)
// from a zero initial state.
struct GruParams {
    Mat wz, wr, wh;  // hidden x input
    Mat uz, ur, uh;  // hidden x hidden
    Vec bz, br, bh;
    Mat wo;  // outputs x hidden
    Vec bo;

    int input_dim() const { return wz.cols; }
    int hidden_dim() const { return wz.rows; }
    int output_dim() const { return wo.rows; }

    ParamViews views() {
        return {std::span<double>(wz.a), std::span<double>(uz.a), std::span<double>(bz),
                std::span<double>(wr.a), std::span<double>(ur.a), std::span<double>(br),
                std::span<double>(wh.a), std::span<double>(uh.a), std::span<double>(bh),
                std::span<double>(wo.a), std::span<double>(bo)};
    }
};

inline GruParams init_gru(int input_dim, int hidden, int outputs, std::uint64_t seed) {
    if (input_dim < 1 || hidden < 1 || outputs < 1) {
        throw std::invalid_argument("init_gru: dimensions must be positive");
    }
    GruParams p;
    p.wz = Mat(hidden, input_dim);
    p.wr = Mat(hidden, input_dim);
    p.wh = Mat(hidden, input_dim);
    p.uz = Mat(hidden, hidden);
    p.ur = Mat(hidden, hidden);
    p.uh = Mat(hidden, hidden);
    p.bz.assign(hidden, 0.0);
    p.br.assign(hidden, 0.0);
    p.bh.assign(hidden, 0.0);
    p.wo = Mat(outputs, hidden);
    p.bo.assign(outputs, 0.0);
    auto rng = make_rng(seed);
    glorot_init(p.wz, rng);
    glorot_init(p.uz, rng);
    glorot_init(p.wr, rng);
    glorot_init(p.ur, rng);
    glorot_init(p.wh, rng);
    glorot_init(p.uh, rng);
    glorot_init(p.wo, rng);
    return p;
}

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per-step activations kept for backpropagation through time.
struct GruTape {
    std::vector<Vec> z, r, hcand, h, rh;
};

inline Vec gru_forward_tape(const GruParams& p, const double* window, int t_steps,
                            GruTape* tape) {
    const int h_dim = p.hidden_dim();
    const int f_dim = p.input_dim();
    Vec h(h_dim, 0.0);
    Vec az(h_dim), ar(h_dim), ah(h_dim), rh(h_dim);
    if (tape != nullptr) {
        tape->z.clear();
        tape->r.clear();
        tape->hcand.clear();
        tape->h.clear();
        tape->rh.clear();
    }
    for (int t = 0; t < t_steps; ++t) {
        const double* x = window + static_cast<std::size_t>(t) * f_dim;
        matvec(p.wz, x, az.data());
        matvec_add(p.uz, h.data(), az.data());
        matvec(p.wr, x, ar.data());
        matvec_add(p.ur, h.data(), ar.data());
        for (int i = 0; i < h_dim; ++i) {
            az[i] = sigmoid(az[i] + p.bz[i]);
            ar[i] = sigmoid(ar[i] + p.br[i]);
            rh[i] = ar[i] * h[i];
        }
        matvec(p.wh, x, ah.data());
        matvec_add(p.uh, rh.data(), ah.data());
        for (int i = 0; i < h_dim; ++i) {
            ah[i] = std::tanh(ah[i] + p.bh[i]);
        }
        if (tape != nullptr) {
            tape->z.push_back(az);
            tape->r.push_back(ar);
            tape->hcand.push_back(ah);
            tape->rh.push_back(rh);
        }
        for (int i = 0; i < h_dim; ++i) {
            h[i] = (1.0 - az[i]) * h[i] + az[i] * ah[i];
        }
        if (tape != nullptr) {
            tape->h.push_back(h);
        }
    }
    Vec logits(p.output_dim(), 0.0);
    matvec(p.wo, h.data(), logits.data());
    for (int i = 0; i < p.output_dim(); ++i) {
        logits[i] += p.bo[i];
    }
    return logits;
}

}  // namespace detail

inline Vec gru_forward(const GruParams& p, const double* window, int t_steps) {
    return detail::gru_forward_tape(p, window, t_steps, nullptr);
}

inline Prediction predict_expression(const GruParams& p, const double* window, int t_steps) {
    return predict_from_logits(gru_forward(p, window, t_steps));
}

enum class GruLoss { cross_entropy, squared_error };

struct GruGrads {
    Mat wz, wr, wh, uz, ur, uh;
    Vec bz, br, bh;
    Mat wo;
    Vec bo;

    explicit GruGrads(const GruParams& p)
        : wz(p.wz.rows, p.wz.cols),
          wr(p.wr.rows, p.wr.cols),
          wh(p.wh.rows, p.wh.cols),
          uz(p.uz.rows, p.uz.cols),
          ur(p.ur.rows, p.ur.cols),
          uh(p.uh.rows, p.uh.cols),
          bz(p.bz.size(), 0.0),
          br(p.br.size(), 0.0),
          bh(p.bh.size(), 0.0),
          wo(p.wo.rows, p.wo.cols),
          bo(p.bo.size(), 0.0) {}

    ParamViews views() {
        return {std::span<double>(wz.a), std::span<double>(uz.a), std::span<double>(bz),
                std::span<double>(wr.a), std::span<double>(ur.a), std::span<double>(br),
                std::span<double>(wh.a), std::span<double>(uh.a), std::span<double>(bh),
                std::span<double>(wo.a), std::span<double>(bo)};
    }
};

// Exact analytic gradients via backpropagation through time, summed over the
// selected windows. Cross-entropy uses batch.labels, squared error (summed
// over the output coordinates) uses batch.va_labels. Returns the summed loss.
inline double gru_gradients(const GruParams& p, const WindowBatch& batch,
                            std::span<const int> windows, GruLoss loss, GruGrads& grads) {
    const int h_dim = p.hidden_dim();
    const int f_dim = p.input_dim();
    const int t_steps = batch.timesteps;
    if (batch.feature_dim != f_dim) {
        throw std::invalid_argument("gru_gradients: window feature dim " +
                                    std::to_string(batch.feature_dim) + " does not match model " +
                                    std::to_string(f_dim));
    }
    if (loss == GruLoss::cross_entropy &&
        static_cast<int>(batch.labels.size()) != batch.count()) {
        throw std::invalid_argument("gru_gradients: batch lacks expression labels");
    }
    if (loss == GruLoss::squared_error &&
        static_cast<int>(batch.va_labels.size()) != batch.count()) {
        throw std::invalid_argument("gru_gradients: batch lacks valence-arousal labels");
    }
    double total_loss = 0.0;
    detail::GruTape tape;
    Vec dlogits(p.output_dim());
    Vec dh(h_dim), dh_prev(h_dim), dz(h_dim), dhc(h_dim), daz(h_dim), dah(h_dim), drh(h_dim),
        dar(h_dim);
    for (int w : windows) {
        const double* window = batch.window(w);
        const Vec logits = detail::gru_forward_tape(p, window, t_steps, &tape);
        if (loss == GruLoss::cross_entropy) {
            const Vec probs = softmax(logits);
            const int label = batch.labels[w];
            total_loss -= std::log(std::max(probs[label], 1e-300));
            for (int c = 0; c < p.output_dim(); ++c) {
                dlogits[c] = probs[c] - (c == label ? 1.0 : 0.0);
            }
        } else {
            const auto& target = batch.va_labels[w];
            for (int c = 0; c < p.output_dim(); ++c) {
                const double diff = logits[c] - target[c];
                total_loss += diff * diff;
                dlogits[c] = 2.0 * diff;
            }
        }
        const Vec& h_last = tape.h[t_steps - 1];
        outer_add(grads.wo, dlogits.data(), h_last.data());
        for (int c = 0; c < p.output_dim(); ++c) {
            grads.bo[c] += dlogits[c];
        }
        std::fill(dh.begin(), dh.end(), 0.0);
        tmatvec_add(p.wo, dlogits.data(), dh.data());
        for (int t = t_steps - 1; t >= 0; --t) {
            const double* x = window + static_cast<std::size_t>(t) * f_dim;
            const Vec& z = tape.z[t];
            const Vec& r = tape.r[t];
            const Vec& hc = tape.hcand[t];
            const Vec& rh = tape.rh[t];
            // h_{t-1} is zero at t == 0
            const Vec* h_prev = t > 0 ? &tape.h[t - 1] : nullptr;
            for (int i = 0; i < h_dim; ++i) {
                const double hp = h_prev ? (*h_prev)[i] : 0.0;
                dz[i] = dh[i] * (hc[i] - hp);
                dhc[i] = dh[i] * z[i];
                dh_prev[i] = dh[i] * (1.0 - z[i]);
                daz[i] = dz[i] * z[i] * (1.0 - z[i]);
                dah[i] = dhc[i] * (1.0 - hc[i] * hc[i]);
            }
            outer_add(grads.wh, dah.data(), x);
            outer_add(grads.uh, dah.data(), rh.data());
            std::fill(drh.begin(), drh.end(), 0.0);
            tmatvec_add(p.uh, dah.data(), drh.data());
            for (int i = 0; i < h_dim; ++i) {
                const double hp = h_prev ? (*h_prev)[i] : 0.0;
                grads.bh[i] += dah[i];
                dar[i] = drh[i] * hp * r[i] * (1.0 - r[i]);
                dh_prev[i] += drh[i] * r[i];
            }
            outer_add(grads.wz, daz.data(), x);
            outer_add(grads.wr, dar.data(), x);
            if (h_prev != nullptr) {
                outer_add(grads.uz, daz.data(), h_prev->data());
                outer_add(grads.ur, dar.data(), h_prev->data());
            }
            for (int i = 0; i < h_dim; ++i) {
                grads.bz[i] += daz[i];
                grads.br[i] += dar[i];
            }
            tmatvec_add(p.uz, daz.data(), dh_prev.data());
            tmatvec_add(p.ur, dar.data(), dh_prev.data());
            dh = dh_prev;
        }
    }
    return total_loss;
}

// Seeded mini-batch descent over windows: cross-entropy for expression
// classification, summed squared error for valence-arousal regression.
inline GruParams train_multi_frame(const WindowBatch& batch, int hidden, const TrainConfig& cfg,
                                   GruLoss loss = GruLoss::cross_entropy,
                                   std::vector<double>* epoch_loss = nullptr) {
    cfg.validate();
    const int count = batch.count();
    if (count < 1) {
        throw std::invalid_argument("train_multi_frame: empty window batch");
    }
    const int outputs = loss == GruLoss::cross_entropy ? kNumCategories : 2;
    GruParams params = init_gru(batch.feature_dim, hidden, outputs, cfg.seed);
    auto rng = make_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    AdamState adam;
    adam.init(params.views());
    GruGrads grads(params);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = shuffled_indices(count, rng);
        double loss_sum = 0.0;
        for (int start = 0; start < count; start += cfg.batch_size) {
            const int n = std::min(cfg.batch_size, count - start);
            zero_views(grads.views());
            loss_sum += gru_gradients(params, batch,
                                      std::span<const int>(order.data() + start, n), loss, grads);
            scale_views(grads.views(), 1.0 / n);
            clip_global_norm(grads.views(), cfg.clip_norm);
            optimizer_step(params.views(), grads.views(), cfg, adam);
        }
        if (epoch_loss != nullptr) {
            epoch_loss->push_back(loss_sum / count);
        }
    }
    return params;
}

}  // namespace affect
