#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace affect {

constexpr int kNumCategories = 7;

using Confusion = std::array<std::array<long, kNumCategories>, kNumCategories>;

struct ClassificationMetrics {
    double accuracy = 0.0;
    std::array<double, kNumCategories> f1_per_category{};
    double macro_f1 = 0.0;
    Confusion confusion{};  // rows = truth, cols = prediction
};

// Frame-pooled multiclass metrics over categories 0..6. Per-category F1 uses
// the 0/0 -> 0 convention; macro F1 averages over all 7 categories whether or
// not they occur.
inline ClassificationMetrics classification_metrics(const std::vector<int>& truth,
                                                    const std::vector<int>& predicted) {
    if (truth.size() != predicted.size()) {
        throw std::invalid_argument("classification_metrics: truth has " +
                                    std::to_string(truth.size()) + " entries, predicted has " +
                                    std::to_string(predicted.size()));
    }
    if (truth.empty()) {
        throw std::invalid_argument("classification_metrics: empty input");
    }
    ClassificationMetrics m;
    for (auto& row : m.confusion) {
        row.fill(0);
    }
    long correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i];
        const int p = predicted[i];
        if (t < 0 || t >= kNumCategories || p < 0 || p >= kNumCategories) {
            throw std::invalid_argument("classification_metrics: category out of range at index " +
                                        std::to_string(i));
        }
        m.confusion[t][p] += 1;
        if (t == p) {
            ++correct;
        }
    }
    m.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
    double f1_sum = 0.0;
    for (int c = 0; c < kNumCategories; ++c) {
        long tp = m.confusion[c][c];
        long fp = 0;
        long fn = 0;
        for (int o = 0; o < kNumCategories; ++o) {
            if (o == c) {
                continue;
            }
            fp += m.confusion[o][c];
            fn += m.confusion[c][o];
        }
        const double precision = (tp + fp == 0) ? 0.0 : static_cast<double>(tp) / (tp + fp);
        const double recall = (tp + fn == 0) ? 0.0 : static_cast<double>(tp) / (tp + fn);
        const double f1 = (precision + recall == 0.0)
                              ? 0.0
                              : 2.0 * precision * recall / (precision + recall);
        m.f1_per_category[c] = f1;
        f1_sum += f1;
    }
    m.macro_f1 = f1_sum / kNumCategories;
    return m;
}

// Competition expression score: 0.67 * F1 + 0.33 * Accuracy.
inline double expression_score(double macro_f1, double accuracy) {
    return 0.67 * macro_f1 + 0.33 * accuracy;
}

// Concordance correlation coefficient with population (divide-by-n) moments:
// 2*s_xy / (s_x^2 + s_y^2 + (mean_x - mean_y)^2). A zero denominator means
// both series are constant with equal means; then 1 if x == y elementwise,
// else 0.
inline double ccc(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("ccc: series lengths differ (" + std::to_string(x.size()) +
                                    " vs " + std::to_string(y.size()) + ")");
    }
    if (x.size() < 2) {
        throw std::invalid_argument("ccc: need at least 2 samples, got " +
                                    std::to_string(x.size()));
    }
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    sxx /= n;
    syy /= n;
    sxy /= n;
    const double md = mx - my;
    const double den = sxx + syy + md * md;
    if (den == 0.0) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] != y[i]) {
                return 0.0;
            }
        }
        return 1.0;
    }
    return 2.0 * sxy / den;
}

struct MetricsReport {
    double accuracy = 0.0;
    std::array<double, kNumCategories> f1_per_category{};
    double macro_f1 = 0.0;
    double expression_score = 0.0;
    Confusion confusion{};
    std::optional<double> ccc_valence;
    std::optional<double> ccc_arousal;
};

inline MetricsReport make_report(const ClassificationMetrics& cm) {
    MetricsReport r;
    r.accuracy = cm.accuracy;
    r.f1_per_category = cm.f1_per_category;
    r.macro_f1 = cm.macro_f1;
    r.expression_score = expression_score(cm.macro_f1, cm.accuracy);
    r.confusion = cm.confusion;
    return r;
}

// Half-up rounding to 3 decimals, used for all rendered scores.
inline double round3(double v) {
    return std::floor(v * 1000.0 + 0.5) / 1000.0;
}

namespace detail {

inline std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", round3(v));
    return buf;
}

inline std::string pad(const std::string& s, std::size_t width) {
    if (s.size() >= width) {
        return s;
    }
    return s + std::string(width - s.size(), ' ');
}

}  // namespace detail

// Fixed-width comparison table, one row per method: Score, F1, Acc plus CCC
// columns when any row carries them.
inline std::string render_report(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
    bool any_ccc = false;
    std::size_t name_w = 6;
    for (const auto& [name, rep] : rows) {
        name_w = std::max(name_w, name.size());
        if (rep.ccc_valence || rep.ccc_arousal) {
            any_ccc = true;
        }
    }
    std::ostringstream out;
    out << detail::pad("Method", name_w + 2) << detail::pad("Score", 8) << detail::pad("F1", 8)
        << detail::pad("Acc", 8);
    if (any_ccc) {
        out << detail::pad("CCC-V", 8) << detail::pad("CCC-A", 8);
    }
    out << "\n";
    for (const auto& [name, rep] : rows) {
        out << detail::pad(name, name_w + 2) << detail::pad(detail::fmt3(rep.expression_score), 8)
            << detail::pad(detail::fmt3(rep.macro_f1), 8)
            << detail::pad(detail::fmt3(rep.accuracy), 8);
        if (any_ccc) {
            out << detail::pad(rep.ccc_valence ? detail::fmt3(*rep.ccc_valence) : "-", 8)
                << detail::pad(rep.ccc_arousal ? detail::fmt3(*rep.ccc_arousal) : "-", 8);
        }
        out << "\n";
    }
    return out.str();
}

inline std::string render_confusion(const Confusion& confusion) {
    std::ostringstream out;
    out << "confusion (rows = truth):\n";
    for (int t = 0; t < kNumCategories; ++t) {
        for (int p = 0; p < kNumCategories; ++p) {
            out << detail::pad(std::to_string(confusion[t][p]), 8);
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace affect
