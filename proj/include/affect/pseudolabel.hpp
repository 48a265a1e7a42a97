#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "affect/datamodel.hpp"
#include "affect/features.hpp"
#include "affect/mlp.hpp"

namespace affect {

// Russell-circumplex acceptance rules for pseudo-labeled frames. All
// inequalities are strict; boundary values are rejected. Categories 1, 2 and
// 3 share one predicate.
inline bool filter_by_circumplex(int category, double valence, double arousal) {
    if (valence < -1.0 || valence > 1.0 || arousal < -1.0 || arousal > 1.0) {
        throw std::invalid_argument("filter_by_circumplex: valence/arousal outside [-1, 1]");
    }
    switch (category) {
        case 0:
            return std::abs(valence) < 0.5 && std::abs(arousal) < 0.5;
        case 1:
        case 2:
        case 3:
            return valence < 0.0 && arousal > 0.0;
        case 4:
            return valence > 0.0 && arousal > 0.0;
        case 5:
            return valence < 0.0 && arousal < 0.0;
        case 6:
            return arousal > 0.0;
        default:
            throw std::invalid_argument("filter_by_circumplex: category out of range {0..6}");
    }
}

struct PseudoLabelItem {
    std::string video_id;
    int frame_index = 0;
    int category = 0;
    double valence = 0.0;
    double arousal = 0.0;
    bool accepted = false;
};

struct PseudoLabelResult {
    std::vector<PseudoLabelItem> items;
    long skipped = 0;  // candidate frames lacking the required features
};

// Predict expressions for frames that carry a valence-arousal label but no
// expression label, then apply the circumplex filter.
inline PseudoLabelResult generate_pseudo_labels(const MlpParams& mlp,
                                                const std::vector<FrameRecord>& frames) {
    PseudoLabelResult result;
    for (const auto& f : frames) {
        if (f.expression.has_value() || !f.valence.has_value() || !f.arousal.has_value()) {
            continue;
        }
        if (!f.valid || f.image_feature.empty() || f.openface_feature.empty()) {
            ++result.skipped;
            continue;
        }
        const Vec x = single_frame_input(f);
        PseudoLabelItem item;
        item.video_id = f.video_id;
        item.frame_index = f.frame_index;
        item.category = predict_expression(mlp, x).category;
        item.valence = *f.valence;
        item.arousal = *f.arousal;
        item.accepted = filter_by_circumplex(item.category, item.valence, item.arousal);
        result.items.push_back(std::move(item));
    }
    return result;
}

struct BalanceStrategy {
    enum class Kind { downsample_to_min, cap };
    Kind kind = Kind::downsample_to_min;
    long cap_value = 0;

    // "min" or "cap:N"
    static BalanceStrategy parse(const std::string& text) {
        BalanceStrategy s;
        if (text == "min") {
            return s;
        }
        if (text.rfind("cap:", 0) == 0) {
            s.kind = Kind::cap;
            s.cap_value = std::stol(text.substr(4));
            if (s.cap_value < 1) {
                throw std::invalid_argument("balance strategy: cap must be >= 1");
            }
            return s;
        }
        throw std::invalid_argument("balance strategy: expected 'min' or 'cap:N', got '" + text +
                                    "'");
    }

    std::string to_string() const {
        return kind == Kind::downsample_to_min ? "min" : "cap:" + std::to_string(cap_value);
    }
};

// Seeded downsampling without replacement. Returns the kept indices into
// `categories`, sorted ascending; per-category counts meet the strategy
// exactly.
inline std::vector<std::size_t> balance_classes(const std::vector<int>& categories,
                                                const BalanceStrategy& strategy,
                                                std::uint64_t seed) {
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < categories.size(); ++i) {
        groups[categories[i]].push_back(i);
    }
    if (groups.empty()) {
        return {};
    }
    long target = 0;
    if (strategy.kind == BalanceStrategy::Kind::downsample_to_min) {
        target = static_cast<long>(categories.size());
        for (const auto& [cat, idx] : groups) {
            target = std::min(target, static_cast<long>(idx.size()));
        }
    } else {
        target = strategy.cap_value;
    }
    auto rng = make_rng(seed);
    std::vector<std::size_t> kept;
    for (auto& [cat, idx] : groups) {
        if (static_cast<long>(idx.size()) > target) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(target);
        }
        kept.insert(kept.end(), idx.begin(), idx.end());
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

// One labeled training example for the single-frame model.
struct TrainingFrame {
    std::string video_id;
    int frame_index = 0;
    Vec features;
    int label = 0;
};

inline Mat stack_training_frames(const std::vector<TrainingFrame>& frames,
                                 std::vector<int>& labels_out) {
    if (frames.empty()) {
        throw std::invalid_argument("stack_training_frames: empty set");
    }
    const int dim = static_cast<int>(frames.front().features.size());
    Mat x(static_cast<int>(frames.size()), dim);
    labels_out.resize(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (static_cast<int>(frames[i].features.size()) != dim) {
            throw std::invalid_argument("stack_training_frames: inconsistent feature dims");
        }
        std::copy(frames[i].features.begin(), frames[i].features.end(),
                  x.row(static_cast<int>(i)));
        labels_out[i] = frames[i].label;
    }
    return x;
}

// Union of labeled and accepted pseudo-labeled frames, balanced, then trained
// from scratch. Pseudo frames that collide with labeled keys are an error.
inline MlpParams retrain_with_pseudo(const std::vector<TrainingFrame>& labeled,
                                     const std::vector<TrainingFrame>& pseudo, int hidden,
                                     const TrainConfig& cfg, const BalanceStrategy& strategy,
                                     Activation activation = Activation::relu,
                                     std::vector<double>* epoch_loss = nullptr) {
    if (labeled.empty()) {
        throw std::invalid_argument("retrain_with_pseudo: labeled set is empty");
    }
    std::set<std::pair<std::string, int>> keys;
    for (const auto& f : labeled) {
        keys.emplace(f.video_id, f.frame_index);
    }
    std::string collisions;
    for (const auto& f : pseudo) {
        if (keys.count({f.video_id, f.frame_index}) > 0) {
            collisions += " (" + f.video_id + ", " + std::to_string(f.frame_index) + ")";
        }
    }
    if (!collisions.empty()) {
        throw std::runtime_error("retrain_with_pseudo: pseudo frames duplicate labeled keys:" +
                                 collisions);
    }
    std::vector<TrainingFrame> merged = labeled;
    merged.insert(merged.end(), pseudo.begin(), pseudo.end());
    std::vector<int> categories(merged.size());
    for (std::size_t i = 0; i < merged.size(); ++i) {
        categories[i] = merged[i].label;
    }
    const auto kept = balance_classes(categories, strategy, cfg.seed);
    std::vector<TrainingFrame> balanced;
    balanced.reserve(kept.size());
    for (std::size_t i : kept) {
        balanced.push_back(merged[i]);
    }
    std::vector<int> labels;
    const Mat x = stack_training_frames(balanced, labels);
    return train_single_frame(x, labels, hidden, cfg, activation, epoch_loss);
}

// pseudo_labels.csv: video_id,frame,pseudo_expression,accepted
inline void save_pseudo_labels_csv(const std::string& path, const PseudoLabelResult& result) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error(path + ": cannot open for writing");
    }
    out << "video_id,frame,pseudo_expression,accepted\n";
    for (const auto& item : result.items) {
        out << item.video_id << "," << item.frame_index << "," << item.category << ","
            << (item.accepted ? 1 : 0) << "\n";
    }
}

}  // namespace affect
