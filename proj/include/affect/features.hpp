#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "affect/binio.hpp"
#include "affect/datamodel.hpp"
#include "affect/matrix.hpp"

namespace affect {

constexpr double kStdEpsilon = 1e-6;

// Column-wise population moments (divide by n).
struct Moments {
    Vec mean;
    Vec stddev;
};

inline Moments compute_moments(const Mat& rows) {
    if (rows.rows < 1) {
        throw std::invalid_argument("compute_moments: need at least one row");
    }
    Moments m;
    m.mean.assign(rows.cols, 0.0);
    m.stddev.assign(rows.cols, 0.0);
    for (int r = 0; r < rows.rows; ++r) {
        const double* row = rows.row(r);
        for (int c = 0; c < rows.cols; ++c) {
            m.mean[c] += row[c];
        }
    }
    for (double& v : m.mean) {
        v /= rows.rows;
    }
    for (int r = 0; r < rows.rows; ++r) {
        const double* row = rows.row(r);
        for (int c = 0; c < rows.cols; ++c) {
            const double d = row[c] - m.mean[c];
            m.stddev[c] += d * d;
        }
    }
    for (double& v : m.stddev) {
        v = std::sqrt(v / rows.rows);
    }
    return m;
}

inline Moments compute_pooled_moments(const std::vector<const Mat*>& parts) {
    long total = 0;
    int cols = -1;
    for (const Mat* p : parts) {
        if (p->rows == 0) {
            continue;
        }
        if (cols < 0) {
            cols = p->cols;
        } else if (p->cols != cols) {
            throw std::invalid_argument("compute_pooled_moments: column mismatch");
        }
        total += p->rows;
    }
    if (total < 1) {
        throw std::invalid_argument("compute_pooled_moments: no rows");
    }
    Moments m;
    m.mean.assign(cols, 0.0);
    m.stddev.assign(cols, 0.0);
    for (const Mat* p : parts) {
        for (int r = 0; r < p->rows; ++r) {
            const double* row = p->row(r);
            for (int c = 0; c < cols; ++c) {
                m.mean[c] += row[c];
            }
        }
    }
    for (double& v : m.mean) {
        v /= total;
    }
    for (const Mat* p : parts) {
        for (int r = 0; r < p->rows; ++r) {
            const double* row = p->row(r);
            for (int c = 0; c < cols; ++c) {
                const double d = row[c] - m.mean[c];
                m.stddev[c] += d * d;
            }
        }
    }
    for (double& v : m.stddev) {
        v = std::sqrt(v / total);
    }
    return m;
}

inline Mat apply_standardize(const Mat& rows, const Moments& m, double epsilon = kStdEpsilon) {
    if (static_cast<int>(m.mean.size()) != rows.cols) {
        throw std::invalid_argument("apply_standardize: dimension mismatch");
    }
    Mat out(rows.rows, rows.cols);
    for (int c = 0; c < rows.cols; ++c) {
        const double denom = std::max(m.stddev[c], epsilon);
        for (int r = 0; r < rows.rows; ++r) {
            out(r, c) = (rows(r, c) - m.mean[c]) / denom;
        }
    }
    return out;
}

// Z-score each column with moments from this subject's own frames.
inline Mat standardize_per_subject(const Mat& rows, double epsilon = kStdEpsilon) {
    return apply_standardize(rows, compute_moments(rows), epsilon);
}

// Z-score with moments pooled over all subjects' frames.
inline std::vector<Mat> standardize_global(const std::vector<Mat>& parts,
                                           double epsilon = kStdEpsilon) {
    std::vector<const Mat*> ptrs;
    ptrs.reserve(parts.size());
    for (const auto& p : parts) {
        ptrs.push_back(&p);
    }
    const Moments m = compute_pooled_moments(ptrs);
    std::vector<Mat> out;
    out.reserve(parts.size());
    for (const auto& p : parts) {
        out.push_back(apply_standardize(p, m, epsilon));
    }
    return out;
}

namespace detail {

inline Vec lerp_block(const Vec& a, const Vec& b, double w, const std::string& video_id,
                      int frame) {
    if (a.size() != b.size()) {
        throw std::runtime_error("interpolate_gaps: feature block size mismatch around (" +
                                 video_id + ", " + std::to_string(frame) + ")");
    }
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] + (b[i] - a[i]) * w;
    }
    return out;
}

}  // namespace detail

// Fill invalid/missing runs of up to max_gap frames by linear interpolation
// between the bounding valid frames; longer runs split the sequence into
// separate contiguous segments. Leading and trailing invalid frames are
// dropped. Labels sitting on pre-existing invalid frames are kept.
inline std::vector<SubjectSequence> interpolate_gaps(const SubjectSequence& seq,
                                                     int max_gap = 30) {
    std::map<int, const FrameRecord*> by_index;
    for (const auto& f : seq.frames) {
        by_index[f.frame_index] = &f;
    }
    std::vector<const FrameRecord*> valid;
    for (const auto& f : seq.frames) {
        if (f.valid) {
            valid.push_back(&f);
        }
    }
    std::vector<SubjectSequence> segments;
    if (valid.empty()) {
        return segments;
    }
    SubjectSequence current;
    current.video_id = seq.video_id;
    current.fps = seq.fps;
    current.frames.push_back(*valid.front());
    for (std::size_t i = 1; i < valid.size(); ++i) {
        const FrameRecord& prev = *valid[i - 1];
        const FrameRecord& next = *valid[i];
        const int gap = next.frame_index - prev.frame_index - 1;
        if (gap > max_gap) {
            segments.push_back(std::move(current));
            current = SubjectSequence{};
            current.video_id = seq.video_id;
            current.fps = seq.fps;
        } else if (gap > 0) {
            for (int fi = prev.frame_index + 1; fi < next.frame_index; ++fi) {
                const double w = static_cast<double>(fi - prev.frame_index) /
                                 static_cast<double>(next.frame_index - prev.frame_index);
                FrameRecord filled;
                filled.video_id = seq.video_id;
                filled.frame_index = fi;
                filled.valid = true;
                filled.image_feature =
                    detail::lerp_block(prev.image_feature, next.image_feature, w, seq.video_id, fi);
                filled.openface_feature = detail::lerp_block(
                    prev.openface_feature, next.openface_feature, w, seq.video_id, fi);
                filled.audio_feature =
                    detail::lerp_block(prev.audio_feature, next.audio_feature, w, seq.video_id, fi);
                auto it = by_index.find(fi);
                if (it != by_index.end()) {
                    filled.expression = it->second->expression;
                    filled.valence = it->second->valence;
                    filled.arousal = it->second->arousal;
                }
                current.frames.push_back(std::move(filled));
            }
        }
        current.frames.push_back(next);
    }
    segments.push_back(std::move(current));
    return segments;
}

// Single-frame model input: image features then the 43 openface values.
inline Vec single_frame_input(const FrameRecord& f) {
    Vec out;
    out.reserve(f.image_feature.size() + f.openface_feature.size());
    out.insert(out.end(), f.image_feature.begin(), f.image_feature.end());
    out.insert(out.end(), f.openface_feature.begin(), f.openface_feature.end());
    return out;
}

// Concatenate image-side and audio-side blocks, image first. An empty audio
// block (audio disabled) leaves the image block unchanged.
inline Vec fuse(const Vec& image_block, const Vec& audio_block) {
    if (!all_finite(image_block.data(), image_block.size()) ||
        !all_finite(audio_block.data(), audio_block.size())) {
        throw std::invalid_argument("fuse: non-finite feature value");
    }
    Vec out;
    out.reserve(image_block.size() + audio_block.size());
    out.insert(out.end(), image_block.begin(), image_block.end());
    out.insert(out.end(), audio_block.begin(), audio_block.end());
    return out;
}

struct WindowConfig {
    int n_seconds = 2;   // window length N in seconds
    int step = 6;        // frame step L
    int fps = kFps;
    int dim_image = 0;   // checked against the feature matrix when > 0
    int dim_audio = 0;
    bool pad_short = false;  // left-pad short prefixes by repeating the first frame

    int timesteps() const {
        if (n_seconds < 1 || step < 1 || fps < 1) {
            throw std::invalid_argument("window config: N, L and fps must be positive");
        }
        if ((n_seconds * fps) % step != 0) {
            throw std::invalid_argument("window config: (N * fps) must be divisible by L");
        }
        const int t = n_seconds * fps / step;
        if (t < 1) {
            throw std::invalid_argument("window config: timesteps must be >= 1");
        }
        return t;
    }
};

// Stacked fixed-length windows. data holds count() * timesteps * feature_dim
// doubles, window-major then time-major.
struct WindowBatch {
    int timesteps = 0;
    int feature_dim = 0;
    std::vector<double> data;
    std::vector<int> labels;                       // expression windows
    std::vector<std::array<double, 2>> va_labels;  // valence-arousal windows
    std::vector<std::pair<std::string, int>> keys; // (video_id, end frame)

    int count() const {
        return timesteps * feature_dim == 0
                   ? 0
                   : static_cast<int>(data.size() / (static_cast<std::size_t>(timesteps) *
                                                     feature_dim));
    }
    const double* window(int w) const {
        return data.data() + static_cast<std::size_t>(w) * timesteps * feature_dim;
    }
    long window_elements() const {
        return static_cast<long>(timesteps) * feature_dim;
    }
};

// Which feature blocks a window carries. The default (raw + per-subject
// standardized copy) is the doubling that gives Eq. (1)'s factor 2.
struct WindowBlocks {
    bool include_raw = true;
    bool include_per_subject_std = true;
    const Moments* global_moments = nullptr;  // appended as a third block when set
    double epsilon = kStdEpsilon;
};

namespace detail {

template <typename Label>
void make_windows_impl(const std::string& video_id, int first_frame_index, const Mat& features,
                       const std::vector<std::optional<Label>>& labels, const WindowConfig& cfg,
                       const WindowBlocks& blocks, WindowBatch& batch,
                       std::vector<Label>& out_labels) {
    const int t_steps = cfg.timesteps();
    const int base = features.cols;
    if (features.rows != static_cast<int>(labels.size())) {
        throw std::invalid_argument("make_windows: labels size does not match frames");
    }
    if (cfg.dim_image + cfg.dim_audio > 0 && base != cfg.dim_image + cfg.dim_audio) {
        throw std::invalid_argument("make_windows: feature dim " + std::to_string(base) +
                                    " does not match dim_image + dim_audio = " +
                                    std::to_string(cfg.dim_image + cfg.dim_audio));
    }
    std::vector<const Mat*> block_mats;
    Mat std_block;
    Mat global_block;
    if (blocks.include_raw) {
        block_mats.push_back(&features);
    }
    if (blocks.include_per_subject_std) {
        std_block = standardize_per_subject(features, blocks.epsilon);
        block_mats.push_back(&std_block);
    }
    if (blocks.global_moments != nullptr) {
        global_block = apply_standardize(features, *blocks.global_moments, blocks.epsilon);
        block_mats.push_back(&global_block);
    }
    if (block_mats.empty()) {
        throw std::invalid_argument("make_windows: no feature blocks selected");
    }
    const int f_dim = base * static_cast<int>(block_mats.size());
    if (batch.count() == 0) {
        batch.timesteps = t_steps;
        batch.feature_dim = f_dim;
    } else if (batch.timesteps != t_steps || batch.feature_dim != f_dim) {
        throw std::invalid_argument("make_windows: window shape differs from batch");
    }
    const int span = (t_steps - 1) * cfg.step;
    for (int p = 0; p < features.rows; ++p) {
        if (!labels[p]) {
            continue;
        }
        if (p - span < 0 && !cfg.pad_short) {
            continue;
        }
        for (int k = 0; k < t_steps; ++k) {
            int row = p - span + k * cfg.step;
            if (row < 0) {
                row = 0;  // pad_short: repeat the first frame
            }
            for (const Mat* m : block_mats) {
                const double* src = m->row(row);
                batch.data.insert(batch.data.end(), src, src + base);
            }
        }
        out_labels.push_back(*labels[p]);
        batch.keys.emplace_back(video_id, first_frame_index + p);
    }
}

}  // namespace detail

// Cut expression-labeled windows out of one contiguous segment. A window ends
// at each labeled frame t and covers {t-(T-1)L, ..., t-L, t}; windows that do
// not fit inside the segment are skipped unless pad_short is set. Appends to
// `batch` so multiple segments can share one batch.
inline void make_windows(const std::string& video_id, int first_frame_index, const Mat& features,
                         const std::vector<std::optional<int>>& labels, const WindowConfig& cfg,
                         WindowBatch& batch, const WindowBlocks& blocks = {}) {
    detail::make_windows_impl(video_id, first_frame_index, features, labels, cfg, blocks, batch,
                              batch.labels);
}

inline void make_windows_va(const std::string& video_id, int first_frame_index,
                            const Mat& features,
                            const std::vector<std::optional<std::array<double, 2>>>& labels,
                            const WindowConfig& cfg, WindowBatch& batch,
                            const WindowBlocks& blocks = {}) {
    detail::make_windows_impl(video_id, first_frame_index, features, labels, cfg, blocks, batch,
                              batch.va_labels);
}

// --- flat binary spill format -------------------------------------------
//
// magic "AFWIN001", then u32 W, T, F, label kind (0 none, 1 expression,
// 2 valence-arousal), then W*T*F little-endian f32 values, then the labels,
// then length-prefixed keys.

inline void save_windows(const std::string& path, const WindowBatch& batch) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error(path + ": cannot open for writing");
    }
    out.write("AFWIN001", 8);
    const int w = batch.count();
    const int kind = !batch.labels.empty() ? 1 : (!batch.va_labels.empty() ? 2 : 0);
    detail::put_u32(out, static_cast<std::uint32_t>(w));
    detail::put_u32(out, static_cast<std::uint32_t>(batch.timesteps));
    detail::put_u32(out, static_cast<std::uint32_t>(batch.feature_dim));
    detail::put_u32(out, static_cast<std::uint32_t>(kind));
    for (double v : batch.data) {
        detail::put_f32(out, static_cast<float>(v));
    }
    if (kind == 1) {
        for (int label : batch.labels) {
            detail::put_u32(out, static_cast<std::uint32_t>(label));
        }
    } else if (kind == 2) {
        for (const auto& va : batch.va_labels) {
            detail::put_f32(out, static_cast<float>(va[0]));
            detail::put_f32(out, static_cast<float>(va[1]));
        }
    }
    for (const auto& [vid, frame] : batch.keys) {
        detail::put_u32(out, static_cast<std::uint32_t>(vid.size()));
        out.write(vid.data(), static_cast<std::streamsize>(vid.size()));
        detail::put_u32(out, static_cast<std::uint32_t>(frame));
    }
    if (!out) {
        throw std::runtime_error(path + ": write failed");
    }
}

inline WindowBatch load_windows(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error(path + ": cannot open");
    }
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "AFWIN001") {
        throw std::runtime_error(path + ": not a window batch file");
    }
    WindowBatch batch;
    const std::uint32_t w = detail::get_u32(in, path);
    batch.timesteps = static_cast<int>(detail::get_u32(in, path));
    batch.feature_dim = static_cast<int>(detail::get_u32(in, path));
    const std::uint32_t kind = detail::get_u32(in, path);
    const std::size_t n =
        static_cast<std::size_t>(w) * batch.timesteps * batch.feature_dim;
    batch.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        batch.data[i] = detail::get_f32(in, path);
    }
    if (kind == 1) {
        batch.labels.resize(w);
        for (std::uint32_t i = 0; i < w; ++i) {
            batch.labels[i] = static_cast<int>(detail::get_u32(in, path));
        }
    } else if (kind == 2) {
        batch.va_labels.resize(w);
        for (std::uint32_t i = 0; i < w; ++i) {
            batch.va_labels[i][0] = detail::get_f32(in, path);
            batch.va_labels[i][1] = detail::get_f32(in, path);
        }
    }
    batch.keys.resize(w);
    for (std::uint32_t i = 0; i < w; ++i) {
        const std::uint32_t len = detail::get_u32(in, path);
        std::string vid(len, '\0');
        in.read(vid.data(), len);
        const std::uint32_t frame = detail::get_u32(in, path);
        if (!in) {
            throw std::runtime_error(path + ": truncated window file");
        }
        batch.keys[i] = {std::move(vid), static_cast<int>(frame)};
    }
    return batch;
}

}  // namespace affect
