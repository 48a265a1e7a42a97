#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "affect/datamodel.hpp"
#include "affect/imageprep.hpp"
#include "affect/matrix.hpp"
#include "affect/pseudolabel.hpp"

namespace affect {

// Desk-scale synthetic stand-in for an in-the-wild affect dataset. Each
// subject carries a random additive bias on every feature dimension (the
// lighting/identity confound); the expression signal is a temporal deviation
// from that baseline, shared across subjects. Per-subject standardization
// removes the bias by construction. Valence-arousal labels are sampled inside
// the circumplex region of their category.
struct SynthSpec {
    int subjects = 20;
    int frames_per_subject = 600;
    int d_img = 300;  // 300 or 512
    int d_aud = 300;
    double bias = 1.0;
    double signal = 1.0;
    double noise = 0.25;
    double expr_label_rate = 0.55;  // expression + VA labels
    double va_only_rate = 0.25;     // VA label only (pseudo-label candidates)
    double gap_rate = 0.02;         // chance of opening a short missing-frame gap
    int max_gap_len = 6;
    int images_per_subject = 2;
    std::uint64_t seed = 1;
};

struct SynthOutput {
    DatasetManifest manifest;
    std::string manifest_path;
    std::string truth_path;  // expression truth for every emitted frame
};

namespace detail {

// Valence-arousal region centers per category; jitter of +-0.12 keeps every
// sample strictly inside its circumplex acceptance region.
inline std::array<std::array<double, 2>, 7> va_centers() {
    return {{{0.0, 0.0},
             {-0.6, 0.6},
             {-0.45, 0.45},
             {-0.3, 0.7},
             {0.5, 0.5},
             {-0.5, -0.5},
             {0.2, 0.55}}};
}

inline void write_feature_header(std::ofstream& out, const std::string& prefix, int dim) {
    out << "video_id,frame";
    for (int i = 0; i < dim; ++i) {
        out << "," << prefix << i;
    }
    out << "\n";
}

inline void write_values(std::ofstream& out, const Vec& values) {
    char buf[32];
    for (double v : values) {
        std::snprintf(buf, sizeof(buf), "%.6g", v);
        out << "," << buf;
    }
    out << "\n";
}

}  // namespace detail

inline SynthOutput make_synthetic(const SynthSpec& spec, const std::string& out_dir) {
    if (spec.subjects < 1 || spec.frames_per_subject < 2) {
        throw std::invalid_argument("make_synthetic: sizes must be positive");
    }
    if (spec.d_img != 300 && spec.d_img != 512) {
        throw std::invalid_argument("make_synthetic: d_img must be 300 or 512");
    }
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    auto rng = make_rng(spec.seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_int_distribution<int> cat_dist(0, 6);
    std::uniform_int_distribution<int> run_len(20, 60);
    std::uniform_int_distribution<int> gap_len(1, std::max(1, spec.max_gap_len));
    std::uniform_real_distribution<double> jitter(-0.12, 0.12);

    // shared category patterns, one draw per dataset
    const int blocks[3] = {spec.d_img, kOpenfaceDim, spec.d_aud};
    std::array<std::array<Vec, 3>, 7> patterns;
    for (int e = 0; e < 7; ++e) {
        for (int b = 0; b < 3; ++b) {
            patterns[e][b].resize(blocks[b]);
            for (double& v : patterns[e][b]) {
                v = spec.signal * unit(rng);
            }
        }
    }
    const auto centers = detail::va_centers();

    std::ofstream img_out(dir / "image_features.csv");
    std::ofstream of_out(dir / "openface.csv");
    std::ofstream aud_out(dir / "audio_features.csv");
    std::ofstream expr_out(dir / "labels_expr.csv");
    std::ofstream va_out(dir / "labels_va.csv");
    std::ofstream truth_out(dir / "truth_expr.csv");
    detail::write_feature_header(img_out, "img_", spec.d_img);
    of_out << "video_id,frame";
    for (int i = 0; i < 2; ++i) of_out << ",gaze_" << i;
    for (int i = 0; i < 17; ++i) of_out << ",au_int_" << i;
    for (int i = 0; i < 18; ++i) of_out << ",au_occ_" << i;
    for (int i = 0; i < 6; ++i) of_out << ",pose_" << i;
    of_out << "\n";
    detail::write_feature_header(aud_out, "aud_", spec.d_aud);
    expr_out << "video_id,frame,expression\n";
    va_out << "video_id,frame,valence,arousal\n";
    truth_out << "video_id,frame,expression\n";

    const fs::path image_dir = dir / "images";
    if (spec.images_per_subject > 0) {
        fs::create_directories(image_dir);
    }

    char vid_buf[16];
    char num_buf[32];
    for (int s = 0; s < spec.subjects; ++s) {
        std::snprintf(vid_buf, sizeof(vid_buf), "s%03d", s);
        const std::string vid(vid_buf);
        // Subject offset drawn inside the span of the category patterns, so
        // one subject's baseline mimics another subject's expressions; a
        // small isotropic part is added on top. Raw features are confounded
        // across subjects, standardized ones are not.
        std::array<double, 7> mix;
        for (double& c : mix) {
            c = unit(rng) / std::sqrt(7.0);
        }
        std::array<Vec, 3> bias;
        for (int b = 0; b < 3; ++b) {
            bias[b].assign(blocks[b], 0.0);
            for (int e = 0; e < 7; ++e) {
                for (int i = 0; i < blocks[b]; ++i) {
                    bias[b][i] += spec.bias * mix[e] * patterns[e][b][i];
                }
            }
            for (int i = 0; i < blocks[b]; ++i) {
                bias[b][i] += 0.2 * spec.bias * unit(rng);
            }
        }
        int state = cat_dist(rng);
        int remaining = run_len(rng);
        int emitted_images = 0;
        int frame = 0;
        while (frame < spec.frames_per_subject) {
            if (remaining == 0) {
                state = cat_dist(rng);
                remaining = run_len(rng);
            }
            --remaining;
            if (spec.gap_rate > 0.0 && u01(rng) < spec.gap_rate) {
                frame += gap_len(rng);  // missing frames: face not identified
                continue;
            }
            std::array<Vec, 3> features;
            for (int b = 0; b < 3; ++b) {
                features[b].resize(blocks[b]);
                for (int i = 0; i < blocks[b]; ++i) {
                    features[b][i] = bias[b][i] + patterns[state][b][i] + spec.noise * unit(rng);
                }
            }
            img_out << vid << "," << frame;
            detail::write_values(img_out, features[0]);
            of_out << vid << "," << frame;
            detail::write_values(of_out, features[1]);
            aud_out << vid << "," << frame;
            detail::write_values(aud_out, features[2]);
            truth_out << vid << "," << frame << "," << state << "\n";

            const double r = u01(rng);
            const bool expr_labeled = r < spec.expr_label_rate;
            const bool va_labeled = expr_labeled || r < spec.expr_label_rate + spec.va_only_rate;
            if (expr_labeled) {
                expr_out << vid << "," << frame << "," << state << "\n";
            }
            if (va_labeled) {
                const double v = centers[state][0] + jitter(rng);
                const double a = centers[state][1] + jitter(rng);
                va_out << vid << "," << frame;
                std::snprintf(num_buf, sizeof(num_buf), ",%.6g,%.6g", v, a);
                va_out << num_buf << "\n";
            }
            if (emitted_images < spec.images_per_subject) {
                PixelImage img;
                img.width = 16;
                img.height = 16;
                img.pixels.resize(16 * 16 * 3);
                for (int y = 0; y < 16; ++y) {
                    for (int x = 0; x < 16; ++x) {
                        const std::size_t i = (static_cast<std::size_t>(y) * 16 + x) * 3;
                        img.pixels[i] = static_cast<std::uint8_t>((x * 16 + state * 9) % 256);
                        img.pixels[i + 1] = static_cast<std::uint8_t>((y * 16 + s * 13) % 256);
                        img.pixels[i + 2] = static_cast<std::uint8_t>((x * y + frame) % 256);
                    }
                }
                write_ppm((image_dir / (vid + "_" + std::to_string(frame) + ".ppm")).string(),
                          img);
                ++emitted_images;
            }
            ++frame;
        }
    }
    img_out.close();
    of_out.close();
    aud_out.close();
    expr_out.close();
    va_out.close();
    truth_out.close();

    SynthOutput out;
    const fs::path abs_dir = fs::absolute(dir);
    out.manifest.image_features = (abs_dir / "image_features.csv").string();
    out.manifest.openface_features = (abs_dir / "openface.csv").string();
    out.manifest.audio_features = (abs_dir / "audio_features.csv").string();
    out.manifest.labels_expr = (abs_dir / "labels_expr.csv").string();
    out.manifest.labels_va = (abs_dir / "labels_va.csv").string();
    if (spec.images_per_subject > 0) {
        out.manifest.image_dir = (abs_dir / "images").string();
    }
    out.manifest.d_img = spec.d_img;
    out.manifest.d_aud = spec.d_aud;
    out.manifest_path = (dir / "manifest.ini").string();
    out.truth_path = (dir / "truth_expr.csv").string();
    // the saved manifest uses bare filenames; the loader resolves them
    // against the manifest's own directory
    DatasetManifest rel = out.manifest;
    rel.image_features = "image_features.csv";
    rel.openface_features = "openface.csv";
    rel.audio_features = "audio_features.csv";
    rel.labels_expr = "labels_expr.csv";
    rel.labels_va = "labels_va.csv";
    if (spec.images_per_subject > 0) {
        rel.image_dir = "images";
    }
    rel.save(out.manifest_path);
    return out;
}

}  // namespace affect
