#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "affect/config.hpp"
#include "affect/datamodel.hpp"
#include "affect/features.hpp"
#include "affect/gru.hpp"
#include "affect/imageprep.hpp"
#include "affect/metrics.hpp"
#include "affect/mlp.hpp"
#include "affect/model_io.hpp"
#include "affect/pca.hpp"
#include "affect/pseudolabel.hpp"
#include "affect/ridge.hpp"

namespace affect {

// Full experiment description: dataset, ablation switches and training
// hyperparameters. The switch combinations reproduce the validation-table row
// semantics (single-frame, multi-frame, +standardize, +audio, +overall
// standardization).
struct ExperimentConfig {
    std::string name = "run";
    std::string manifest_path;
    std::uint64_t seed = 1;
    double val_fraction = 0.2;

    bool multi_frame = true;
    bool per_subject_standardize = true;
    bool global_standardize = false;
    bool use_audio = true;

    int window_seconds = 2;
    int window_step = 6;

    int mlp_hidden = 300;
    int gru_hidden = 64;
    int image_dim = 0;   // 0 = native hidden width; else PCA-reduce intermediates
    int pca_audio = 0;   // 0 = native audio dim; else PCA-reduce audio features
    double pca_fraction = 1.0;
    double ridge_lambda = 1.0;
    int max_gap = 30;
    bool spill_windows = false;

    bool pseudo_labeling = true;
    BalanceStrategy balance;

    TrainConfig single_train{.seed = 1, .epochs = 25, .batch_size = 64, .learning_rate = 1e-3};
    TrainConfig multi_train{.seed = 1, .epochs = 12, .batch_size = 32, .learning_rate = 2e-3};

    static TrainConfig train_section(const IniFile& ini, const std::string& section,
                                     TrainConfig defaults) {
        TrainConfig cfg = defaults;
        cfg.epochs = static_cast<int>(ini.get_int(section + ".epochs", cfg.epochs));
        cfg.batch_size = static_cast<int>(ini.get_int(section + ".batch", cfg.batch_size));
        cfg.learning_rate = ini.get_double(section + ".lr", cfg.learning_rate);
        cfg.clip_norm = ini.get_double(section + ".clip", cfg.clip_norm);
        const std::string opt = ini.get(section + ".optimizer", "adam");
        if (opt == "adam") {
            cfg.optimizer = Optimizer::adam;
        } else if (opt == "sgd") {
            cfg.optimizer = Optimizer::sgd;
        } else {
            throw std::runtime_error("config: unknown optimizer '" + opt + "'");
        }
        return cfg;
    }

    static ExperimentConfig load(const std::string& path) {
        IniFile ini = IniFile::parse_file(path);
        ExperimentConfig c;
        c.name = ini.get("experiment.name", c.name);
        c.manifest_path = ini.require("experiment.manifest");
        {
            std::filesystem::path mp(c.manifest_path);
            if (!mp.is_absolute()) {
                c.manifest_path =
                    (std::filesystem::path(path).parent_path() / mp).string();
            }
        }
        c.seed = static_cast<std::uint64_t>(ini.get_int("experiment.seed", 1));
        c.val_fraction = ini.get_double("experiment.val_fraction", c.val_fraction);
        c.multi_frame = ini.get_bool("ablation.multi_frame", c.multi_frame);
        c.per_subject_standardize =
            ini.get_bool("ablation.per_subject_standardize", c.per_subject_standardize);
        c.global_standardize = ini.get_bool("ablation.global_standardize", c.global_standardize);
        c.use_audio = ini.get_bool("ablation.use_audio", c.use_audio);
        c.window_seconds = static_cast<int>(ini.get_int("window.n_seconds", c.window_seconds));
        c.window_step = static_cast<int>(ini.get_int("window.step", c.window_step));
        c.mlp_hidden = static_cast<int>(ini.get_int("model.mlp_hidden", c.mlp_hidden));
        c.gru_hidden = static_cast<int>(ini.get_int("model.gru_hidden", c.gru_hidden));
        c.image_dim = static_cast<int>(ini.get_int("model.image_dim", c.image_dim));
        c.pca_audio = static_cast<int>(ini.get_int("model.pca_audio", c.pca_audio));
        c.pca_fraction = ini.get_double("model.pca_fraction", c.pca_fraction);
        c.ridge_lambda = ini.get_double("model.ridge_lambda", c.ridge_lambda);
        c.max_gap = static_cast<int>(ini.get_int("model.max_gap", c.max_gap));
        c.spill_windows = ini.get_bool("model.spill_windows", c.spill_windows);
        c.pseudo_labeling = ini.get_bool("pseudo.enabled", c.pseudo_labeling);
        c.balance = BalanceStrategy::parse(ini.get("pseudo.balance", "min"));
        c.single_train = train_section(ini, "train_single", c.single_train);
        c.multi_train = train_section(ini, "train_multi", c.multi_train);
        c.apply_seed();
        return c;
    }

    void apply_seed() {
        single_train.seed = seed;
        multi_train.seed = seed ^ 0x5bd1e995u;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) {
            throw std::runtime_error(path + ": cannot open for writing");
        }
        out << "[experiment]\n";
        out << "name = " << name << "\n";
        out << "manifest = " << manifest_path << "\n";
        out << "seed = " << seed << "\n";
        out << "val_fraction = " << val_fraction << "\n\n";
        out << "[ablation]\n";
        out << "multi_frame = " << (multi_frame ? "true" : "false") << "\n";
        out << "per_subject_standardize = " << (per_subject_standardize ? "true" : "false")
            << "\n";
        out << "global_standardize = " << (global_standardize ? "true" : "false") << "\n";
        out << "use_audio = " << (use_audio ? "true" : "false") << "\n\n";
        out << "[window]\n";
        out << "n_seconds = " << window_seconds << "\n";
        out << "step = " << window_step << "\n\n";
        out << "[model]\n";
        out << "mlp_hidden = " << mlp_hidden << "\n";
        out << "gru_hidden = " << gru_hidden << "\n";
        out << "image_dim = " << image_dim << "\n";
        out << "pca_audio = " << pca_audio << "\n";
        out << "pca_fraction = " << pca_fraction << "\n";
        out << "ridge_lambda = " << ridge_lambda << "\n";
        out << "max_gap = " << max_gap << "\n";
        out << "spill_windows = " << (spill_windows ? "true" : "false") << "\n\n";
        out << "[pseudo]\n";
        out << "enabled = " << (pseudo_labeling ? "true" : "false") << "\n";
        out << "balance = " << balance.to_string() << "\n\n";
        auto train_block = [&](const char* section, const TrainConfig& cfg) {
            out << "[" << section << "]\n";
            out << "epochs = " << cfg.epochs << "\n";
            out << "batch = " << cfg.batch_size << "\n";
            out << "lr = " << cfg.learning_rate << "\n";
            out << "optimizer = " << (cfg.optimizer == Optimizer::adam ? "adam" : "sgd") << "\n";
            out << "clip = " << cfg.clip_norm << "\n";
        };
        train_block("train_single", single_train);
        out << "\n";
        train_block("train_multi", multi_train);
    }
};

// Ablation presets mirroring the validation-table row archetypes.
inline ExperimentConfig apply_variant(ExperimentConfig base, const std::string& variant) {
    base.name = variant;
    if (variant == "single") {
        base.multi_frame = false;
        base.per_subject_standardize = false;
        base.global_standardize = false;
        base.use_audio = false;
    } else if (variant == "multi") {
        base.multi_frame = true;
        base.per_subject_standardize = false;
        base.global_standardize = false;
        base.use_audio = false;
    } else if (variant == "multi-std") {
        base.multi_frame = true;
        base.per_subject_standardize = true;
        base.global_standardize = false;
        base.use_audio = false;
    } else if (variant == "modal-std") {
        base.multi_frame = true;
        base.per_subject_standardize = true;
        base.global_standardize = false;
        base.use_audio = true;
    } else if (variant == "modal-std-global") {
        base.multi_frame = true;
        base.per_subject_standardize = true;
        base.global_standardize = true;
        base.use_audio = true;
    } else {
        throw std::runtime_error("unknown ablation variant '" + variant + "'");
    }
    return base;
}

inline const std::vector<std::string>& all_variants() {
    static const std::vector<std::string> v{"single", "multi", "multi-std", "modal-std",
                                            "modal-std-global"};
    return v;
}

struct PipelineResult {
    MetricsReport report;
    bool used_gru = false;
    long train_windows = 0;
    long val_windows = 0;
    int effective_image_dim = 0;
    std::string run_dir;
};

namespace detail {

struct RunLog {
    std::ofstream file;
    bool echo = true;

    explicit RunLog(const std::string& path, bool echo_to_stdout)
        : file(path), echo(echo_to_stdout) {}

    void line(const std::string& text) {
        file << text << "\n";
        file.flush();
        if (echo) {
            std::cout << text << "\n";
        }
    }
};

template <typename Fn>
auto pipeline_stage(const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        throw std::runtime_error("stage " + name + ": " + e.what());
    }
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace detail

// Write one run's report.csv: a single data row with the switch columns and
// the final metrics.
inline void save_report_csv(const std::string& path, const ExperimentConfig& cfg,
                            const PipelineResult& result) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error(path + ": cannot open for writing");
    }
    out << "name,mode,multi_frame,standardize,global_standardize,audio,gru_size,image_dim,"
           "score,macro_f1,accuracy,ccc_valence,ccc_arousal,train_windows,val_windows\n";
    out << cfg.name << "," << (result.used_gru ? "gru" : "single") << ","
        << (cfg.multi_frame ? 1 : 0) << "," << (cfg.per_subject_standardize ? 1 : 0) << ","
        << (cfg.global_standardize ? 1 : 0) << "," << (cfg.use_audio ? 1 : 0) << ","
        << (cfg.window_seconds * kFps / cfg.window_step) << "," << result.effective_image_dim
        << "," << detail::fmt(result.report.expression_score) << ","
        << detail::fmt(result.report.macro_f1) << "," << detail::fmt(result.report.accuracy)
        << "," << (result.report.ccc_valence ? detail::fmt(*result.report.ccc_valence) : "")
        << "," << (result.report.ccc_arousal ? detail::fmt(*result.report.ccc_arousal) : "")
        << "," << result.train_windows << "," << result.val_windows << "\n";
}

// Execute the full pipeline for one configuration, writing every stage's
// artifacts under run_dir.
inline PipelineResult run_pipeline(const ExperimentConfig& config, const std::string& run_dir,
                                   bool echo_log = false) {
    namespace fs = std::filesystem;
    fs::create_directories(run_dir);
    const fs::path dir(run_dir);
    detail::RunLog log((dir / "run.log").string(), echo_log);
    config.save((dir / "config.ini").string());

    PipelineResult result;
    result.run_dir = run_dir;

    // load + assemble + validate
    DatasetManifest manifest;
    std::vector<SubjectSequence> sequences;
    detail::pipeline_stage("load", [&] {
        manifest = DatasetManifest::load(config.manifest_path);
        auto records = load_streams(manifest);
        sequences = assemble_sequences(std::move(records));
        const auto report = validate_dataset(sequences);
        std::ofstream vout((dir / "validation.txt").string());
        vout << render_validation(report);
        log.line("stage load: " + std::to_string(sequences.size()) + " videos, " +
                 std::to_string(report.total_frames) + " frames (invalid " +
                 std::to_string(report.invalid_frames) + ")");
        return 0;
    });

    // frame-gap interpolation, per-video segmentation
    std::vector<SubjectSequence> segments;
    detail::pipeline_stage("interpolate", [&] {
        for (const auto& seq : sequences) {
            for (auto& seg : interpolate_gaps(seq, config.max_gap)) {
                segments.push_back(std::move(seg));
            }
        }
        log.line("stage interpolate: " + std::to_string(segments.size()) + " segments");
        return 0;
    });
    sequences.clear();

    // train/validation split by video
    std::set<std::string> val_videos;
    detail::pipeline_stage("split", [&] {
        std::vector<std::string> videos;
        for (const auto& seg : segments) {
            if (videos.empty() || videos.back() != seg.video_id) {
                videos.push_back(seg.video_id);
            }
        }
        std::sort(videos.begin(), videos.end());
        videos.erase(std::unique(videos.begin(), videos.end()), videos.end());
        if (videos.size() < 2) {
            throw std::runtime_error("need at least 2 videos for a train/validation split");
        }
        auto rng = make_rng(config.seed ^ 0xa5a5a5a5ull);
        std::shuffle(videos.begin(), videos.end(), rng);
        long val_count = std::lround(config.val_fraction * static_cast<double>(videos.size()));
        val_count = std::clamp<long>(val_count, 1, static_cast<long>(videos.size()) - 1);
        val_videos.insert(videos.begin(), videos.begin() + val_count);
        log.line("stage split: train " + std::to_string(videos.size() - val_count) +
                 " videos, val " + std::to_string(val_count) + " videos");
        return 0;
    });
    auto is_train_segment = [&](const SubjectSequence& seg) {
        return val_videos.count(seg.video_id) == 0;
    };

    // optional PCA reduction of audio features
    int audio_dim = manifest.has_audio() ? manifest.d_aud : 0;
    detail::pipeline_stage("pca-audio", [&] {
        if (!config.use_audio || config.pca_audio <= 0 || !manifest.has_audio() ||
            config.pca_audio >= audio_dim) {
            log.line("stage pca-audio: skipped");
            return 0;
        }
        long train_rows = 0;
        for (const auto& seg : segments) {
            if (is_train_segment(seg)) {
                train_rows += static_cast<long>(seg.frames.size());
            }
        }
        Mat samples(static_cast<int>(train_rows), audio_dim);
        int r = 0;
        for (const auto& seg : segments) {
            if (!is_train_segment(seg)) {
                continue;
            }
            for (const auto& f : seg.frames) {
                std::copy(f.audio_feature.begin(), f.audio_feature.end(), samples.row(r++));
            }
        }
        auto model = pca_fit(samples, config.pca_audio, config.pca_fraction, config.seed);
        save_pca_csv((dir / "pca_audio.csv").string(), model);
        for (auto& seg : segments) {
            for (auto& f : seg.frames) {
                Mat row(1, audio_dim);
                std::copy(f.audio_feature.begin(), f.audio_feature.end(), row.row(0));
                const Mat projected = pca_transform(model, row);
                f.audio_feature.assign(projected.row(0), projected.row(0) + config.pca_audio);
            }
        }
        audio_dim = config.pca_audio;
        log.line("stage pca-audio: reduced to " + std::to_string(audio_dim) + " dims from " +
                 std::to_string(train_rows) + " train rows");
        return 0;
    });

    // color correction of cropped face images, when provided
    detail::pipeline_stage("prep-image", [&] {
        if (manifest.image_dir.empty()) {
            log.line("stage prep-image: skipped");
            return 0;
        }
        const fs::path out_dir = dir / "prep";
        fs::create_directories(out_dir);
        ColorCorrectionConfig cc;
        long count = 0;
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(manifest.image_dir)) {
            if (entry.path().extension() == ".ppm") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            const PixelImage img = read_ppm(file.string());
            write_ppm((out_dir / file.filename()).string(), correct_color(img, cc));
            ++count;
        }
        log.line("stage prep-image: " + std::to_string(count) + " images corrected");
        return 0;
    });

    // single-frame model on labeled train frames
    std::vector<TrainingFrame> labeled;
    MlpParams mlp;
    detail::pipeline_stage("train-single", [&] {
        for (const auto& seg : segments) {
            if (!is_train_segment(seg)) {
                continue;
            }
            for (const auto& f : seg.frames) {
                if (f.expression) {
                    labeled.push_back(
                        {f.video_id, f.frame_index, single_frame_input(f), *f.expression});
                }
            }
        }
        if (labeled.empty()) {
            throw std::runtime_error("no expression-labeled training frames");
        }
        std::vector<double> losses;
        mlp = retrain_with_pseudo(labeled, {}, config.mlp_hidden, config.single_train,
                                  config.balance, Activation::relu, &losses);
        log.line("stage train-single: " + std::to_string(labeled.size()) +
                 " labeled frames, final loss " + detail::fmt(losses.empty() ? 0.0 : losses.back()));
        return 0;
    });

    // pseudo-labeling round and retraining
    detail::pipeline_stage("pseudo-label", [&] {
        if (!config.pseudo_labeling) {
            log.line("stage pseudo-label: disabled");
            return 0;
        }
        std::vector<FrameRecord> candidates;
        for (const auto& seg : segments) {
            if (!is_train_segment(seg)) {
                continue;
            }
            for (const auto& f : seg.frames) {
                candidates.push_back(f);
            }
        }
        auto pseudo = generate_pseudo_labels(mlp, candidates);
        save_pseudo_labels_csv((dir / "pseudo_labels.csv").string(), pseudo);
        std::vector<TrainingFrame> accepted;
        std::map<std::pair<std::string, int>, const FrameRecord*> by_key;
        for (const auto& seg : segments) {
            for (const auto& f : seg.frames) {
                by_key[{f.video_id, f.frame_index}] = &f;
            }
        }
        long accepted_count = 0;
        for (const auto& item : pseudo.items) {
            if (!item.accepted) {
                continue;
            }
            const FrameRecord* f = by_key.at({item.video_id, item.frame_index});
            accepted.push_back({f->video_id, f->frame_index, single_frame_input(*f),
                                item.category});
            ++accepted_count;
        }
        std::vector<double> losses;
        mlp = retrain_with_pseudo(labeled, accepted, config.mlp_hidden, config.single_train,
                                  config.balance, Activation::relu, &losses);
        log.line("stage pseudo-label: " + std::to_string(pseudo.items.size()) + " candidates, " +
                 std::to_string(accepted_count) + " accepted, " +
                 std::to_string(pseudo.skipped) + " skipped");
        return 0;
    });
    save_mlp((dir / "mlp.bin").string(), mlp);

    // intermediate features, optional PCA reduction of the image side
    std::vector<Mat> intermediates(segments.size());
    int image_dim_effective = config.mlp_hidden;
    detail::pipeline_stage("intermediates", [&] {
        for (std::size_t s = 0; s < segments.size(); ++s) {
            const auto& seg = segments[s];
            Mat inputs(static_cast<int>(seg.frames.size()),
                       static_cast<int>(single_frame_input(seg.frames.front()).size()));
            for (std::size_t i = 0; i < seg.frames.size(); ++i) {
                const Vec x = single_frame_input(seg.frames[i]);
                std::copy(x.begin(), x.end(), inputs.row(static_cast<int>(i)));
            }
            intermediates[s] = extract_intermediate(mlp, inputs);
        }
        if (config.image_dim > 0 && config.image_dim < config.mlp_hidden) {
            long train_rows = 0;
            for (std::size_t s = 0; s < segments.size(); ++s) {
                if (is_train_segment(segments[s])) {
                    train_rows += intermediates[s].rows;
                }
            }
            Mat samples(static_cast<int>(train_rows), config.mlp_hidden);
            int r = 0;
            for (std::size_t s = 0; s < segments.size(); ++s) {
                if (!is_train_segment(segments[s])) {
                    continue;
                }
                for (int i = 0; i < intermediates[s].rows; ++i) {
                    std::copy(intermediates[s].row(i), intermediates[s].row(i) + config.mlp_hidden,
                              samples.row(r++));
                }
            }
            auto model = pca_fit(samples, config.image_dim, config.pca_fraction, config.seed);
            save_pca_csv((dir / "pca_image.csv").string(), model);
            for (auto& inter : intermediates) {
                inter = pca_transform(model, inter);
            }
            image_dim_effective = config.image_dim;
        }
        log.line("stage intermediates: image dim " + std::to_string(image_dim_effective));
        return 0;
    });
    result.effective_image_dim = image_dim_effective;

    const bool with_audio = config.use_audio && manifest.has_audio();

    // fused per-frame features for the multi-frame model
    auto fused_segment = [&](std::size_t s) {
        const auto& seg = segments[s];
        const int base = image_dim_effective + (with_audio ? audio_dim : 0);
        Mat fused(static_cast<int>(seg.frames.size()), base);
        for (std::size_t i = 0; i < seg.frames.size(); ++i) {
            double* dst = fused.row(static_cast<int>(i));
            std::copy(intermediates[s].row(static_cast<int>(i)),
                      intermediates[s].row(static_cast<int>(i)) + image_dim_effective, dst);
            if (with_audio) {
                std::copy(seg.frames[i].audio_feature.begin(), seg.frames[i].audio_feature.end(),
                          dst + image_dim_effective);
            }
        }
        return fused;
    };

    // classification predictions on the validation split
    std::vector<int> truth;
    std::vector<int> predicted;
    std::vector<std::pair<std::string, int>> pred_keys;
    detail::pipeline_stage(config.multi_frame ? "train-multi" : "predict-single", [&] {
        if (config.multi_frame) {
            WindowConfig wcfg;
            wcfg.n_seconds = config.window_seconds;
            wcfg.step = config.window_step;
            wcfg.dim_image = image_dim_effective;
            wcfg.dim_audio = with_audio ? audio_dim : 0;
            WindowBlocks blocks;
            blocks.include_raw = true;
            blocks.include_per_subject_std = config.per_subject_standardize;
            Moments global_moments;
            if (config.global_standardize) {
                std::vector<Mat> train_fused;
                for (std::size_t s = 0; s < segments.size(); ++s) {
                    if (is_train_segment(segments[s])) {
                        train_fused.push_back(fused_segment(s));
                    }
                }
                std::vector<const Mat*> ptrs;
                for (const auto& m : train_fused) {
                    ptrs.push_back(&m);
                }
                global_moments = compute_pooled_moments(ptrs);
                blocks.global_moments = &global_moments;
            }
            WindowBatch train_batch;
            WindowBatch val_batch;
            for (std::size_t s = 0; s < segments.size(); ++s) {
                const auto& seg = segments[s];
                std::vector<std::optional<int>> labels(seg.frames.size());
                for (std::size_t i = 0; i < seg.frames.size(); ++i) {
                    labels[i] = seg.frames[i].expression;
                }
                const Mat fused = fused_segment(s);
                make_windows(seg.video_id, seg.frames.front().frame_index, fused, labels, wcfg,
                             is_train_segment(seg) ? train_batch : val_batch, blocks);
            }
            result.train_windows = train_batch.count();
            result.val_windows = val_batch.count();
            if (config.spill_windows) {
                save_windows((dir / "windows_train.bin").string(), train_batch);
                save_windows((dir / "windows_val.bin").string(), val_batch);
            }
            if (train_batch.count() == 0 || val_batch.count() == 0) {
                throw std::runtime_error("no train or validation windows were produced");
            }
            log.line("stage windows: train " + std::to_string(train_batch.count()) + ", val " +
                     std::to_string(val_batch.count()) + " (T=" +
                     std::to_string(train_batch.timesteps) + ", F=" +
                     std::to_string(train_batch.feature_dim) + ")");
            std::vector<double> losses;
            GruParams gru = train_multi_frame(train_batch, config.gru_hidden, config.multi_train,
                                              GruLoss::cross_entropy, &losses);
            save_gru((dir / "gru.bin").string(), gru);
            result.used_gru = true;
            for (int w = 0; w < val_batch.count(); ++w) {
                truth.push_back(val_batch.labels[w]);
                predicted.push_back(
                    predict_expression(gru, val_batch.window(w), val_batch.timesteps).category);
                pred_keys.push_back(val_batch.keys[w]);
            }
            log.line("stage train-multi: final loss " +
                     detail::fmt(losses.empty() ? 0.0 : losses.back()));
        } else {
            for (std::size_t s = 0; s < segments.size(); ++s) {
                const auto& seg = segments[s];
                if (is_train_segment(seg)) {
                    continue;
                }
                for (const auto& f : seg.frames) {
                    if (!f.expression) {
                        continue;
                    }
                    truth.push_back(*f.expression);
                    predicted.push_back(predict_expression(mlp, single_frame_input(f)).category);
                    pred_keys.emplace_back(f.video_id, f.frame_index);
                }
            }
            log.line("stage predict-single: " + std::to_string(predicted.size()) +
                     " validation frames");
        }
        return 0;
    });

    // valence-arousal regression on single-frame features
    std::optional<double> ccc_v;
    std::optional<double> ccc_a;
    detail::pipeline_stage("valence-arousal", [&] {
        if (manifest.labels_va.empty()) {
            log.line("stage valence-arousal: skipped (no VA labels)");
            return 0;
        }
        auto va_input = [&](const FrameRecord& f) {
            Vec x = single_frame_input(f);
            if (with_audio) {
                x.insert(x.end(), f.audio_feature.begin(), f.audio_feature.end());
            }
            return x;
        };
        std::vector<const FrameRecord*> train_frames;
        std::vector<const FrameRecord*> val_frames;
        for (const auto& seg : segments) {
            for (const auto& f : seg.frames) {
                if (!f.valence || !f.arousal) {
                    continue;
                }
                (is_train_segment(seg) ? train_frames : val_frames).push_back(&f);
            }
        }
        if (train_frames.size() < 2 || val_frames.size() < 2) {
            log.line("stage valence-arousal: skipped (too few VA-labeled frames)");
            return 0;
        }
        const int dim = static_cast<int>(va_input(*train_frames.front()).size());
        Mat x(static_cast<int>(train_frames.size()), dim);
        Mat y(static_cast<int>(train_frames.size()), 2);
        for (std::size_t i = 0; i < train_frames.size(); ++i) {
            const Vec row = va_input(*train_frames[i]);
            std::copy(row.begin(), row.end(), x.row(static_cast<int>(i)));
            y(static_cast<int>(i), 0) = *train_frames[i]->valence;
            y(static_cast<int>(i), 1) = *train_frames[i]->arousal;
        }
        const RidgeParams ridge = ridge_fit(x, y, config.ridge_lambda);
        save_ridge((dir / "ridge.bin").string(), ridge);
        Mat xv(static_cast<int>(val_frames.size()), dim);
        std::vector<double> tv, ta;
        for (std::size_t i = 0; i < val_frames.size(); ++i) {
            const Vec row = va_input(*val_frames[i]);
            std::copy(row.begin(), row.end(), xv.row(static_cast<int>(i)));
            tv.push_back(*val_frames[i]->valence);
            ta.push_back(*val_frames[i]->arousal);
        }
        const Mat pred = ridge_predict(ridge, xv);
        std::vector<double> pv(pred.rows), pa(pred.rows);
        for (int r = 0; r < pred.rows; ++r) {
            pv[r] = pred(r, 0);
            pa[r] = pred(r, 1);
        }
        ccc_v = ccc(tv, pv);
        ccc_a = ccc(ta, pa);
        log.line("stage valence-arousal: ccc " + detail::fmt(*ccc_v) + " / " +
                 detail::fmt(*ccc_a) + " on " + std::to_string(val_frames.size()) + " frames");
        return 0;
    });

    // final metrics + artifacts
    detail::pipeline_stage("evaluate", [&] {
        if (truth.empty()) {
            throw std::runtime_error("no validation predictions to evaluate");
        }
        auto cm = classification_metrics(truth, predicted);
        result.report = make_report(cm);
        result.report.ccc_valence = ccc_v;
        result.report.ccc_arousal = ccc_a;
        {
            std::ofstream pout((dir / "predictions.csv").string());
            pout << "video_id,frame,expression\n";
            for (std::size_t i = 0; i < pred_keys.size(); ++i) {
                pout << pred_keys[i].first << "," << pred_keys[i].second << "," << predicted[i]
                     << "\n";
            }
        }
        save_report_csv((dir / "report.csv").string(), config, result);
        {
            std::ofstream tout((dir / "report.txt").string());
            tout << render_report({{config.name, result.report}});
            tout << render_confusion(result.report.confusion);
        }
        log.line("stage evaluate: score " + detail::fmt(result.report.expression_score) +
                 " f1 " + detail::fmt(result.report.macro_f1) + " acc " +
                 detail::fmt(result.report.accuracy));
        return 0;
    });
    return result;
}

// ---- standalone evaluation (the `evaluate` subcommand) -------------------

struct LabeledKey {
    std::string video_id;
    int frame;
};

// predictions.csv: video_id,frame,expression[,valence,arousal]
struct PredictionsFile {
    std::map<std::pair<std::string, int>, int> expression;
    std::map<std::pair<std::string, int>, std::array<double, 2>> va;
};

inline PredictionsFile load_predictions_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(path + ": cannot open");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error(path + ": empty file");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    const bool with_va = line == "video_id,frame,expression,valence,arousal";
    if (!with_va && line != "video_id,frame,expression") {
        throw std::runtime_error(path + ":1: unexpected header");
    }
    PredictionsFile preds;
    std::vector<std::string_view> fields;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        detail::split_csv(line, fields);
        if (fields.size() != (with_va ? 5u : 3u)) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": wrong field count");
        }
        const std::string vid(fields[0]);
        const int frame = static_cast<int>(detail::parse_int(fields[1], path, line_no));
        const int expr = static_cast<int>(detail::parse_int(fields[2], path, line_no));
        if (expr < 0 || expr > 6) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expression out of range {0..6}");
        }
        preds.expression[{vid, frame}] = expr;
        if (with_va) {
            preds.va[{vid, frame}] = {detail::parse_double(fields[3], path, line_no),
                                      detail::parse_double(fields[4], path, line_no)};
        }
    }
    return preds;
}

// Joins predictions with truth labels on (video_id, frame) and computes the
// competition metrics over the intersection.
inline MetricsReport evaluate_predictions(const std::string& pred_path,
                                          const std::string& truth_expr_path,
                                          const std::string& truth_va_path = "") {
    const PredictionsFile preds = load_predictions_csv(pred_path);
    std::vector<int> truth;
    std::vector<int> predicted;
    {
        detail::StreamSchema schema;
        schema.stream_name = "labels_expr";
        schema.columns = {"expression"};
        detail::read_stream(truth_expr_path, schema,
                            [&](const std::string& vid, int frame, const Vec& v, int line_no) {
                                const double e = v[0];
                                if (e != std::floor(e) || e < 0 || e > 6) {
                                    throw std::runtime_error(
                                        truth_expr_path + ":" + std::to_string(line_no) +
                                        ": expression label out of range {0..6}");
                                }
                                auto it = preds.expression.find({vid, frame});
                                if (it != preds.expression.end()) {
                                    truth.push_back(static_cast<int>(e));
                                    predicted.push_back(it->second);
                                }
                            });
    }
    if (truth.empty()) {
        throw std::runtime_error("evaluate: no overlapping (video_id, frame) keys between "
                                 "predictions and truth");
    }
    MetricsReport report = make_report(classification_metrics(truth, predicted));
    if (!truth_va_path.empty() && !preds.va.empty()) {
        std::vector<double> tv, ta, pv, pa;
        detail::StreamSchema schema;
        schema.stream_name = "labels_va";
        schema.columns = {"valence", "arousal"};
        detail::read_stream(truth_va_path, schema,
                            [&](const std::string& vid, int frame, const Vec& v, int) {
                                auto it = preds.va.find({vid, frame});
                                if (it != preds.va.end()) {
                                    tv.push_back(v[0]);
                                    ta.push_back(v[1]);
                                    pv.push_back(it->second[0]);
                                    pa.push_back(it->second[1]);
                                }
                            });
        if (tv.size() >= 2) {
            report.ccc_valence = ccc(tv, pv);
            report.ccc_arousal = ccc(ta, pa);
        }
    }
    return report;
}

// ---- ablation comparison ---------------------------------------------------

struct AblationRow {
    std::string name;
    bool ok = false;
    bool multi_frame = false;
    bool standardize = false;
    bool global_standardize = false;
    bool audio = false;
    int gru_size = 0;
    int image_dim = 0;
    double score = 0.0;
    double macro_f1 = 0.0;
    double accuracy = 0.0;
};

inline AblationRow read_run_report(const std::string& run_dir) {
    AblationRow row;
    row.name = std::filesystem::path(run_dir).filename().string();
    const std::string path = (std::filesystem::path(run_dir) / "report.csv").string();
    std::ifstream in(path);
    if (!in) {
        return row;  // marked failed
    }
    std::string header, line;
    if (!std::getline(in, header) || !std::getline(in, line)) {
        return row;
    }
    std::vector<std::string_view> fields;
    detail::split_csv(line, fields);
    if (fields.size() < 15) {
        return row;
    }
    try {
        row.name = std::string(fields[0]);
        row.multi_frame = fields[2] == "1";
        row.standardize = fields[3] == "1";
        row.global_standardize = fields[4] == "1";
        row.audio = fields[5] == "1";
        row.gru_size = static_cast<int>(detail::parse_int(fields[6], path, 2));
        row.image_dim = static_cast<int>(detail::parse_int(fields[7], path, 2));
        row.score = detail::parse_double(fields[8], path, 2);
        row.macro_f1 = detail::parse_double(fields[9], path, 2);
        row.accuracy = detail::parse_double(fields[10], path, 2);
        row.ok = true;
    } catch (const std::exception&) {
        row.ok = false;
    }
    return row;
}

// One row per run, switch columns plus Score/F1/Acc, sorted by Score
// descending; runs with a missing or unreadable report are marked failed.
inline std::string report_ablation(const std::vector<std::string>& run_dirs) {
    std::vector<AblationRow> rows;
    rows.reserve(run_dirs.size());
    for (const auto& d : run_dirs) {
        rows.push_back(read_run_report(d));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const AblationRow& a, const AblationRow& b) {
        if (a.ok != b.ok) {
            return a.ok;
        }
        return a.score > b.score;
    });
    std::size_t name_w = 6;
    for (const auto& r : rows) {
        name_w = std::max(name_w, r.name.size());
    }
    std::ostringstream out;
    out << detail::pad("Method", name_w + 2) << detail::pad("Multi", 7) << detail::pad("Std", 5)
        << detail::pad("Gstd", 6) << detail::pad("Audio", 7) << detail::pad("GRUsz", 7)
        << detail::pad("Imgdim", 8) << detail::pad("Score", 8) << detail::pad("F1", 8)
        << detail::pad("Acc", 8) << "\n";
    for (const auto& r : rows) {
        out << detail::pad(r.name, name_w + 2);
        if (!r.ok) {
            out << "FAILED\n";
            continue;
        }
        out << detail::pad(r.multi_frame ? "x" : "-", 7) << detail::pad(r.standardize ? "x" : "-", 5)
            << detail::pad(r.global_standardize ? "x" : "-", 6)
            << detail::pad(r.audio ? "x" : "-", 7)
            << detail::pad(std::to_string(r.gru_size), 7)
            << detail::pad(std::to_string(r.image_dim), 8) << detail::pad(detail::fmt3(r.score), 8)
            << detail::pad(detail::fmt3(r.macro_f1), 8) << detail::pad(detail::fmt3(r.accuracy), 8)
            << "\n";
    }
    return out.str();
}

}  // namespace affect
