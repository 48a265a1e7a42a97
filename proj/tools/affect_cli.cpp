// Command-line front end for the affect pipeline: dataset synthesis, image
// tone correction, PCA fitting, single/multi-frame training, pseudo-labeling,
// evaluation and ablation sweeps.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "affect/imageprep.hpp"
#include "affect/model_io.hpp"
#include "affect/pca.hpp"
#include "affect/pipeline.hpp"
#include "affect/pseudolabel.hpp"
#include "affect/synth.hpp"

namespace fs = std::filesystem;

namespace {

std::string default_run_dir(const std::string& tag) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_buf{};
    localtime_r(&t, &tm_buf);
    std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm_buf);
    return (fs::path("runs") / (std::string(buf) + "-" + tag)).string();
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(text);
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

affect::ExperimentConfig load_config(const std::string& path, long seed_override) {
    auto cfg = affect::ExperimentConfig::load(path);
    if (seed_override >= 0) {
        cfg.seed = static_cast<std::uint64_t>(seed_override);
        cfg.apply_seed();
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-modal facial expression and valence-arousal pipeline"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    affect::SynthSpec synth_spec;
    std::string synth_out = "synth";
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--subjects", synth_spec.subjects, "number of videos");
    synth->add_option("--frames", synth_spec.frames_per_subject, "frames per video");
    synth->add_option("--dimg", synth_spec.d_img, "image feature dimension (300 or 512)");
    synth->add_option("--daud", synth_spec.d_aud, "audio feature dimension");
    synth->add_option("--bias", synth_spec.bias, "per-subject bias magnitude");
    synth->add_option("--signal", synth_spec.signal, "category signal magnitude");
    synth->add_option("--noise", synth_spec.noise, "per-frame noise magnitude");
    synth->add_option("--expr-rate", synth_spec.expr_label_rate, "expression label rate");
    synth->add_option("--va-rate", synth_spec.va_only_rate, "VA-only label rate");
    synth->add_option("--gap-rate", synth_spec.gap_rate, "missing-frame gap rate");
    synth->add_option("--images", synth_spec.images_per_subject, "PPM images per video");
    synth->add_option("--seed", synth_spec.seed, "generator seed");
    synth->callback([&] {
        auto out = affect::make_synthetic(synth_spec, synth_out);
        std::cout << "dataset written to " << synth_out << "\n";
        std::cout << "manifest: " << out.manifest_path << "\n";
    });

    // ---- prep-image ----
    auto* prep = app.add_subcommand("prep-image", "tone-correct cropped face images");
    std::string prep_in, prep_out, prep_tiles = "8x8";
    affect::ColorCorrectionConfig prep_cfg;
    prep->add_option("--in-dir", prep_in, "input directory of PPM images")->required();
    prep->add_option("--out-dir", prep_out, "output directory")->required();
    prep->add_option("--hue", prep_cfg.fixed_hue, "fixed hue in half-degrees [0,179]");
    prep->add_option("--sat-mean", prep_cfg.target_saturation_mean, "saturation target mean");
    prep->add_option("--val-mean", prep_cfg.target_value_mean, "value target mean");
    prep->add_option("--clip", prep_cfg.clahe_clip_limit, "CLAHE clip limit");
    prep->add_option("--tiles", prep_tiles, "CLAHE tile grid, e.g. 8x8");
    prep->callback([&] {
        const auto x = prep_tiles.find('x');
        if (x == std::string::npos) {
            throw std::runtime_error("--tiles expects WxH, e.g. 8x8");
        }
        prep_cfg.clahe_tiles_x = std::stoi(prep_tiles.substr(0, x));
        prep_cfg.clahe_tiles_y = std::stoi(prep_tiles.substr(x + 1));
        fs::create_directories(prep_out);
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(prep_in)) {
            if (entry.path().extension() == ".ppm") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            const auto img = affect::read_ppm(file.string());
            affect::write_ppm((fs::path(prep_out) / file.filename()).string(),
                              affect::correct_color(img, prep_cfg));
        }
        std::cout << files.size() << " images corrected into " << prep_out << "\n";
    });

    // ---- fit-pca ----
    auto* fitpca = app.add_subcommand("fit-pca", "fit a PCA model on a feature stream");
    std::string pca_manifest, pca_stream = "audio", pca_out = "pca.csv";
    int pca_components = 300;
    double pca_fraction = 1.0;
    std::uint64_t pca_seed = 1;
    fitpca->add_option("--manifest", pca_manifest, "dataset manifest")->required();
    fitpca->add_option("--stream", pca_stream, "audio or image");
    fitpca->add_option("--components", pca_components, "number of components");
    fitpca->add_option("--fraction", pca_fraction, "row sample fraction in (0,1]");
    fitpca->add_option("--seed", pca_seed, "sampling seed");
    fitpca->add_option("--out", pca_out, "output CSV path");
    fitpca->callback([&] {
        const auto manifest = affect::DatasetManifest::load(pca_manifest);
        const auto records = affect::load_streams(manifest);
        const bool audio = pca_stream == "audio";
        if (!audio && pca_stream != "image") {
            throw std::runtime_error("--stream must be 'audio' or 'image'");
        }
        long rows = 0;
        int dim = audio ? manifest.d_aud : manifest.d_img;
        for (const auto& r : records) {
            const auto& block = audio ? r.audio_feature : r.image_feature;
            if (!block.empty()) {
                ++rows;
            }
        }
        affect::Mat samples(static_cast<int>(rows), dim);
        int row = 0;
        for (const auto& r : records) {
            const auto& block = audio ? r.audio_feature : r.image_feature;
            if (!block.empty()) {
                std::copy(block.begin(), block.end(), samples.row(row++));
            }
        }
        const auto model = affect::pca_fit(samples, pca_components, pca_fraction, pca_seed);
        affect::save_pca_csv(pca_out, model);
        std::cout << "pca model (" << pca_components << " components, " << rows
                  << " rows) written to " << pca_out << "\n";
    });

    // ---- train-single / train-multi ----
    std::string ts_config, ts_out;
    long ts_seed = -1;
    auto* train_single = app.add_subcommand("train-single", "train the single-frame model");
    train_single->add_option("--config", ts_config, "experiment config")->required();
    train_single->add_option("--seed", ts_seed, "seed override");
    train_single->add_option("--out", ts_out, "run directory");
    train_single->callback([&] {
        auto cfg = load_config(ts_config, ts_seed);
        cfg.multi_frame = false;
        const std::string dir = ts_out.empty() ? default_run_dir(cfg.name) : ts_out;
        const auto result = affect::run_pipeline(cfg, dir, true);
        std::cout << affect::render_report({{cfg.name, result.report}});
    });

    std::string tm_config, tm_out;
    long tm_seed = -1;
    auto* train_multi = app.add_subcommand("train-multi", "train the multi-frame GRU model");
    train_multi->add_option("--config", tm_config, "experiment config")->required();
    train_multi->add_option("--seed", tm_seed, "seed override");
    train_multi->add_option("--out", tm_out, "run directory");
    train_multi->callback([&] {
        auto cfg = load_config(tm_config, tm_seed);
        cfg.multi_frame = true;
        const std::string dir = tm_out.empty() ? default_run_dir(cfg.name) : tm_out;
        const auto result = affect::run_pipeline(cfg, dir, true);
        std::cout << affect::render_report({{cfg.name, result.report}});
    });

    // ---- pseudo-label ----
    auto* pseudo = app.add_subcommand("pseudo-label", "generate circumplex-filtered pseudo labels");
    std::string pl_model, pl_manifest, pl_out = "pseudo_labels.csv", pl_balance = "min";
    pseudo->add_option("--model", pl_model, "trained single-frame model (mlp.bin)")->required();
    pseudo->add_option("--in", pl_manifest, "dataset manifest")->required();
    pseudo->add_option("--out", pl_out, "output CSV");
    pseudo->add_option("--balance", pl_balance, "min or cap:N");
    pseudo->callback([&] {
        const auto strategy = affect::BalanceStrategy::parse(pl_balance);
        const auto mlp = affect::load_mlp(pl_model);
        const auto manifest = affect::DatasetManifest::load(pl_manifest);
        const auto records = affect::load_streams(manifest);
        const auto result = affect::generate_pseudo_labels(mlp, records);
        affect::save_pseudo_labels_csv(pl_out, result);
        long accepted = 0;
        std::vector<int> accepted_cats;
        for (const auto& item : result.items) {
            if (item.accepted) {
                ++accepted;
                accepted_cats.push_back(item.category);
            }
        }
        std::cout << result.items.size() << " candidates, " << accepted << " accepted, "
                  << result.skipped << " skipped -> " << pl_out << "\n";
        if (!accepted_cats.empty()) {
            const auto kept = affect::balance_classes(accepted_cats, strategy, 1);
            std::array<long, 7> counts{};
            for (auto i : kept) {
                ++counts[accepted_cats[i]];
            }
            std::cout << "balanced accepted counts (" << strategy.to_string() << "):";
            for (int c = 0; c < 7; ++c) {
                std::cout << " " << c << ":" << counts[c];
            }
            std::cout << "\n";
        }
    });

    // ---- evaluate ----
    auto* evaluate = app.add_subcommand("evaluate", "score predictions against truth labels");
    std::string ev_pred, ev_truth, ev_va, ev_out = "report.csv";
    evaluate->add_option("--pred", ev_pred, "predictions CSV")->required();
    evaluate->add_option("--truth", ev_truth, "expression truth CSV")->required();
    evaluate->add_option("--va", ev_va, "valence-arousal truth CSV");
    evaluate->add_option("--out", ev_out, "report CSV output path");
    evaluate->callback([&] {
        const auto report = affect::evaluate_predictions(ev_pred, ev_truth, ev_va);
        std::cout << affect::render_report({{"evaluate", report}});
        std::cout << affect::render_confusion(report.confusion);
        std::ofstream out(ev_out);
        if (!out) {
            throw std::runtime_error(ev_out + ": cannot open for writing");
        }
        out << "name,score,macro_f1,accuracy,ccc_valence,ccc_arousal\n";
        char buf[40];
        auto fmt = [&](double v) {
            std::snprintf(buf, sizeof(buf), "%.6f", v);
            return std::string(buf);
        };
        out << "evaluate," << fmt(report.expression_score) << "," << fmt(report.macro_f1) << ","
            << fmt(report.accuracy) << ","
            << (report.ccc_valence ? fmt(*report.ccc_valence) : "") << ","
            << (report.ccc_arousal ? fmt(*report.ccc_arousal) : "") << "\n";
    });

    // ---- ablate ----
    auto* ablate = app.add_subcommand("ablate", "run ablation variants and compare");
    std::string ab_config, ab_out, ab_variants = "all", ab_seeds = "1";
    ablate->add_option("--config", ab_config, "base experiment config")->required();
    ablate->add_option("--out", ab_out, "output directory for run dirs");
    ablate->add_option("--variants", ab_variants,
                       "comma list of single,multi,multi-std,modal-std,modal-std-global or 'all'");
    ablate->add_option("--seeds", ab_seeds, "comma list of seeds");
    ablate->callback([&] {
        const auto base = affect::ExperimentConfig::load(ab_config);
        const std::string out_dir = ab_out.empty() ? default_run_dir("ablate") : ab_out;
        fs::create_directories(out_dir);
        std::vector<std::string> variants =
            ab_variants == "all" ? affect::all_variants() : split_list(ab_variants);
        std::vector<std::string> run_dirs;
        for (const auto& seed_text : split_list(ab_seeds)) {
            const auto seed = static_cast<std::uint64_t>(std::stoll(seed_text));
            for (const auto& variant : variants) {
                auto cfg = affect::apply_variant(base, variant);
                cfg.seed = seed;
                cfg.apply_seed();
                cfg.name = variant + "-s" + seed_text;
                const std::string run_dir = (fs::path(out_dir) / cfg.name).string();
                run_dirs.push_back(run_dir);
                try {
                    affect::run_pipeline(cfg, run_dir, false);
                    std::cout << "run " << cfg.name << " done\n";
                } catch (const std::exception& e) {
                    std::cerr << "run " << cfg.name << " failed: " << e.what() << "\n";
                }
            }
        }
        const std::string table = affect::report_ablation(run_dirs);
        std::cout << table;
        std::ofstream tout(fs::path(out_dir) / "ablation.txt");
        tout << table;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
