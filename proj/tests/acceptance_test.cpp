// Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "affect/features.hpp"
#include "affect/gru.hpp"
#include "affect/imageprep.hpp"
#include "affect/metrics.hpp"
#include "affect/pca.hpp"
#include "affect/pipeline.hpp"
#include "affect/pseudolabel.hpp"
#include "affect/synth.hpp"

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Criterion {
    int number;
    std::string name;
    Clock::time_point start = Clock::now();

    Criterion(int n, std::string text) : number(n), name(std::move(text)) {}
    ~Criterion() {
        const double seconds =
            std::chrono::duration<double>(Clock::now() - start).count();
        std::printf("[ACCEPTANCE] C%-2d %-28s %s  (%.2fs)\n", number, name.c_str(),
                    ::testing::Test::HasFailure() ? "FAIL" : "PASS", seconds);
        std::fflush(stdout);
    }
    double elapsed() const {
        return std::chrono::duration<double>(Clock::now() - start).count();
    }
};

// C1: expression-score arithmetic reproduces the printed validation table.
TEST(Acceptance, C1_TableArithmetic) {
    Criterion c(1, "table arithmetic");
    const struct {
        double f1, acc, printed;
    } rows[] = {
        {0.460, 0.594, 0.504}, {0.466, 0.641, 0.524}, {0.484, 0.623, 0.530},
        {0.480, 0.639, 0.533}, {0.477, 0.649, 0.534}, {0.477, 0.659, 0.537},
        {0.488, 0.663, 0.546},
    };
    for (const auto& row : rows) {
        EXPECT_NEAR(affect::expression_score(row.f1, row.acc), row.printed, 0.0015);
    }
    EXPECT_NEAR(affect::expression_score(0.488, 0.663), 0.54575, 1e-12);
    EXPECT_DOUBLE_EQ(affect::round3(affect::expression_score(0.488, 0.663)), 0.546);
    EXPECT_LT(c.elapsed(), 1.0);
}

// C2: window geometry matches the datasize equation and exhaustive
// enumeration of eligible end frames.
TEST(Acceptance, C2_WindowGeometry) {
    Criterion c(2, "window geometry");
    auto run_case = [&](int dim_audio, int dim_image, int n_seconds, long expected_elements) {
        affect::WindowConfig cfg;
        cfg.n_seconds = n_seconds;
        cfg.step = 6;
        cfg.dim_image = dim_image;
        cfg.dim_audio = dim_audio;
        const int t_steps = cfg.timesteps();
        const int span = (t_steps - 1) * cfg.step;
        const int frames = span + 40;
        affect::Mat feats(frames, dim_image + dim_audio);
        for (std::size_t i = 0; i < feats.a.size(); ++i) {
            feats.a[i] = 0.001 * static_cast<double>(i % 997);
        }
        std::mt19937_64 rng(17);
        std::bernoulli_distribution labeled(0.35);
        std::uniform_int_distribution<int> cat(0, 6);
        std::vector<std::optional<int>> labels(frames);
        for (int i = 0; i < frames; ++i) {
            if (labeled(rng)) {
                labels[i] = cat(rng);
            }
        }
        affect::WindowBatch batch;
        affect::make_windows("v", 0, feats, labels, cfg, batch);
        EXPECT_EQ(batch.window_elements(), expected_elements);
        // exhaustive index enumeration
        std::vector<int> ends;
        for (int t = 0; t < frames; ++t) {
            if (labels[t] && t - span >= 0) {
                ends.push_back(t);
            }
        }
        ASSERT_EQ(batch.count(), static_cast<int>(ends.size()));
        for (std::size_t w = 0; w < ends.size(); ++w) {
            EXPECT_EQ(batch.keys[w].second, ends[w]);
        }
    };
    run_case(300, 300, 2, 12000);
    run_case(300, 512, 3, 24360);
    EXPECT_LT(c.elapsed(), 1.0);
}

// C3: BPTT gradients against central finite differences.
TEST(Acceptance, C3_GruGradientCheck) {
    Criterion c(3, "gru gradient check");
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        std::mt19937_64 rng(seed * 7919);
        std::normal_distribution<double> g(0.0, 1.0);
        const int t_steps = 5, f_dim = 8, h_dim = 6;
        auto params = affect::init_gru(f_dim, h_dim, 7, seed);
        for (auto& view : {std::ref(params.bz), std::ref(params.br), std::ref(params.bh)}) {
            for (double& v : view.get()) {
                v = 0.1 * g(rng);
            }
        }
        affect::WindowBatch batch;
        batch.timesteps = t_steps;
        batch.feature_dim = f_dim;
        for (int w = 0; w < 3; ++w) {
            for (int i = 0; i < t_steps * f_dim; ++i) {
                batch.data.push_back(g(rng));
            }
            batch.labels.push_back((w * 3) % 7);
            batch.keys.emplace_back("w", w);
        }
        affect::GruGrads grads(params);
        std::vector<int> idx{0, 1, 2};
        affect::gru_gradients(params, batch, idx, affect::GruLoss::cross_entropy, grads);
        auto loss_at = [&]() {
            double total = 0.0;
            for (int w = 0; w < 3; ++w) {
                auto logits = affect::gru_forward(params, batch.window(w), t_steps);
                total -= std::log(affect::softmax(logits)[batch.labels[w]]);
            }
            return total;
        };
        auto pviews = params.views();
        auto gviews = grads.views();
        const double h = 1e-5;
        double max_rel = 0.0;
        for (std::size_t vi = 0; vi < pviews.size(); ++vi) {
            for (std::size_t j = 0; j < pviews[vi].size(); ++j) {
                const double keep = pviews[vi][j];
                pviews[vi][j] = keep + h;
                const double up = loss_at();
                pviews[vi][j] = keep - h;
                const double down = loss_at();
                pviews[vi][j] = keep;
                const double numeric = (up - down) / (2.0 * h);
                const double analytic = gviews[vi][j];
                max_rel = std::max(max_rel,
                                   std::abs(analytic - numeric) /
                                       std::max({std::abs(analytic), std::abs(numeric), 1e-6}));
            }
        }
        EXPECT_LT(max_rel, 1e-4) << "seed " << seed;
    }
    EXPECT_LT(c.elapsed(), 10.0);
}

// C4: concordance correlation coefficient against direct summation.
TEST(Acceptance, C4_CccOracle) {
    Criterion c(4, "ccc oracle");
    std::mt19937_64 rng(23);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(100), y(100);
        for (int i = 0; i < 100; ++i) {
            x[i] = g(rng) * 1.5 + 0.2;
            y[i] = 0.6 * x[i] + 0.4 * g(rng) - 0.1;
        }
        // independent direct-summation evaluation
        double mx = 0, my = 0;
        for (int i = 0; i < 100; ++i) {
            mx += x[i];
            my += y[i];
        }
        mx /= 100;
        my /= 100;
        double sx = 0, sy = 0, sxy = 0;
        for (int i = 0; i < 100; ++i) {
            sx += (x[i] - mx) * (x[i] - mx);
            sy += (y[i] - my) * (y[i] - my);
            sxy += (x[i] - mx) * (y[i] - my);
        }
        sx /= 100;
        sy /= 100;
        sxy /= 100;
        const double want = 2.0 * sxy / (sx + sy + (mx - my) * (mx - my));
        EXPECT_NEAR(affect::ccc(x, y), want, 1e-12);
        EXPECT_NEAR(affect::ccc(x, x), 1.0, 1e-12);
    }
    const std::vector<double> hx{0, 1, 2, 3};
    const std::vector<double> hy{0.5, 1.5, 2.5, 3.5};
    EXPECT_NEAR(affect::ccc(hx, hy), 10.0 / 11.0, 1e-12);
}

// C5: standardization moment invariants and affine invariance.
TEST(Acceptance, C5_Standardization) {
    Criterion c(5, "standardization");
    std::mt19937_64 rng(29);
    std::normal_distribution<double> g(3.0, 4.0);
    affect::Mat x(150, 8);
    for (auto& v : x.a) {
        v = g(rng);
    }
    for (int r = 0; r < x.rows; ++r) {
        x(r, 7) = 2.5;  // constant dimension
    }
    auto s = affect::standardize_per_subject(x);
    for (int col = 0; col < 7; ++col) {
        double mean = 0.0;
        for (int r = 0; r < s.rows; ++r) {
            mean += s(r, col);
        }
        mean /= s.rows;
        double var = 0.0;
        for (int r = 0; r < s.rows; ++r) {
            var += (s(r, col) - mean) * (s(r, col) - mean);
        }
        var /= s.rows;
        EXPECT_LT(std::abs(mean), 1e-9);
        EXPECT_LT(std::abs(var - 1.0), 1e-6);
    }
    for (int r = 0; r < s.rows; ++r) {
        EXPECT_DOUBLE_EQ(s(r, 7), 0.0);
    }
    affect::Mat y = x;
    for (auto& v : y.a) {
        v = 2.75 * v + 13.0;  // positive scaling and shift
    }
    auto sy = affect::standardize_per_subject(y);
    for (int col = 0; col < 7; ++col) {
        for (int r = 0; r < s.rows; ++r) {
            EXPECT_NEAR(sy(r, col), s(r, col), 1e-9);
        }
    }
}

// C6: circumplex filter against the 343-case hand-derived table.
TEST(Acceptance, C6_CircumplexTable) {
    Criterion c(6, "circumplex table");
    const double grid[] = {-0.75, -0.45, -0.25, 0.0, 0.25, 0.45, 0.75};
    int cases = 0;
    for (double v : grid) {
        for (double a : grid) {
            for (int cat = 0; cat < 7; ++cat) {
                bool want;
                switch (cat) {
                    case 0: want = v > -0.5 && v < 0.5 && a > -0.5 && a < 0.5; break;
                    case 1:
                    case 2:
                    case 3: want = v < 0.0 && a > 0.0; break;
                    case 4: want = v > 0.0 && a > 0.0; break;
                    case 5: want = v < 0.0 && a < 0.0; break;
                    default: want = a > 0.0; break;
                }
                EXPECT_EQ(affect::filter_by_circumplex(cat, v, a), want)
                    << cat << " " << v << " " << a;
                ++cases;
            }
        }
    }
    EXPECT_EQ(cases, 343);
}

// C7: PCA round trip and planted low-rank recovery.
TEST(Acceptance, C7_Pca) {
    Criterion c(7, "pca");
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g(0.0, 1.0);
    affect::Mat full(50, 9);
    for (auto& v : full.a) {
        v = g(rng);
    }
    auto model = affect::pca_fit(full, 9, 1.0, 3);
    auto rec = affect::pca_inverse_transform(model, affect::pca_transform(model, full));
    double num = 0, den = 0;
    for (std::size_t i = 0; i < full.a.size(); ++i) {
        num += (full.a[i] - rec.a[i]) * (full.a[i] - rec.a[i]);
        den += full.a[i] * full.a[i];
    }
    EXPECT_LT(std::sqrt(num / den), 1e-8);

    affect::Vec u{1, 0, 1, 0, 1};
    affect::Vec w{0, 1, 0, -1, 0};
    affect::Mat planted(80, 5);
    for (int r = 0; r < 80; ++r) {
        const double a = 2.0 * g(rng);
        const double b = 0.9 * g(rng);
        for (int col = 0; col < 5; ++col) {
            planted(r, col) = 1.1 + a * u[col] + b * w[col];
        }
    }
    auto rank2 = affect::pca_fit(planted, 2, 1.0, 5);
    auto rec2 = affect::pca_inverse_transform(rank2, affect::pca_transform(rank2, planted));
    double max_err = 0.0;
    for (std::size_t i = 0; i < planted.a.size(); ++i) {
        max_err = std::max(max_err, std::abs(planted.a[i] - rec2.a[i]));
    }
    EXPECT_LT(max_err, 1e-10);
}

// C8: gap interpolation exact fill, long-gap split, idempotence.
TEST(Acceptance, C8_Interpolation) {
    Criterion c(8, "interpolation");
    auto frame = [](int index, bool valid, double value) {
        affect::FrameRecord f;
        f.video_id = "v";
        f.frame_index = index;
        f.valid = valid;
        if (valid) {
            f.image_feature = {value};
            f.openface_feature = {value, 2 * value};
            f.audio_feature = {};
        }
        return f;
    };
    affect::SubjectSequence seq;
    seq.video_id = "v";
    seq.frames = {frame(10, true, 0.0), frame(14, true, 4.0)};
    auto segs = affect::interpolate_gaps(seq);
    ASSERT_EQ(segs.size(), 1u);
    ASSERT_EQ(segs[0].frames.size(), 5u);
    EXPECT_DOUBLE_EQ(segs[0].frames[1].image_feature[0], 1.0);
    EXPECT_DOUBLE_EQ(segs[0].frames[2].image_feature[0], 2.0);
    EXPECT_DOUBLE_EQ(segs[0].frames[3].image_feature[0], 3.0);

    affect::SubjectSequence long_gap;
    long_gap.video_id = "v";
    long_gap.frames = {frame(0, true, 1.0), frame(32, true, 2.0)};  // 31 missing frames
    EXPECT_EQ(affect::interpolate_gaps(long_gap, 30).size(), 2u);

    std::vector<affect::SubjectSequence> twice;
    for (const auto& seg : segs) {
        for (auto& again : affect::interpolate_gaps(seg)) {
            twice.push_back(std::move(again));
        }
    }
    EXPECT_EQ(affect::serialize_sequences(segs), affect::serialize_sequences(twice));
}

// C9: color correction hue pin, HSV round trip and determinism.
TEST(Acceptance, C9_ColorCorrection) {
    Criterion c(9, "color correction");
    affect::PixelImage img;
    img.width = 96;
    img.height = 96;
    img.pixels.resize(96 * 96 * 3);
    for (int y = 0; y < 96; ++y) {
        for (int x = 0; x < 96; ++x) {
            const std::size_t i = (static_cast<std::size_t>(y) * 96 + x) * 3;
            img.pixels[i] = static_cast<std::uint8_t>(90 + 60 * std::sin(0.11 * x));
            img.pixels[i + 1] = static_cast<std::uint8_t>(80 + 50 * std::cos(0.07 * y));
            img.pixels[i + 2] = static_cast<std::uint8_t>(60 + 40 * std::sin(0.05 * (x + y)));
        }
    }
    affect::ColorCorrectionConfig cfg;
    auto out = affect::correct_color(img, cfg);
    auto out2 = affect::correct_color(img, cfg);
    EXPECT_EQ(out.pixels, out2.pixels);  // byte-exact determinism
    auto hsv = affect::rgb_to_hsv(out);
    long saturated = 0;
    for (std::size_t i = 0; i < hsv.hue.size(); ++i) {
        const int r = out.pixels[3 * i];
        const int g = out.pixels[3 * i + 1];
        const int b = out.pixels[3 * i + 2];
        const int delta = std::max({r, g, b}) - std::min({r, g, b});
        if (delta >= 64) {
            ++saturated;
            EXPECT_NEAR(hsv.hue[i], 14.0, 1.0) << "pixel " << i;
        }
    }
    EXPECT_GT(saturated, 1000);

    // RGB <-> HSV round trip on a 52^3 = 140608-triple grid
    affect::PixelImage grid;
    std::vector<std::uint8_t> values;
    for (int v = 0; v < 256; v += 5) {
        values.push_back(static_cast<std::uint8_t>(v));
    }
    values.push_back(255);
    const int n = static_cast<int>(values.size());
    grid.width = n * n;
    grid.height = n;
    for (auto r : values) {
        for (auto g : values) {
            for (auto b : values) {
                grid.pixels.push_back(r);
                grid.pixels.push_back(g);
                grid.pixels.push_back(b);
            }
        }
    }
    ASSERT_GE(grid.pixel_count(), 100000u);
    auto back = affect::hsv_to_rgb(affect::rgb_to_hsv(grid));
    int max_err = 0;
    for (std::size_t i = 0; i < grid.pixels.size(); ++i) {
        max_err = std::max(max_err, std::abs(int(grid.pixels[i]) - int(back.pixels[i])));
    }
    EXPECT_LE(max_err, 1);
}

// C10: end-to-end ablation on the planted-bias dataset; the standardized
// multi-frame variant must beat the unstandardized one by >= 0.05 on average
// over 5 seeds.
TEST(Acceptance, C10_EndToEndAblation) {
    Criterion c(10, "end-to-end ablation");
    const fs::path dir =
        fs::temp_directory_path() / ("affect_accept_e2e_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    double gap_sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        affect::SynthSpec spec;
        spec.subjects = 10;
        spec.frames_per_subject = 240;
        spec.bias = 5.0;  // 5x the signal magnitude
        spec.signal = 1.0;
        spec.noise = 0.25;
        spec.gap_rate = 0.0;
        spec.images_per_subject = 0;
        spec.seed = seed;
        const auto data =
            affect::make_synthetic(spec, (dir / ("synth_" + std::to_string(seed))).string());

        affect::ExperimentConfig base;
        base.manifest_path = data.manifest_path;
        base.mlp_hidden = 48;
        base.gru_hidden = 24;
        base.single_train.epochs = 12;
        base.multi_train.epochs = 10;
        base.seed = seed;
        base.apply_seed();

        auto std_cfg = base;
        std_cfg.name = "std";
        std_cfg.per_subject_standardize = true;
        auto raw_cfg = base;
        raw_cfg.name = "raw";
        raw_cfg.per_subject_standardize = false;

        const auto std_result = affect::run_pipeline(
            std_cfg, (dir / ("std_" + std::to_string(seed))).string());
        const auto raw_result = affect::run_pipeline(
            raw_cfg, (dir / ("raw_" + std::to_string(seed))).string());
        const double gap =
            std_result.report.expression_score - raw_result.report.expression_score;
        gap_sum += gap;
        std::printf("  seed %llu: standardized %.3f vs raw %.3f (gap %+.3f)\n",
                    static_cast<unsigned long long>(seed),
                    std_result.report.expression_score, raw_result.report.expression_score,
                    gap);
    }
    const double mean_gap = gap_sum / 5.0;
    std::printf("  mean gap over 5 seeds: %+.3f\n", mean_gap);
    EXPECT_GE(mean_gap, 0.05);
    EXPECT_LT(c.elapsed(), 300.0);
    fs::remove_all(dir);
}

// C11: retraining with planted-correct pseudo labels does not degrade the
// validation score by more than 0.01.
TEST(Acceptance, C11_PseudoLabelRound) {
    Criterion c(11, "pseudo-label round");
    const fs::path dir =
        fs::temp_directory_path() / ("affect_accept_pseudo_" + std::to_string(::getpid()));
    affect::SynthSpec spec;
    spec.subjects = 8;
    spec.frames_per_subject = 200;
    spec.bias = 1.0;
    spec.signal = 1.0;
    spec.noise = 0.3;
    spec.expr_label_rate = 0.35;
    spec.va_only_rate = 0.4;
    spec.gap_rate = 0.0;
    spec.images_per_subject = 0;
    spec.seed = 42;
    const auto data = affect::make_synthetic(spec, dir.string());

    std::map<std::pair<std::string, int>, int> truth;
    {
        std::ifstream in(data.truth_path);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            const auto c1 = line.find(',');
            const auto c2 = line.find(',', c1 + 1);
            truth[{line.substr(0, c1), std::stoi(line.substr(c1 + 1, c2 - c1 - 1))}] =
                std::stoi(line.substr(c2 + 1));
        }
    }
    const auto manifest = affect::DatasetManifest::load(data.manifest_path);
    const auto sequences = affect::assemble_sequences(affect::load_streams(manifest));
    // fixed split: last two videos validate
    std::set<std::string> val_videos;
    for (std::size_t i = sequences.size() - 2; i < sequences.size(); ++i) {
        val_videos.insert(sequences[i].video_id);
    }
    std::vector<affect::TrainingFrame> labeled;
    std::vector<affect::TrainingFrame> planted;
    std::vector<const affect::FrameRecord*> val_frames;
    for (const auto& seq : sequences) {
        const bool is_val = val_videos.count(seq.video_id) > 0;
        for (const auto& f : seq.frames) {
            if (is_val) {
                if (f.expression) {
                    val_frames.push_back(&f);
                }
                continue;
            }
            if (f.expression) {
                labeled.push_back(
                    {f.video_id, f.frame_index, affect::single_frame_input(f), *f.expression});
            } else if (f.valence && f.arousal) {
                const int cat = truth.at({f.video_id, f.frame_index});
                if (affect::filter_by_circumplex(cat, *f.valence, *f.arousal)) {
                    planted.push_back(
                        {f.video_id, f.frame_index, affect::single_frame_input(f), cat});
                }
            }
        }
    }
    ASSERT_GT(planted.size(), 100u);
    affect::TrainConfig cfg;
    cfg.seed = 7;
    cfg.epochs = 12;
    auto score_on_val = [&](const affect::MlpParams& model) {
        std::vector<int> t, p;
        for (const auto* f : val_frames) {
            t.push_back(*f->expression);
            p.push_back(affect::predict_expression(model, affect::single_frame_input(*f)).category);
        }
        const auto m = affect::classification_metrics(t, p);
        return affect::expression_score(m.macro_f1, m.accuracy);
    };
    const auto base = affect::retrain_with_pseudo(labeled, {}, 48, cfg, affect::BalanceStrategy{});
    const auto retrained =
        affect::retrain_with_pseudo(labeled, planted, 48, cfg, affect::BalanceStrategy{});
    const double base_score = score_on_val(base);
    const double retrained_score = score_on_val(retrained);
    std::printf("  base %.3f, retrained with planted pseudo labels %.3f\n", base_score,
                retrained_score);
    EXPECT_GE(retrained_score, base_score - 0.01);
    fs::remove_all(dir);
}

}  // namespace
