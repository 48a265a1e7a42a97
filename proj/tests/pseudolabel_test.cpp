#include "affect/pseudolabel.hpp"

#include <gtest/gtest.h>

#include <random>

namespace {

using affect::BalanceStrategy;
using affect::filter_by_circumplex;
using affect::FrameRecord;
using affect::TrainingFrame;
using affect::Vec;

TEST(Circumplex, PaperCases) {
    EXPECT_TRUE(filter_by_circumplex(4, 0.3, 0.5));
    EXPECT_TRUE(filter_by_circumplex(0, 0.2, -0.1));
    EXPECT_FALSE(filter_by_circumplex(0, 0.6, 0.0));
    EXPECT_FALSE(filter_by_circumplex(6, 0.9, 0.0));  // arousal not > 0
    EXPECT_FALSE(filter_by_circumplex(5, 0.0, -0.3)); // strict inequality
}

TEST(Circumplex, OutOfRangeThrows) {
    EXPECT_THROW(filter_by_circumplex(0, 1.5, 0.0), std::invalid_argument);
    EXPECT_THROW(filter_by_circumplex(0, 0.0, -1.01), std::invalid_argument);
    EXPECT_THROW(filter_by_circumplex(7, 0.0, 0.0), std::invalid_argument);
}

// 343-case truth table over the 7x7 grid x 7 categories, derived with one
// explicit predicate per category, written out independently of the library.
TEST(Circumplex, TruthTable343) {
    const double grid[] = {-0.75, -0.45, -0.25, 0.0, 0.25, 0.45, 0.75};
    auto rule0 = [](double v, double a) { return v > -0.5 && v < 0.5 && a > -0.5 && a < 0.5; };
    auto rule123 = [](double v, double a) { return v < 0.0 && a > 0.0; };
    auto rule4 = [](double v, double a) { return v > 0.0 && a > 0.0; };
    auto rule5 = [](double v, double a) { return v < 0.0 && a < 0.0; };
    auto rule6 = [](double, double a) { return a > 0.0; };
    int cases = 0;
    for (double v : grid) {
        for (double a : grid) {
            for (int cat = 0; cat < 7; ++cat) {
                bool want;
                if (cat == 0) {
                    want = rule0(v, a);
                } else if (cat <= 3) {
                    want = rule123(v, a);
                } else if (cat == 4) {
                    want = rule4(v, a);
                } else if (cat == 5) {
                    want = rule5(v, a);
                } else {
                    want = rule6(v, a);
                }
                EXPECT_EQ(filter_by_circumplex(cat, v, a), want)
                    << "cat=" << cat << " v=" << v << " a=" << a;
                ++cases;
            }
        }
    }
    EXPECT_EQ(cases, 343);
}

FrameRecord candidate(const std::string& vid, int frame, bool valid, bool has_expr,
                      bool has_va) {
    FrameRecord f;
    f.video_id = vid;
    f.frame_index = frame;
    f.valid = valid;
    if (valid) {
        f.image_feature = Vec(4, 0.5);
        f.openface_feature = Vec(3, 0.1);
    }
    if (has_expr) {
        f.expression = 1;
    }
    if (has_va) {
        f.valence = 0.25;
        f.arousal = 0.25;
    }
    return f;
}

TEST(GeneratePseudoLabels, SelectsOnlyVaOnlyFrames) {
    auto mlp = affect::init_mlp(7, 4, 7, 1);
    std::vector<FrameRecord> frames;
    frames.push_back(candidate("A", 0, true, true, true));    // has expression -> excluded
    frames.push_back(candidate("A", 1, true, false, false));  // no VA -> excluded
    frames.push_back(candidate("A", 2, true, false, true));   // candidate
    frames.push_back(candidate("A", 3, false, false, true));  // lacks features -> skipped
    auto result = affect::generate_pseudo_labels(mlp, frames);
    ASSERT_EQ(result.items.size(), 1u);
    EXPECT_EQ(result.items[0].frame_index, 2);
    EXPECT_EQ(result.skipped, 1);
}

TEST(GeneratePseudoLabels, UniformModelAssignsCategoryZero) {
    affect::MlpParams mlp;
    mlp.w1 = affect::Mat(4, 7);
    mlp.b1.assign(4, 0.0);
    mlp.w2 = affect::Mat(7, 4);
    mlp.b2.assign(7, 0.0);
    std::vector<FrameRecord> frames;
    for (int i = 0; i < 5; ++i) {
        frames.push_back(candidate("A", i, true, false, true));
    }
    auto result = affect::generate_pseudo_labels(mlp, frames);
    ASSERT_EQ(result.items.size(), 5u);
    for (const auto& item : result.items) {
        EXPECT_EQ(item.category, 0);  // tie rule
        EXPECT_TRUE(item.accepted);   // neutral region
    }
}

TEST(BalanceClasses, DownsampleToMin) {
    std::vector<int> cats;
    for (int i = 0; i < 100; ++i) cats.push_back(0);
    for (int i = 0; i < 40; ++i) cats.push_back(4);
    for (int i = 0; i < 10; ++i) cats.push_back(6);
    auto kept = affect::balance_classes(cats, BalanceStrategy{}, 3);
    std::map<int, int> counts;
    for (auto i : kept) {
        counts[cats[i]]++;
    }
    EXPECT_EQ(counts[0], 10);
    EXPECT_EQ(counts[4], 10);
    EXPECT_EQ(counts[6], 10);
}

TEST(BalanceClasses, AlreadyBalancedKeepsEverything) {
    std::vector<int> cats{0, 1, 2, 0, 1, 2};
    auto kept = affect::balance_classes(cats, BalanceStrategy{}, 9);
    ASSERT_EQ(kept.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(kept[i], i);
    }
}

TEST(BalanceClasses, CapRule) {
    std::vector<int> cats;
    for (int i = 0; i < 100; ++i) cats.push_back(0);
    for (int i = 0; i < 40; ++i) cats.push_back(4);
    auto kept = affect::balance_classes(cats, BalanceStrategy::parse("cap:50"), 5);
    std::map<int, int> counts;
    for (auto i : kept) {
        counts[cats[i]]++;
    }
    EXPECT_EQ(counts[0], 50);
    EXPECT_EQ(counts[4], 40);
}

TEST(BalanceClasses, SubsetAndDeterminism) {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> cat(0, 6);
    std::vector<int> cats(500);
    for (auto& c : cats) {
        c = cat(rng);
    }
    auto a = affect::balance_classes(cats, BalanceStrategy{}, 11);
    auto b = affect::balance_classes(cats, BalanceStrategy{}, 11);
    EXPECT_EQ(a, b);
    for (std::size_t i = 1; i < a.size(); ++i) {
        EXPECT_LT(a[i - 1], a[i]);  // sorted unique indices: a sub-multiset
    }
    EXPECT_LE(a.size(), cats.size());
    auto c = affect::balance_classes(cats, BalanceStrategy{}, 12);
    EXPECT_NE(a, c);  // different seed picks a different subset
}

TEST(BalanceStrategyParse, Forms) {
    EXPECT_EQ(BalanceStrategy::parse("min").kind, BalanceStrategy::Kind::downsample_to_min);
    auto cap = BalanceStrategy::parse("cap:25");
    EXPECT_EQ(cap.kind, BalanceStrategy::Kind::cap);
    EXPECT_EQ(cap.cap_value, 25);
    EXPECT_THROW(BalanceStrategy::parse("median"), std::invalid_argument);
    EXPECT_THROW(BalanceStrategy::parse("cap:0"), std::invalid_argument);
}

std::vector<TrainingFrame> toy_frames(const std::string& vid, int start, int count,
                                      std::uint64_t seed, bool balanced = true) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.3);
    std::vector<TrainingFrame> frames;
    for (int i = 0; i < count; ++i) {
        TrainingFrame f;
        f.video_id = vid;
        f.frame_index = start + i;
        f.label = balanced ? i % 3 : 0;
        f.features = Vec(4);
        for (auto& v : f.features) {
            v = g(rng) + 2.0 * f.label;
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

TEST(RetrainWithPseudo, EmptyPseudoEqualsPlainTraining) {
    auto labeled = toy_frames("A", 0, 30, 5);
    affect::TrainConfig cfg;
    cfg.seed = 17;
    cfg.epochs = 8;
    auto retrained = affect::retrain_with_pseudo(labeled, {}, 6, cfg, BalanceStrategy{});
    std::vector<int> labels;
    auto x = affect::stack_training_frames(labeled, labels);
    auto plain = affect::train_single_frame(x, labels, 6, cfg);
    EXPECT_EQ(retrained.w1.a, plain.w1.a);
    EXPECT_EQ(retrained.b2, plain.b2);
}

TEST(RetrainWithPseudo, DuplicateKeysListed) {
    auto labeled = toy_frames("A", 0, 9, 5);
    auto pseudo = toy_frames("A", 3, 3, 6);  // frames 3,4,5 collide
    affect::TrainConfig cfg;
    cfg.epochs = 1;
    try {
        affect::retrain_with_pseudo(labeled, pseudo, 4, cfg, BalanceStrategy{});
        FAIL() << "expected collision error";
    } catch (const std::runtime_error& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("(A, 3)"), std::string::npos) << msg;
        EXPECT_NE(msg.find("(A, 5)"), std::string::npos) << msg;
    }
}

TEST(RetrainWithPseudo, CorrectPseudoLabelsDoNotHurt) {
    auto labeled = toy_frames("A", 0, 45, 5);
    auto pseudo = toy_frames("B", 0, 45, 7);  // same planted signal, correct labels
    auto val = toy_frames("C", 0, 45, 9);
    affect::TrainConfig cfg;
    cfg.seed = 23;
    cfg.epochs = 40;
    cfg.learning_rate = 0.01;
    std::vector<int> labels;
    auto x = affect::stack_training_frames(labeled, labels);
    auto base = affect::train_single_frame(x, labels, 6, cfg);
    auto retrained = affect::retrain_with_pseudo(labeled, pseudo, 6, cfg, BalanceStrategy{});
    auto accuracy = [&](const affect::MlpParams& m) {
        int correct = 0;
        for (const auto& f : val) {
            if (affect::predict_expression(m, f.features).category == f.label) {
                ++correct;
            }
        }
        return static_cast<double>(correct) / val.size();
    };
    EXPECT_GE(accuracy(retrained), accuracy(base) - 0.01);
}

}  // namespace
