#include "affect/pca.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

namespace {

using affect::Mat;
using affect::PcaModel;
using affect::Vec;

Mat gaussian_matrix(int rows, int cols, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, scale);
    Mat m(rows, cols);
    for (auto& v : m.a) {
        v = g(rng);
    }
    return m;
}

// Independent check: the stored explained variance of component i must equal
// the (divide by m-1) variance of the data projected onto that component.
void check_explained_matches_projection_variance(const Mat& data, const PcaModel& model,
                                                 double tol) {
    const int m = data.rows;
    for (int i = 0; i < model.num_components(); ++i) {
        Vec proj(m);
        double mean = 0.0;
        for (int r = 0; r < m; ++r) {
            double s = 0.0;
            for (int c = 0; c < data.cols; ++c) {
                s += (data(r, c) - model.mean[c]) * model.components(i, c);
            }
            proj[r] = s;
            mean += s;
        }
        mean /= m;
        double var = 0.0;
        for (double p : proj) {
            var += (p - mean) * (p - mean);
        }
        var /= (m - 1);
        EXPECT_NEAR(model.explained_variance[i], var, tol) << "component " << i;
    }
}

TEST(PcaFit, PlantedRankTwo) {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> g(0.0, 1.0);
    // two fixed orthogonal directions in 5-D
    Vec u{1, 0, 1, 0, 1};
    Vec w{0, 1, 0, -1, 0};
    for (auto& x : u) {
        x /= std::sqrt(3.0);
    }
    for (auto& x : w) {
        x /= std::sqrt(2.0);
    }
    Mat data(60, 5);
    for (int r = 0; r < data.rows; ++r) {
        double a = 3.0 * g(rng);
        double b = 1.5 * g(rng);
        for (int c = 0; c < 5; ++c) {
            data(r, c) = 0.7 + a * u[c] + b * w[c];
        }
    }
    auto model = affect::pca_fit(data, 2, 1.0, 7);
    auto proj = affect::pca_transform(model, data);
    auto rec = affect::pca_inverse_transform(model, proj);
    double max_err = 0.0;
    for (std::size_t i = 0; i < data.a.size(); ++i) {
        max_err = std::max(max_err, std::abs(data.a[i] - rec.a[i]));
    }
    EXPECT_LT(max_err, 1e-10);

    // with K=4 the trailing variances vanish
    auto model4 = affect::pca_fit(data, 4, 1.0, 7);
    EXPECT_LT(model4.explained_variance[2], 1e-12 * model4.explained_variance[0]);
    EXPECT_LT(model4.explained_variance[3], 1e-12 * model4.explained_variance[0]);
}

TEST(PcaFit, FullRankRoundTrip) {
    auto data = gaussian_matrix(40, 8, 3);
    auto model = affect::pca_fit(data, 8, 1.0, 1);
    auto rec = affect::pca_inverse_transform(model, affect::pca_transform(model, data));
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < data.a.size(); ++i) {
        num += (data.a[i] - rec.a[i]) * (data.a[i] - rec.a[i]);
        den += data.a[i] * data.a[i];
    }
    EXPECT_LT(std::sqrt(num / den), 1e-8);
}

TEST(PcaFit, IsotropicVariancesCluster) {
    auto data = gaussian_matrix(20000, 10, 11);
    auto model = affect::pca_fit(data, 3, 1.0, 5);
    check_explained_matches_projection_variance(data, model, 1e-9);
    double lo = model.explained_variance[2];
    double hi = model.explained_variance[0];
    EXPECT_LT((hi - lo) / hi, 0.10);
    // components orthonormal
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double d = affect::dot(model.components.row(i), model.components.row(j), 10);
            EXPECT_NEAR(d, i == j ? 1.0 : 0.0, 1e-8);
        }
    }
    // trace identity across all components
    auto full = affect::pca_fit(data, 10, 1.0, 5);
    double total = 0.0;
    for (int c = 0; c < 10; ++c) {
        double mean = 0.0;
        for (int r = 0; r < data.rows; ++r) {
            mean += data(r, c);
        }
        mean /= data.rows;
        double var = 0.0;
        for (int r = 0; r < data.rows; ++r) {
            var += (data(r, c) - mean) * (data(r, c) - mean);
        }
        total += var / (data.rows - 1);
    }
    double sum = 0.0;
    for (double v : full.explained_variance) {
        sum += v;
    }
    EXPECT_NEAR(sum, total, 1e-8 * total);
}

TEST(PcaFit, GramRouteWhenWide) {
    // more columns than sampled rows forces the Gram-space path
    auto data = gaussian_matrix(30, 80, 23);
    auto model = affect::pca_fit(data, 5, 1.0, 9);
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            double d = affect::dot(model.components.row(i), model.components.row(j), 80);
            EXPECT_NEAR(d, i == j ? 1.0 : 0.0, 1e-8);
        }
    }
    check_explained_matches_projection_variance(data, model, 1e-9);
    for (int i = 1; i < 5; ++i) {
        EXPECT_GE(model.explained_variance[i - 1], model.explained_variance[i]);
    }
}

TEST(PcaFit, SignConvention) {
    auto data = gaussian_matrix(50, 6, 17);
    auto model = affect::pca_fit(data, 4, 1.0, 3);
    for (int i = 0; i < 4; ++i) {
        double best = 0.0;
        for (int c = 0; c < 6; ++c) {
            if (std::abs(model.components(i, c)) > std::abs(best)) {
                best = model.components(i, c);
            }
        }
        EXPECT_GT(best, 0.0);
    }
}

TEST(PcaFit, SubsampleDeterminism) {
    auto data = gaussian_matrix(200, 6, 19);
    auto a = affect::pca_fit(data, 3, 0.5, 77);
    auto b = affect::pca_fit(data, 3, 0.5, 77);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.components.a, b.components.a);
    auto c = affect::pca_fit(data, 3, 0.5, 78);
    EXPECT_NE(a.components.a, c.components.a);
}

TEST(PcaFit, KTooLargeNamesMaximum) {
    auto data = gaussian_matrix(10, 4, 2);
    try {
        affect::pca_fit(data, 5, 1.0, 1);
        FAIL() << "expected exception";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("maximum"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("4"), std::string::npos);
    }
    // sampled rows bound: 6 rows sampled from 10 at 0.6 -> max K = 5
    EXPECT_THROW(affect::pca_fit(data, 4, 0.3, 1), std::invalid_argument);
}

TEST(PcaTransform, MeanMapsToZero) {
    auto data = gaussian_matrix(30, 5, 31);
    auto model = affect::pca_fit(data, 3, 1.0, 4);
    Mat row(1, 5);
    for (int c = 0; c < 5; ++c) {
        row(0, c) = model.mean[c];
    }
    auto out = affect::pca_transform(model, row);
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(out(0, i), 0.0, 1e-12);
    }
}

TEST(PcaTransform, ComponentMapsToUnitCoordinate) {
    auto data = gaussian_matrix(30, 5, 37);
    auto model = affect::pca_fit(data, 3, 1.0, 4);
    Mat row(1, 5);
    for (int c = 0; c < 5; ++c) {
        row(0, c) = model.mean[c] + model.components(0, c);
    }
    auto out = affect::pca_transform(model, row);
    EXPECT_NEAR(out(0, 0), 1.0, 1e-10);
    EXPECT_NEAR(out(0, 1), 0.0, 1e-10);
    EXPECT_NEAR(out(0, 2), 0.0, 1e-10);
}

TEST(PcaTransform, MatchesDotProductOracle) {
    auto data = gaussian_matrix(25, 7, 41);
    auto model = affect::pca_fit(data, 4, 1.0, 6);
    auto rows = gaussian_matrix(10, 7, 43);
    auto out = affect::pca_transform(model, rows);
    for (int r = 0; r < 10; ++r) {
        for (int i = 0; i < 4; ++i) {
            double s = 0.0;
            for (int c = 0; c < 7; ++c) {
                s += (rows(r, c) - model.mean[c]) * model.components(i, c);
            }
            EXPECT_NEAR(out(r, i), s, 1e-10);
        }
    }
}

TEST(PcaTransform, DimensionMismatchThrows) {
    auto data = gaussian_matrix(20, 5, 47);
    auto model = affect::pca_fit(data, 2, 1.0, 1);
    Mat bad(3, 4);
    EXPECT_THROW(affect::pca_transform(model, bad), std::invalid_argument);
}

TEST(PcaCsv, RoundTrip) {
    auto data = gaussian_matrix(30, 6, 53);
    auto model = affect::pca_fit(data, 3, 1.0, 2);
    auto path = std::filesystem::temp_directory_path() / "affect_pca_test.csv";
    affect::save_pca_csv(path.string(), model);
    auto back = affect::load_pca_csv(path.string());
    EXPECT_EQ(back.mean, model.mean);
    EXPECT_EQ(back.components.a, model.components.a);
    EXPECT_EQ(back.explained_variance, model.explained_variance);
    std::filesystem::remove(path);
}

}  // namespace
