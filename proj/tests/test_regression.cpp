#include <gtest/gtest.h>

#include "attrib/regression.hpp"
#include "oracles.hpp"

#include <random>

using namespace attrib;

namespace {

Eigen::MatrixXd to_eigen(const oracle::Matrix& X) {
    Eigen::MatrixXd M(static_cast<Eigen::Index>(X.size()), static_cast<Eigen::Index>(X[0].size()));
    for (std::size_t i = 0; i < X.size(); ++i)
        for (std::size_t j = 0; j < X[0].size(); ++j) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = X[i][j];
    return M;
}

Eigen::VectorXd to_eigen(const std::vector<double>& y) { return Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())); }

struct Sample {
    ReturnSeries market_excess, fund_excess, bench;
    FactorSeries factors;
};

FactorSeries random_factors(std::mt19937_64& rng, int n, YearMonth start = {2010, 1}) {
    std::normal_distribution<double> g(0.0, 0.04);
    FactorSeries f;
    for (int t = 0; t < n; ++t) f.push(start.plus(t), FactorRow{g(rng), 0.5 * g(rng), 0.5 * g(rng), 0.002});
    return f;
}

ReturnSeries map_series(const FactorSeries& f, auto fn) {
    ReturnSeries s;
    for (std::size_t i = 0; i < f.size(); ++i) s.push(f.months[i], fn(f.values[i], i));
    return s;
}

} // namespace

TEST(OlsFit, ExactLine) {
    Eigen::MatrixXd X(5, 2);
    Eigen::VectorXd y(5);
    for (int i = 0; i < 5; ++i) {
        X.row(i) << 1.0, i;
        y(i) = 2.0 + 3.0 * i;
    }
    auto fit = ols_fit(X, y, {"alpha", "slope"});
    EXPECT_NEAR(fit.estimate("alpha"), 2.0, 1e-12);
    EXPECT_NEAR(fit.estimate("slope"), 3.0, 1e-12);
    EXPECT_LT(fit.residual_variance, 1e-24);
    EXPECT_EQ(fit.df_resid, 3u);
}

TEST(OlsFit, ConstantOnlyDesignGivesMeanAndItsStandardError) {
    std::vector<double> y{0.3, -0.1, 0.4, 0.25, 0.05, -0.2};
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(6, 1);
    auto fit = ols_fit(X, to_eigen(y), {"alpha"});
    double mean = 0;
    for (double v : y) mean += v;
    mean /= 6;
    double ss = 0;
    for (double v : y) ss += (v - mean) * (v - mean);
    EXPECT_NEAR(fit.estimate("alpha"), mean, 1e-15);
    EXPECT_NEAR(fit.standard_error("alpha"), std::sqrt(ss / 5) / std::sqrt(6.0), 1e-15);
}

TEST(OlsFit, MatchesNormalEquationsOracle) {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        oracle::Matrix X(50, std::vector<double>(3));
        std::vector<double> y(50);
        for (int i = 0; i < 50; ++i) {
            X[i] = {1.0, g(rng), g(rng)};
            y[i] = 0.3 + 1.5 * X[i][1] - 0.7 * X[i][2] + 0.5 * g(rng);
        }
        auto [b, inv] = oracle::normal_equations(X, y);
        auto fit = ols_fit(to_eigen(X), to_eigen(y), {"alpha", "b1", "b2"});
        double rss = 0;
        for (int i = 0; i < 50; ++i) {
            double e = y[i] - (b[0] * X[i][0] + b[1] * X[i][1] + b[2] * X[i][2]);
            rss += e * e;
        }
        for (int j = 0; j < 3; ++j) {
            EXPECT_NEAR(fit.coef[j], b[j], 1e-10 * std::max(1.0, std::abs(b[j])));
            EXPECT_NEAR(fit.stderr_[j], std::sqrt(rss / 47 * inv[j]), 1e-10);
        }
    }
}

TEST(OlsFit, ResidualsOrthogonalToDesign) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::MatrixXd X(40, 4);
        Eigen::VectorXd y(40);
        for (int i = 0; i < 40; ++i) {
            X.row(i) << 1.0, g(rng), g(rng) * 10, g(rng) * 0.01;
            y(i) = g(rng);
        }
        auto fit = ols_fit(X, y, {"a", "b", "c", "d"});
        Eigen::VectorXd e = Eigen::Map<Eigen::VectorXd>(fit.residuals.data(), 40);
        const double scale = X.cwiseAbs().maxCoeff() * y.cwiseAbs().maxCoeff() * 40;
        EXPECT_LT((X.transpose() * e).cwiseAbs().maxCoeff(), 1e-9 * scale);
    }
}

TEST(OlsFit, ShiftingResponseMovesOnlyIntercept) {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd X(30, 3);
    Eigen::VectorXd y(30);
    for (int i = 0; i < 30; ++i) {
        X.row(i) << 1.0, g(rng), g(rng);
        y(i) = g(rng);
    }
    auto a = ols_fit(X, y, {"alpha", "b", "c"});
    auto b = ols_fit(X, (y.array() + 0.75).matrix(), {"alpha", "b", "c"});
    EXPECT_NEAR(b.coef[0], a.coef[0] + 0.75, 1e-10);
    EXPECT_NEAR(b.coef[1], a.coef[1], 1e-10);
    EXPECT_NEAR(b.coef[2], a.coef[2], 1e-10);
}

TEST(OlsFit, NoiselessRecoveryProperty) {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 1 + static_cast<int>(rng() % 5), n = k + 3 + static_cast<int>(rng() % 50);
        Eigen::VectorXd beta(k);
        for (int j = 0; j < k; ++j) beta(j) = g(rng);
        Eigen::MatrixXd X(n, k);
        for (int i = 0; i < n; ++i) {
            X(i, 0) = 1.0;
            for (int j = 1; j < k; ++j) X(i, j) = g(rng);
        }
        auto fit = ols_fit(X, X * beta, std::vector<std::string>(k, "c"));
        for (int j = 0; j < k; ++j) EXPECT_NEAR(fit.coef[j], beta(j), 1e-10);
        EXPECT_LT(fit.residual_variance, 1e-18);
    }
}

TEST(OlsFit, RescalingLeavesTStatisticsUnchanged) {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> g(0.0, 0.05);
    Eigen::MatrixXd X(60, 2);
    Eigen::VectorXd y(60);
    for (int i = 0; i < 60; ++i) {
        X.row(i) << 1.0, g(rng);
        y(i) = 0.01 + 0.9 * X(i, 1) + g(rng);
    }
    const double lambda = 3.7;
    Eigen::MatrixXd Xs = X;
    Xs.col(1) *= lambda;
    auto a = ols_fit(X, y, {"alpha", "beta"});
    auto b = ols_fit(Xs, y * lambda, {"alpha", "beta"});
    EXPECT_NEAR(b.estimate("alpha"), lambda * a.estimate("alpha"), 1e-12);
    EXPECT_NEAR(b.t_stat("alpha"), a.t_stat("alpha"), 1e-9);
    EXPECT_NEAR(b.t_stat("beta"), a.t_stat("beta"), 1e-9);
}

TEST(OlsFit, Errors) {
    Eigen::MatrixXd X(4, 2);
    X << 1, 1, 1, 1, 1, 1, 1, 1;
    Eigen::VectorXd y(4);
    y << 1, 2, 3, 4;
    try {
        ols_fit(X, y, {"a", "b"});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::rank_deficient);
    }
    Eigen::MatrixXd Xs(2, 2);
    Xs << 1, 0, 1, 1;
    try {
        ols_fit(Xs, y.head(2), {"a", "b"});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::too_few_obs);
    }
    try {
        ols_fit(X, y.head(3), {"a", "b"});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::length_mismatch);
    }
}

TEST(FamaFrench, ReplicatingFund) {
    std::mt19937_64 rng(1);
    auto f = random_factors(rng, 60);
    auto y = map_series(f, [](const FactorRow& r, std::size_t) { return r.market_excess; });
    auto fit = fit_fama_french(y, f);
    EXPECT_NEAR(fit.estimate("alpha"), 0.0, 1e-12);
    EXPECT_NEAR(fit.estimate("beta_m"), 1.0, 1e-12);
    EXPECT_NEAR(fit.estimate("beta_smb"), 0.0, 1e-12);
    EXPECT_NEAR(fit.estimate("beta_hml"), 0.0, 1e-12);
    EXPECT_FALSE(fit.short_sample);
    EXPECT_EQ(fit.model, ModelTag::ff3);
}

TEST(FamaFrench, ConstantShiftIsAlpha) {
    std::mt19937_64 rng(2);
    auto f = random_factors(rng, 36);
    auto y = map_series(f, [](const FactorRow& r, std::size_t) { return 0.01 + r.market_excess; });
    auto fit = fit_fama_french(y, f);
    EXPECT_NEAR(fit.estimate("alpha"), 0.01, 1e-12);
    EXPECT_TRUE(fit.short_sample);
}

TEST(FamaFrench, InjectedAlphaRecoveredWithinTwoStandardErrors) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 0.02);
    int inside = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto f = random_factors(rng, 60);
        auto y = map_series(f, [&](const FactorRow& r, std::size_t) {
            return 0.005 + 0.9 * r.market_excess + 0.2 * r.smb - 0.1 * r.hml + noise(rng);
        });
        auto fit = fit_fama_french(y, f);
        inside += std::abs(fit.estimate("alpha") - 0.005) < 2 * fit.standard_error("alpha");
    }
    EXPECT_GE(inside, 88); // about 95% expected
}

TEST(FamaFrench, TooFewObservations) {
    std::mt19937_64 rng(4);
    auto f = random_factors(rng, 23);
    auto y = map_series(f, [](const FactorRow& r, std::size_t) { return r.market_excess; });
    try {
        fit_fama_french(y, f);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::too_few_obs);
    }
}

TEST(FamaFrench, InteriorGapRaisesUnlessAllowed) {
    std::mt19937_64 rng(5);
    auto f = random_factors(rng, 40);
    ReturnSeries y;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (i != 20) y.push(f.months[i], f.values[i].market_excess + 0.001 * static_cast<double>(i % 3));
    try {
        fit_fama_french(y, f);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::alignment_gap);
    }
    auto fit = fit_fama_french(y, f, {24, 60, true});
    EXPECT_EQ(fit.n_obs, 39u);
}

TEST(TreynorMazuy, Examples) {
    std::mt19937_64 rng(6);
    auto f = random_factors(rng, 48);
    auto mx = map_series(f, [](const FactorRow& r, std::size_t) { return r.market_excess; });
    auto fit = fit_treynor_mazuy(mx, mx);
    EXPECT_NEAR(fit.estimate("gamma"), 0.0, 1e-10);
    EXPECT_NEAR(fit.estimate("beta_m"), 1.0, 1e-12);
    auto convex = map_series(f, [](const FactorRow& r, std::size_t) {
        return r.market_excess + 0.5 * r.market_excess * r.market_excess;
    });
    EXPECT_NEAR(fit_treynor_mazuy(convex, mx).estimate("gamma"), 0.5, 1e-9);
}

TEST(TreynorMazuy, ConvexPayoffOnSymmetricDesign) {
    // Market excess cycles through {-x, 0, x}; the fund earns |market|.
    // On this design the normal equations give gamma = 1/x and beta = 0.
    const double x = 0.05;
    ReturnSeries m, y;
    for (int t = 0; t < 30; ++t) {
        double v = (t % 3 - 1) * x;
        m.push(YearMonth{2012, 1}.plus(t), v);
        y.push(YearMonth{2012, 1}.plus(t), std::abs(v));
    }
    auto fit = fit_treynor_mazuy(y, m);
    EXPECT_GT(fit.estimate("gamma"), 0.0);
    EXPECT_NEAR(fit.estimate("gamma"), 1.0 / x, 1e-9);
    EXPECT_NEAR(fit.estimate("beta_m"), 0.0, 1e-12);
    EXPECT_NEAR(fit.estimate("alpha"), 0.0, 1e-12);
}

TEST(BenchmarkSimple, Examples) {
    std::mt19937_64 rng(7);
    auto f = random_factors(rng, 60);
    auto d = map_series(f, [](const FactorRow& r, std::size_t) { return r.market_return(); });
    auto fit = fit_benchmark_simple(d, d);
    EXPECT_NEAR(fit.estimate("beta_d"), 1.0, 1e-12);
    EXPECT_NEAR(fit.estimate("alpha"), 0.0, 1e-12);
    auto levered = map_series(f, [](const FactorRow& r, std::size_t) { return 1.2 * r.market_return(); });
    EXPECT_NEAR(fit_benchmark_simple(levered, d).estimate("beta_d"), 1.2, 1e-12);
    std::normal_distribution<double> noise(0.0, 0.01);
    int inside = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto ff = random_factors(rng, 60);
        auto dd = map_series(ff, [](const FactorRow& r, std::size_t) { return r.market_return(); });
        ReturnSeries y;
        for (std::size_t i = 0; i < dd.size(); ++i) y.push(dd.months[i], 0.9 * dd.values[i] + noise(rng));
        auto fr = fit_benchmark_simple(y, dd);
        inside += std::abs(fr.estimate("beta_d") - 0.9) < 2 * fr.standard_error("beta_d");
    }
    EXPECT_GE(inside, 88);
}

TEST(BenchmarkFF, Examples) {
    std::mt19937_64 rng(8);
    auto f = random_factors(rng, 60);
    auto d = map_series(f, [](const FactorRow& r, std::size_t) { return r.market_return(); });
    EXPECT_NEAR(fit_benchmark_ff(d, d, f).estimate("beta_d"), 1.0, 1e-12);
    auto y = map_series(f, [](const FactorRow& r, std::size_t) { return r.market_return() + 0.3 * r.smb - 0.2 * r.hml; });
    auto fit = fit_benchmark_ff(y, d, f);
    EXPECT_NEAR(fit.estimate("beta_d"), 1.0, 1e-10);
    EXPECT_NEAR(fit.estimate("beta_smb"), 0.3, 1e-10);
    EXPECT_NEAR(fit.estimate("beta_hml"), -0.2, 1e-10);
    std::normal_distribution<double> noise(0.0, 0.01);
    int inside = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto yy = map_series(f, [&](const FactorRow& r, std::size_t) { return r.market_return() + 0.3 * r.smb + noise(rng); });
        auto fr = fit_benchmark_ff(yy, d, f);
        inside += std::abs(fr.estimate("beta_smb") - 0.3) < 2 * fr.standard_error("beta_smb");
    }
    EXPECT_GE(inside, 88);
}

TEST(ExcessFF, Examples) {
    std::mt19937_64 rng(9);
    auto f = random_factors(rng, 60);
    std::normal_distribution<double> g(0.0, 0.03);
    auto d = map_series(f, [&](const FactorRow&, std::size_t) { return g(rng); });
    auto m = map_series(f, [](const FactorRow& r, std::size_t) { return r.market_return(); });
    auto fit = fit_excess_ff(d, d, m, f);
    for (double c : fit.coef) EXPECT_NEAR(c, 0.0, 1e-12);
    ReturnSeries y;
    for (std::size_t i = 0; i < d.size(); ++i) y.push(d.months[i], d.values[i] + 0.002);
    EXPECT_NEAR(fit_excess_ff(y, d, m, f).estimate("alpha"), 0.002, 1e-12);
    std::normal_distribution<double> noise(0.0, 0.01);
    int inside = 0;
    for (int trial = 0; trial < 100; ++trial) {
        ReturnSeries yy;
        for (std::size_t i = 0; i < d.size(); ++i)
            yy.push(d.months[i], d.values[i] + 0.003 + 0.1 * m.values[i] + noise(rng));
        auto fr = fit_excess_ff(yy, d, m, f);
        inside += std::abs(fr.estimate("alpha") - 0.003) < 2 * fr.standard_error("alpha");
    }
    EXPECT_GE(inside, 88);
}

TEST(Persistence, Examples) {
    std::vector<double> constant(8, 0.02);
    try {
        fit_persistence(constant);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::rank_deficient);
    }
    std::vector<double> halving{0.64, 0.32, 0.16, 0.08, 0.04, 0.02};
    auto fit = fit_persistence(halving);
    EXPECT_NEAR(fit.estimate("beta_1"), 0.5, 1e-12);
    EXPECT_NEAR(fit.estimate("alpha"), 0.0, 1e-12);

    std::vector<double> noise{0.013, -0.021, 0.004, 0.030, -0.008, 0.017};
    // Closed form slope on the five lagged pairs.
    double mx = 0, my = 0;
    for (int i = 0; i < 5; ++i) {
        mx += noise[i];
        my += noise[i + 1];
    }
    mx /= 5;
    my /= 5;
    double sxy = 0, sxx = 0;
    for (int i = 0; i < 5; ++i) {
        sxy += (noise[i] - mx) * (noise[i + 1] - my);
        sxx += (noise[i] - mx) * (noise[i] - mx);
    }
    auto nf = fit_persistence(noise);
    EXPECT_NEAR(nf.estimate("beta_1"), sxy / sxx, 1e-12);
    EXPECT_NEAR(nf.estimate("alpha"), my - sxy / sxx * mx, 1e-12);
    EXPECT_EQ(nf.n_obs, 5u);
    EXPECT_EQ(nf.df_resid, 3u);

    std::vector<double> short_series{0.1, 0.2, 0.3};
    try {
        fit_persistence(short_series);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::too_few_obs);
    }
}

TEST(TrackingStats, Examples) {
    ReturnSeries a, b;
    for (int t = 0; t < 12; ++t) {
        a.push(YearMonth{2015, 1}.plus(t), 0.01 * (t % 4) - 0.01);
        b.push(YearMonth{2015, 1}.plus(t), 0.01 * (t % 4) - 0.01);
    }
    auto same = tracking_stats(a, a);
    EXPECT_EQ(same.mean_diff, 0.0);
    EXPECT_EQ(same.sd_diff, 0.0);
    EXPECT_EQ(same.median_rel_diff, 0.0);

    ReturnSeries f2, d2;
    f2.push({2015, 1}, 0.03);
    d2.push({2015, 1}, 0.02);
    f2.push({2015, 2}, 0.01);
    d2.push({2015, 2}, 0.02);
    auto two = tracking_stats(f2, d2);
    EXPECT_NEAR(two.mean_diff, 0.0, 1e-17);
    EXPECT_NEAR(two.sd_diff, std::sqrt(2 * 0.0001 / 1), 1e-15);

    ReturnSeries lev, base;
    for (int t = 0; t < 7; ++t) {
        base.push(YearMonth{2015, 1}.plus(t), 0.01 * (t + 1));
        lev.push(YearMonth{2015, 1}.plus(t), 1.1 * 0.01 * (t + 1));
    }
    EXPECT_NEAR(tracking_stats(lev, base).median_rel_diff, 0.1, 1e-12);
    auto with_zero = tracking_stats(a, b);
    EXPECT_EQ(with_zero.n_rel_excluded, 3u);
}
