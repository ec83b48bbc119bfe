#include <gtest/gtest.h>

#include "decgnn/errors.hpp"
#include "decgnn/metrics.hpp"
#include "decgnn/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace decgnn;

TEST(Confusion, PerfectPredictions) {
    const std::vector<double> p{0.9, 0.1, 0.8, 0.2};
    const std::vector<int> y{1, 0, 1, 0};
    const auto r = confusion_metrics(p, y);
    EXPECT_EQ(r.accuracy, 1.0);
    EXPECT_EQ(r.precision, 1.0);
    EXPECT_EQ(r.recall, 1.0);
    EXPECT_EQ(r.f1, 1.0);
}

TEST(Confusion, HandCountedExample) {
    const std::vector<double> p{0.9, 0.2, 0.8, 0.4};
    const std::vector<int> y{1, 0, 0, 1};
    const auto r = confusion_metrics(p, y);
    EXPECT_EQ(r.tp, 1u);
    EXPECT_EQ(r.fp, 1u);
    EXPECT_EQ(r.tn, 1u);
    EXPECT_EQ(r.fn, 1u);
    EXPECT_EQ(r.accuracy, 0.5);
    EXPECT_EQ(r.precision, 0.5);
    EXPECT_EQ(r.recall, 0.5);
    EXPECT_EQ(r.f1, 0.5);
}

TEST(Confusion, AllNegativePredictionsFlagPrecision) {
    const std::vector<double> p{0.1, 0.2, 0.3};
    const std::vector<int> y{1, 0, 1};
    const auto r = confusion_metrics(p, y);
    EXPECT_TRUE(r.precision_degenerate);
    EXPECT_EQ(r.precision, 0.0);
    EXPECT_TRUE(r.f1_degenerate);
    EXPECT_FALSE(r.recall_degenerate);
}

TEST(Confusion, ThresholdIsInclusive) {
    const std::vector<double> p{0.5};
    const std::vector<int> y{1};
    EXPECT_EQ(confusion_metrics(p, y).tp, 1u);
}

TEST(Confusion, InvalidInputs) {
    const std::vector<double> p{0.5, 0.5};
    EXPECT_THROW(confusion_metrics(p, std::vector<int>{1}), DataError);
    EXPECT_THROW(confusion_metrics(p, std::vector<int>{1, 2}), DataError);
    EXPECT_THROW(confusion_metrics(std::vector<double>{}, std::vector<int>{}), DataError);
}

TEST(RocAuc, PerfectAndHandExamples) {
    EXPECT_EQ(roc_auc(std::vector<double>{0.9, 0.8, 0.3, 0.1}, std::vector<int>{1, 1, 0, 0}), 1.0);
    EXPECT_EQ(roc_auc(std::vector<double>{0.9, 0.6, 0.4, 0.1}, std::vector<int>{1, 0, 1, 0}), 0.75);
    EXPECT_EQ(roc_auc(std::vector<double>{0.5, 0.5}, std::vector<int>{1, 0}), 0.5);
    EXPECT_THROW(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), DataError);
}

TEST(RocAuc, MatchesPairCountingOracleWithTies) {
    RngStream rng(1, "auc");
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 2 + rng.below(199);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng.below(20)) / 20.0;  // coarse grid forces ties
            y[i] = static_cast<int>(rng.below(2));
        }
        y[0] = 1;
        y[1] = 0;
        EXPECT_NEAR(roc_auc(s, y), oracle::pairwise_auc(s, y), 1e-12);
    }
}

TEST(Evaluate, CombinesConfusionAndAuc) {
    const std::vector<double> p{0.9, 0.6, 0.4, 0.1};
    const std::vector<int> y{1, 0, 1, 0};
    const auto r = evaluate(p, y);
    EXPECT_EQ(r.roc_auc, 0.75);
    EXPECT_EQ(r.accuracy, 0.5);
}

TEST(SaveMetrics, HeaderAndRows) {
    testutil::TempDir dir("metrics");
    EvalReport r;
    r.accuracy = 0.5;
    r.roc_auc = 0.75;
    save_metrics({{3, r}}, dir / "m.csv");
    EXPECT_EQ(testutil::read_file(dir / "m.csv"), "cluster_id,accuracy,precision,recall,f1,roc_auc\n3,0.5,0,0,0,0.75\n");
}
