#include <gtest/gtest.h>

#include <cmath>

#include "loccal/eval.hpp"
#include "loccal/random.hpp"

using namespace loccal;

namespace {

LabeledScores make(std::vector<double> pos, std::vector<double> neg) {
    LabeledScores s;
    s.add_all(pos, Label::machine);
    s.add_all(neg, Label::human);
    return s;
}

double brute_auroc(const LabeledScores& s) {
    const auto pos = s.scores_of(Label::machine), neg = s.scores_of(Label::human);
    double wins = 0.0;
    for (double p : pos)
        for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
    return wins / static_cast<double>(pos.size() * neg.size());
}

LabeledScores random_set(Rng& rng, bool ties) {
    LabeledScores s;
    const std::size_t n = 2 + rng.index(199);
    for (std::size_t i = 0; i < n; ++i) {
        const Label l = i == 0 ? Label::machine : (i == 1 ? Label::human : (rng.uniform() < 0.5 ? Label::machine : Label::human));
        const double v = ties ? static_cast<double>(rng.index(6)) : rng.normal() + (l == Label::machine ? 0.5 : 0.0);
        s.add(v, l);
    }
    return s;
}

}  // namespace

TEST(Auroc, Examples) {
    EXPECT_EQ(auroc(make({1, 2}, {0})), 1.0);
    EXPECT_EQ(auroc(make({0, 1}, {0.5})), 0.5);
    EXPECT_EQ(auroc(make({1}, {1})), 0.5);
    EXPECT_THROW(auroc(make({1}, {})), ValidationError);
    EXPECT_THROW(auroc(make({}, {1})), ValidationError);
}

TEST(Auroc, MatchesBruteForce) {
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const LabeledScores s = random_set(rng, i % 2 == 0);
        EXPECT_NEAR(auroc(s), brute_auroc(s), 1e-12);
    }
}

TEST(Auroc, SymmetryAndMonotoneInvariance) {
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        const LabeledScores s = random_set(rng, i % 3 == 0);
        LabeledScores flipped, mapped;
        for (const auto& e : s.entries) {
            flipped.add(-e.score, e.label == Label::machine ? Label::human : Label::machine);
            mapped.add(std::exp(0.3 * e.score) - 4.0, e.label);
        }
        EXPECT_NEAR(auroc(flipped), auroc(s), 1e-12);
        EXPECT_NEAR(auroc(mapped), auroc(s), 1e-12);
        EXPECT_EQ(tpr_at_fpr(mapped, 0.1), tpr_at_fpr(s, 0.1));
        EXPECT_EQ(tpr_at_fpr(mapped, 0.01), tpr_at_fpr(s, 0.01));
    }
}

TEST(TprAtFpr, Examples) {
    EXPECT_EQ(tpr_at_fpr(make({0.9, 0.8}, {0.1, 0.2}), 0.01), 1.0);
    EXPECT_EQ(tpr_at_fpr(make({0.0, 0.1}, {0.5, 0.6}), 0.01), 0.0);
    EXPECT_EQ(tpr_at_fpr(make({0.0, 0.55}, {0.5, 0.6}), 0.99), 0.5);
    // Ten negatives at 1%: no false positive allowed, threshold is the top negative.
    std::vector<double> neg;
    for (int i = 0; i < 10; ++i) neg.push_back(i);
    EXPECT_EQ(tpr_at_fpr(make({9, 9.5, 10}, neg), 0.01), 2.0 / 3.0);
    // At 10%, one false positive is allowed.
    EXPECT_EQ(tpr_at_fpr(make({8.5, 9, 9.5}, neg), 0.1), 1.0);
    EXPECT_THROW(tpr_at_fpr(make({1}, {0}), 0.0), ConfigError);
    EXPECT_THROW(tpr_at_fpr(make({1}, {0}), 1.0), ConfigError);
    EXPECT_THROW(tpr_at_fpr(make({1}, {}), 0.1), ValidationError);
}

TEST(TprAtFpr, EmpiricalFprWithinTarget) {
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> neg(1 + rng.index(500));
        for (double& v : neg) v = rng.normal();
        const double target = rng.uniform(0.001, 0.5);
        // Positives equal to every negative value: the TPR equals the admitted FPR.
        const double tpr = tpr_at_fpr(make(neg, neg), target);
        EXPECT_LE(tpr, target + 1e-12);
    }
}

TEST(Bootstrap, Examples) {
    const auto constant = bootstrap_ci(make({1, 1, 1}, {1, 1}), auroc_metric(), 200, 0.95, 1);
    EXPECT_EQ(constant.lo, 0.5);
    EXPECT_EQ(constant.hi, 0.5);
    const auto perfect = bootstrap_ci(make({5, 6, 7, 8}, {0, 1, 2}), auroc_metric(), 200, 0.95, 1);
    EXPECT_EQ(perfect.lo, 1.0);
    EXPECT_EQ(perfect.hi, 1.0);
    EXPECT_THROW(bootstrap_ci(make({1}, {0}), auroc_metric(), 0), ConfigError);
    EXPECT_THROW(bootstrap_ci(make({1}, {0}), auroc_metric(), 10, 1.0), ConfigError);
}

TEST(Bootstrap, DeterministicAndMonotoneInLevel) {
    Rng rng(4);
    const LabeledScores s = random_set(rng, false);
    const auto a = bootstrap_ci(s, auroc_metric(), 500, 0.95, 9);
    const auto b = bootstrap_ci(s, auroc_metric(), 500, 0.95, 9);
    EXPECT_EQ(a.lo, b.lo);
    EXPECT_EQ(a.hi, b.hi);
    double prev_lo = 2.0, prev_hi = -1.0;
    for (double level : {0.5, 0.8, 0.9, 0.95, 0.99}) {
        const auto ci = bootstrap_ci(s, tpr_metric(0.1), 500, level, 9);
        EXPECT_LE(ci.lo, prev_lo);
        EXPECT_GE(ci.hi, prev_hi);
        prev_lo = ci.lo;
        prev_hi = ci.hi;
    }
}

TEST(Bootstrap, StratifiedKeepsCounts) {
    const LabeledScores s = make({1, 2, 3}, {0});
    std::size_t calls = 0;
    const Metric m = [&](std::span<const double> pos, std::span<const double> neg) {
        EXPECT_EQ(pos.size(), 3u);
        EXPECT_EQ(neg.size(), 1u);
        ++calls;
        return 0.0;
    };
    bootstrap_replicates(s, m, 25, 0);
    EXPECT_EQ(calls, 25u);
}

TEST(Bootstrap, PointEstimateInsideInterval) {
    int inside = 0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        Rng rng(derive_seed(77, trial));
        LabeledScores s;
        for (int i = 0; i < 100; ++i) s.add(rng.normal() + 1.0, Label::machine);
        for (int i = 0; i < 100; ++i) s.add(rng.normal(), Label::human);
        const double est = auroc(s);
        const auto ci = bootstrap_ci(s, auroc_metric(), 300, 0.95, trial);
        inside += ci.lo <= est && est <= ci.hi;
    }
    EXPECT_GE(inside, 99);
}

TEST(Quantile, Interpolates) {
    const std::vector<double> v{0, 1, 2, 3};
    EXPECT_EQ(quantile_sorted(v, 0.0), 0.0);
    EXPECT_EQ(quantile_sorted(v, 1.0), 3.0);
    EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.5), 1.5);
}
