#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "loccal/predictor.hpp"

using namespace loccal;

namespace {

TrainConfig quick_config() {
    TrainConfig c;
    c.epochs = 30;
    c.batch_size = 64;
    c.hidden = 16;
    c.learning_rate = 3e-3;
    c.seed = 5;
    return c;
}

// g = 3 z0 + noise(0.3); the other feature is irrelevant.
Dataset linear_world(Rng& rng, std::size_t n) {
    Dataset d;
    d.features = Matrix(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        d.features(i, 0) = rng.normal();
        d.features(i, 1) = rng.uniform();
        d.scalar_targets.push_back(3.0 * d.features(i, 0) + 0.3 * rng.normal() - 2.0);
    }
    return d;
}

double mean_nll(const Predictor& p, const Dataset& d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) s -= predict_logdensity(p, d.features.row(i), d.scalar_targets[i]);
    return s / static_cast<double>(d.size());
}

}  // namespace

TEST(Predictor, GaussianLearnsLinearWorld) {
    Rng rng(1);
    const Dataset train = linear_world(rng, 1500);
    const Dataset test = linear_world(rng, 500);
    std::vector<double> losses;
    const Predictor p = train_predictor(train, quick_config(), [&](std::size_t, double l) { losses.push_back(l); });
    ASSERT_EQ(losses.size(), 30u);
    EXPECT_LT(losses.back(), losses.front());

    double mean = 0.0, var = 0.0;
    for (double g : train.scalar_targets) mean += g / 1500.0;
    for (double g : train.scalar_targets) var += (g - mean) * (g - mean) / 1500.0;
    double constant = 0.0;
    for (double g : test.scalar_targets) constant += gaussian_nll({mean, std::sqrt(var)}, g) / 500.0;
    EXPECT_LT(mean_nll(p, test), constant - 1.0);

    const GaussianHeadOutput o = predict_gaussian(p, std::vector<double>{1.0, 0.5});
    EXPECT_NEAR(o.mu, 1.0, 0.3);
    EXPECT_GT(o.sigma, 0.0);
}

TEST(Predictor, Deterministic) {
    Rng a(2), b(2);
    const Dataset d1 = linear_world(a, 300), d2 = linear_world(b, 300);
    TrainConfig c = quick_config();
    c.epochs = 3;
    EXPECT_EQ(train_predictor(d1, c), train_predictor(d2, c));
    TrainConfig other = c;
    other.seed = 6;
    EXPECT_NE(train_predictor(d1, c), train_predictor(d1, other));
}

TEST(Predictor, CategoricalBeatsUniform) {
    Rng rng(3);
    Dataset d;
    d.head = HeadKind::categorical;
    d.features = Matrix(1000, 1);
    d.dist_targets = Matrix(1000, 6);
    for (std::size_t i = 0; i < 1000; ++i) {
        const double x = rng.normal();
        d.features(i, 0) = x;
        d.dist_targets(i, x > 0 ? 0 : 5) = 1.0;
    }
    const Predictor p = train_predictor(d, quick_config());
    double ce = 0.0;
    for (std::size_t i = 0; i < 1000; ++i) {
        const auto row = d.dist_targets.row(i);
        ce -= predict_logdensity(p, d.features.row(i), BinVector(row.begin(), row.end())) / 1000.0;
    }
    EXPECT_LT(ce, std::log(6.0) - 1.0);
    EXPECT_THROW(predict_gaussian(p, std::vector<double>{0.0}), ValidationError);
    EXPECT_THROW(predict_logdensity(p, std::vector<double>{0.0}, 1.0), ValidationError);
}

TEST(Predictor, InputErrors) {
    Dataset d;
    EXPECT_THROW(train_predictor(d, quick_config()), ValidationError);
    Rng rng(4);
    d = linear_world(rng, 10);
    d.scalar_targets.pop_back();
    EXPECT_THROW(train_predictor(d, quick_config()), ValidationError);
    const Predictor p = loccal::testing::constant_gaussian(2, 0.0, 1.0);
    EXPECT_THROW(predict_gaussian(p, std::vector<double>{1.0}), ValidationError);
}
