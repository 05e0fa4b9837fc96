#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <sstream>

#include "helpers.hpp"
#include "loccal/corpus.hpp"
#include "loccal/detector.hpp"
#include "loccal/synth.hpp"

using namespace loccal;

namespace {

SyntheticWorld one_cluster(double mu_h, double mu_m, std::size_t tokens = 50) {
    SyntheticWorld w;
    w.clusters = {{{0.0, 0.0}, 1.0}};
    w.sources = {{"human", {1.0}, {{mu_h, 1.0}}}, {"machine", {1.0}, {{mu_m, 1.0}}}};
    w.tokens_per_text = tokens;
    w.seed = 3;
    return w;
}

}  // namespace

TEST(Synth, SimpsonClosedForm) {
    const SyntheticWorld w = simpson_world();
    const auto& h = w.sources[0];
    const auto& m = w.sources[1];
    for (std::size_t c = 0; c < w.clusters.size(); ++c) EXPECT_GT(m.scores[c].mean, h.scores[c].mean);
    EXPECT_LT(pooled_mean(m), pooled_mean(h));
}

TEST(Synth, SimpsonEmpiricalMeans) {
    const SyntheticWorld w = simpson_world();
    const Corpus c = generate_world(w, 300);
    // Pooled and per-cluster means of g; clusters recovered from the sign of axis 0.
    for (std::size_t s = 0; s < 2; ++s) {
        double sum = 0, sum2 = 0, n = 0;
        for (const auto& text : c) {
            if (text.source != w.sources[s].name) continue;
            for (const auto& t : text.tokens) {
                sum += t.logp_obs;
                sum2 += t.logp_obs * t.logp_obs;
                ++n;
            }
        }
        const double mean = sum / n;
        const double se = std::sqrt((sum2 / n - mean * mean) / n);
        EXPECT_NEAR(mean, pooled_mean(w.sources[s]), 3 * se + 0.01);
    }
    double local[2][2] = {{0, 0}, {0, 0}}, count[2][2] = {{0, 0}, {0, 0}};
    for (const auto& text : c) {
        const std::size_t s = text.source == "human" ? 0 : 1;
        for (const auto& t : text.tokens) {
            const std::size_t k = t.hidden[0] > 0 ? 0 : 1;
            local[s][k] += t.logp_obs;
            ++count[s][k];
        }
    }
    for (std::size_t k = 0; k < 2; ++k) EXPECT_GT(local[1][k] / count[1][k], local[0][k] / count[0][k]);
}

TEST(Synth, GenerationIsDeterministicAndValid) {
    const SyntheticWorld w = simpson_world(5, 8);
    const Corpus a = generate_world(w, 20);
    const Corpus b = generate_world(w, 20);
    std::ostringstream sa, sb;
    write_corpus(sa, a);
    write_corpus(sb, b);
    EXPECT_EQ(sa.str(), sb.str());
    ASSERT_EQ(a.size(), 40u);
    EXPECT_EQ(a[0].text_id, "human-0");
    EXPECT_EQ(a[20].text_id, "machine-0");
    EXPECT_EQ(a[0].prompt_group, a[20].prompt_group);
    for (const auto& text : a) {
        EXPECT_EQ(text.tokens.size(), w.tokens_per_text);
        for (const auto& t : text.tokens) {
            EXPECT_NO_THROW(validate_token(t, "t", 0));
            EXPECT_EQ(t.hidden.size(), 8u);
            EXPECT_EQ(t.topk_probs.size(), 5u);
        }
    }
    SyntheticWorld other = w;
    other.seed = 6;
    std::ostringstream so;
    write_corpus(so, generate_world(other, 20));
    EXPECT_NE(so.str(), sa.str());
}

TEST(Synth, BackfillIsConsistent) {
    Rng rng(1);
    for (int i = 0; i < 2000; ++i) {
        const double g = -8.0 * rng.uniform();
        const TokenRecord t = backfill_token(g, {0.0}, 5);
        EXPECT_NO_THROW(validate_token(t, "t", 0));
        EXPECT_NEAR(t.logp_obs, g, 1e-12);
        EXPECT_GE(*t.m2_logp, *t.mu_logp * *t.mu_logp - 1e-12);
    }
    const TokenRecord clipped = backfill_token(0.7, {0.0}, 3);
    EXPECT_EQ(clipped.p_obs, 1.0);
    EXPECT_EQ(clipped.logp_obs, 0.0);
    EXPECT_EQ(clipped.rank_obs, 1);
}

TEST(Synth, WorldValidation) {
    SyntheticWorld w = one_cluster(0, 1);
    EXPECT_NO_THROW(w.validate());
    w.sources[1].weights = {0.7};
    EXPECT_THROW(w.validate(), ConfigError);
    w = one_cluster(0, 1);
    w.sources[0].scores[0].sd = 0.0;
    EXPECT_THROW(w.validate(), ConfigError);
    w = one_cluster(0, 1);
    w.sources.pop_back();
    EXPECT_THROW(w.validate(), ConfigError);
    EXPECT_THROW(generate_world(w, 3), ConfigError);
}

TEST(Synth, WorldJsonRoundTrip) {
    const SyntheticWorld w = random_world(11);
    EXPECT_EQ(world_from_json(nlohmann::json::parse(world_to_json(w).dump())), w);
    EXPECT_THROW(world_from_json(nlohmann::json::parse(R"({"clusters": 3})")), ConfigError);
    EXPECT_THROW(read_world_file("/nonexistent/world.json"), IoError);
}

TEST(Synth, RandomWorldSharedMix) {
    RandomWorldOptions o;
    o.shared_mix = true;
    o.generators = {"a", "b"};
    const SyntheticWorld w = random_world(8, o);
    EXPECT_EQ(w.sources[1].weights, w.sources[0].weights);
    EXPECT_EQ(w.sources[2].weights, w.sources[0].weights);
    EXPECT_NE(w.sources[1].scores, w.sources[0].scores);
    EXPECT_NE(random_world(8).sources[1].weights, random_world(8).sources[0].weights);
    EXPECT_EQ(random_world(8), random_world(8));
}

TEST(ExactLambda4, Examples) {
    const SyntheticWorld w = one_cluster(0, 1);
    TextRecord t = loccal::testing::text_of("t", "human", {backfill_token(0.0, {0.0, 0.0}, 5)});
    EXPECT_NEAR(exact_lambda4(w, t), 0.5, 1e-12);
    const SyntheticWorld same = one_cluster(-1, -1);
    for (const auto& text : generate_world(same, 5)) EXPECT_EQ(exact_lambda4(same, text), 0.0);
    t.tokens[0].hidden = {0.0};
    EXPECT_THROW(exact_lambda4(w, t), ValidationError);
}

TEST(ExactLambda4, OracleBeatsNaiveOnSimpson) {
    const SyntheticWorld w = simpson_world();
    const Corpus c = generate_world(w, 400);
    const double oracle = auroc_of(c, "human", "machine", [&](const TextRecord& t) { return -exact_lambda4(w, t); });
    const double naive = auroc_of(c, "human", "machine",
                                  [&](const TextRecord& t) { return mean_token_score(ScorerId::log_surprisal, t).value; });
    EXPECT_GE(oracle, 0.95);
    EXPECT_LE(naive, 0.65);
    // stderr of an AUROC near 1 with 400 per class is well under 0.01.
    EXPECT_GE(oracle, naive - 0.01);
}

TEST(BayesGap, PerfectAndUntrainedPredictors) {
    const SyntheticWorld w = one_cluster(-2.0, -1.7, 40);
    const Corpus test = generate_world(w, 200);
    DetectorBundle b;
    b.generator = "machine";
    b.features = std::make_shared<FeaturePipeline>(FeaturePipeline{fit_pca(hidden_matrix(test), 2), 5});
    b.human = std::make_shared<Predictor>(loccal::testing::constant_gaussian(7, -2.0, 1.0));
    b.machine = std::make_shared<Predictor>(loccal::testing::constant_gaussian(7, -1.7, 1.0));
    EXPECT_NEAR(bayes_gap(test, b, w), 0.0, 1e-12);

    auto random_net = [](std::uint64_t seed) {
        Predictor p = loccal::testing::constant_gaussian(7, 0.0, 1.0);
        p.net = init_mlp(7, 16, 2, 0.0, seed);
        return std::make_shared<Predictor>(p);
    };
    b.human = random_net(1);
    b.machine = random_net(2);
    EXPECT_GT(bayes_gap(test, b, w), 0.1);
}

TEST(PureSampling, FieldsAreExact) {
    Rng rng(4);
    for (int i = 0; i < 500; ++i) {
        const TokenRecord t = sample_pure_token(rng, 32, 5, 3);
        EXPECT_NO_THROW(validate_token(t, "t", 0));
        EXPECT_EQ(t.hidden.size(), 3u);
        EXPECT_GE(*t.m2_logp, *t.mu_logp * *t.mu_logp - 1e-12);
        if (t.rank_obs <= 5) EXPECT_DOUBLE_EQ(t.topk_probs[static_cast<std::size_t>(t.rank_obs - 1)], t.p_obs);
    }
}
