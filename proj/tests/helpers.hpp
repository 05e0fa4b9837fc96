#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "loccal/corpus.hpp"
#include "loccal/features.hpp"
#include "loccal/predictor.hpp"
#include "loccal/random.hpp"

namespace loccal::testing {

// Top token of a distribution (rank 1, nothing above it).
inline TokenRecord top_token(double p, std::vector<double> hidden = {0.0, 0.0}) {
    TokenRecord t;
    t.p_obs = p;
    t.logp_obs = std::log(p);
    t.rank_obs = 1;
    t.mass_above = 0.0;
    t.topk_probs = {p};
    t.hidden = std::move(hidden);
    return t;
}

inline TokenRecord ranked_token(double p, std::int64_t rank, double mass_above, std::vector<double> hidden = {0.0, 0.0}) {
    TokenRecord t = top_token(p, std::move(hidden));
    t.rank_obs = rank;
    t.mass_above = mass_above;
    t.topk_probs = {std::max(p, std::min(1.0 - p, 0.9))};
    return t;
}

inline TextRecord text_of(std::string id, std::string source, std::vector<TokenRecord> tokens,
                          std::string group = "g0") {
    return {std::move(id), std::move(source), "test", std::move(group), std::move(tokens)};
}

// Features = first hidden coordinate plus the top-k probabilities, for 2-wide hidden vectors.
inline FeaturePipeline axis_features(std::size_t k = 1) {
    PcaModel m;
    m.mean = {0.0, 0.0};
    m.components = Matrix(1, 2);
    m.components(0, 0) = 1.0;
    m.explained_variance = {1.0};
    return {m, k};
}

inline double inverse_softplus(double s) { return std::log(std::expm1(s)); }

// Ignores its input and predicts N(mu, sigma^2).
inline Predictor constant_gaussian(std::size_t in, double mu, double sigma) {
    Predictor p;
    p.head = HeadKind::gaussian;
    p.net = MlpParams(in, 1, 2);
    p.net.b2()[0] = mu;
    p.net.b2()[1] = inverse_softplus(sigma);
    p.input_mean.assign(in, 0.0);
    p.input_scale.assign(in, 1.0);
    return p;
}

// Ignores its input and predicts the given bin distribution.
inline Predictor constant_categorical(std::size_t in, const std::vector<double>& probs) {
    Predictor p;
    p.head = HeadKind::categorical;
    p.net = MlpParams(in, 1, probs.size());
    for (std::size_t b = 0; b < probs.size(); ++b) p.net.b2()[b] = std::log(probs[b]);
    p.input_mean.assign(in, 0.0);
    p.input_scale.assign(in, 1.0);
    return p;
}

// Small random dataset for gradient checks.
inline Dataset random_dataset(Rng& rng, HeadKind head, std::size_t n, std::size_t in, std::size_t bins = 6) {
    Dataset d;
    d.head = head;
    d.features = Matrix(n, in);
    for (double& v : d.features.data) v = rng.normal();
    if (head == HeadKind::gaussian) {
        for (std::size_t i = 0; i < n; ++i) d.scalar_targets.push_back(2.0 * rng.normal());
    } else {
        d.dist_targets = Matrix(n, bins);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t b = 0; b < bins; ++b) s += (d.dist_targets(i, b) = rng.uniform());
            for (std::size_t b = 0; b < bins; ++b) d.dist_targets(i, b) /= s;
        }
    }
    return d;
}

}  // namespace loccal::testing
