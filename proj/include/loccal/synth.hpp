#pragma once
// Synthetic corpora with known local score laws.
//
// Each token picks a hidden-space cluster from its source's mixture weights, gets
// hidden = center + spread * N(0, I), and draws its log-probability g from the source's
// per-cluster normal law. The remaining record fields are back-filled from g:
//   p = min(1, e^g), a = (1 - p)^2 (or 0 when that would round to rank 1),
//   rank = 1 + round(a / p), moments of the two-point law {p, 1 - p},
//   top-k probabilities from the hidden vector only.
// Only g and the hidden vector carry signal; back-filled fields are not realistic.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "loccal/corpus.hpp"
#include "loccal/detector.hpp"
#include "loccal/error.hpp"
#include "loccal/eval.hpp"
#include "loccal/random.hpp"

namespace loccal {

struct ScoreDist {
    double mean = 0.0;
    double sd = 1.0;
    friend bool operator==(const ScoreDist&, const ScoreDist&) = default;
};

struct WorldCluster {
    std::vector<double> center;
    double spread = 1.0;
    friend bool operator==(const WorldCluster&, const WorldCluster&) = default;
};

struct WorldSource {
    std::string name;
    std::vector<double> weights;    // one per cluster, sums to 1
    std::vector<ScoreDist> scores;  // law of g per cluster
    friend bool operator==(const WorldSource&, const WorldSource&) = default;
};

struct SyntheticWorld {
    std::vector<WorldCluster> clusters;
    std::vector<WorldSource> sources;  // sources[0] is the human source
    std::size_t tokens_per_text = 200;
    std::size_t top_k = 5;
    std::uint64_t seed = 0;

    std::size_t hidden_dim() const { return clusters.empty() ? 0 : clusters.front().center.size(); }

    const WorldSource& source(const std::string& name) const {
        for (const auto& s : sources)
            if (s.name == name) return s;
        throw ConfigError("world has no source '" + name + "'");
    }

    void validate() const {
        if (clusters.empty()) throw ConfigError("world needs at least one cluster");
        if (sources.size() < 2) throw ConfigError("world needs a human source and at least one generator");
        if (tokens_per_text == 0) throw ConfigError("tokens_per_text must be positive");
        if (top_k == 0 || top_k > 30) throw ConfigError("top_k must lie in [1, 30]");
        const std::size_t dh = hidden_dim();
        if (dh == 0) throw ConfigError("cluster centers must be non-empty");
        for (const auto& c : clusters) {
            if (c.center.size() != dh) throw ConfigError("cluster centers differ in dimension");
            if (!(c.spread > 0.0)) throw ConfigError("cluster spread must be positive");
        }
        for (const auto& s : sources) {
            if (s.weights.size() != clusters.size() || s.scores.size() != clusters.size())
                throw ConfigError("source '" + s.name + "' needs one weight and one score law per cluster");
            double total = 0.0;
            for (double w : s.weights) {
                if (!(w >= 0.0)) throw ConfigError("source '" + s.name + "' has a negative weight");
                total += w;
            }
            if (std::abs(total - 1.0) > 1e-9) throw ConfigError("weights of source '" + s.name + "' must sum to 1");
            for (const auto& d : s.scores)
                if (!(d.sd > 0.0)) throw ConfigError("source '" + s.name + "' has a non-positive score sd");
        }
    }

    friend bool operator==(const SyntheticWorld&, const SyntheticWorld&) = default;
};

inline constexpr std::int64_t kSynthMaxRank = 50000;

// Mixture mean of g for a source, pooled over clusters.
inline double pooled_mean(const WorldSource& s) {
    double m = 0.0;
    for (std::size_t c = 0; c < s.weights.size(); ++c) m += s.weights[c] * s.scores[c].mean;
    return m;
}

inline std::vector<double> topk_from_hidden(std::span<const double> hidden, std::size_t k) {
    double mean = 0.0;
    for (double h : hidden) mean += h;
    mean /= static_cast<double>(std::max<std::size_t>(hidden.size(), 1));
    const double top = 0.5 + 0.25 / (1.0 + std::exp(-mean));
    std::vector<double> out{top};
    double share = 1.0 - top;
    for (std::size_t j = 1; j < k; ++j) out.push_back(share *= 0.5);
    return out;
}

// Record whose log-probability is g (clipped at 0) with the fields described above.
inline TokenRecord backfill_token(double g, std::vector<double> hidden, std::size_t k) {
    TokenRecord t;
    t.p_obs = std::min(1.0, std::exp(g));
    t.logp_obs = std::log(t.p_obs);
    const double p = t.p_obs;
    const double raw = (1.0 - p) * (1.0 - p);
    if (p >= 1.0 || raw / p < 0.5) {
        t.mass_above = 0.0;
        t.rank_obs = 1;
    } else {
        t.mass_above = raw;
        t.rank_obs = std::min<std::int64_t>(kSynthMaxRank, 1 + std::llround(raw / p));
    }
    const double q = 1.0 - p;
    const double lp = t.logp_obs;
    const double lq = q > 0.0 ? std::log(q) : 0.0;
    const double other_rank = t.rank_obs == 1 ? 2.0 : 1.0;
    t.mu_logp = p * lp + q * lq;
    t.m2_logp = p * lp * lp + q * lq * lq;
    t.mu_logrank = p * std::log(static_cast<double>(t.rank_obs)) + q * std::log(other_rank);
    t.topk_probs = topk_from_hidden(hidden, k);
    t.hidden = std::move(hidden);
    return t;
}

// n_texts per source. Text j of every source shares prompt group "p<j>".
inline Corpus generate_world(const SyntheticWorld& w, std::size_t n_texts) {
    w.validate();
    Corpus corpus;
    corpus.reserve(n_texts * w.sources.size());
    const std::size_t dh = w.hidden_dim();
    for (std::size_t s = 0; s < w.sources.size(); ++s) {
        const WorldSource& src = w.sources[s];
        for (std::size_t j = 0; j < n_texts; ++j) {
            Rng rng(derive_seed(w.seed, (static_cast<std::uint64_t>(s) << 32) | j));
            TextRecord text;
            text.text_id = src.name + "-" + std::to_string(j);
            text.source = src.name;
            text.domain = "synthetic";
            text.prompt_group = "p" + std::to_string(j);
            text.tokens.reserve(w.tokens_per_text);
            for (std::size_t i = 0; i < w.tokens_per_text; ++i) {
                const std::size_t c = rng.categorical(src.weights);
                std::vector<double> hidden(dh);
                for (std::size_t d = 0; d < dh; ++d) hidden[d] = w.clusters[c].center[d] + w.clusters[c].spread * rng.normal();
                const double g = rng.normal(src.scores[c].mean, src.scores[c].sd);
                text.tokens.push_back(backfill_token(g, std::move(hidden), w.top_k));
            }
            corpus.push_back(std::move(text));
        }
    }
    return corpus;
}

namespace detail {

inline double log_sum_exp(std::span<const double> v) {
    const double mx = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

inline double log_normal_pdf(double x, double mean, double sd) {
    const double r = (x - mean) / sd;
    return -0.5 * r * r - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

}  // namespace detail

// log P(g | h, source) under the true mixture: cluster posterior from the isotropic
// Gaussian clusters and the source's weights, then the per-cluster score law.
inline double exact_log_density(const SyntheticWorld& w, const WorldSource& src, std::span<const double> hidden, double g) {
    const std::size_t nc = w.clusters.size();
    std::vector<double> log_post(nc), log_joint(nc);
    for (std::size_t c = 0; c < nc; ++c) {
        const auto& cl = w.clusters[c];
        double sq = 0.0;
        for (std::size_t d = 0; d < hidden.size(); ++d) sq += (hidden[d] - cl.center[d]) * (hidden[d] - cl.center[d]);
        const double var = cl.spread * cl.spread;
        log_post[c] = (src.weights[c] > 0.0 ? std::log(src.weights[c]) : -std::numeric_limits<double>::infinity()) -
                      0.5 * sq / var - static_cast<double>(hidden.size()) * std::log(cl.spread);
    }
    const double norm = detail::log_sum_exp(log_post);
    for (std::size_t c = 0; c < nc; ++c)
        log_joint[c] = log_post[c] - norm + detail::log_normal_pdf(g, src.scores[c].mean, src.scores[c].sd);
    return detail::log_sum_exp(log_joint);
}

// Lambda4 with the true local densities in place of learned predictors.
inline double exact_lambda4(const SyntheticWorld& w, const TextRecord& text, const std::string& generator) {
    const WorldSource& human = w.sources.front();
    const WorldSource& machine = w.source(generator);
    double sum = 0.0;
    for (const auto& t : text.tokens) {
        if (t.hidden.size() != w.hidden_dim())
            throw ValidationError("exact_lambda4: text_id '" + text.text_id + "' does not match the world's hidden width");
        sum += exact_log_density(w, human, t.hidden, t.logp_obs) - exact_log_density(w, machine, t.hidden, t.logp_obs);
    }
    return sum;
}

inline double exact_lambda4(const SyntheticWorld& w, const TextRecord& text) {
    return exact_lambda4(w, text, w.sources.at(1).name);
}

// Machine-evidence AUROC of an arbitrary text score over human vs `generator` texts.
template <class ScoreFn>
double auroc_of(const Corpus& corpus, const std::string& human, const std::string& generator, ScoreFn&& machine_evidence) {
    LabeledScores s;
    for (const auto& text : corpus) {
        if (text.source == human)
            s.add(machine_evidence(text), Label::human);
        else if (text.source == generator)
            s.add(machine_evidence(text), Label::machine);
    }
    return auroc(s);
}

// AUROC(oracle lambda4) - AUROC(calibrated lambda4) on a held-out corpus from w.
inline double bayes_gap(const Corpus& test, const DetectorBundle& bundle, const SyntheticWorld& w) {
    const std::string& human = w.sources.front().name;
    const double oracle =
        auroc_of(test, human, bundle.generator, [&](const TextRecord& t) { return -exact_lambda4(w, t, bundle.generator); });
    const double learned = auroc_of(test, human, bundle.generator, [&](const TextRecord& t) { return -lambda4_score(t, bundle); });
    return oracle - learned;
}

// A token whose observed word is drawn from its own random next-token distribution,
// with every field computed exactly (ranks break ties by token index).
inline TokenRecord sample_pure_token(Rng& rng, std::size_t vocab = 64, std::size_t k = 5, std::size_t hidden_dim = 0) {
    const double temperature = rng.uniform(0.5, 3.0);
    std::vector<double> p(vocab);
    double mx = -std::numeric_limits<double>::infinity();
    for (double& v : p) mx = std::max(mx, v = temperature * rng.normal());
    double z = 0.0;
    for (double& v : p) z += (v = std::exp(v - mx));
    for (double& v : p) v /= z;
    std::vector<std::size_t> order(vocab);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });

    const std::size_t w = rng.categorical(p);
    TokenRecord t;
    t.p_obs = p[w];
    t.logp_obs = std::log(p[w]);
    double mu = 0.0, m2 = 0.0, mu_rank = 0.0;
    for (std::size_t r = 0; r < vocab; ++r) {
        const std::size_t v = order[r];
        const double lp = std::log(p[v]);
        mu += p[v] * lp;
        m2 += p[v] * lp * lp;
        mu_rank += p[v] * std::log(static_cast<double>(r + 1));
        if (v == w) t.rank_obs = static_cast<std::int64_t>(r + 1);
        if (p[v] > p[w]) t.mass_above += p[v];
    }
    t.mu_logp = mu;
    t.m2_logp = m2;
    t.mu_logrank = mu_rank;
    for (std::size_t j = 0; j < std::min(k, vocab); ++j) t.topk_probs.push_back(p[order[j]]);
    t.hidden.resize(hidden_dim);
    for (double& h : t.hidden) h = rng.normal();
    return t;
}

// ---- presets --------------------------------------------------------------------

inline std::vector<double> axis_point(std::size_t dim, std::size_t axis, double value) {
    std::vector<double> v(dim, 0.0);
    v[axis % dim] = value;
    return v;
}

// Two hidden-space regions; the generator scores higher than human inside each
// region but favours the low-probability region, so pooled means reverse.
inline SyntheticWorld simpson_world(std::uint64_t seed = 20240917, std::size_t hidden_dim = 32) {
    SyntheticWorld w;
    w.seed = seed;
    w.tokens_per_text = 200;
    w.clusters = {{axis_point(hidden_dim, 0, 3.0), 1.0}, {axis_point(hidden_dim, 0, -3.0), 1.0}};
    w.sources = {{"human", {0.70, 0.30}, {{-2.0, 0.7}, {-5.0, 0.9}}},
                 {"machine", {0.63, 0.37}, {{-1.8, 0.7}, {-4.8, 0.9}}}};
    return w;
}

struct RandomWorldOptions {
    std::size_t clusters = 4;
    std::size_t hidden_dim = 32;
    std::size_t tokens_per_text = 100;
    std::vector<std::string> generators{"machine"};
    // Generators reuse the human cluster weights, so P(Z) carries no signal.
    bool shared_mix = false;
};

// Clusters on orthogonal axes (separation 5 * sqrt(2) spreads) with per-cluster
// human laws and machine shifts of varying size and sign.
inline SyntheticWorld random_world(std::uint64_t seed, const RandomWorldOptions& opts = {}) {
    Rng rng(derive_seed(seed, 0xC1u));
    SyntheticWorld w;
    w.seed = seed;
    w.tokens_per_text = opts.tokens_per_text;
    for (std::size_t c = 0; c < opts.clusters; ++c) w.clusters.push_back({axis_point(opts.hidden_dim, c, 5.0), 1.0});
    auto weights = [&] {
        std::vector<double> v(opts.clusters);
        double total = 0.0;
        for (double& x : v) total += (x = rng.uniform(0.5, 1.5));
        for (double& x : v) x /= total;
        return v;
    };
    WorldSource human{"human", weights(), {}};
    for (std::size_t c = 0; c < opts.clusters; ++c) human.scores.push_back({rng.uniform(-5.0, -1.5), rng.uniform(0.5, 1.0)});
    w.sources.push_back(human);
    for (const auto& name : opts.generators) {
        WorldSource m{name, weights(), {}};
        if (opts.shared_mix) m.weights = human.weights;
        for (const auto& h : human.scores) m.scores.push_back({h.mean + rng.uniform(-0.1, 0.4), h.sd * rng.uniform(0.85, 1.15)});
        w.sources.push_back(std::move(m));
    }
    // Renormalize so the weights sum to 1 to machine precision.
    for (auto& s : w.sources) {
        const double total = std::accumulate(s.weights.begin(), s.weights.end(), 0.0);
        for (double& x : s.weights) x /= total;
    }
    return w;
}

// ---- world files ------------------------------------------------------------------

inline nlohmann::ordered_json world_to_json(const SyntheticWorld& w) {
    nlohmann::ordered_json j;
    j["tokens_per_text"] = w.tokens_per_text;
    j["top_k"] = w.top_k;
    j["seed"] = w.seed;
    auto& clusters = j["clusters"] = nlohmann::ordered_json::array();
    for (const auto& c : w.clusters) clusters.push_back({{"center", c.center}, {"spread", c.spread}});
    auto& sources = j["sources"] = nlohmann::ordered_json::array();
    for (const auto& s : w.sources) {
        nlohmann::ordered_json sj;
        sj["name"] = s.name;
        sj["weights"] = s.weights;
        auto& scores = sj["scores"] = nlohmann::ordered_json::array();
        for (const auto& d : s.scores) scores.push_back({{"mean", d.mean}, {"sd", d.sd}});
        sources.push_back(std::move(sj));
    }
    return j;
}

inline SyntheticWorld world_from_json(const nlohmann::json& j) {
    SyntheticWorld w;
    try {
        w.tokens_per_text = j.at("tokens_per_text").get<std::size_t>();
        w.top_k = j.value("top_k", std::size_t{5});
        w.seed = j.value("seed", std::uint64_t{0});
        for (const auto& c : j.at("clusters")) w.clusters.push_back({c.at("center").get<std::vector<double>>(), c.at("spread").get<double>()});
        for (const auto& s : j.at("sources")) {
            WorldSource src;
            src.name = s.at("name").get<std::string>();
            src.weights = s.at("weights").get<std::vector<double>>();
            for (const auto& d : s.at("scores")) src.scores.push_back({d.at("mean").get<double>(), d.at("sd").get<double>()});
            w.sources.push_back(std::move(src));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed world definition: ") + e.what());
    }
    w.validate();
    return w;
}

inline SyntheticWorld read_world_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open world file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return world_from_json(j);
}

}  // namespace loccal
