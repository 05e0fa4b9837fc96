#pragma once
// Calibrated detection: Lambda4 = sum_i log P(g_i | Z_i, H) - log P(g_i | Z_i, M),
// naive aggregates for comparison, multi-generator pooling and the z-score diagnostic.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loccal/corpus.hpp"
#include "loccal/dmap.hpp"
#include "loccal/error.hpp"
#include "loccal/features.hpp"
#include "loccal/predictor.hpp"
#include "loccal/scorers.hpp"

namespace loccal {

struct DmapReferences {
    BinVector human;    // smoothed probability vector
    BinVector machine;  // smoothed probability vector
};

struct DetectorBundle {
    ScorerId scorer = ScorerId::log_surprisal;
    std::string generator;
    std::shared_ptr<const FeaturePipeline> features;
    std::shared_ptr<const Predictor> human;
    std::shared_ptr<const Predictor> machine;
    BinPartition partition;                  // used by the dmap scorer
    std::optional<DmapReferences> dmap_refs;  // naive global DMAP
    // Optional symmetric cap on each token's log-ratio; off by default.
    std::optional<double> token_clip;

    void validate() const {
        if (!features || !human || !machine) throw ConfigError("detector bundle is incomplete");
        if (!is_scalar_token_scorer(scorer) && scorer != ScorerId::dmap)
            throw ConfigError("scorer '" + std::string(to_string(scorer)) + "' cannot be calibrated");
        const HeadKind want = scorer == ScorerId::dmap ? HeadKind::categorical : HeadKind::gaussian;
        for (const Predictor* p : {human.get(), machine.get()}) {
            if (p->head != want) throw ConfigError("predictor head does not match scorer '" + std::string(to_string(scorer)) + "'");
            if (p->input_dim() != features->dim()) throw ConfigError("predictor input width does not match feature pipeline");
            if (want == HeadKind::categorical && p->output_dim() != partition.size())
                throw ConfigError("categorical predictor bin count does not match partition");
        }
    }
};

// What the predictors model for this scorer: the scalar g(x_i), or the DMAP bin vector.
inline Observation token_observation(ScorerId scorer, const TokenRecord& t, const BinPartition& part) {
    if (scorer == ScorerId::dmap) return bin_proportions(t, part);
    return score_token(scorer, t).value;
}

// Per-token log-likelihood ratios (loss_M - loss_H).
inline std::vector<double> lambda4_token_terms(const TextRecord& text, const DetectorBundle& b) {
    std::vector<double> terms;
    terms.reserve(text.tokens.size());
    for (std::size_t i = 0; i < text.tokens.size(); ++i) {
        const auto& t = text.tokens[i];
        try {
            const FeatureVector z = (*b.features)(t);
            const Observation obs = token_observation(b.scorer, t, b.partition);
            double term = predict_logdensity(*b.human, z, obs) - predict_logdensity(*b.machine, z, obs);
            if (b.token_clip) term = std::clamp(term, -*b.token_clip, *b.token_clip);
            terms.push_back(term);
        } catch (const MissingFieldError& e) {
            throw MissingFieldError(e.field(), "text_id '" + text.text_id + "', token " + std::to_string(i));
        }
    }
    return terms;
}

// Calibrated humanness score; machine-evidence orientation is -lambda4.
inline double lambda4_score(const TextRecord& text, const DetectorBundle& b) {
    if (text.tokens.empty()) throw ValidationError("lambda4_score: text_id '" + text.text_id + "' is empty");
    double sum = 0.0;
    for (double term : lambda4_token_terms(text, b)) sum += term;
    return sum;
}

// Uncalibrated text score in the scorer's own orientation.
inline double naive_score(const TextRecord& text, ScorerId scorer, const DmapReferences* refs = nullptr,
                          const BinPartition& part = BinPartition()) {
    switch (scorer) {
        case ScorerId::fd_full: return fast_detect_gpt_full(text);
        case ScorerId::dmap:
            if (!refs) throw ConfigError("naive dmap score needs reference vectors");
            return global_dmap_score(text, refs->human, refs->machine, part);
        default: return mean_token_score(scorer, text).value;
    }
}

inline double naive_machine_evidence(double naive, ScorerId scorer) { return machine_orientation(scorer) * naive; }

using EnsembleRule = std::function<double(std::span<const double>)>;

inline double max_rule(std::span<const double> evidence) { return *std::max_element(evidence.begin(), evidence.end()); }

// Pools per-generator machine evidence (-lambda4); default rule is the maximum.
inline double multi_generator_score(const TextRecord& text, std::span<const DetectorBundle> bundles,
                                    const EnsembleRule& rule = max_rule) {
    if (bundles.empty()) throw ConfigError("multi_generator_score needs at least one bundle");
    std::vector<double> evidence;
    evidence.reserve(bundles.size());
    for (const auto& b : bundles) evidence.push_back(-lambda4_score(text, b));
    return rule(evidence);
}

enum class Hypothesis { human, machine };

struct Histogram {
    std::vector<double> edges;
    std::vector<std::size_t> counts;
    std::size_t below = 0;
    std::size_t above = 0;
};

inline Histogram make_histogram(std::span<const double> values, std::size_t bins, double lo, double hi) {
    if (bins == 0 || !(hi > lo)) throw ConfigError("histogram needs bins > 0 and hi > lo");
    Histogram h;
    h.counts.assign(bins, 0);
    for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins));
    for (double v : values) {
        if (v < lo) {
            ++h.below;
        } else if (v >= hi) {
            ++h.above;
        } else {
            auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
            ++h.counts[std::min(b, bins - 1)];
        }
    }
    return h;
}

struct ZScoreOptions {
    std::size_t bins = 48;
    double lo = -6.0;
    double hi = 6.0;
};

struct ZScoreDiagnostic {
    std::vector<double> z;
    Histogram histogram;
    double mean = 0.0;
    double sd = 0.0;
    double skew = 0.0;
};

// (g - mu) / sigma of every token against the chosen Gaussian predictor.
inline ZScoreDiagnostic zscore_diagnostic(const Corpus& corpus, const DetectorBundle& b, Hypothesis which,
                                          const ZScoreOptions& opts = {}) {
    if (b.scorer == ScorerId::dmap) throw ConfigError("z-score diagnostic needs a Gaussian-head bundle");
    const Predictor& p = which == Hypothesis::human ? *b.human : *b.machine;
    if (p.head != HeadKind::gaussian) throw ConfigError("z-score diagnostic needs a Gaussian-head bundle");
    ZScoreDiagnostic out;
    for (const auto& text : corpus)
        for (const auto& t : text.tokens) {
            const GaussianHeadOutput o = predict_gaussian(p, (*b.features)(t));
            out.z.push_back((score_token(b.scorer, t).value - o.mu) / o.sigma);
        }
    const auto n = static_cast<double>(out.z.size());
    if (out.z.empty()) throw ValidationError("z-score diagnostic over an empty corpus");
    for (double v : out.z) out.mean += v;
    out.mean /= n;
    double m2 = 0.0, m3 = 0.0;
    for (double v : out.z) {
        const double d = v - out.mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    out.sd = std::sqrt(m2);
    out.skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    out.histogram = make_histogram(out.z, opts.bins, opts.lo, opts.hi);
    return out;
}

}  // namespace loccal
