#pragma once
// End-to-end steps behind the CLI: score a corpus with a bundle, evaluate a score
// report, and compute diagnostics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "loccal/bundle.hpp"
#include "loccal/corpus.hpp"
#include "loccal/detector.hpp"
#include "loccal/dmap.hpp"
#include "loccal/eval.hpp"
#include "loccal/features.hpp"
#include "loccal/parallel.hpp"
#include "loccal/report.hpp"
#include "loccal/scorers.hpp"

namespace loccal {

// ---- scoring --------------------------------------------------------------------------

struct ScoreOptions {
    // Empty means every calibrated scorer in the bundle, plus fd_full when the corpus
    // carries the moments it needs.
    std::vector<ScorerId> scorers;
    // Empty means every generator in the bundle.
    std::vector<std::string> generators;
    std::size_t threads = 1;
};

inline void check_compatible(const ModelBundle& b, const Corpus& corpus) {
    const std::size_t want = b.features->pca.input_dim();
    for (const auto& text : corpus)
        for (std::size_t i = 0; i < text.tokens.size(); ++i)
            if (text.tokens[i].hidden.size() != want)
                throw ValidationError("hidden width " + std::to_string(text.tokens[i].hidden.size()) + " of " +
                                      detail::token_context(text.text_id, i) + " does not match the bundle's " +
                                      std::to_string(want));
}

namespace detail {

inline bool corpus_has_fields(const Corpus& corpus, ScorerId id) {
    for (const auto& text : corpus)
        for (const auto& t : text.tokens)
            if (!has_required_fields(id, t)) return false;
    return true;
}

}  // namespace detail

// Rows come out per text in corpus order, then per scorer, then per generator, with an
// "all" row (max machine evidence over generators) after the generators when there are
// two or more.
inline std::vector<ScoreRow> score_corpus(const ModelBundle& b, const Corpus& raw, const ScoreOptions& opts = {}) {
    const Corpus corpus = cap_tokens(raw, b.cap_tokens);
    validate_corpus(corpus);
    check_compatible(b, corpus);

    std::vector<ScorerId> scorers = opts.scorers;
    if (scorers.empty()) {
        scorers = b.scorers;
        if (detail::corpus_has_fields(corpus, ScorerId::fd_full)) scorers.push_back(ScorerId::fd_full);
    }
    std::vector<std::string> generators = opts.generators.empty() ? b.generators : opts.generators;
    for (const auto& g : generators)
        if (!b.has_generator(g)) throw ConfigError("bundle has no generator '" + g + "'");

    struct Column {
        ScorerId scorer;
        std::vector<DetectorBundle> detectors;  // empty for fd_full
    };
    std::vector<Column> columns;
    for (ScorerId s : scorers) {
        Column c{s, {}};
        if (s != ScorerId::fd_full) {
            if (!b.has_scorer(s)) throw ConfigError("bundle was not fitted for scorer '" + std::string(to_string(s)) + "'");
            for (const auto& g : generators) c.detectors.push_back(b.detector(s, g));
        }
        columns.push_back(std::move(c));
    }

    std::vector<std::vector<ScoreRow>> per_text(corpus.size());
    parallel_for(corpus.size(), opts.threads, [&](std::size_t i) {
        const TextRecord& text = corpus[i];
        auto& out = per_text[i];
        for (const auto& col : columns) {
            const std::string name(to_string(col.scorer));
            if (col.scorer == ScorerId::fd_full) {
                const double naive = naive_score(text, col.scorer);
                for (const auto& g : generators)
                    out.push_back({text.text_id, text.source, name, g, naive, std::numeric_limits<double>::quiet_NaN()});
                continue;
            }
            std::size_t best = 0;
            std::vector<double> naive(generators.size()), lambda(generators.size());
            for (std::size_t gi = 0; gi < generators.size(); ++gi) {
                const DetectorBundle& d = col.detectors[gi];
                naive[gi] = naive_score(text, col.scorer, &*d.dmap_refs, d.partition);
                lambda[gi] = lambda4_score(text, d);
                if (-lambda[gi] > -lambda[best]) best = gi;
                out.push_back({text.text_id, text.source, name, generators[gi], naive[gi], lambda[gi]});
            }
            if (generators.size() >= 2)
                out.push_back({text.text_id, text.source, name, kAllGenerators, naive[best], lambda[best]});
        }
    });
    std::vector<ScoreRow> rows;
    for (auto& v : per_text)
        for (auto& r : v) rows.push_back(std::move(r));
    return rows;
}

// ---- evaluation -----------------------------------------------------------------------

struct EvalOptions {
    std::string human_label = "human";
    std::size_t bootstrap_iters = 10000;
    double level = 0.95;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

struct MetricWithCi {
    double value = 0.0;
    ConfidenceInterval ci;
};

struct MetricRow {
    std::string method;  // "naive" or "calibrated"
    std::string scorer;
    std::string generator;
    std::size_t n_human = 0;
    std::size_t n_machine = 0;
    MetricWithCi tpr_01;  // TPR at 0.1% FPR
    MetricWithCi tpr_1;   // TPR at 1% FPR
    MetricWithCi auroc;
};

// Labels for one (scorer, generator) group: human-label texts are negatives; texts from
// the generator (every non-human source for "all") are positives.
inline std::vector<MetricRow> evaluate_scores(const std::vector<ScoreRow>& rows, const EvalOptions& opts = {}) {
    std::vector<std::pair<std::string, std::string>> groups;
    for (const auto& r : rows) {
        const std::pair<std::string, std::string> key{r.scorer, r.generator};
        if (std::find(groups.begin(), groups.end(), key) == groups.end()) groups.push_back(key);
    }
    if (groups.empty()) throw ValidationError("score report has no rows");

    struct Job {
        std::size_t row;
        LabeledScores scores;
    };
    std::vector<MetricRow> out;
    std::vector<Job> jobs;
    for (const auto& [scorer, generator] : groups) {
        const double orient = machine_orientation(parse_scorer_id(scorer));
        LabeledScores naive, calibrated;
        bool has_calibrated = true;
        for (const auto& r : rows) {
            if (r.scorer != scorer || r.generator != generator) continue;
            Label label;
            if (r.source == opts.human_label)
                label = Label::human;
            else if (generator == kAllGenerators || r.source == generator)
                label = Label::machine;
            else
                continue;
            naive.add(orient * r.naive, label);
            if (std::isnan(r.calibrated)) has_calibrated = false;
            calibrated.add(-r.calibrated, label);
        }
        if (naive.count(Label::human) == 0 || naive.count(Label::machine) == 0)
            throw ValidationError("scorer '" + scorer + "', generator '" + generator +
                                  "': report needs both human and machine texts");
        auto add = [&](const char* method, LabeledScores s) {
            MetricRow m{method, scorer, generator, s.count(Label::human), s.count(Label::machine), {}, {}, {}};
            out.push_back(m);
            jobs.push_back({out.size() - 1, std::move(s)});
        };
        add("naive", std::move(naive));
        if (has_calibrated) add("calibrated", std::move(calibrated));
    }

    const Metric metrics[3] = {tpr_metric(0.001), tpr_metric(0.01), auroc_metric()};
    parallel_for(jobs.size() * 3, opts.threads, [&](std::size_t k) {
        const Job& job = jobs[k / 3];
        const Metric& metric = metrics[k % 3];
        const auto pos = job.scores.scores_of(Label::machine);
        const auto neg = job.scores.scores_of(Label::human);
        MetricWithCi m{metric(pos, neg), bootstrap_ci(job.scores, metric, opts.bootstrap_iters, opts.level,
                                                      derive_seed(opts.seed, k))};
        MetricRow& row = out[job.row];
        (k % 3 == 0 ? row.tpr_01 : k % 3 == 1 ? row.tpr_1 : row.auroc) = m;
    });
    return out;
}

inline std::string format_metric(const MetricWithCi& m) {
    return format_fixed(m.value, 4) + " (" + format_fixed(m.ci.lo, 4) + "–" + format_fixed(m.ci.hi, 4) + ")";
}

inline Table metrics_table(const std::vector<MetricRow>& rows) {
    Table t;
    t.header = {"method", "scorer", "generator", "n_human", "n_machine", "TPR@0.1%", "TPR@1%", "AUROC"};
    for (const auto& r : rows)
        t.rows.push_back({r.method, r.scorer, r.generator, std::to_string(r.n_human), std::to_string(r.n_machine),
                          format_metric(r.tpr_01), format_metric(r.tpr_1), format_metric(r.auroc)});
    return t;
}

// ---- diagnostics ----------------------------------------------------------------------

struct DiagnoseOptions {
    std::size_t clusters = kDefaultClusters;
    std::uint64_t seed = 0;
    ZScoreOptions zscore;
};

struct Diagnostics {
    Table clusters;        // per-cluster source mix and mean log p per source
    Table zscore_hist;     // z-score histogram per (scorer, source)
    Table zscore_summary;  // mean, sd, skew per (scorer, source)
    Table dmap_hist;       // width-normalized DMAP histogram per source
};

inline Table cluster_table(const ClusterReport& r) {
    Table t;
    t.header = {"cluster", "tokens", "share"};
    for (const auto& s : r.sources) t.header.push_back("prop_" + s);
    for (const auto& s : r.sources) t.header.push_back("mean_logp_" + s);
    for (const auto& row : r.rows) {
        std::vector<std::string> cells{std::to_string(row.cluster), std::to_string(row.tokens),
                                       format_fixed(static_cast<double>(row.tokens) / static_cast<double>(r.total_tokens), 4)};
        for (double p : row.proportion) cells.push_back(format_fixed(p, 4));
        for (double m : row.mean_logp) cells.push_back(format_fixed(m, 4));
        t.rows.push_back(std::move(cells));
    }
    std::vector<std::string> pooled{"all", std::to_string(r.total_tokens), format_fixed(1.0, 4)};
    for (std::size_t s = 0; s < r.sources.size(); ++s) pooled.push_back("");
    for (double m : r.pooled_mean_logp) pooled.push_back(format_fixed(m, 4));
    t.rows.push_back(std::move(pooled));
    return t;
}

// Cluster table over the corpus, z-scores of each source's tokens against that source's
// own Gaussian predictors, and per-source DMAP histograms.
inline Diagnostics diagnose(const ModelBundle& b, const Corpus& raw, const DiagnoseOptions& opts = {}) {
    const Corpus corpus = cap_tokens(raw, b.cap_tokens);
    validate_corpus(corpus);
    check_compatible(b, corpus);
    Diagnostics d;
    d.clusters = cluster_table(cluster_report(corpus, b.features->pca, opts.clusters, opts.seed, b.human_label));

    const std::vector<std::string> sources = b.sources();
    auto only = [&](const std::string& source) {
        Corpus out;
        for (const auto& t : corpus)
            if (t.source == source) out.push_back(t);
        return out;
    };

    d.zscore_hist.header = {"scorer", "source", "bin_lo", "bin_hi", "count"};
    d.zscore_summary.header = {"scorer", "source", "tokens", "mean", "sd", "skew", "below", "above"};
    for (ScorerId s : b.scorers) {
        if (s == ScorerId::dmap) continue;
        for (std::size_t si = 0; si < sources.size(); ++si) {
            const Corpus part = only(sources[si]);
            if (part.empty()) continue;
            const std::string generator = si == 0 ? b.generators.front() : sources[si];
            const DetectorBundle det = b.detector(s, generator);
            const ZScoreDiagnostic z =
                zscore_diagnostic(part, det, si == 0 ? Hypothesis::human : Hypothesis::machine, opts.zscore);
            const std::string name(to_string(s));
            for (std::size_t k = 0; k < z.histogram.counts.size(); ++k)
                d.zscore_hist.rows.push_back({name, sources[si], format_double(z.histogram.edges[k]),
                                              format_double(z.histogram.edges[k + 1]), std::to_string(z.histogram.counts[k])});
            d.zscore_summary.rows.push_back({name, sources[si], std::to_string(z.z.size()), format_fixed(z.mean, 6),
                                             format_fixed(z.sd, 6), format_fixed(z.skew, 6),
                                             std::to_string(z.histogram.below), std::to_string(z.histogram.above)});
        }
    }

    d.dmap_hist.header = {"source", "bin", "lo", "hi", "density"};
    for (const auto& source : sources_of(corpus)) {
        std::vector<TokenRecord> tokens;
        for (const auto& t : corpus)
            if (t.source == source) tokens.insert(tokens.end(), t.tokens.begin(), t.tokens.end());
        const BinVector h = dmap_histogram(tokens, b.partition);
        for (std::size_t k = 0; k < h.size(); ++k)
            d.dmap_hist.rows.push_back({source, std::to_string(k), format_double(b.partition.lower(k)),
                                        format_double(b.partition.upper(k)), format_fixed(h[k], 6)});
    }
    return d;
}

}  // namespace loccal
