#pragma once
// Token feature vector Z = [PCA projection of hidden | top-k probabilities], and the
// k-means hidden-space cluster diagnostic.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "loccal/corpus.hpp"
#include "loccal/kmeans.hpp"
#include "loccal/pca.hpp"

namespace loccal {

inline constexpr std::size_t kDefaultTopK = 5;
inline constexpr std::size_t kDefaultClusters = 50;

using FeatureVector = std::vector<double>;

inline FeatureVector build_features(const TokenRecord& t, const PcaModel& m, std::size_t k) {
    if (t.topk_probs.size() < k)
        throw MissingFieldError("topk_probs", "need " + std::to_string(k) + " entries, record has " +
                                                   std::to_string(t.topk_probs.size()));
    FeatureVector z = project(m, t.hidden);
    z.insert(z.end(), t.topk_probs.begin(), t.topk_probs.begin() + static_cast<std::ptrdiff_t>(k));
    return z;
}

struct FeaturePipeline {
    PcaModel pca;
    std::size_t k = kDefaultTopK;

    std::size_t dim() const noexcept { return pca.dim() + k; }
    FeatureVector operator()(const TokenRecord& t) const { return build_features(t, pca, k); }

    friend bool operator==(const FeaturePipeline&, const FeaturePipeline&) = default;
};

struct ClusterRow {
    std::size_t cluster = 0;
    std::size_t tokens = 0;
    std::vector<double> proportion;  // per source, sums to 1
    std::vector<double> mean_logp;   // per source, NaN when the source is absent
};

struct ClusterReport {
    std::vector<std::string> sources;  // human label first when present
    std::vector<ClusterRow> rows;      // by token count, descending
    std::vector<double> pooled_mean_logp;
    std::size_t total_tokens = 0;
};

// Clusters the PCA projections of every token and tabulates per-cluster source mix
// and mean log p(w_i) per source.
inline ClusterReport cluster_report(const Corpus& corpus, const PcaModel& pca, std::size_t k_clusters,
                                    std::uint64_t seed, const std::string& human_label = "human") {
    ClusterReport report;
    report.sources = sources_of(corpus);
    if (report.sources.size() < 2) throw ValidationError("cluster_report needs at least two distinct sources");
    auto human = std::find(report.sources.begin(), report.sources.end(), human_label);
    if (human != report.sources.end()) std::rotate(report.sources.begin(), human, human + 1);

    Matrix points;
    std::vector<std::size_t> source_of;
    std::vector<double> logp;
    for (const auto& text : corpus) {
        const auto s = static_cast<std::size_t>(
            std::find(report.sources.begin(), report.sources.end(), text.source) - report.sources.begin());
        for (const auto& t : text.tokens) {
            points.append_row(project(pca, t.hidden));
            source_of.push_back(s);
            logp.push_back(t.logp_obs);
        }
    }
    const KMeansResult km = kmeans(points, k_clusters, seed);

    const std::size_t ns = report.sources.size();
    std::vector<std::vector<std::size_t>> count(k_clusters, std::vector<std::size_t>(ns, 0));
    std::vector<std::vector<double>> sum(k_clusters, std::vector<double>(ns, 0.0));
    std::vector<std::size_t> src_count(ns, 0);
    std::vector<double> src_sum(ns, 0.0);
    for (std::size_t i = 0; i < km.assignment.size(); ++i) {
        ++count[km.assignment[i]][source_of[i]];
        sum[km.assignment[i]][source_of[i]] += logp[i];
        ++src_count[source_of[i]];
        src_sum[source_of[i]] += logp[i];
    }
    report.total_tokens = km.assignment.size();
    for (std::size_t s = 0; s < ns; ++s)
        report.pooled_mean_logp.push_back(src_count[s] ? src_sum[s] / static_cast<double>(src_count[s])
                                                       : std::numeric_limits<double>::quiet_NaN());
    for (std::size_t c = 0; c < k_clusters; ++c) {
        ClusterRow row;
        row.cluster = c;
        row.tokens = std::accumulate(count[c].begin(), count[c].end(), std::size_t{0});
        for (std::size_t s = 0; s < ns; ++s) {
            row.proportion.push_back(row.tokens ? static_cast<double>(count[c][s]) / static_cast<double>(row.tokens)
                                                : 0.0);
            row.mean_logp.push_back(count[c][s] ? sum[c][s] / static_cast<double>(count[c][s])
                                                : std::numeric_limits<double>::quiet_NaN());
        }
        report.rows.push_back(std::move(row));
    }
    std::stable_sort(report.rows.begin(), report.rows.end(),
                     [](const ClusterRow& a, const ClusterRow& b) { return a.tokens > b.tokens; });
    return report;
}

// Clusters whose mean-logp ordering between sources a and b is opposite to the pooled ordering.
inline std::vector<std::size_t> opposing_clusters(const ClusterReport& r, std::size_t a, std::size_t b) {
    std::vector<std::size_t> out;
    const double pooled = r.pooled_mean_logp[a] - r.pooled_mean_logp[b];
    for (const auto& row : r.rows) {
        const double local = row.mean_logp[a] - row.mean_logp[b];
        if (std::isnan(local) || pooled == 0.0) continue;
        if ((local > 0.0) != (pooled > 0.0) && local != 0.0) out.push_back(row.cluster);
    }
    return out;
}

}  // namespace loccal
