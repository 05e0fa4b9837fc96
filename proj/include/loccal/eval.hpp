#pragma once
// AUROC, TPR at a fixed FPR, and stratified percentile-bootstrap intervals.
// Machine is the positive class and scores are in machine-evidence orientation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "loccal/error.hpp"
#include "loccal/random.hpp"

namespace loccal {

enum class Label { human, machine };

struct LabeledScore {
    double score = 0.0;
    Label label = Label::human;
};

struct LabeledScores {
    std::vector<LabeledScore> entries;

    void add(double score, Label label) { entries.push_back({score, label}); }
    void add_all(std::span<const double> scores, Label label) {
        for (double s : scores) add(s, label);
    }
    std::vector<double> scores_of(Label label) const {
        std::vector<double> out;
        for (const auto& e : entries)
            if (e.label == label) out.push_back(e.score);
        return out;
    }
    std::size_t count(Label label) const {
        return static_cast<std::size_t>(
            std::count_if(entries.begin(), entries.end(), [&](const LabeledScore& e) { return e.label == label; }));
    }
};

namespace detail {

inline void require_both_classes(std::size_t n_pos, std::size_t n_neg) {
    if (n_pos == 0 || n_neg == 0) throw ValidationError("metric needs at least one machine and one human score");
}

// Mann-Whitney form with mid-ranks for ties.
inline double auroc_split(std::span<const double> pos, std::span<const double> neg) {
    require_both_classes(pos.size(), neg.size());
    std::vector<std::pair<double, bool>> all;
    all.reserve(pos.size() + neg.size());
    for (double s : pos) all.emplace_back(s, true);
    for (double s : neg) all.emplace_back(s, false);
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        std::size_t n_pos_tie = 0;
        while (j < all.size() && all[j].first == all[i].first) {
            n_pos_tie += all[j].second ? 1 : 0;
            ++j;
        }
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        rank_sum += mid_rank * static_cast<double>(n_pos_tie);
        i = j;
    }
    const auto np = static_cast<double>(pos.size());
    const auto nn = static_cast<double>(neg.size());
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

inline double tpr_split(std::span<const double> pos, std::span<const double> neg, double fpr_target) {
    require_both_classes(pos.size(), neg.size());
    if (!(fpr_target > 0.0 && fpr_target < 1.0)) throw ConfigError("fpr target must lie in (0, 1)");
    std::vector<double> sorted(neg.begin(), neg.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const auto allowed = static_cast<std::size_t>(std::floor(fpr_target * static_cast<double>(sorted.size())));
    // Smallest threshold leaving at most `allowed` negatives strictly above it.
    const double threshold = sorted[std::min(allowed, sorted.size() - 1)];
    const auto hits = std::count_if(pos.begin(), pos.end(), [&](double s) { return s > threshold; });
    return static_cast<double>(hits) / static_cast<double>(pos.size());
}

}  // namespace detail

// P(random machine score > random human score), ties counted 1/2.
inline double auroc(const LabeledScores& s) {
    return detail::auroc_split(s.scores_of(Label::machine), s.scores_of(Label::human));
}

// Fraction of machine scores strictly above the threshold that admits
// floor(fpr_target * N_human) false positives.
inline double tpr_at_fpr(const LabeledScores& s, double fpr_target) {
    return detail::tpr_split(s.scores_of(Label::machine), s.scores_of(Label::human), fpr_target);
}

using Metric = std::function<double(std::span<const double> pos, std::span<const double> neg)>;

inline Metric auroc_metric() { return [](auto pos, auto neg) { return detail::auroc_split(pos, neg); }; }
inline Metric tpr_metric(double fpr_target) {
    return [fpr_target](auto pos, auto neg) { return detail::tpr_split(pos, neg, fpr_target); };
}

struct ConfidenceInterval {
    double lo = 0.0;
    double hi = 0.0;
};

// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Stratified bootstrap: machine and human scores are resampled separately with their
// original counts; replicate r draws from derive_seed(seed, r).
inline std::vector<double> bootstrap_replicates(const LabeledScores& s, const Metric& metric, std::size_t n_iter,
                                                std::uint64_t seed) {
    if (n_iter == 0) throw ConfigError("bootstrap needs n_iter >= 1");
    const std::vector<double> pos = s.scores_of(Label::machine);
    const std::vector<double> neg = s.scores_of(Label::human);
    detail::require_both_classes(pos.size(), neg.size());
    std::vector<double> reps(n_iter);
    std::vector<double> rp(pos.size()), rn(neg.size());
    for (std::size_t r = 0; r < n_iter; ++r) {
        Rng rng(derive_seed(seed, r));
        for (double& v : rp) v = pos[rng.index(pos.size())];
        for (double& v : rn) v = neg[rng.index(neg.size())];
        reps[r] = metric(rp, rn);
    }
    return reps;
}

inline ConfidenceInterval bootstrap_ci(const LabeledScores& s, const Metric& metric, std::size_t n_iter = 10000,
                                       double level = 0.95, std::uint64_t seed = 0) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
    std::vector<double> reps = bootstrap_replicates(s, metric, n_iter, seed);
    std::sort(reps.begin(), reps.end());
    const double alpha = (1.0 - level) / 2.0;
    return {quantile_sorted(reps, alpha), quantile_sorted(reps, 1.0 - alpha)};
}

}  // namespace loccal
