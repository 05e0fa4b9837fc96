#pragma once
// DMAP interval binning: token w_i occupies [a_i, a_i + p_i] of cumulative next-token
// mass, and its bin vector is the share of that interval falling in each bin.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "loccal/corpus.hpp"
#include "loccal/error.hpp"

namespace loccal {

using BinVector = std::vector<double>;

inline constexpr double kReferenceSmoothing = 1e-6;

class BinPartition {
public:
    BinPartition() : BinPartition(default_edges()) {}

    explicit BinPartition(std::vector<double> edges) : edges_(std::move(edges)) {
        if (edges_.size() < 2) throw ConfigError("bin partition needs at least two edges");
        if (edges_.front() != 0.0 || edges_.back() != 1.0)
            throw ConfigError("bin partition must start at 0 and end at 1");
        for (std::size_t i = 1; i < edges_.size(); ++i)
            if (!(edges_[i] > edges_[i - 1])) throw ConfigError("bin partition edges must be strictly increasing");
    }

    static std::vector<double> default_edges() { return {0.0, 0.5, 0.75, 0.9, 0.95, 0.975, 1.0}; }

    std::size_t size() const noexcept { return edges_.size() - 1; }
    double width(std::size_t b) const { return edges_[b + 1] - edges_[b]; }
    double lower(std::size_t b) const { return edges_[b]; }
    double upper(std::size_t b) const { return edges_[b + 1]; }
    const std::vector<double>& edges() const noexcept { return edges_; }

    friend bool operator==(const BinPartition&, const BinPartition&) = default;

private:
    std::vector<double> edges_;
};

inline BinVector bin_proportions(double mass_above, double p_obs, const BinPartition& part) {
    if (!(mass_above >= 0.0) || !(mass_above + p_obs <= 1.0 + kProbTolerance))
        throw ValidationError("bin_proportions: interval [a, a+p] must lie in [0, 1]");
    const double a = mass_above;
    const double b = std::min(1.0, a + p_obs);
    if (!(b > a)) throw ValidationError("bin_proportions: zero-length interval");
    BinVector q(part.size(), 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < part.size(); ++k) {
        const double overlap = std::min(b, part.upper(k)) - std::max(a, part.lower(k));
        if (overlap > 0.0) {
            q[k] = overlap;
            total += overlap;
        }
    }
    for (double& v : q) v /= total;
    return q;
}

inline BinVector bin_proportions(const TokenRecord& t, const BinPartition& part) {
    return bin_proportions(t.mass_above, t.p_obs, part);
}

// Mean per-token proportions divided by bin width; pure sampling gives (1, ..., 1)
// in expectation.
inline BinVector dmap_histogram(std::span<const TokenRecord> records, const BinPartition& part) {
    if (records.empty()) throw ValidationError("dmap_histogram of an empty token list");
    BinVector h(part.size(), 0.0);
    for (const auto& t : records) {
        const BinVector q = bin_proportions(t, part);
        for (std::size_t k = 0; k < h.size(); ++k) h[k] += q[k];
    }
    for (std::size_t k = 0; k < h.size(); ++k) h[k] = h[k] / static_cast<double>(records.size()) / part.width(k);
    return h;
}

// Average proportions over every token of the corpus, as a probability vector.
inline BinVector mean_bin_proportions(std::span<const TextRecord> corpus, const BinPartition& part) {
    BinVector q(part.size(), 0.0);
    std::size_t n = 0;
    for (const auto& text : corpus) {
        for (const auto& t : text.tokens) {
            const BinVector qi = bin_proportions(t, part);
            for (std::size_t k = 0; k < q.size(); ++k) q[k] += qi[k];
            ++n;
        }
    }
    if (n == 0) throw ValidationError("DMAP reference over an empty corpus");
    double total = 0.0;
    for (double v : q) total += v;
    for (double& v : q) v /= total;
    return q;
}

inline BinVector smooth_reference(BinVector q, double eps = kReferenceSmoothing) {
    double total = 0.0;
    for (double& v : q) {
        v += eps;
        total += v;
    }
    for (double& v : q) v /= total;
    return q;
}

inline BinVector dmap_reference(std::span<const TextRecord> corpus, const BinPartition& part,
                                double eps = kReferenceSmoothing) {
    return smooth_reference(mean_bin_proportions(corpus, part), eps);
}

// CE(q, q_machine) - CE(q, q_human); larger means more human-like.
inline double dmap_token_humanness(const BinVector& q, const BinVector& q_human, const BinVector& q_machine) {
    if (q.size() != q_human.size() || q.size() != q_machine.size())
        throw ValidationError("dmap_token_humanness: bin count mismatch");
    double score = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) {
        if (!(q_human[k] > 0.0) || !(q_machine[k] > 0.0))
            throw NumericError("dmap_token_humanness: reference vectors must be strictly positive");
        if (q[k] != 0.0) score += q[k] * (std::log(q_human[k]) - std::log(q_machine[k]));
    }
    return score;
}

// Global DMAP detector: mean token humanness.
inline double global_dmap_score(const TextRecord& text, const BinVector& q_human, const BinVector& q_machine,
                                const BinPartition& part) {
    if (text.tokens.empty()) throw ValidationError("global_dmap_score: text_id '" + text.text_id + "' is empty");
    double sum = 0.0;
    for (const auto& t : text.tokens) sum += dmap_token_humanness(bin_proportions(t, part), q_human, q_machine);
    return sum / static_cast<double>(text.tokens.size());
}

}  // namespace loccal
