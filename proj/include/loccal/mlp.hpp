#pragma once
// Two-layer MLP trunk (Linear -> GELU -> dropout -> Linear) with a Gaussian (mu, sigma)
// head or a categorical softmax head, and hand-derived backpropagation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "loccal/dmap.hpp"
#include "loccal/error.hpp"
#include "loccal/linalg.hpp"
#include "loccal/random.hpp"

namespace loccal {

enum class HeadKind { gaussian, categorical };
enum class Mode { train, eval };

constexpr std::string_view to_string(HeadKind h) noexcept { return h == HeadKind::gaussian ? "gaussian" : "categorical"; }

inline HeadKind parse_head_kind(std::string_view s) {
    if (s == "gaussian") return HeadKind::gaussian;
    if (s == "categorical") return HeadKind::categorical;
    throw ValidationError("unknown head kind '" + std::string(s) + "'");
}

// Parameters stored flat as [W1 (hidden x in) | b1 | W2 (out x hidden) | b2].
struct MlpParams {
    std::size_t in = 0;
    std::size_t hidden = 0;
    std::size_t out = 0;
    double dropout_rate = 0.0;
    std::vector<double> theta;

    MlpParams() = default;
    MlpParams(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim, double dropout = 0.0)
        : in(in_dim), hidden(hidden_dim), out(out_dim), dropout_rate(dropout),
          theta(hidden_dim * in_dim + hidden_dim + out_dim * hidden_dim + out_dim, 0.0) {}

    static constexpr std::size_t expected_size(std::size_t i, std::size_t h, std::size_t o) {
        return h * i + h + o * h + o;
    }

    std::span<double> w1() { return {theta.data(), hidden * in}; }
    std::span<double> b1() { return {theta.data() + hidden * in, hidden}; }
    std::span<double> w2() { return {theta.data() + hidden * in + hidden, out * hidden}; }
    std::span<double> b2() { return {theta.data() + hidden * in + hidden + out * hidden, out}; }
    std::span<const double> w1() const { return {theta.data(), hidden * in}; }
    std::span<const double> b1() const { return {theta.data() + hidden * in, hidden}; }
    std::span<const double> w2() const { return {theta.data() + hidden * in + hidden, out * hidden}; }
    std::span<const double> b2() const { return {theta.data() + hidden * in + hidden + out * hidden, out}; }

    friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias of a layer.
inline MlpParams init_mlp(std::size_t in, std::size_t hidden, std::size_t out, double dropout, std::uint64_t seed) {
    MlpParams p(in, hidden, out, dropout);
    Rng rng(seed);
    const double a1 = 1.0 / std::sqrt(static_cast<double>(in));
    const double a2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (double& w : p.w1()) w = rng.uniform(-a1, a1);
    for (double& b : p.b1()) b = rng.uniform(-a1, a1);
    for (double& w : p.w2()) w = rng.uniform(-a2, a2);
    for (double& b : p.b2()) b = rng.uniform(-a2, a2);
    return p;
}

inline double gaussian_cdf(double x) noexcept { return 0.5 * std::erfc(-x * std::numbers::sqrt2 * 0.5); }
inline double gaussian_pdf(double x) noexcept {
    return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}
// Exact GELU: x * Phi(x).
inline double gelu(double x) noexcept { return x * gaussian_cdf(x); }

inline double softplus(double x) noexcept {
    const double y = x > 30.0 ? x : std::log1p(std::exp(x));
    return std::max(y, std::numeric_limits<double>::min());
}
inline double sigmoid(double x) noexcept {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

struct GaussianHeadOutput {
    double mu = 0.0;
    double sigma = 1.0;
};

struct CategoricalHeadOutput {
    std::vector<double> probs;
};

inline GaussianHeadOutput gaussian_head(std::span<const double> out) { return {out[0], softplus(out[1])}; }

inline CategoricalHeadOutput categorical_head(std::span<const double> logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    CategoricalHeadOutput h;
    h.probs.resize(logits.size());
    double z = 0.0;
    for (std::size_t b = 0; b < logits.size(); ++b) z += (h.probs[b] = std::exp(logits[b] - mx));
    for (double& p : h.probs) p /= z;
    return h;
}

// -log N(g; mu, sigma^2)
inline double gaussian_nll(const GaussianHeadOutput& o, double g) {
    const double r = (g - o.mu) / o.sigma;
    return 0.5 * std::log(2.0 * std::numbers::pi) + std::log(o.sigma) + 0.5 * r * r;
}

// -sum_b target_b log pred_b
inline double soft_cross_entropy(const CategoricalHeadOutput& pred, const BinVector& target) {
    if (pred.probs.size() != target.size()) throw ValidationError("soft_cross_entropy: bin count mismatch");
    double loss = 0.0;
    for (std::size_t b = 0; b < target.size(); ++b)
        if (target[b] != 0.0) loss -= target[b] * std::log(pred.probs[b]);
    return loss;
}

// Loss from raw head outputs, writing dLoss/dout.
inline double gaussian_loss_grad(std::span<const double> out, double g, std::span<double> grad) {
    const double mu = out[0];
    const double sigma = softplus(out[1]);
    const double diff = g - mu;
    const double inv_var = 1.0 / (sigma * sigma);
    grad[0] = -diff * inv_var;
    grad[1] = (1.0 / sigma - diff * diff * inv_var / sigma) * sigmoid(out[1]);
    return 0.5 * std::log(2.0 * std::numbers::pi) + std::log(sigma) + 0.5 * diff * diff * inv_var;
}

inline double categorical_loss_grad(std::span<const double> logits, std::span<const double> target,
                                    std::span<double> grad) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    const double log_z = mx + std::log(z);
    double mass = 0.0;
    double loss = 0.0;
    for (std::size_t b = 0; b < logits.size(); ++b) {
        mass += target[b];
        loss -= target[b] * (logits[b] - log_z);
    }
    for (std::size_t b = 0; b < logits.size(); ++b) grad[b] = std::exp(logits[b] - log_z) * mass - target[b];
    return loss;
}

// Per-sample activations kept for the backward pass.
struct MlpScratch {
    std::vector<double> pre;    // W1 z + b1
    std::vector<double> cdf;    // Phi(pre)
    std::vector<double> keep;   // dropout multiplier (0 or 1/(1-rate)), 1 in eval
    std::vector<double> act;    // GELU(pre) * keep
    std::vector<double> out;
    std::vector<double> d_out;
    std::vector<double> d_act;

    explicit MlpScratch(const MlpParams& p)
        : pre(p.hidden), cdf(p.hidden), keep(p.hidden, 1.0), act(p.hidden), out(p.out), d_out(p.out), d_act(p.hidden) {}
};

namespace detail {

// Four interleaved partial sums; fixed order, so results are reproducible.
inline double dot4(const double* a, const double* b, std::size_t n) noexcept {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

}  // namespace detail

inline void forward_into(const MlpParams& p, std::span<const double> z, Mode mode, Rng* rng, MlpScratch& s) {
    if (z.size() != p.in)
        throw ValidationError("mlp_forward: input has length " + std::to_string(z.size()) + ", expected " +
                              std::to_string(p.in));
    const auto w1 = p.w1();
    const auto b1 = p.b1();
    const auto w2 = p.w2();
    const auto b2 = p.b2();
    const bool drop = mode == Mode::train && p.dropout_rate > 0.0;
    if (drop && !rng) throw ConfigError("mlp_forward: train-mode dropout needs a random source");
    const double scale = drop ? 1.0 / (1.0 - p.dropout_rate) : 1.0;
    for (std::size_t j = 0; j < p.hidden; ++j) {
        const double a = b1[j] + detail::dot4(w1.data() + j * p.in, z.data(), p.in);
        s.pre[j] = a;
        s.cdf[j] = gaussian_cdf(a);
        s.keep[j] = drop ? (rng->uniform() < p.dropout_rate ? 0.0 : scale) : 1.0;
        s.act[j] = a * s.cdf[j] * s.keep[j];
    }
    for (std::size_t o = 0; o < p.out; ++o) {
        s.out[o] = b2[o] + detail::dot4(w2.data() + o * p.hidden, s.act.data(), p.hidden);
    }
}

// Head input vector W2 . dropout(GELU(W1 z + b1)) + b2.
inline std::vector<double> mlp_forward(const MlpParams& p, std::span<const double> z, Mode mode = Mode::eval,
                                       Rng* rng = nullptr) {
    MlpScratch s(p);
    forward_into(p, z, mode, rng, s);
    return s.out;
}

// Accumulates dLoss/dtheta into grad given s.d_out for the sample in s.
inline void backward_accumulate(const MlpParams& p, std::span<const double> z, MlpScratch& s, std::span<double> grad) {
    const auto w2 = p.w2();
    const std::size_t o_w1 = 0;
    const std::size_t o_b1 = p.hidden * p.in;
    const std::size_t o_w2 = o_b1 + p.hidden;
    const std::size_t o_b2 = o_w2 + p.out * p.hidden;
    std::fill(s.d_act.begin(), s.d_act.end(), 0.0);
    for (std::size_t o = 0; o < p.out; ++o) {
        const double g = s.d_out[o];
        grad[o_b2 + o] += g;
        double* gw = grad.data() + o_w2 + o * p.hidden;
        const double* w = w2.data() + o * p.hidden;
        for (std::size_t j = 0; j < p.hidden; ++j) {
            gw[j] += g * s.act[j];
            s.d_act[j] += g * w[j];
        }
    }
    for (std::size_t j = 0; j < p.hidden; ++j) {
        if (s.keep[j] == 0.0) continue;
        const double x = s.pre[j];
        const double d_pre = s.d_act[j] * s.keep[j] * (s.cdf[j] + x * gaussian_pdf(x));
        grad[o_b1 + j] += d_pre;
        double* gw = grad.data() + o_w1 + j * p.in;
        for (std::size_t i = 0; i < p.in; ++i) gw[i] += d_pre * z[i];
    }
}

// Features with scalar (Gaussian) or distribution (categorical) targets.
struct Dataset {
    HeadKind head = HeadKind::gaussian;
    Matrix features;
    std::vector<double> scalar_targets;  // gaussian
    Matrix dist_targets;                 // categorical, one row per sample

    std::size_t size() const noexcept { return features.rows; }
};

inline std::size_t head_outputs(const Dataset& d) { return d.head == HeadKind::gaussian ? 2 : d.dist_targets.cols; }

// Mean loss over `batch`; when grad is non-null it receives the mean gradient.
inline double loss_and_gradient(const MlpParams& p, const Dataset& data, std::span<const std::size_t> batch, Mode mode,
                                Rng* rng, std::vector<double>* grad) {
    if (grad) grad->assign(p.theta.size(), 0.0);
    MlpScratch s(p);
    double total = 0.0;
    for (std::size_t idx : batch) {
        const auto z = data.features.row(idx);
        forward_into(p, z, mode, rng, s);
        if (data.head == HeadKind::gaussian)
            total += gaussian_loss_grad(s.out, data.scalar_targets[idx], s.d_out);
        else
            total += categorical_loss_grad(s.out, data.dist_targets.row(idx), s.d_out);
        if (grad) backward_accumulate(p, z, s, *grad);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    if (grad)
        for (double& g : *grad) g *= inv;
    return total * inv;
}

// Largest relative discrepancy between the analytic gradient and central differences
// of step h over every parameter, evaluated in eval mode on the whole dataset.
// Relative error is |a - n| / max(|a|, |n|, 1e-6).
inline double finite_difference_gradcheck(const MlpParams& params, const Dataset& data, double h) {
    std::vector<std::size_t> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    std::vector<double> analytic;
    loss_and_gradient(params, data, all, Mode::eval, nullptr, &analytic);
    MlpParams probe = params;
    double worst = 0.0;
    for (std::size_t k = 0; k < probe.theta.size(); ++k) {
        const double orig = probe.theta[k];
        probe.theta[k] = orig + h;
        const double up = loss_and_gradient(probe, data, all, Mode::eval, nullptr, nullptr);
        probe.theta[k] = orig - h;
        const double down = loss_and_gradient(probe, data, all, Mode::eval, nullptr, nullptr);
        probe.theta[k] = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic[k] - numeric) / denom);
    }
    return worst;
}

}  // namespace loccal
