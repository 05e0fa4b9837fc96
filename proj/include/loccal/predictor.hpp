#pragma once
// Local calibration predictors: P(g | Z, source) as a Gaussian, or P(q | Z, source) as a
// categorical distribution over DMAP bins, learned with AdamW.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "loccal/error.hpp"
#include "loccal/mlp.hpp"
#include "loccal/random.hpp"

namespace loccal {

struct TrainConfig {
    std::size_t epochs = 50;
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    std::size_t batch_size = 4096;
    double dropout = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t hidden = 64;
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs == 0) throw ConfigError("epochs must be positive");
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
        if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
        if (batch_size == 0) throw ConfigError("batch_size must be positive");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
        if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in (0, 1)");
        if (!(eps > 0.0)) throw ConfigError("eps must be positive");
        if (hidden == 0) throw ConfigError("hidden must be positive");
    }

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
};

// One AdamW update at step t >= 1 with bias correction and decoupled weight decay:
//   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta
inline void adamw_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                       const TrainConfig& cfg, std::size_t t) {
    if (t < 1) throw ConfigError("adamw_step: step index must be >= 1");
    if (grads.size() != params.size()) throw ValidationError("adamw_step: gradient size mismatch");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    for (double g : grads)
        if (!std::isfinite(g)) throw NumericError("adamw_step: non-finite gradient");
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] = params[i] - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps) -
                    cfg.learning_rate * cfg.weight_decay * params[i];
    }
}

// A trained network plus the affine standardization of its inputs (and, for the
// Gaussian head, of its target) fitted on the training set.
struct Predictor {
    HeadKind head = HeadKind::gaussian;
    MlpParams net;
    std::vector<double> input_mean;
    std::vector<double> input_scale;
    double target_mean = 0.0;
    double target_scale = 1.0;

    std::size_t input_dim() const noexcept { return net.in; }
    std::size_t output_dim() const noexcept { return net.out; }

    friend bool operator==(const Predictor&, const Predictor&) = default;
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

namespace detail {

inline void standardize_columns(Matrix& x, std::vector<double>& mean, std::vector<double>& scale) {
    mean.assign(x.cols, 0.0);
    scale.assign(x.cols, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) mean[j] += x(i, j);
    for (double& m : mean) m /= static_cast<double>(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) scale[j] += (x(i, j) - mean[j]) * (x(i, j) - mean[j]);
    for (double& s : scale) {
        s = std::sqrt(s / static_cast<double>(x.rows));
        if (!(s > 1e-12)) s = 1.0;
    }
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) x(i, j) = (x(i, j) - mean[j]) / scale[j];
}

}  // namespace detail

// epochs x ceil(N / batch) AdamW steps on the mean batch loss; the last partial batch
// is kept. Shuffling, dropout and initialization all derive from cfg.seed.
inline Predictor train_predictor(const Dataset& raw, const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
    cfg.validate();
    if (raw.size() == 0) throw ValidationError("train_predictor: empty dataset");
    if (raw.head == HeadKind::gaussian && raw.scalar_targets.size() != raw.size())
        throw ValidationError("train_predictor: gaussian head needs one scalar target per sample");
    if (raw.head == HeadKind::categorical && raw.dist_targets.rows != raw.size())
        throw ValidationError("train_predictor: categorical head needs one bin vector per sample");

    Predictor pred;
    pred.head = raw.head;
    Dataset data = raw;
    detail::standardize_columns(data.features, pred.input_mean, pred.input_scale);
    if (data.head == HeadKind::gaussian) {
        double mean = 0.0;
        for (double g : data.scalar_targets) mean += g;
        mean /= static_cast<double>(data.size());
        double var = 0.0;
        for (double g : data.scalar_targets) var += (g - mean) * (g - mean);
        const double sd = std::sqrt(var / static_cast<double>(data.size()));
        pred.target_mean = mean;
        pred.target_scale = sd > 1e-12 ? sd : 1.0;
        for (double& g : data.scalar_targets) g = (g - pred.target_mean) / pred.target_scale;
    }

    pred.net = init_mlp(data.features.cols, cfg.hidden, head_outputs(data), cfg.dropout, derive_seed(cfg.seed, 0));
    Rng order_rng(derive_seed(cfg.seed, 1));
    Rng dropout_rng(derive_seed(cfg.seed, 2));
    AdamState state;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> grad;
    std::size_t step = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        order_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, order.size() - start);
            const std::span<const std::size_t> batch(order.data() + start, len);
            epoch_loss += loss_and_gradient(pred.net, data, batch, Mode::train, &dropout_rng, &grad) *
                          static_cast<double>(len);
            adamw_step(pred.net.theta, grad, state, cfg, ++step);
        }
        if (on_epoch) on_epoch(epoch, epoch_loss / static_cast<double>(order.size()));
    }
    return pred;
}

namespace detail {

inline std::vector<double> network_output(const Predictor& p, std::span<const double> z) {
    if (z.size() != p.input_dim())
        throw ValidationError("predictor expects " + std::to_string(p.input_dim()) + " features, got " +
                              std::to_string(z.size()));
    std::vector<double> x(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) x[j] = (z[j] - p.input_mean[j]) / p.input_scale[j];
    return mlp_forward(p.net, x, Mode::eval);
}

}  // namespace detail

// (mu, sigma) in the original units of the score.
inline GaussianHeadOutput predict_gaussian(const Predictor& p, std::span<const double> z) {
    if (p.head != HeadKind::gaussian) throw ValidationError("predict_gaussian on a categorical predictor");
    const GaussianHeadOutput s = gaussian_head(detail::network_output(p, z));
    return {p.target_mean + p.target_scale * s.mu, p.target_scale * s.sigma};
}

inline CategoricalHeadOutput predict_categorical(const Predictor& p, std::span<const double> z) {
    if (p.head != HeadKind::categorical) throw ValidationError("predict_categorical on a gaussian predictor");
    return categorical_head(detail::network_output(p, z));
}

using Observation = std::variant<double, BinVector>;

// log P(observation | Z, source): -NLL for the Gaussian head, -soft CE for the
// categorical head.
inline double predict_logdensity(const Predictor& p, std::span<const double> z, const Observation& obs) {
    if (p.head == HeadKind::gaussian) {
        const double* g = std::get_if<double>(&obs);
        if (!g) throw ValidationError("gaussian predictor needs a scalar observation");
        return -gaussian_nll(predict_gaussian(p, z), *g);
    }
    const BinVector* q = std::get_if<BinVector>(&obs);
    if (!q) throw ValidationError("categorical predictor needs a bin-vector observation");
    return -soft_cross_entropy(predict_categorical(p, z), *q);
}

}  // namespace loccal
