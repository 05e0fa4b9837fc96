#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "loccal/corpus.hpp"
#include "loccal/error.hpp"
#include "loccal/linalg.hpp"

namespace loccal {

inline constexpr std::size_t kDefaultPcaDim = 25;

struct PcaModel {
    std::vector<double> mean;                 // length d_h
    Matrix components;                        // d x d_h, orthonormal rows
    std::vector<double> explained_variance;  // non-increasing

    std::size_t dim() const noexcept { return components.rows; }
    std::size_t input_dim() const noexcept { return mean.size(); }

    friend bool operator==(const PcaModel&, const PcaModel&) = default;
};

// Exact PCA from the sample covariance. Each component is signed so that its
// largest-magnitude entry is positive.
inline PcaModel fit_pca(const Matrix& rows, std::size_t d) {
    const std::size_t n = rows.rows;
    const std::size_t dh = rows.cols;
    if (d == 0) throw ConfigError("fit_pca: d must be positive");
    if (d > dh) throw ConfigError("fit_pca: d=" + std::to_string(d) + " exceeds hidden width " + std::to_string(dh));
    if (n < d + 1) throw ValidationError("fit_pca: need at least d+1=" + std::to_string(d + 1) + " vectors, got " +
                                         std::to_string(n));
    PcaModel model;
    model.mean.assign(dh, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = rows.row(i);
        for (std::size_t j = 0; j < dh; ++j) model.mean[j] += r[j];
    }
    for (double& m : model.mean) m /= static_cast<double>(n);

    Matrix cov(dh, dh);
    std::vector<double> centered(dh);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = rows.row(i);
        for (std::size_t j = 0; j < dh; ++j) centered[j] = r[j] - model.mean[j];
        for (std::size_t a = 0; a < dh; ++a) {
            const double ca = centered[a];
            double* crow = &cov(a, 0);
            for (std::size_t b = a; b < dh; ++b) crow[b] += ca * centered[b];
        }
    }
    const double denom = static_cast<double>(n - 1);
    for (std::size_t a = 0; a < dh; ++a)
        for (std::size_t b = a; b < dh; ++b) {
            cov(a, b) /= denom;
            cov(b, a) = cov(a, b);
        }

    const SymmetricEigen eig = symmetric_eigen(cov);
    model.components = Matrix(d, dh);
    model.explained_variance.resize(d);
    for (std::size_t c = 0; c < d; ++c) {
        model.explained_variance[c] = eig.values[c];
        std::size_t arg = 0;
        for (std::size_t j = 1; j < dh; ++j)
            if (std::abs(eig.vectors(j, c)) > std::abs(eig.vectors(arg, c))) arg = j;
        const double sign = eig.vectors(arg, c) < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < dh; ++j) model.components(c, j) = sign * eig.vectors(j, c);
    }
    return model;
}

// components . (h - mean)
inline std::vector<double> project(const PcaModel& m, std::span<const double> h) {
    if (h.size() != m.input_dim())
        throw ValidationError("project: hidden vector has length " + std::to_string(h.size()) + ", model expects " +
                              std::to_string(m.input_dim()));
    std::vector<double> out(m.dim(), 0.0);
    for (std::size_t c = 0; c < m.dim(); ++c) {
        auto comp = m.components.row(c);
        double s = 0.0;
        for (std::size_t j = 0; j < h.size(); ++j) s += comp[j] * (h[j] - m.mean[j]);
        out[c] = s;
    }
    return out;
}

inline std::vector<double> reconstruct(const PcaModel& m, std::span<const double> y) {
    std::vector<double> out = m.mean;
    for (std::size_t c = 0; c < y.size(); ++c) {
        auto comp = m.components.row(c);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += y[c] * comp[j];
    }
    return out;
}

// Hidden vectors of every token, one row each.
inline Matrix hidden_matrix(const Corpus& corpus) {
    Matrix out;
    for (const auto& text : corpus)
        for (const auto& t : text.tokens) out.append_row(t.hidden);
    return out;
}

}  // namespace loccal
