#pragma once
// Lloyd's k-means with deterministic greedy farthest-point seeding.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "loccal/error.hpp"
#include "loccal/linalg.hpp"

namespace loccal {

struct KMeansOptions {
    std::size_t max_iterations = 100;
    double tolerance = 1e-6;  // max centroid shift (Euclidean)
};

struct KMeansResult {
    std::vector<std::size_t> assignment;
    Matrix centroids;  // K x dim
    double inertia = 0.0;
    std::size_t iterations = 0;
    std::vector<double> inertia_trace;  // inertia after each assignment step
};

namespace detail {

inline std::size_t nearest_centroid(const Matrix& centroids, std::span<const double> p, double* dist = nullptr) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows; ++c) {
        const double dd = squared_distance(centroids.row(c), p);
        if (dd < best_d) {
            best_d = dd;
            best = c;
        }
    }
    if (dist) *dist = best_d;
    return best;
}

}  // namespace detail

inline KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, const KMeansOptions& opts = {}) {
    const std::size_t n = points.rows;
    if (k == 0) throw ConfigError("kmeans: K must be positive");
    if (k > n) throw ConfigError("kmeans: K=" + std::to_string(k) + " exceeds the number of points " + std::to_string(n));

    KMeansResult res;
    res.centroids = Matrix(k, points.cols);

    // Farthest-point seeding from index seed % n.
    std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
    std::size_t pick = static_cast<std::size_t>(seed % n);
    for (std::size_t c = 0; c < k; ++c) {
        auto dst = res.centroids.row(c);
        auto src = points.row(pick);
        std::copy(src.begin(), src.end(), dst.begin());
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            min_dist[i] = std::min(min_dist[i], squared_distance(points.row(i), dst));
            if (min_dist[i] > far_d) {
                far_d = min_dist[i];
                far = i;
            }
        }
        pick = far;
    }

    res.assignment.assign(n, 0);
    std::vector<double> dist(n, 0.0);
    auto assign = [&] {
        bool changed = false;
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = detail::nearest_centroid(res.centroids, points.row(i), &dist[i]);
            changed = changed || c != res.assignment[i];
            res.assignment[i] = c;
            inertia += dist[i];
        }
        res.inertia = inertia;
        res.inertia_trace.push_back(inertia);
        return changed;
    };
    assign();

    Matrix sums(k, points.cols);
    std::vector<std::size_t> counts(k);
    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
        std::fill(sums.data.begin(), sums.data.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto s = sums.row(res.assignment[i]);
            auto p = points.row(i);
            for (std::size_t j = 0; j < p.size(); ++j) s[j] += p[j];
            ++counts[res.assignment[i]];
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            auto cen = res.centroids.row(c);
            if (counts[c] == 0) {
                // Re-seed an empty cluster at the point worst served by its centroid.
                std::size_t far = 0;
                for (std::size_t i = 1; i < n; ++i)
                    if (dist[i] > dist[far]) far = i;
                auto p = points.row(far);
                shift = std::max(shift, std::sqrt(squared_distance(cen, p)));
                std::copy(p.begin(), p.end(), cen.begin());
                dist[far] = 0.0;
                continue;
            }
            double moved = 0.0;
            auto s = sums.row(c);
            for (std::size_t j = 0; j < cen.size(); ++j) {
                const double next = s[j] / static_cast<double>(counts[c]);
                moved += (next - cen[j]) * (next - cen[j]);
                cen[j] = next;
            }
            shift = std::max(shift, std::sqrt(moved));
        }
        assign();
        res.iterations = it + 1;
        if (shift < opts.tolerance) break;
    }
    return res;
}

}  // namespace loccal
