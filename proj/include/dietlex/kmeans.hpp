#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dietlex/rng.hpp"

namespace dietlex {

struct ClusterConfig {
    int k = 1;
    int max_iterations = 100;
    double tol = 1e-6;  // convergence threshold on relative objective decrease
    std::uint64_t seed = 1;
    int n_init = 3;      // independent restarts; lowest-objective run wins
    int batch_size = 0;  // > 0 enables mini-batch updates for large corpora

    void validate() const {
        if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
        if (max_iterations < 1) throw std::invalid_argument("kmeans: max_iterations must be >= 1");
        if (tol < 0.0) throw std::invalid_argument("kmeans: tol must be >= 0");
        if (n_init < 1) throw std::invalid_argument("kmeans: n_init must be >= 1");
        if (batch_size < 0) throw std::invalid_argument("kmeans: batch_size must be >= 0");
    }
};

struct Clustering {
    int k = 0;
    std::size_t dim = 0;
    std::vector<double> centroids;        // k x dim
    std::vector<std::int32_t> assignment; // one cluster id per point
    std::vector<double> weights;          // point weights used
    double objective = 0.0;               // J = sum_i w_i ||x_i - c_a(i)||^2
    std::vector<double> objective_trace;  // per-iteration J of the winning run
    int iterations = 0;
};

namespace kmdetail {

inline double sq_dist(const double* a, const double* b, std::size_t dim) {
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        const double diff = a[d] - b[d];
        s += diff * diff;
    }
    return s;
}

inline void validate_points(const std::vector<double>& points, std::size_t n, std::size_t dim,
                            const std::vector<double>& weights) {
    if (n == 0) throw std::invalid_argument("kmeans: zero points");
    if (dim == 0 || points.size() != n * dim)
        throw std::invalid_argument("kmeans: point matrix shape mismatch");
    if (weights.size() != n) throw std::invalid_argument("kmeans: weight count mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(weights[i] > 0.0))
            throw std::invalid_argument("kmeans: non-positive weight at point " + std::to_string(i));
        for (std::size_t d = 0; d < dim; ++d) {
            if (!std::isfinite(points[i * dim + d]))
                throw std::invalid_argument("kmeans: non-finite value at point " + std::to_string(i));
        }
    }
}

}  // namespace kmdetail

// Nearest centroid by squared Euclidean distance; ties go to the lowest
// cluster index.
inline std::int32_t assign_point(const double* x, const std::vector<double>& centroids, int k,
                                 std::size_t dim) {
    if (centroids.size() != static_cast<std::size_t>(k) * dim)
        throw std::invalid_argument("assign: dimension mismatch");
    std::int32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) {
        const double d = kmdetail::sq_dist(x, centroids.data() + static_cast<std::size_t>(j) * dim, dim);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

// k-means++ seeding with selection probability proportional to
// w_i * D(x_i)^2. When all remaining mass is zero (duplicate points, or
// k equal to the point count), the lowest-index unchosen point is taken.
inline std::vector<double> kmeans_init(const std::vector<double>& points, std::size_t n, std::size_t dim,
                                       const std::vector<double>& weights, int k, std::uint64_t seed) {
    kmdetail::validate_points(points, n, dim, weights);
    if (static_cast<std::size_t>(k) > n)
        throw std::invalid_argument("kmeans: k exceeds number of points");

    Rng rng(seed);
    std::vector<double> centroids;
    centroids.reserve(static_cast<std::size_t>(k) * dim);
    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
    std::vector<bool> chosen(n, false);
    std::vector<double> mass(n);

    for (int c = 0; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mass[i] = chosen[i] ? 0.0 : weights[i] * (c == 0 ? 1.0 : min_d2[i]);
            total += mass[i];
        }
        std::size_t pick = n;
        if (total > 0.0) {
            const double u = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += mass[i];
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) {  // u landed on the accumulated rounding tail
                for (std::size_t i = n; i-- > 0;) {
                    if (mass[i] > 0.0) {
                        pick = i;
                        break;
                    }
                }
            }
        }
        if (pick == n) {
            for (std::size_t i = 0; i < n; ++i) {
                if (!chosen[i]) {
                    pick = i;
                    break;
                }
            }
        }
        chosen[pick] = true;
        const double* x = points.data() + pick * dim;
        centroids.insert(centroids.end(), x, x + dim);
        for (std::size_t i = 0; i < n; ++i) {
            if (chosen[i]) {
                min_d2[i] = 0.0;
                continue;
            }
            const double d = kmdetail::sq_dist(points.data() + i * dim, x, dim);
            if (d < min_d2[i]) min_d2[i] = d;
        }
    }
    return centroids;
}

// Lloyd iterations from explicit initial centroids. Each iteration assigns,
// repairs empty clusters by re-seeding at the largest weighted-distance
// contributor, then recomputes weighted centroid means. The recorded
// objective is evaluated after the centroid update and never increases
// across iterations.
inline Clustering lloyd(const std::vector<double>& points, std::size_t n, std::size_t dim,
                        const std::vector<double>& weights, std::vector<double> centroids,
                        const ClusterConfig& cfg) {
    cfg.validate();
    kmdetail::validate_points(points, n, dim, weights);
    const int k = cfg.k;
    if (centroids.size() != static_cast<std::size_t>(k) * dim)
        throw std::invalid_argument("kmeans: initial centroid shape mismatch");

    Clustering result;
    result.k = k;
    result.dim = dim;
    result.weights = weights;
    result.assignment.assign(n, 0);

    std::vector<double> cluster_weight(static_cast<std::size_t>(k));
    std::vector<double> sums(static_cast<std::size_t>(k) * dim);
    double prev_j = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        // Assignment pass, with empty-cluster repair against the current
        // centroids; guaranteed non-empty because each repair claims a point
        // from a cluster that still has at least two members.
        for (int repair = 0; repair <= k; ++repair) {
            std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
            for (std::size_t i = 0; i < n; ++i) {
                result.assignment[i] = assign_point(points.data() + i * dim, centroids, k, dim);
                ++sizes[static_cast<std::size_t>(result.assignment[i])];
            }
            int empty = -1;
            for (int j = 0; j < k; ++j) {
                if (sizes[static_cast<std::size_t>(j)] == 0) {
                    empty = j;
                    break;
                }
            }
            if (empty < 0) break;
            double best_contrib = -1.0;
            std::size_t best_i = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const auto a = static_cast<std::size_t>(result.assignment[i]);
                if (sizes[a] < 2) continue;
                const double contrib =
                    weights[i] * kmdetail::sq_dist(points.data() + i * dim,
                                                   centroids.data() + a * dim, dim);
                if (contrib > best_contrib) {
                    best_contrib = contrib;
                    best_i = i;
                }
            }
            const double* x = points.data() + best_i * dim;
            std::copy(x, x + dim, centroids.begin() + static_cast<std::ptrdiff_t>(empty) * static_cast<std::ptrdiff_t>(dim));
        }

        // Weighted centroid update: c_j = sum_{i in j} w_i x_i / sum w_i.
        std::fill(cluster_weight.begin(), cluster_weight.end(), 0.0);
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto a = static_cast<std::size_t>(result.assignment[i]);
            cluster_weight[a] += weights[i];
            const double* x = points.data() + i * dim;
            double* s = sums.data() + a * dim;
            for (std::size_t d = 0; d < dim; ++d) s[d] += weights[i] * x[d];
        }
        for (int j = 0; j < k; ++j) {
            const auto js = static_cast<std::size_t>(j);
            for (std::size_t d = 0; d < dim; ++d)
                centroids[js * dim + d] = sums[js * dim + d] / cluster_weight[js];
        }

        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto a = static_cast<std::size_t>(result.assignment[i]);
            objective += weights[i] *
                         kmdetail::sq_dist(points.data() + i * dim, centroids.data() + a * dim, dim);
        }
        result.objective_trace.push_back(objective);
        result.iterations = iter + 1;
        result.objective = objective;

        if (std::isfinite(prev_j)) {
            const double decrease = prev_j - objective;
            if (decrease <= cfg.tol * prev_j) break;
        } else if (objective == 0.0) {
            break;
        }
        prev_j = objective;
    }

    result.centroids = std::move(centroids);
    return result;
}

namespace kmdetail {

// Mini-batch variant (Sculley-style running centroid updates) for corpora
// where full Lloyd passes are too expensive. Off by default.
inline Clustering minibatch(const std::vector<double>& points, std::size_t n, std::size_t dim,
                            const std::vector<double>& weights, std::vector<double> centroids,
                            const ClusterConfig& cfg, Rng& rng) {
    const int k = cfg.k;
    std::vector<double> seen_weight(static_cast<std::size_t>(k), 0.0);
    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        for (int b = 0; b < cfg.batch_size; ++b) {
            const std::size_t i = static_cast<std::size_t>(rng.below(n));
            const double* x = points.data() + i * dim;
            const auto a = static_cast<std::size_t>(assign_point(x, centroids, k, dim));
            seen_weight[a] += weights[i];
            const double eta = weights[i] / seen_weight[a];
            double* c = centroids.data() + a * dim;
            for (std::size_t d = 0; d < dim; ++d) c[d] += eta * (x[d] - c[d]);
        }
    }

    Clustering result;
    result.k = k;
    result.dim = dim;
    result.weights = weights;
    result.assignment.resize(n);
    result.objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        result.assignment[i] = assign_point(points.data() + i * dim, centroids, k, dim);
        const auto a = static_cast<std::size_t>(result.assignment[i]);
        result.objective += weights[i] *
                            sq_dist(points.data() + i * dim, centroids.data() + a * dim, dim);
    }
    result.objective_trace.push_back(result.objective);
    result.iterations = cfg.max_iterations;
    result.centroids = std::move(centroids);
    return result;
}

}  // namespace kmdetail

// Weighted k-means: k-means++ seeding, Lloyd iterations, n_init restarts,
// lowest final objective wins (ties to the earliest restart).
inline Clustering kmeans_fit(const std::vector<double>& points, std::size_t n, std::size_t dim,
                             const std::vector<double>& weights, const ClusterConfig& cfg) {
    cfg.validate();
    kmdetail::validate_points(points, n, dim, weights);
    if (static_cast<std::size_t>(cfg.k) > n)
        throw std::invalid_argument("kmeans: k exceeds number of points");

    Clustering best;
    bool have_best = false;
    for (int r = 0; r < cfg.n_init; ++r) {
        const std::uint64_t restart_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(r));
        std::vector<double> init = kmeans_init(points, n, dim, weights, cfg.k, restart_seed);
        Clustering run;
        if (cfg.batch_size > 0) {
            Rng rng(mix_seed(restart_seed, 0x6b6d));
            run = kmdetail::minibatch(points, n, dim, weights, std::move(init), cfg, rng);
        } else {
            run = lloyd(points, n, dim, weights, std::move(init), cfg);
        }
        if (!have_best || run.objective < best.objective) {
            best = std::move(run);
            have_best = true;
        }
    }
    return best;
}

}  // namespace dietlex
