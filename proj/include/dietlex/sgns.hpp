#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "dietlex/rng.hpp"

namespace dietlex::sgns {

// Negative-sampling objective shared by the word-vector and document-vector
// trainers. One step contrasts an observed (center, target) pair against
// sampled non-targets:
//
//   L = -log sigmoid(v.u_pos) - sum_i log sigmoid(-v.u_neg[i])
//
// Gradients are the simultaneous partials at the current parameters; the
// fused SGD step below applies exactly -alpha * gradient (the center update
// is accumulated against pre-update output rows).

template <typename Real>
Real sigmoid(Real x) {
    return Real(1) / (Real(1) + std::exp(-x));
}

template <typename Real>
Real dot(const Real* a, const Real* b, int dim) {
    Real s = 0;
    for (int i = 0; i < dim; ++i) s += a[i] * b[i];
    return s;
}

template <typename Real>
Real loss(const Real* center, const Real* positive, const Real* const* negatives, int n_neg, int dim) {
    Real l = -std::log(sigmoid(dot(center, positive, dim)));
    for (int i = 0; i < n_neg; ++i) {
        l -= std::log(sigmoid(-dot(center, negatives[i], dim)));
    }
    return l;
}

template <typename Real>
void gradients(const Real* center, const Real* positive, const Real* const* negatives, int n_neg,
               int dim, Real* grad_center, Real* grad_positive, Real** grad_negatives) {
    const Real gp = sigmoid(dot(center, positive, dim)) - Real(1);
    for (int d = 0; d < dim; ++d) {
        grad_positive[d] = gp * center[d];
        grad_center[d] = gp * positive[d];
    }
    for (int i = 0; i < n_neg; ++i) {
        const Real gn = sigmoid(dot(center, negatives[i], dim));
        for (int d = 0; d < dim; ++d) {
            grad_negatives[i][d] = gn * center[d];
            grad_center[d] += gn * negatives[i][d];
        }
    }
}

// In-place SGD step with rate alpha; center_delta must hold dim scratch
// values. Output rows update immediately; the center accumulates its full
// gradient first so every partial is evaluated at the original parameters.
template <typename Real>
void apply_step(Real* center, Real* positive, Real* const* negatives, int n_neg, int dim, Real alpha,
                Real* center_delta) {
    std::fill(center_delta, center_delta + dim, Real(0));
    {
        const Real g = alpha * (Real(1) - sigmoid(dot(center, positive, dim)));
        for (int d = 0; d < dim; ++d) {
            center_delta[d] += g * positive[d];
            positive[d] += g * center[d];
        }
    }
    for (int i = 0; i < n_neg; ++i) {
        Real* neg = negatives[i];
        const Real g = -alpha * sigmoid(dot(center, neg, dim));
        for (int d = 0; d < dim; ++d) {
            center_delta[d] += g * neg[d];
            neg[d] += g * center[d];
        }
    }
    for (int d = 0; d < dim; ++d) center[d] += center_delta[d];
}

// Draws negatives from the unigram distribution raised to a power (3/4 by
// default downstream) via binary search over the cumulative mass.
class UnigramSampler {
public:
    UnigramSampler() = default;

    UnigramSampler(std::span<const std::int64_t> counts, double power) {
        cdf_.reserve(counts.size());
        double acc = 0.0;
        for (std::int64_t c : counts) {
            acc += std::pow(static_cast<double>(c), power);
            cdf_.push_back(acc);
        }
        if (cdf_.empty() || acc <= 0.0) throw std::invalid_argument("unigram sampler needs positive counts");
    }

    std::int32_t sample(Rng& rng) const {
        const double u = rng.uniform() * cdf_.back();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        if (it == cdf_.end()) --it;
        return static_cast<std::int32_t>(it - cdf_.begin());
    }

    std::size_t size() const { return cdf_.size(); }

private:
    std::vector<double> cdf_;
};

}  // namespace dietlex::sgns
