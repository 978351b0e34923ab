/**
 * @file
 * @brief Negative-sampling objective (minimization form) and its gradient.
 * @copyright Apache License v.2 (http://www.apache.org/licenses/LICENSE-2.0)
 */
#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "rate_algebra.hpp"

namespace word2rate {

/// log(sigmoid(x)) without overflow.
inline double log_sigmoid(double x) {
    return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// -log s(v_t.v_c) - sum_i log s(-v_ns_i.v_c)
template <class Negatives>
double negative_sampling_loss(const Vector &context, const Vector &target, const Negatives &negatives) {
    if (context.size() != target.size()) throw Error("dimension mismatch between context and target");
    double loss = -log_sigmoid(target.dot(context));
    for (const auto &n : negatives) {
        if (n.size() != context.size()) throw Error("dimension mismatch between context and negative");
        loss -= log_sigmoid(-n.dot(context));
    }
    return loss;
}

/// Sum of the per-side losses; an absent side contributes nothing.
template <class Negatives>
double split_loss(const std::optional<Vector> &left, const std::optional<Vector> &right, const Vector &target,
                  const Negatives &negatives) {
    if (!left && !right) throw Error("split loss: both context sides are empty");
    double loss = 0.0;
    if (left) loss += negative_sampling_loss(*left, target, negatives);
    if (right) loss += negative_sampling_loss(*right, target, negatives);
    return loss;
}

struct NegativeSamplingGradient {
    double loss = 0.0;
    Vector context;
    Vector target;
    std::vector<Vector> negatives;
};

template <class Negatives>
NegativeSamplingGradient negative_sampling_gradient(const Vector &context, const Vector &target,
                                                    const Negatives &negatives) {
    NegativeSamplingGradient g;
    const double pos = target.dot(context);
    g.loss = -log_sigmoid(pos);
    const double pos_scale = sigmoid(pos) - 1.0;
    g.context = pos_scale * target;
    g.target = pos_scale * context;
    for (const auto &n : negatives) {
        const double s = n.dot(context);
        g.loss -= log_sigmoid(-s);
        const double scale = sigmoid(s);
        g.context += scale * n;
        g.negatives.push_back(scale * context);
    }
    return g;
}

} // namespace word2rate
