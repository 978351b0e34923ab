/**
 * @file
 * @brief Central finite-difference check of the analytic gradients.
 * @copyright Apache License v.2 (http://www.apache.org/licenses/LICENSE-2.0)
 *
 * The numeric side evaluates batch_loss, which is built from the composition
 * functions and the loss only.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "trainer.hpp"

namespace word2rate {

struct GradCheckOptions {
    std::size_t vocab_size = 6;
    std::size_t examples_per_instance = 2;
    std::size_t instances = 20;
    double step = 1e-6;
    double tolerance = 1e-4;
    /// Relative error is |a - n| / max(|a|, |n|, floor).
    double floor = 1e-5;
    std::uint64_t seed = 1;
};

struct GradCheckReport {
    Mode mode = Mode::fos;
    bool lr_split = false;
    std::size_t instances = 0;
    std::size_t coordinates = 0;
    std::size_t failures = 0;
    double max_relative_error = 0.0;
    std::string worst; // description of the worst coordinate

    bool passed() const { return failures == 0; }
};

namespace detail {

inline ParameterBank random_bank(const TrainConfig &config, std::size_t n, Rng &rng) {
    ParameterBank bank(config.mode, config.dim, n);
    std::normal_distribution<double> draw(0.0, 1.0);
    for (auto &comp : bank.context) {
        for (WordId w = 0; w < n; ++w) {
            if (comp.kind == Composition::cbow) {
                for (auto &x : comp.table.row(w)) x = 0.5 * draw(rng);
            } else if (comp.kind == Composition::cmow) {
                auto m = comp.matrix(w);
                for (Eigen::Index j = 0; j < m.cols(); ++j) {
                    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = (i == j ? 1.0 : 0.0) + 0.3 * draw(rng);
                }
            } else {
                auto q = comp.matrix(w);
                for (Eigen::Index j = 0; j < q.cols(); ++j) {
                    for (Eigen::Index i = 0; i < q.rows(); ++i) q(i, j) = std::abs(0.5 * draw(rng));
                }
                q = project_rate_matrix(q);
            }
        }
    }
    for (auto &x : bank.target.values) x = 0.5 * draw(rng);
    return bank;
}

inline TrainingExample random_example(std::size_t n, std::size_t window, Rng &rng) {
    std::uniform_int_distribution<std::size_t> side(0, window);
    std::uniform_int_distribution<WordId> word(0, static_cast<WordId>(n - 1));
    TrainingExample ex;
    std::size_t l = 0, r = 0;
    while (l + r == 0) l = side(rng), r = side(rng);
    for (std::size_t i = 0; i < l; ++i) ex.left.push_back(word(rng));
    for (std::size_t i = 0; i < r; ++i) ex.right.push_back(word(rng));
    ex.target = word(rng);
    return ex;
}

} // namespace detail

/// Compares analytic and central-difference gradients on every coordinate of
/// randomly drawn small instances.
inline GradCheckReport gradient_check(const TrainConfig &config, const GradCheckOptions &opt = {}) {
    config.validate();
    if (opt.vocab_size < 2) throw Error("gradient check needs vocab_size >= 2");
    GradCheckReport report;
    report.mode = config.mode;
    report.lr_split = config.lr_split;
    Rng rng(derive_seed(opt.seed, static_cast<std::uint64_t>(config.mode), config.lr_split ? 1u : 0u));
    std::uniform_int_distribution<WordId> word(0, static_cast<WordId>(opt.vocab_size - 1));

    for (std::size_t inst = 0; inst < opt.instances; ++inst) {
        ParameterBank bank = detail::random_bank(config, opt.vocab_size, rng);
        std::vector<TrainingExample> batch;
        std::vector<std::vector<WordId>> negatives;
        for (std::size_t e = 0; e < opt.examples_per_instance; ++e) {
            batch.push_back(detail::random_example(opt.vocab_size, config.window, rng));
            std::vector<WordId> negs;
            while (negs.size() < config.negatives) {
                const WordId w = word(rng);
                if (w != batch.back().target) negs.push_back(w);
            }
            negatives.push_back(std::move(negs));
        }

        ParameterBank grad;
        batch_gradients(batch, negatives, bank, config, grad, 1);

        auto params = bank.tables();
        const auto analytic = grad.tables();
        for (std::size_t t = 0; t < params.size(); ++t) {
            auto &values = params[t]->values;
            for (std::size_t i = 0; i < values.size(); ++i) {
                const double saved = values[i];
                values[i] = saved + opt.step;
                const double up = batch_loss(batch, negatives, bank, config);
                values[i] = saved - opt.step;
                const double down = batch_loss(batch, negatives, bank, config);
                values[i] = saved;

                const double numeric = (up - down) / (2.0 * opt.step);
                const double a = analytic[t]->values[i];
                const double denom = std::max({std::abs(a), std::abs(numeric), opt.floor});
                const double rel = std::abs(a - numeric) / denom;
                ++report.coordinates;
                if (!(rel < opt.tolerance)) ++report.failures;
                if (!(rel <= report.max_relative_error)) {
                    report.max_relative_error = rel;
                    report.worst = "instance " + std::to_string(inst) + " table " + std::to_string(t) + " index " +
                                   std::to_string(i) + " analytic " + std::to_string(a) + " numeric " +
                                   std::to_string(numeric);
                }
            }
        }
        ++report.instances;
    }
    return report;
}

} // namespace word2rate
