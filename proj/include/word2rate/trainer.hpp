/**
 * @file
 * @brief Negative-sampling training for every composition mode: analytic
 *        gradients, Adam, and rate-matrix projection after each step.
 * @copyright Apache License v.2 (http://www.apache.org/licenses/LICENSE-2.0)
 *
 * The loss minimized is -F, F being the negative-sampling objective (or its
 * left/right sum when the split is enabled). Negatives are rows of the target
 * table and one draw of k negatives is shared by both sides of a split
 * example.
 */
#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <span>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"
#include "model.hpp"
#include "objective.hpp"
#include "parallel.hpp"

namespace word2rate {

/// Examples per reduction chunk. Fixed so that the summation order of a
/// batch never depends on the number of worker threads.
inline constexpr std::size_t gradient_chunk = 64;

/// Gradient rows touched by a group of examples, keyed by word id.
struct SparseGradient {
    std::vector<std::unordered_map<WordId, std::vector<double>>> context;
    std::unordered_map<WordId, std::vector<double>> target;

    static std::vector<double> &row(std::unordered_map<WordId, std::vector<double>> &m, WordId id,
                                    std::size_t width) {
        auto it = m.find(id);
        if (it == m.end()) it = m.emplace(id, std::vector<double>(width, 0.0)).first;
        return it->second;
    }
};

namespace detail {

inline void add_outer(std::vector<double> &dst, const Vector &col, const Vector &row) {
    // dst holds a column-major matrix
    Eigen::Map<Matrix> d(dst.data(), col.size(), row.size());
    d.noalias() += col * row.transpose();
}

inline void add_to(std::vector<double> &dst, const Vector &v) {
    Eigen::Map<Vector>(dst.data(), v.size()) += v;
}

} // namespace detail

/// Accumulates dL/d(word parameters) given dL/d(output) for one component.
inline void backprop_component(const ContextComponent &comp, std::span<const WordId> ids, double eps,
                               const Vector &grad_out, std::unordered_map<WordId, std::vector<double>> &out) {
    const std::size_t width = comp.table.width;
    const std::size_t len = ids.size();
    switch (comp.kind) {
    case Composition::cbow:
        for (auto id : ids) detail::add_to(SparseGradient::row(out, id, width), grad_out);
        return;

    case Composition::fos: {
        const Vector p = uniform_distribution(comp.dim);
        const Vector g = eps * grad_out;
        for (auto id : ids) detail::add_outer(SparseGradient::row(out, id, width), g, p);
        return;
    }

    case Composition::fop: {
        // states[i] is the distribution before word i is applied
        std::vector<Vector> states;
        states.reserve(len);
        Vector s = uniform_distribution(comp.dim);
        for (auto id : ids) {
            states.push_back(s);
            s += eps * (comp.matrix(id) * s);
        }
        Vector g = grad_out;
        for (std::size_t i = len; i-- > 0;) {
            detail::add_outer(SparseGradient::row(out, ids[i], width), eps * g, states[i]);
            g += eps * (comp.matrix(ids[i]).transpose() * g);
        }
        return;
    }

    case Composition::sos: {
        // v = p + eps sum u_i + eps^2 sum_k Q_k (c_k + u_k / 2), u_i = Q_i p,
        // c_k = sum_{i<k} u_i. Differentiating:
        //   dQ_k = g (eps p + eps^2 (c_k + u_k/2))^T
        //        + eps^2 (Q_k^T g / 2 + sum_{j>k} Q_j^T g) p^T
        const Vector p = uniform_distribution(comp.dim);
        const double eps2 = eps * eps;
        std::vector<Vector> u(len), r(len);
        for (std::size_t i = 0; i < len; ++i) {
            u[i] = comp.matrix(ids[i]) * p;
            r[i] = comp.matrix(ids[i]).transpose() * grad_out;
        }
        Vector later = Vector::Zero(comp.dim); // sum_{j>k} Q_j^T g
        std::vector<Vector> later_at(len);
        for (std::size_t k = len; k-- > 0;) {
            later_at[k] = later;
            later += r[k];
        }
        Vector prefix = Vector::Zero(comp.dim);
        for (std::size_t k = 0; k < len; ++k) {
            auto &row = SparseGradient::row(out, ids[k], width);
            detail::add_outer(row, grad_out, eps * p + eps2 * (prefix + 0.5 * u[k]));
            detail::add_outer(row, eps2 * (0.5 * r[k] + later_at[k]), p);
            prefix += u[k];
        }
        return;
    }

    case Composition::cmow: {
        const auto side = static_cast<Eigen::Index>(comp.matrix_side());
        std::vector<Matrix> prefix; // product of the first i matrices
        prefix.reserve(len);
        Matrix acc = Matrix::Identity(side, side);
        for (auto id : ids) {
            prefix.push_back(acc);
            acc = comp.matrix(id) * acc;
        }
        Matrix g(side, side);
        for (Eigen::Index i = 0; i < side; ++i) {
            for (Eigen::Index j = 0; j < side; ++j) g(i, j) = grad_out(i * side + j);
        }
        for (std::size_t i = len; i-- > 0;) {
            auto &row = SparseGradient::row(out, ids[i], width);
            Eigen::Map<Matrix>(row.data(), side, side).noalias() += g * prefix[i].transpose();
            g = comp.matrix(ids[i]).transpose() * g;
        }
        return;
    }
    }
}

/// Loss of one example with the given negatives; gradients scaled by `weight`
/// are added to `grad`.
inline double example_gradient(const TrainingExample &ex, std::span<const WordId> negatives,
                               const ParameterBank &bank, const TrainConfig &config, double weight,
                               SparseGradient &grad) {
    std::vector<std::vector<WordId>> sides;
    if (config.lr_split) {
        if (!ex.left.empty()) sides.push_back(ex.left);
        if (!ex.right.empty()) sides.push_back(ex.right);
        if (sides.empty()) throw Error("split loss: both context sides are empty");
    } else {
        sides.push_back(joined_context(ex));
    }
    check_ids(bank, std::span<const WordId>(&ex.target, 1));
    check_ids(bank, negatives);

    const Vector target = bank.target_vector(ex.target);
    std::vector<Vector> negs;
    negs.reserve(negatives.size());
    for (auto n : negatives) negs.emplace_back(bank.target_vector(n));

    double loss = 0.0;
    for (const auto &ids : sides) {
        const Vector context = compose_context(bank, ids, config.epsilon);
        const auto g = negative_sampling_gradient(context, target, negs);
        loss += g.loss;
        detail::add_to(SparseGradient::row(grad.target, ex.target, bank.dim), weight * g.target);
        for (std::size_t i = 0; i < negatives.size(); ++i) {
            detail::add_to(SparseGradient::row(grad.target, negatives[i], bank.dim), weight * g.negatives[i]);
        }
        Eigen::Index offset = 0;
        for (std::size_t c = 0; c < bank.context.size(); ++c) {
            const auto &comp = bank.context[c];
            const auto d = static_cast<Eigen::Index>(comp.dim);
            backprop_component(comp, ids, config.epsilon, weight * g.context.segment(offset, d), grad.context[c]);
            offset += d;
        }
    }
    return loss;
}

/// Mean loss over a batch with fixed negatives; no gradients. This path only
/// uses the composition functions and the loss, never the backward code.
inline double batch_loss(std::span<const TrainingExample> batch, std::span<const std::vector<WordId>> negatives,
                         const ParameterBank &bank, const TrainConfig &config) {
    if (batch.empty()) throw Error("empty batch");
    double total = 0.0;
    for (std::size_t e = 0; e < batch.size(); ++e) {
        std::vector<Vector> negs;
        for (auto n : negatives[e]) negs.emplace_back(bank.target_vector(n));
        const Vector target = bank.target_vector(batch[e].target);
        const auto ctx = forward(batch[e], bank, config);
        total += config.lr_split ? split_loss(ctx.left, ctx.right, target, negs)
                                 : negative_sampling_loss(*ctx.joint, target, negs);
    }
    return total / static_cast<double>(batch.size());
}

inline std::vector<std::vector<WordId>> sample_batch_negatives(std::span<const TrainingExample> batch,
                                                               const NegativeTable &table, std::size_t k,
                                                               Rng &rng) {
    std::vector<std::vector<WordId>> out;
    out.reserve(batch.size());
    for (const auto &ex : batch) out.push_back(sample_negatives(table, k, ex.target, rng));
    return out;
}

/// Mean batch loss; `grad` is overwritten with the gradient of that mean.
/// Bitwise identical for any `threads`.
inline double batch_gradients(std::span<const TrainingExample> batch, std::span<const std::vector<WordId>> negatives,
                              const ParameterBank &bank, const TrainConfig &config, ParameterBank &grad,
                              std::size_t threads = 1) {
    if (batch.empty()) throw Error("empty batch");
    if (negatives.size() != batch.size()) throw Error("one negative list per example required");
    if (grad.vocab_size() != bank.vocab_size() || grad.context.size() != bank.context.size()) {
        grad = ParameterBank(bank.mode, bank.dim, bank.vocab_size());
    } else {
        grad.set_zero();
    }

    const double weight = 1.0 / static_cast<double>(batch.size());
    const std::size_t chunks = (batch.size() + gradient_chunk - 1) / gradient_chunk;
    std::vector<SparseGradient> partial(chunks);
    std::vector<double> losses(chunks, 0.0);
    parallel_chunks(chunks, threads, [&](std::size_t c) {
        auto &sg = partial[c];
        sg.context.resize(bank.context.size());
        const std::size_t lo = c * gradient_chunk;
        const std::size_t hi = std::min(batch.size(), lo + gradient_chunk);
        for (std::size_t e = lo; e < hi; ++e) {
            const double l = example_gradient(batch[e], negatives[e], bank, config, weight, sg);
            if (!std::isfinite(l)) throw Error("non-finite loss at example " + std::to_string(e));
            losses[c] += l;
        }
    });

    double total = 0.0;
    for (std::size_t c = 0; c < chunks; ++c) {
        total += losses[c];
        for (std::size_t t = 0; t < bank.context.size(); ++t) {
            auto &table = grad.context[t].table;
            for (const auto &[id, row] : partial[c].context[t]) {
                auto dst = table.row(id);
                for (std::size_t i = 0; i < row.size(); ++i) dst[i] += row[i];
            }
        }
        for (const auto &[id, row] : partial[c].target) {
            auto dst = grad.target.row(id);
            for (std::size_t i = 0; i < row.size(); ++i) dst[i] += row[i];
        }
    }
    return total * weight;
}

struct LossAndGradients {
    double loss = 0.0;
    ParameterBank gradients;
};

inline LossAndGradients loss_and_gradients(std::span<const TrainingExample> batch, const ParameterBank &bank,
                                           const NegativeTable &table, const TrainConfig &config, Rng &rng) {
    const auto negatives = sample_batch_negatives(batch, table, config.negatives, rng);
    LossAndGradients out;
    out.loss = batch_gradients(batch, negatives, bank, config, out.gradients, config.threads);
    return out;
}

struct AdamState {
    std::vector<std::vector<double>> first;  // one per table, bank order
    std::vector<std::vector<double>> second;
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    AdamState() = default;

    explicit AdamState(const ParameterBank &bank) {
        for (const auto *t : bank.tables()) {
            first.emplace_back(t->values.size(), 0.0);
            second.emplace_back(t->values.size(), 0.0);
        }
    }

    friend bool operator==(const AdamState &, const AdamState &) = default;
};

/// One bias-corrected Adam update followed by apply_constraints.
inline void adam_step(ParameterBank &bank, const ParameterBank &grads, AdamState &state, const TrainConfig &config) {
    auto params = bank.tables();
    const auto gs = grads.tables();
    if (state.first.size() != params.size()) state = AdamState(bank);
    if (gs.size() != params.size()) throw Error("gradient bank shape mismatch");

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto &x = params[k]->values;
        const auto &g = gs[k]->values;
        auto &m = state.first[k];
        auto &v = state.second[k];
        if (g.size() != x.size() || m.size() != x.size()) throw Error("gradient bank shape mismatch");
        for (std::size_t i = 0; i < x.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            x[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
    apply_constraints(bank);
    assert(satisfies_constraints(bank));
}

struct LossReport {
    std::vector<double> epoch_loss;
    std::vector<std::size_t> epoch_examples;
};

struct TrainResult {
    Vocabulary vocab;
    ParameterBank bank;
    AdamState adam;
    LossReport report;
};

/// Examples of one epoch. Each sentence draws from its own stream seeded by
/// (seed, epoch, sentence index), so the result is independent of threads.
inline std::vector<TrainingExample> epoch_examples(const std::vector<EncodedSentence> &sentences,
                                                   const TrainConfig &config, std::uint64_t epoch) {
    constexpr std::size_t per_chunk = 256;
    const std::size_t chunks = (sentences.size() + per_chunk - 1) / per_chunk;
    std::vector<std::vector<TrainingExample>> parts(chunks);
    parallel_chunks(chunks, config.threads, [&](std::size_t c) {
        const std::size_t hi = std::min(sentences.size(), (c + 1) * per_chunk);
        for (std::size_t s = c * per_chunk; s < hi; ++s) {
            Rng rng(derive_seed(config.seed, stream::examples, epoch, s));
            auto ex = generate_examples(sentences[s], config.window, rng, config.target_policy, config.window_policy);
            std::move(ex.begin(), ex.end(), std::back_inserter(parts[c]));
        }
    });
    std::vector<TrainingExample> out;
    for (auto &p : parts) std::move(p.begin(), p.end(), std::back_inserter(out));
    return out;
}

/// Trains on already encoded sentences with a fixed vocabulary.
inline TrainResult train_encoded(const Vocabulary &vocab, const std::vector<EncodedSentence> &sentences,
                                 const TrainConfig &config, std::ostream *progress = nullptr) {
    config.validate();
    TrainResult result;
    result.vocab = vocab;
    Rng init_rng(derive_seed(config.seed, stream::init));
    result.bank = init_parameters(config, vocab.size(), init_rng);
    result.adam = AdamState(result.bank);
    if (config.epochs == 0) return result;

    const auto table = NegativeTable::build(vocab, config.neg_exponent);
    ParameterBank grad(result.bank.mode, result.bank.dim, result.bank.vocab_size());
    for (std::uint64_t epoch = 0; epoch < config.epochs; ++epoch) {
        auto examples = epoch_examples(sentences, config, epoch);
        Rng shuffle_rng(derive_seed(config.seed, stream::shuffle, epoch));
        std::shuffle(examples.begin(), examples.end(), shuffle_rng);
        Rng neg_rng(derive_seed(config.seed, stream::negatives, epoch));

        double loss_sum = 0.0;
        for (std::size_t lo = 0; lo < examples.size(); lo += config.batch_size) {
            const std::size_t hi = std::min(examples.size(), lo + config.batch_size);
            std::span<const TrainingExample> batch(examples.data() + lo, hi - lo);
            const auto negatives = sample_batch_negatives(batch, table, config.negatives, neg_rng);
            const double loss = batch_gradients(batch, negatives, result.bank, config, grad, config.threads);
            if (!std::isfinite(loss)) throw Error("non-finite loss in epoch " + std::to_string(epoch + 1));
            loss_sum += loss * static_cast<double>(batch.size());
            adam_step(result.bank, grad, result.adam, config);
        }
        const double mean = examples.empty() ? 0.0 : loss_sum / static_cast<double>(examples.size());
        result.report.epoch_loss.push_back(mean);
        result.report.epoch_examples.push_back(examples.size());
        if (progress) {
            *progress << "epoch=" << (epoch + 1) << " loss=" << std::setprecision(9) << mean
                      << " examples=" << examples.size() << std::endl;
        }
    }
    return result;
}

/// Full pipeline from tokenized sentences: vocabulary, encoding, training.
inline TrainResult train(const std::vector<TokenList> &corpus, const TrainConfig &config,
                         std::ostream *progress = nullptr) {
    config.validate();
    auto vocab = Vocabulary::build(corpus, config.min_count, config.length_bounds);
    std::vector<EncodedSentence> sentences;
    for (const auto &tokens : corpus) {
        if (auto enc = encode_sentence(vocab, tokens, config.length_bounds)) sentences.push_back(std::move(*enc));
    }
    return train_encoded(vocab, sentences, config, progress);
}

inline TrainResult train(std::istream &corpus, const TrainConfig &config, std::ostream *progress = nullptr) {
    return train(read_corpus(corpus), config, progress);
}

} // namespace word2rate
