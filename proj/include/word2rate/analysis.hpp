/**
 * @file
 * @brief Desk-scale experiments: product stability against epsilon, word and
 *        sentence embeddings, cosine neighbours, linear probes and a
 *        synthetic grammar corpus.
 * @copyright Apache License v.2 (http://www.apache.org/licenses/LICENSE-2.0)
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "model.hpp"
#include "objective.hpp"

namespace word2rate {

struct StabilityRecord {
    double epsilon = 0.0;
    std::size_t length = 0;
    std::uint64_t seed = 0;
    double mean_abs = 0.0;
};

/// For each (epsilon, seed): mean |element| of (I + eps Q_L) ... (I + eps Q_1)
/// for L = 1..max_len. The matrices depend only on the seed, so different
/// epsilons see the same draws.
inline std::vector<StabilityRecord> stability_curve(std::size_t d, std::span<const double> epsilons,
                                                    std::size_t max_len, std::span<const std::uint64_t> seeds,
                                                    double init_scale = 0.1) {
    if (d < 2) throw Error("stability curve needs d >= 2");
    if (max_len < 1) throw Error("stability curve needs max_len >= 1");
    const auto n = static_cast<Eigen::Index>(d);
    std::vector<StabilityRecord> out;
    out.reserve(epsilons.size() * seeds.size() * max_len);
    for (double eps : epsilons) {
        for (auto seed : seeds) {
            Rng rng(derive_seed(seed, stream::stability));
            Matrix product = Matrix::Identity(n, n);
            for (std::size_t len = 1; len <= max_len; ++len) {
                const Matrix q = draw_rate_matrix(d, init_scale, rng);
                product = (Matrix::Identity(n, n) + eps * q) * product;
                out.push_back({eps, len, seed, product.cwiseAbs().mean()});
            }
        }
    }
    return out;
}

/// The single-word composition: (I + eps Q) p for FOS/FOP, with the
/// eps^2 Q^2 p / 2 term for SOS; the stored vector for CBOW; the unrolled
/// matrix for CMOW; concatenated for hybrids.
inline Vector word_embedding(const ParameterBank &bank, const TrainConfig &config, WordId id) {
    const WordId ids[] = {id};
    return compose_context(bank, ids, config.epsilon);
}

inline Vector sentence_embedding(const ParameterBank &bank, const TrainConfig &config,
                                 std::span<const WordId> sentence) {
    if (sentence.empty()) throw Error("cannot embed an empty sentence");
    return compose_context(bank, sentence, config.epsilon);
}

inline double cosine(const Vector &a, const Vector &b) {
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

using Neighbor = std::pair<WordId, double>;

/// Top-k by cosine over a table of embeddings, query excluded, ties by id.
inline std::vector<Neighbor> nearest_neighbors(std::span<const Vector> embeddings, WordId query, std::size_t top_k) {
    if (query >= embeddings.size()) throw Error("unknown word id " + std::to_string(query));
    if (top_k >= embeddings.size()) throw Error("top_k must be smaller than the vocabulary size");
    std::vector<Neighbor> all;
    all.reserve(embeddings.size() - 1);
    for (WordId w = 0; w < embeddings.size(); ++w) {
        if (w != query) all.emplace_back(w, cosine(embeddings[query], embeddings[w]));
    }
    auto by_score = [](const Neighbor &a, const Neighbor &b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(top_k), all.end(), by_score);
    all.resize(top_k);
    return all;
}

inline std::vector<Vector> word_embeddings(const ParameterBank &bank, const TrainConfig &config) {
    std::vector<Vector> out;
    out.reserve(bank.vocab_size());
    for (WordId w = 0; w < bank.vocab_size(); ++w) out.push_back(word_embedding(bank, config, w));
    return out;
}

inline std::vector<Neighbor> nearest_neighbors(const ParameterBank &bank, const TrainConfig &config, WordId query,
                                               std::size_t top_k) {
    if (query >= bank.vocab_size()) throw Error("unknown word id " + std::to_string(query));
    return nearest_neighbors(word_embeddings(bank, config), query, top_k);
}

struct ProbeResult {
    std::string probe;
    std::string mode;
    double accuracy = 0.0;
    double baseline = 0.0;
    std::size_t seeds = 1;
};

/// Fixed-budget logistic classifier (bias + linear) trained by full-batch
/// gradient descent on standardized features.
struct ProbeOptions {
    std::size_t steps = 1000;
    double learning_rate = 0.5;
    double train_fraction = 0.8;
    bool randomize_labels = false;
    std::size_t min_sentences = 200;
};

namespace detail {

/// Trains on `train` rows and returns accuracy on `test` rows.
inline double logistic_accuracy(const std::vector<Vector> &x, const std::vector<int> &y,
                                const std::vector<std::size_t> &train, const std::vector<std::size_t> &test,
                                const ProbeOptions &opt) {
    const Eigen::Index d = x.front().size();
    Vector mean = Vector::Zero(d), sd = Vector::Zero(d);
    for (auto i : train) mean += x[i];
    mean /= static_cast<double>(train.size());
    for (auto i : train) sd += (x[i] - mean).cwiseAbs2();
    sd = (sd / static_cast<double>(train.size())).cwiseSqrt();
    auto standardize = [&](const Vector &v) {
        Vector z(d);
        for (Eigen::Index j = 0; j < d; ++j) z(j) = sd(j) > 0.0 ? (v(j) - mean(j)) / sd(j) : 0.0;
        return z;
    };
    Matrix train_x(static_cast<Eigen::Index>(train.size()), d);
    Vector train_y(static_cast<Eigen::Index>(train.size()));
    for (std::size_t r = 0; r < train.size(); ++r) {
        train_x.row(static_cast<Eigen::Index>(r)) = standardize(x[train[r]]).transpose();
        train_y(static_cast<Eigen::Index>(r)) = y[train[r]];
    }

    Vector w = Vector::Zero(d);
    double b = 0.0;
    const double inv_n = 1.0 / static_cast<double>(train.size());
    for (std::size_t step = 0; step < opt.steps; ++step) {
        Vector resid = (train_x * w).array() + b;
        for (Eigen::Index r = 0; r < resid.size(); ++r) resid(r) = sigmoid(resid(r)) - train_y(r);
        w -= opt.learning_rate * inv_n * (train_x.transpose() * resid);
        b -= opt.learning_rate * inv_n * resid.sum();
    }

    std::size_t correct = 0;
    for (auto i : test) {
        const int pred = standardize(x[i]).dot(w) + b > 0.0 ? 1 : 0;
        correct += pred == y[i];
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

inline double majority_rate(const std::vector<int> &y, const std::vector<std::size_t> &rows) {
    std::size_t ones = 0;
    for (auto i : rows) ones += y[i] == 1;
    const std::size_t zeros = rows.size() - ones;
    return static_cast<double>(std::max(ones, zeros)) / static_cast<double>(rows.size());
}

} // namespace detail

/// Word-order probe: each sentence yields itself (label 0) and a copy with two
/// adjacent interior words swapped (label 1). Pairs are kept on the same side
/// of the 80/20 split.
inline ProbeResult order_probe(const ParameterBank &bank, const TrainConfig &config,
                               std::span<const EncodedSentence> sentences, Rng &rng, const ProbeOptions &opt = {}) {
    std::vector<Vector> x;
    std::vector<int> y;
    for (const auto &s : sentences) {
        if (s.size() < 4) continue;
        // swap positions (i, i+1) with 1 <= i and i + 1 <= len - 2
        std::vector<std::size_t> candidates;
        for (std::size_t i = 1; i + 2 < s.size(); ++i) {
            if (s[i] != s[i + 1]) candidates.push_back(i);
        }
        if (candidates.empty()) continue;
        const std::size_t i =
            candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
        EncodedSentence swapped = s;
        std::swap(swapped[i], swapped[i + 1]);
        x.push_back(sentence_embedding(bank, config, s));
        y.push_back(0);
        x.push_back(sentence_embedding(bank, config, swapped));
        y.push_back(1);
    }
    const std::size_t pairs = x.size() / 2;
    if (pairs < opt.min_sentences) {
        throw Error("order probe: too few usable sentences (" + std::to_string(pairs) + " < " +
                    std::to_string(opt.min_sentences) + ")");
    }
    if (opt.randomize_labels) {
        std::bernoulli_distribution coin(0.5);
        for (auto &label : y) label = coin(rng) ? 1 : 0;
    }

    std::vector<std::size_t> order(pairs);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(opt.train_fraction * static_cast<double>(pairs)));
    std::vector<std::size_t> train, test;
    for (std::size_t k = 0; k < pairs; ++k) {
        auto &dst = k < n_train ? train : test;
        dst.push_back(2 * order[k]);
        dst.push_back(2 * order[k] + 1);
    }
    ProbeResult r;
    r.probe = "order";
    r.mode = std::string(to_string(bank.mode));
    r.accuracy = detail::logistic_accuracy(x, y, train, test, opt);
    r.baseline = detail::majority_rate(y, test);
    return r;
}

/// Surface probe: is the sentence longer than the median length of the set?
inline ProbeResult length_probe(const ParameterBank &bank, const TrainConfig &config,
                                std::span<const EncodedSentence> sentences, Rng &rng, const ProbeOptions &opt = {}) {
    std::vector<const EncodedSentence *> kept;
    for (const auto &s : sentences) {
        if (!s.empty()) kept.push_back(&s);
    }
    if (kept.size() < opt.min_sentences) {
        throw Error("length probe: too few sentences (" + std::to_string(kept.size()) + " < " +
                    std::to_string(opt.min_sentences) + ")");
    }
    std::vector<std::size_t> lengths;
    for (auto *s : kept) lengths.push_back(s->size());
    std::nth_element(lengths.begin(), lengths.begin() + static_cast<std::ptrdiff_t>(lengths.size() / 2),
                     lengths.end());
    const std::size_t median = lengths[lengths.size() / 2];

    std::vector<Vector> x;
    std::vector<int> y;
    for (auto *s : kept) {
        x.push_back(sentence_embedding(bank, config, *s));
        y.push_back(s->size() > median ? 1 : 0);
    }
    if (opt.randomize_labels) {
        std::bernoulli_distribution coin(0.5);
        for (auto &label : y) label = coin(rng) ? 1 : 0;
    }
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(opt.train_fraction * static_cast<double>(x.size())));
    std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

    ProbeResult r;
    r.probe = "length";
    r.mode = std::string(to_string(bank.mode));
    r.accuracy = detail::logistic_accuracy(x, y, train, test, opt);
    r.baseline = detail::majority_rate(y, test);
    return r;
}

/// Categories of interchangeable words and category templates.
struct GrammarSpec {
    std::vector<std::pair<std::string, std::vector<std::string>>> categories;
    std::vector<std::vector<std::string>> templates;
    std::size_t sentences = 10000;
    std::uint64_t seed = 1;

    void validate() const {
        if (templates.empty()) throw Error("grammar: no templates");
        for (const auto &t : templates) {
            if (t.empty()) throw Error("grammar: empty template");
            for (const auto &cat : t) {
                auto it = std::find_if(categories.begin(), categories.end(),
                                       [&](const auto &c) { return c.first == cat; });
                if (it == categories.end()) throw Error("grammar: template uses unknown category '" + cat + "'");
                if (it->second.empty()) throw Error("grammar: category '" + cat + "' has no words");
            }
        }
    }

    /// 5 categories x 20 words, templates of 10-12 slots, 10,000 sentences.
    static GrammarSpec default_spec() {
        GrammarSpec g;
        for (const char *cat : {"det", "adj", "noun", "verb", "prep"}) {
            std::vector<std::string> words;
            for (int i = 0; i < 20; ++i) words.push_back(std::string(cat) + (i < 10 ? "0" : "") + std::to_string(i));
            g.categories.emplace_back(cat, std::move(words));
        }
        g.templates = {
            {"det", "adj", "noun", "verb", "det", "noun", "prep", "det", "adj", "noun"},
            {"det", "noun", "verb", "det", "adj", "noun", "prep", "det", "noun", "verb", "det", "noun"},
            {"adj", "noun", "verb", "prep", "det", "noun", "prep", "det", "adj", "noun", "verb"},
            {"det", "adj", "noun", "prep", "det", "noun", "verb", "det", "adj", "noun"},
            {"noun", "verb", "det", "adj", "noun", "prep", "det", "noun", "verb", "det", "adj", "noun"},
        };
        return g;
    }
};

/// Seeded: a template uniformly, then a word uniformly per slot.
inline std::vector<std::string> generate_synthetic_corpus(const GrammarSpec &spec) {
    spec.validate();
    std::map<std::string, const std::vector<std::string> *> lookup;
    for (const auto &[name, words] : spec.categories) lookup[name] = &words;
    Rng rng(derive_seed(spec.seed, stream::synth));
    std::uniform_int_distribution<std::size_t> pick_template(0, spec.templates.size() - 1);
    std::vector<std::string> out;
    out.reserve(spec.sentences);
    for (std::size_t s = 0; s < spec.sentences; ++s) {
        const auto &tmpl = spec.templates[pick_template(rng)];
        std::string line;
        for (const auto &cat : tmpl) {
            const auto &words = *lookup.at(cat);
            if (!line.empty()) line.push_back(' ');
            line += words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)];
        }
        out.push_back(std::move(line));
    }
    return out;
}

} // namespace word2rate
