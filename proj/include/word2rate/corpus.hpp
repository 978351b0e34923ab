/**
 * @file
 * @brief Vocabulary construction, sentence encoding, context/target example
 *        extraction and the negative-sampling table.
 * @copyright Apache License v.2 (http://www.apache.org/licenses/LICENSE-2.0)
 */
#pragma once

#include <algorithm>
#include <cctype>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "common.hpp"

namespace word2rate {

using TokenList = std::vector<std::string>;
using EncodedSentence = std::vector<WordId>;

struct LengthBounds {
    std::size_t min = 10;
    std::size_t max = 20;

    bool contains(std::size_t len) const { return len >= min && len <= max; }
};

/// Whitespace split, ASCII-lowercased.
inline TokenList tokenize(std::string_view line) {
    TokenList out;
    std::string cur;
    for (char ch : line) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

inline std::vector<TokenList> read_corpus(std::istream &in) {
    std::vector<TokenList> out;
    std::string line;
    while (std::getline(in, line)) out.push_back(tokenize(line));
    return out;
}

class Vocabulary {
public:
    Vocabulary() = default;

    /// Keeps tokens seen at least min_count times in sentences whose length
    /// lies within bounds. Ids: count descending, then token ascending.
    template <class Sentences>
    static Vocabulary build(const Sentences &sentences, std::size_t min_count, LengthBounds bounds) {
        if (min_count < 1) throw Error("min_count must be >= 1");
        if (bounds.min > bounds.max) throw Error("length bounds: min > max");
        std::unordered_map<std::string, std::uint64_t> counts;
        for (const auto &sentence : sentences) {
            if (!bounds.contains(std::size(sentence))) continue;
            for (const auto &tok : sentence) ++counts[std::string(tok)];
        }
        std::vector<std::pair<std::string, std::uint64_t>> kept;
        for (auto &[tok, c] : counts) {
            if (c >= min_count) kept.emplace_back(tok, c);
        }
        if (kept.empty()) throw Error("empty vocabulary");
        std::sort(kept.begin(), kept.end(), [](const auto &a, const auto &b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        Vocabulary v;
        for (auto &[tok, c] : kept) v.add(std::move(tok), c);
        return v;
    }

    static Vocabulary from_entries(std::vector<std::pair<std::string, std::uint64_t>> entries) {
        Vocabulary v;
        for (auto &[tok, c] : entries) {
            if (v.index_.count(tok)) throw Error("duplicate token '" + tok + "' in vocabulary");
            v.add(std::move(tok), c);
        }
        if (v.size() == 0) throw Error("empty vocabulary");
        return v;
    }

    std::size_t size() const { return tokens_.size(); }
    std::uint64_t total_count() const { return total_; }

    std::optional<WordId> id(std::string_view token) const {
        auto it = index_.find(std::string(token));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    const std::string &token(WordId id) const { return tokens_.at(id); }
    std::uint64_t count(WordId id) const { return counts_.at(id); }
    const std::vector<std::uint64_t> &counts() const { return counts_; }

    /// `#n=<size>` then `token<TAB>id<TAB>count` per line, by id.
    void write_tsv(std::ostream &out) const {
        out << "#n=" << size() << '\n';
        for (std::size_t i = 0; i < size(); ++i) out << tokens_[i] << '\t' << i << '\t' << counts_[i] << '\n';
    }

    static Vocabulary read_tsv(std::istream &in) {
        std::string line;
        if (!std::getline(in, line) || line.rfind("#n=", 0) != 0) throw Error("vocabulary: missing '#n=' header");
        const std::size_t n = std::stoull(line.substr(3));
        std::vector<std::pair<std::string, std::uint64_t>> entries;
        entries.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::getline(in, line)) throw Error("vocabulary: expected " + std::to_string(n) + " entries");
            const auto t1 = line.find('\t');
            const auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
            if (t1 == std::string::npos || t2 == std::string::npos) {
                throw Error("vocabulary: malformed line " + std::to_string(i + 2));
            }
            if (std::stoull(line.substr(t1 + 1, t2 - t1 - 1)) != i) {
                throw Error("vocabulary: ids not dense at line " + std::to_string(i + 2));
            }
            entries.emplace_back(line.substr(0, t1), std::stoull(line.substr(t2 + 1)));
        }
        return from_entries(std::move(entries));
    }

    friend bool operator==(const Vocabulary &a, const Vocabulary &b) {
        return a.tokens_ == b.tokens_ && a.counts_ == b.counts_;
    }

private:
    void add(std::string tok, std::uint64_t c) {
        index_.emplace(tok, static_cast<WordId>(tokens_.size()));
        tokens_.push_back(std::move(tok));
        counts_.push_back(c);
        total_ += c;
    }

    std::unordered_map<std::string, WordId> index_;
    std::vector<std::string> tokens_;
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

/// Drops out-of-vocabulary tokens; nullopt when the remainder leaves bounds.
template <class Tokens>
std::optional<EncodedSentence> encode_sentence(const Vocabulary &vocab, const Tokens &tokens, LengthBounds bounds) {
    EncodedSentence ids;
    for (const auto &tok : tokens) {
        if (auto id = vocab.id(tok)) ids.push_back(*id);
    }
    if (!bounds.contains(ids.size())) return std::nullopt;
    return ids;
}

inline TokenList decode_sentence(const Vocabulary &vocab, std::span<const WordId> ids) {
    TokenList out;
    out.reserve(ids.size());
    for (auto id : ids) out.push_back(vocab.token(id));
    return out;
}

struct TrainingExample {
    std::vector<WordId> left;  // preceding the target, sentence order
    std::vector<WordId> right; // following the target, sentence order
    WordId target = 0;

    friend bool operator==(const TrainingExample &, const TrainingExample &) = default;
};

enum class TargetPolicy { with_replacement, without_replacement };

/// symmetric: m words on each side. asymmetric: 2m context words in total,
/// with the target's offset inside the window drawn uniformly.
enum class WindowPolicy { symmetric, asymmetric };

/// Example for a fixed target position with up to `left_span` words before
/// and `right_span` words after it.
inline TrainingExample example_at(std::span<const WordId> sentence, std::size_t pos, std::size_t left_span,
                                  std::size_t right_span) {
    TrainingExample ex;
    ex.target = sentence[pos];
    const std::size_t lo = pos >= left_span ? pos - left_span : 0;
    const std::size_t hi = std::min(sentence.size(), pos + right_span + 1);
    ex.left.assign(sentence.begin() + static_cast<std::ptrdiff_t>(lo),
                   sentence.begin() + static_cast<std::ptrdiff_t>(pos));
    ex.right.assign(sentence.begin() + static_cast<std::ptrdiff_t>(pos + 1),
                    sentence.begin() + static_cast<std::ptrdiff_t>(hi));
    return ex;
}

inline TrainingExample example_at(std::span<const WordId> sentence, std::size_t pos, std::size_t window) {
    return example_at(sentence, pos, window, window);
}

/// Draws |sentence| target positions and extracts their windows.
inline std::vector<TrainingExample> generate_examples(std::span<const WordId> sentence, std::size_t window,
                                                      Rng &rng,
                                                      TargetPolicy targets = TargetPolicy::with_replacement,
                                                      WindowPolicy windows = WindowPolicy::symmetric) {
    if (window < 1) throw Error("window must be >= 1");
    std::vector<TrainingExample> out;
    const std::size_t len = sentence.size();
    if (len < 2) return out;

    std::vector<std::size_t> positions(len);
    if (targets == TargetPolicy::with_replacement) {
        std::uniform_int_distribution<std::size_t> pick(0, len - 1);
        for (auto &p : positions) p = pick(rng);
    } else {
        std::iota(positions.begin(), positions.end(), std::size_t{0});
        std::shuffle(positions.begin(), positions.end(), rng);
    }

    out.reserve(len);
    for (std::size_t pos : positions) {
        std::size_t left = window, right = window;
        if (windows == WindowPolicy::asymmetric) {
            left = std::uniform_int_distribution<std::size_t>(0, 2 * window)(rng);
            right = 2 * window - left;
        }
        auto ex = example_at(sentence, pos, left, right);
        if (ex.left.empty() && ex.right.empty()) continue;
        out.push_back(std::move(ex));
    }
    return out;
}

/// Unigram distribution raised to an exponent, sampled through a cumulative
/// table.
class NegativeTable {
public:
    static NegativeTable build(const Vocabulary &vocab, double exponent) {
        return build(vocab.counts(), exponent);
    }

    static NegativeTable build(std::span<const std::uint64_t> counts, double exponent) {
        if (!(exponent > 0.0)) throw Error("negative-table exponent must be > 0");
        if (counts.empty()) throw Error("empty vocabulary");
        NegativeTable t;
        t.exponent_ = exponent;
        t.probs_.resize(counts.size());
        long double total = 0.0L;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            t.probs_[i] = std::pow(static_cast<double>(counts[i]), exponent);
            total += t.probs_[i];
        }
        t.cumulative_.resize(counts.size());
        long double run = 0.0L;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            t.probs_[i] = static_cast<double>(t.probs_[i] / total);
            run += t.probs_[i];
            t.cumulative_[i] = static_cast<double>(run);
        }
        t.cumulative_.back() = 1.0;
        return t;
    }

    std::size_t size() const { return probs_.size(); }
    double exponent() const { return exponent_; }
    double probability(WordId id) const { return probs_.at(id); }
    const std::vector<double> &probabilities() const { return probs_; }

    WordId sample(Rng &rng) const {
        const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        if (it == cumulative_.end()) --it;
        return static_cast<WordId>(it - cumulative_.begin());
    }

private:
    std::vector<double> probs_;
    std::vector<double> cumulative_;
    double exponent_ = 1.0;
};

/// k draws from the table; draws equal to `target` are redrawn.
inline std::vector<WordId> sample_negatives(const NegativeTable &table, std::size_t k, WordId target, Rng &rng) {
    if (k < 1) throw Error("need at least one negative sample");
    if (table.size() == 1 && target == 0) throw Error("cannot sample negatives: vocabulary holds only the target");
    if (target < table.size() && table.probability(target) >= 1.0) {
        throw Error("cannot sample negatives: target carries all probability mass");
    }
    std::vector<WordId> out;
    out.reserve(k);
    while (out.size() < k) {
        const WordId id = table.sample(rng);
        if (id != target) out.push_back(id);
    }
    return out;
}

} // namespace word2rate
