/**
 * @file
 * @brief Training configuration, per-word parameter storage and the forward
 *        pass from a training example to its context embedding(s).
 * @copyright Apache License v.2 (http://www.apache.org/licenses/LICENSE-2.0)
 */
#pragma once

#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "common.hpp"
#include "corpus.hpp"
#include "rate_algebra.hpp"

namespace word2rate {

struct TrainConfig {
    Mode mode = Mode::fos;
    std::size_t dim = 25;
    double epsilon = 0.01;
    double learning_rate = 1e-3;
    std::size_t batch_size = 1000;
    std::size_t epochs = 10;
    std::size_t window = 4;
    std::size_t negatives = 5;
    bool lr_split = false;
    std::uint64_t seed = 1;
    double neg_exponent = 0.75;
    TargetPolicy target_policy = TargetPolicy::with_replacement;
    WindowPolicy window_policy = WindowPolicy::symmetric;
    std::size_t min_count = 100;
    LengthBounds length_bounds{10, 20};
    /// Init noise: rate off-diagonals |N(0, s/d)|, CMOW I + N(0, s/d).
    double init_scale = 0.1;
    /// Worker threads; never affects results.
    std::size_t threads = 1;

    /// Dimension and epsilon defaults for a mode; everything else as above.
    static TrainConfig for_mode(Mode m) {
        TrainConfig c;
        c.mode = m;
        c.dim = default_dim(m);
        c.epsilon = default_epsilon(m);
        return c;
    }

    void validate() const {
        auto need = [](bool ok, const char *what) {
            if (!ok) throw Error(std::string("invalid config: ") + what);
        };
        need(dim >= 1, "dim must be >= 1");
        need(!is_hybrid(mode) || dim >= 2, "hybrid dim must be >= 2");
        need(!uses_rate_matrices(mode) || epsilon > 0.0, "epsilon must be > 0 for rate modes");
        need(learning_rate > 0.0, "learning rate must be > 0");
        need(batch_size >= 1, "batch size must be >= 1");
        need(window >= 1, "window must be >= 1");
        need(negatives >= 1, "negatives must be >= 1");
        need(neg_exponent > 0.0, "negative exponent must be > 0");
        need(min_count >= 1, "min_count must be >= 1");
        need(length_bounds.min <= length_bounds.max, "length bounds min > max");
        need(init_scale >= 0.0, "init scale must be >= 0");
        need(threads >= 1, "threads must be >= 1");
        if (mode == Mode::cmow) cmow_side(dim);
    }
};

/// n rows of `width` doubles.
struct ParamTable {
    std::size_t rows = 0;
    std::size_t width = 0;
    std::vector<double> values;

    ParamTable() = default;
    ParamTable(std::size_t r, std::size_t w) : rows(r), width(w), values(r * w, 0.0) {}

    std::span<double> row(WordId id) { return {values.data() + std::size_t{id} * width, width}; }
    std::span<const double> row(WordId id) const { return {values.data() + std::size_t{id} * width, width}; }

    friend bool operator==(const ParamTable &a, const ParamTable &b) {
        return a.rows == b.rows && a.width == b.width && a.values.size() == b.values.size() &&
               (a.values.empty() ||
                std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) == 0);
    }
};

/// One composition's context-side parameters.
struct ContextComponent {
    Composition kind = Composition::fos;
    std::size_t dim = 0; // embedding dimension produced by this component
    ParamTable table;

    /// Rows of rate tables are d x d, CMOW rows are side x side; both
    /// column-major.
    std::size_t matrix_side() const { return kind == Composition::cmow ? cmow_side(dim) : dim; }

    MatrixView matrix(WordId id) const {
        const auto s = static_cast<Eigen::Index>(matrix_side());
        return MatrixView(table.row(id).data(), s, s);
    }

    Eigen::Map<Matrix> matrix(WordId id) {
        const auto s = static_cast<Eigen::Index>(matrix_side());
        return Eigen::Map<Matrix>(table.row(id).data(), s, s);
    }

    Eigen::Map<const Vector> vector(WordId id) const {
        return Eigen::Map<const Vector>(table.row(id).data(), static_cast<Eigen::Index>(dim));
    }

    friend bool operator==(const ContextComponent &, const ContextComponent &) = default;
};

inline std::size_t row_width(Composition kind, std::size_t dim) {
    switch (kind) {
    case Composition::cbow:
    case Composition::cmow: return dim;
    default: return dim * dim;
    }
}

/// Context-side parameters (one table per component) and target vectors.
struct ParameterBank {
    Mode mode = Mode::fos;
    std::size_t dim = 0;
    std::vector<ContextComponent> context;
    ParamTable target;

    ParameterBank() = default;

    /// Zero-filled bank shaped for `mode`.
    ParameterBank(Mode m, std::size_t total_dim, std::size_t vocab_size) : mode(m), dim(total_dim) {
        const auto kinds = components(m);
        const auto dims = component_dims(m, total_dim);
        for (std::size_t c = 0; c < kinds.size(); ++c) {
            context.push_back({kinds[c], dims[c], ParamTable(vocab_size, row_width(kinds[c], dims[c]))});
        }
        target = ParamTable(vocab_size, total_dim);
    }

    std::size_t vocab_size() const { return target.rows; }

    /// Context tables in component order, then the target table.
    std::vector<ParamTable *> tables() {
        std::vector<ParamTable *> out;
        for (auto &c : context) out.push_back(&c.table);
        out.push_back(&target);
        return out;
    }

    std::vector<const ParamTable *> tables() const {
        std::vector<const ParamTable *> out;
        for (const auto &c : context) out.push_back(&c.table);
        out.push_back(&target);
        return out;
    }

    Eigen::Map<const Vector> target_vector(WordId id) const {
        return Eigen::Map<const Vector>(target.row(id).data(), static_cast<Eigen::Index>(dim));
    }

    void set_zero() {
        for (auto *t : tables()) std::fill(t->values.begin(), t->values.end(), 0.0);
    }

    friend bool operator==(const ParameterBank &, const ParameterBank &) = default;
};

/// Off-diagonals |N(0, scale/d)|, diagonal from projection.
inline Matrix draw_rate_matrix(std::size_t d, double scale, Rng &rng) {
    std::normal_distribution<double> draw(0.0, 1.0);
    const double sd = scale / static_cast<double>(d);
    const auto n = static_cast<Eigen::Index>(d);
    Matrix q = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (i != j) q(i, j) = std::abs(sd * draw(rng));
        }
    }
    return project_rate_matrix(q);
}

/// Rate tables start as projected |N(0, s/d)| off-diagonals; CBOW and target
/// vectors as N(0, 0.01); CMOW as identity plus N(0, s/d).
inline ParameterBank init_parameters(const TrainConfig &config, std::size_t vocab_size, Rng &rng) {
    config.validate();
    ParameterBank bank(config.mode, config.dim, vocab_size);
    for (auto &comp : bank.context) {
        const double noise = config.init_scale / static_cast<double>(comp.dim);
        std::normal_distribution<double> draw(0.0, 1.0);
        for (WordId w = 0; w < vocab_size; ++w) {
            switch (comp.kind) {
            case Composition::cbow:
                for (auto &x : comp.table.row(w)) x = 0.01 * draw(rng);
                break;
            case Composition::cmow: {
                auto m = comp.matrix(w);
                for (Eigen::Index j = 0; j < m.cols(); ++j) {
                    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = (i == j ? 1.0 : 0.0) + noise * draw(rng);
                }
                break;
            }
            default: comp.matrix(w) = draw_rate_matrix(comp.dim, config.init_scale, rng);
            }
        }
    }
    std::normal_distribution<double> draw(0.0, 0.01);
    for (auto &x : bank.target.values) x = draw(rng);
    return bank;
}

/// Projects every rate-mode context matrix; other tables are left alone.
inline void apply_constraints(ParameterBank &bank) {
    for (auto &comp : bank.context) {
        if (!is_rate(comp.kind)) continue;
        for (WordId w = 0; w < comp.table.rows; ++w) project_rate_matrix_inplace(comp.table.row(w).data(), comp.dim);
    }
}

inline bool satisfies_constraints(const ParameterBank &bank, double tol = 1e-12) {
    for (const auto &comp : bank.context) {
        if (!is_rate(comp.kind)) continue;
        for (WordId w = 0; w < comp.table.rows; ++w) {
            if (!is_valid_rate_matrix(comp.matrix(w), tol)) return false;
        }
    }
    return true;
}

inline void check_ids(const ParameterBank &bank, std::span<const WordId> ids) {
    for (auto id : ids) {
        if (id >= bank.vocab_size()) throw Error("unknown word id " + std::to_string(id));
    }
}

/// Composes one component over an ordered id sequence.
inline Vector compose_component(const ContextComponent &comp, std::span<const WordId> ids, double epsilon) {
    if (comp.kind == Composition::cbow) {
        std::vector<Eigen::Map<const Vector>> vs;
        for (auto id : ids) vs.push_back(comp.vector(id));
        return compose_cbow(vs, comp.dim);
    }
    std::vector<MatrixView> ms;
    ms.reserve(ids.size());
    for (auto id : ids) ms.push_back(comp.matrix(id));
    switch (comp.kind) {
    case Composition::cmow: return compose_cmow(ms, comp.matrix_side());
    case Composition::fos: return compose_fos(ms, epsilon, uniform_distribution(comp.dim));
    case Composition::fop: return compose_fop(ms, epsilon, uniform_distribution(comp.dim));
    case Composition::sos: return compose_sos(ms, epsilon, uniform_distribution(comp.dim));
    default: throw Error("unreachable composition");
    }
}

/// Concatenation of every component's composition (one component unless
/// hybrid).
inline Vector compose_context(const ParameterBank &bank, std::span<const WordId> ids, double epsilon) {
    check_ids(bank, ids);
    Vector out = compose_component(bank.context.front(), ids, epsilon);
    for (std::size_t c = 1; c < bank.context.size(); ++c) {
        out = compose_hybrid(out, compose_component(bank.context[c], ids, epsilon));
    }
    return out;
}

inline std::vector<WordId> joined_context(const TrainingExample &ex) {
    std::vector<WordId> ids(ex.left);
    ids.insert(ids.end(), ex.right.begin(), ex.right.end());
    return ids;
}

struct ContextEmbeddings {
    std::optional<Vector> joint; // split off
    std::optional<Vector> left;  // split on, left side nonempty
    std::optional<Vector> right; // split on, right side nonempty
};

/// Without the split: one embedding of left||right. With it: each nonempty
/// side composed separately, both in sentence order.
inline ContextEmbeddings forward(const TrainingExample &ex, const ParameterBank &bank, const TrainConfig &config) {
    check_ids(bank, std::span<const WordId>(&ex.target, 1));
    ContextEmbeddings out;
    if (!config.lr_split) {
        out.joint = compose_context(bank, joined_context(ex), config.epsilon);
        return out;
    }
    if (!ex.left.empty()) out.left = compose_context(bank, ex.left, config.epsilon);
    if (!ex.right.empty()) out.right = compose_context(bank, ex.right, config.epsilon);
    return out;
}

} // namespace word2rate
