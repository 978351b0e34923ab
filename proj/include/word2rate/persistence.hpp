/**
 * @file
 * @brief Binary checkpoints, text-format vector export and CSV/record output.
 * @copyright Apache License v.2 (http://www.apache.org/licenses/LICENSE-2.0)
 *
 * Checkpoint layout (all integers little-endian, floats IEEE-754 binary64):
 *
 *   magic          8 bytes  "W2RATE1\n"
 *   header_len     u32
 *   header         header_len bytes:
 *     version u32, mode u32, dim u64, epsilon f64, n u64, flags u32,
 *     learning_rate f64, batch u64, epochs u64, window u64, negatives u64,
 *     seed u64, neg_exponent f64, target_policy u32, window_policy u32,
 *     min_count u64, len_min u64, len_max u64, init_scale f64
 *   vocab_len      u64, followed by the vocabulary TSV (vocab_len bytes)
 *   parameters     every table in bank order (context components, then
 *                  targets), n * width f64 each
 *   adam           only if flags & 1: step u64, beta1 f64, beta2 f64,
 *                  epsilon f64, first moments then second moments, table
 *                  order as above
 *   checksum       u64 FNV-1a over every preceding byte
 *
 * flags: bit 0 = Adam state present, bit 1 = left/right split.
 */
#pragma once

#include <bit>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "trainer.hpp"

namespace word2rate {

inline constexpr char checkpoint_magic[8] = {'W', '2', 'R', 'A', 'T', 'E', '1', '\n'};
inline constexpr std::uint32_t checkpoint_version = 1;

class CheckpointError : public Error {
public:
    enum class Kind { io, not_a_checkpoint, checksum_mismatch, version_mismatch, shape_mismatch };

    CheckpointError(Kind kind, const std::string &what) : Error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct Checkpoint {
    TrainConfig config;
    Vocabulary vocab;
    ParameterBank bank;
    std::optional<AdamState> adam;
};

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace detail {

class ByteWriter {
public:
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    void bytes(std::string_view s) { buf_.append(s); }
    void doubles(const std::vector<double> &v) {
        for (double x : v) f64(x);
    }
    std::string &buffer() { return buf_; }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    std::string buf_;
};

class ByteReader {
public:
    ByteReader(std::string_view data, std::string path) : data_(data), path_(std::move(path)) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(get(8)); }
    std::string_view bytes(std::size_t n) {
        need(n);
        auto out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    void doubles(std::vector<double> &out) {
        need(out.size() * 8);
        for (auto &x : out) x = f64();
    }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) {
            throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                                  path_ + ": shape mismatch: payload shorter than its header declares");
        }
    }
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= std::uint64_t{static_cast<unsigned char>(data_[pos_ + i])} << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::string_view data_;
    std::size_t pos_ = 0;
    std::string path_;
};

inline std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointError::Kind::io, path + ": cannot open for reading");
    return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::string &path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointError::Kind::io, path + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(CheckpointError::Kind::io, path + ": write failed");
}

} // namespace detail

/// Serialized checkpoint bytes; see the layout at the top of this file.
inline std::string encode_checkpoint(const ParameterBank &bank, const AdamState *adam, const TrainConfig &config,
                                     const Vocabulary &vocab) {
    if (bank.vocab_size() != vocab.size()) throw Error("checkpoint: bank and vocabulary sizes differ");
    detail::ByteWriter header;
    header.u32(checkpoint_version);
    header.u32(static_cast<std::uint32_t>(bank.mode));
    header.u64(bank.dim);
    header.f64(config.epsilon);
    header.u64(vocab.size());
    header.u32((adam ? 1u : 0u) | (config.lr_split ? 2u : 0u));
    header.f64(config.learning_rate);
    header.u64(config.batch_size);
    header.u64(config.epochs);
    header.u64(config.window);
    header.u64(config.negatives);
    header.u64(config.seed);
    header.f64(config.neg_exponent);
    header.u32(static_cast<std::uint32_t>(config.target_policy));
    header.u32(static_cast<std::uint32_t>(config.window_policy));
    header.u64(config.min_count);
    header.u64(config.length_bounds.min);
    header.u64(config.length_bounds.max);
    header.f64(config.init_scale);

    detail::ByteWriter w;
    w.bytes(std::string_view(checkpoint_magic, 8));
    w.u32(static_cast<std::uint32_t>(header.buffer().size()));
    w.bytes(header.buffer());
    std::ostringstream tsv;
    vocab.write_tsv(tsv);
    w.u64(tsv.str().size());
    w.bytes(tsv.str());
    for (const auto *t : bank.tables()) w.doubles(t->values);
    if (adam) {
        w.u64(adam->step);
        w.f64(adam->beta1);
        w.f64(adam->beta2);
        w.f64(adam->epsilon);
        for (const auto &m : adam->first) w.doubles(m);
        for (const auto &v : adam->second) w.doubles(v);
    }
    w.u64(fnv1a64(w.buffer()));
    return std::move(w.buffer());
}

inline void save_checkpoint(const ParameterBank &bank, const AdamState *adam, const TrainConfig &config,
                            const Vocabulary &vocab, const std::string &path) {
    detail::write_file(path, encode_checkpoint(bank, adam, config, vocab));
}

/// Validates magic and checksum before decoding anything.
inline Checkpoint decode_checkpoint(std::string_view data, const std::string &path = "<memory>") {
    using Kind = CheckpointError::Kind;
    if (data.size() >= 8 && data.substr(0, 8) != std::string_view(checkpoint_magic, 8)) {
        throw CheckpointError(Kind::not_a_checkpoint, path + ": not a checkpoint (bad magic)");
    }
    if (data.size() < 16) throw CheckpointError(Kind::checksum_mismatch, path + ": checksum mismatch (truncated)");
    const auto body = data.substr(0, data.size() - 8);
    detail::ByteReader tail(data.substr(data.size() - 8), path);
    if (tail.u64() != fnv1a64(body)) throw CheckpointError(Kind::checksum_mismatch, path + ": checksum mismatch");

    detail::ByteReader r(body, path);
    r.bytes(8);
    const std::uint32_t header_len = r.u32();
    detail::ByteReader h(r.bytes(header_len), path);
    const std::uint32_t version = h.u32();
    if (version != checkpoint_version) {
        throw CheckpointError(Kind::version_mismatch, path + ": version mismatch (file " + std::to_string(version) +
                                                          ", expected " + std::to_string(checkpoint_version) + ")");
    }
    Checkpoint ck;
    auto &c = ck.config;
    const std::uint32_t mode = h.u32();
    if (mode > static_cast<std::uint32_t>(Mode::hybrid_fos_sos)) {
        throw CheckpointError(Kind::shape_mismatch, path + ": shape mismatch: unknown mode " + std::to_string(mode));
    }
    c.mode = static_cast<Mode>(mode);
    c.dim = h.u64();
    c.epsilon = h.f64();
    const std::uint64_t n = h.u64();
    const std::uint32_t flags = h.u32();
    c.lr_split = (flags & 2u) != 0;
    c.learning_rate = h.f64();
    c.batch_size = h.u64();
    c.epochs = h.u64();
    c.window = h.u64();
    c.negatives = h.u64();
    c.seed = h.u64();
    c.neg_exponent = h.f64();
    c.target_policy = static_cast<TargetPolicy>(h.u32());
    c.window_policy = static_cast<WindowPolicy>(h.u32());
    c.min_count = h.u64();
    c.length_bounds.min = h.u64();
    c.length_bounds.max = h.u64();
    c.init_scale = h.f64();

    const std::uint64_t vocab_len = r.u64();
    std::istringstream tsv{std::string(r.bytes(vocab_len))};
    ck.vocab = Vocabulary::read_tsv(tsv);
    if (ck.vocab.size() != n) {
        throw CheckpointError(Kind::shape_mismatch, path + ": shape mismatch: header declares " + std::to_string(n) +
                                                        " words, vocabulary holds " +
                                                        std::to_string(ck.vocab.size()));
    }
    try {
        if (c.mode == Mode::cmow) cmow_side(c.dim);
        ck.bank = ParameterBank(c.mode, c.dim, n);
    } catch (const Error &e) {
        throw CheckpointError(Kind::shape_mismatch, path + ": shape mismatch: " + e.what());
    }
    for (auto *t : ck.bank.tables()) r.doubles(t->values);
    if (flags & 1u) {
        AdamState a(ck.bank);
        a.step = r.u64();
        a.beta1 = r.f64();
        a.beta2 = r.f64();
        a.epsilon = r.f64();
        for (auto &m : a.first) r.doubles(m);
        for (auto &v : a.second) r.doubles(v);
        ck.adam = std::move(a);
    }
    if (r.remaining() != 0) {
        throw CheckpointError(Kind::shape_mismatch,
                              path + ": shape mismatch: " + std::to_string(r.remaining()) + " trailing bytes");
    }
    return ck;
}

inline Checkpoint load_checkpoint(const std::string &path) { return decode_checkpoint(detail::read_file(path), path); }

enum class ExportKind { word, target };

/// `<n> <d>` then `token v_1 ... v_d` per word in id order, 9 significant
/// digits.
inline void write_text_vectors(std::ostream &out, const ParameterBank &bank, const TrainConfig &config,
                               const Vocabulary &vocab, ExportKind which) {
    const std::size_t n = vocab.size();
    std::vector<Vector> rows;
    rows.reserve(n);
    for (WordId w = 0; w < n; ++w) {
        rows.push_back(which == ExportKind::word ? word_embedding(bank, config, w) : Vector(bank.target_vector(w)));
    }
    const std::size_t d = rows.empty() ? 0 : static_cast<std::size_t>(rows.front().size());
    out << n << ' ' << d << '\n';
    char buf[32];
    for (WordId w = 0; w < n; ++w) {
        out << vocab.token(w);
        for (Eigen::Index j = 0; j < rows[w].size(); ++j) {
            std::snprintf(buf, sizeof buf, " %.9g", rows[w](j));
            out << buf;
        }
        out << '\n';
    }
}

inline void export_text_vectors(const ParameterBank &bank, const TrainConfig &config, const Vocabulary &vocab,
                                const std::string &path, ExportKind which) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(path + ": cannot open for writing");
    write_text_vectors(out, bank, config, vocab, which);
    if (!out) throw Error(path + ": write failed");
}

struct TextVectors {
    std::vector<std::string> tokens;
    std::vector<Vector> vectors;
};

inline TextVectors read_text_vectors(std::istream &in) {
    std::size_t n = 0, d = 0;
    if (!(in >> n >> d)) throw Error("text vectors: missing '<n> <d>' header");
    TextVectors tv;
    for (std::size_t i = 0; i < n; ++i) {
        std::string tok;
        Vector v(static_cast<Eigen::Index>(d));
        if (!(in >> tok)) throw Error("text vectors: expected " + std::to_string(n) + " rows");
        for (std::size_t j = 0; j < d; ++j) {
            if (!(in >> v(static_cast<Eigen::Index>(j)))) throw Error("text vectors: short row for '" + tok + "'");
        }
        tv.tokens.push_back(std::move(tok));
        tv.vectors.push_back(std::move(v));
    }
    return tv;
}

inline TextVectors read_text_vectors(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw Error(path + ": cannot open for reading");
    return read_text_vectors(in);
}

/// `epsilon,length,seed,mean_abs` with 17 significant digits.
inline void write_stability_csv(std::ostream &out, std::span<const StabilityRecord> records) {
    out << "epsilon,length,seed,mean_abs\n";
    char buf[96];
    for (const auto &r : records) {
        std::snprintf(buf, sizeof buf, "%.17g,%zu,%llu,%.17g\n", r.epsilon, r.length,
                      static_cast<unsigned long long>(r.seed), r.mean_abs);
        out << buf;
    }
}

/// Single-line JSON record.
inline std::string format_probe_result(const ProbeResult &r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, R"({"probe":"%s","mode":"%s","accuracy":%.9g,"baseline":%.9g,"seeds":%zu})",
                  r.probe.c_str(), r.mode.c_str(), r.accuracy, r.baseline, r.seeds);
    return buf;
}

} // namespace word2rate
