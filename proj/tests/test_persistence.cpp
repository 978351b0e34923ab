#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace word2rate;

namespace {

TrainResult small_model(Mode m, std::uint64_t seed) {
    auto c = w2r_test::toy_config(m, is_hybrid(m) ? 8 : (m == Mode::cmow ? 9 : 5), 1, seed);
    c.batch_size = 250;
    return train(w2r_test::toy_corpus(300, seed), c);
}

TrainConfig config_for(const TrainResult &r, std::uint64_t seed) {
    auto c = w2r_test::toy_config(r.bank.mode, r.bank.dim, 1, seed);
    c.batch_size = 250;
    return c;
}

CheckpointError::Kind decode_error(std::string_view bytes) {
    try {
        decode_checkpoint(bytes);
    } catch (const CheckpointError &e) {
        return e.kind();
    }
    ADD_FAILURE() << "decode succeeded";
    return CheckpointError::Kind::io;
}

/// Rewrites the trailing checksum after a deliberate edit.
void reseal(std::string &bytes) {
    bytes.resize(bytes.size() - 8);
    const std::uint64_t h = fnv1a64(bytes);
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((h >> (8 * i)) & 0xff));
}

} // namespace

TEST(Checkpoint, RoundTripIsBitwiseForEveryMode) {
    for (Mode m : all_modes) {
        const auto r = small_model(m, 3);
        const auto c = config_for(r, 3);
        const auto path = w2r_test::temp_path(std::string("rt_") + std::string(to_string(m)) + ".w2r").string();
        save_checkpoint(r.bank, &r.adam, c, r.vocab, path);
        const auto ck = load_checkpoint(path);
        EXPECT_EQ(ck.bank, r.bank) << to_string(m);
        EXPECT_EQ(ck.vocab, r.vocab);
        ASSERT_TRUE(ck.adam);
        EXPECT_EQ(*ck.adam, r.adam);
        EXPECT_EQ(ck.config.mode, m);
        EXPECT_EQ(ck.config.epsilon, c.epsilon);
        EXPECT_EQ(ck.config.seed, c.seed);
        EXPECT_EQ(encode_checkpoint(ck.bank, &*ck.adam, ck.config, ck.vocab), encode_checkpoint(r.bank, &r.adam, c, r.vocab));
    }
}

TEST(Checkpoint, WithoutOptimizerState) {
    const auto r = small_model(Mode::fos, 1);
    const auto bytes = encode_checkpoint(r.bank, nullptr, config_for(r, 1), r.vocab);
    const auto ck = decode_checkpoint(bytes);
    EXPECT_FALSE(ck.adam);
    EXPECT_EQ(ck.bank, r.bank);
}

TEST(Checkpoint, CorruptionIsDetected) {
    const auto r = small_model(Mode::fop, 2);
    const auto bytes = encode_checkpoint(r.bank, &r.adam, config_for(r, 2), r.vocab);

    EXPECT_EQ(decode_error(std::string_view(bytes).substr(0, bytes.size() / 2)), CheckpointError::Kind::checksum_mismatch);
    EXPECT_EQ(decode_error(std::string_view(bytes).substr(0, 10)), CheckpointError::Kind::checksum_mismatch);

    std::string flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x01;
    EXPECT_EQ(decode_error(flipped), CheckpointError::Kind::checksum_mismatch);

    std::string magic = bytes;
    magic[0] = 'X';
    EXPECT_EQ(decode_error(magic), CheckpointError::Kind::not_a_checkpoint);
    EXPECT_EQ(decode_error("hello world, not a checkpoint at all"), CheckpointError::Kind::not_a_checkpoint);

    std::string version = bytes;
    version[12] = 9; // first header field
    reseal(version);
    EXPECT_EQ(decode_error(version), CheckpointError::Kind::version_mismatch);

    try {
        decode_checkpoint(flipped);
    } catch (const CheckpointError &e) {
        EXPECT_NE(std::string(e.what()).find("checksum mismatch"), std::string::npos);
    }
    try {
        decode_checkpoint(magic);
    } catch (const CheckpointError &e) {
        EXPECT_NE(std::string(e.what()).find("not a checkpoint"), std::string::npos);
    }
    EXPECT_THROW(load_checkpoint(w2r_test::temp_path("missing.w2r").string() + ".nope"), CheckpointError);
}

TEST(TextExport, HeaderAndLineCount) {
    auto c = TrainConfig::for_mode(Mode::cbow);
    c.dim = 2;
    const auto v = Vocabulary::from_entries({{"a", 3}, {"b", 1}});
    ParameterBank bank(Mode::cbow, 2, 2);
    bank.context[0].table.values = {0.5, -1.25, 1.0 / 3.0, 2.0};
    std::ostringstream out;
    write_text_vectors(out, bank, c, v, ExportKind::word);
    EXPECT_EQ(out.str(), "2 2\na 0.5 -1.25\nb 0.333333333 2\n");
}

TEST(TextExport, RateRowsSumToOneAndTargetsExported) {
    const auto r = small_model(Mode::sos, 4);
    const auto c = config_for(r, 4);
    std::stringstream ss;
    write_text_vectors(ss, r.bank, c, r.vocab, ExportKind::word);
    const auto tv = read_text_vectors(ss);
    ASSERT_EQ(tv.tokens.size(), r.vocab.size());
    for (std::size_t i = 0; i < tv.tokens.size(); ++i) {
        EXPECT_EQ(tv.tokens[i], r.vocab.token(static_cast<WordId>(i)));
        EXPECT_NEAR(tv.vectors[i].sum(), 1.0, 1e-6);
    }
    std::stringstream ts;
    write_text_vectors(ts, r.bank, c, r.vocab, ExportKind::target);
    const auto tt = read_text_vectors(ts);
    EXPECT_NEAR(tt.vectors[1](0), r.bank.target_vector(1)(0), 1e-9 * std::abs(r.bank.target_vector(1)(0)) + 1e-300);
}

void expect_rankings_survive(const TrainResult &r, const TrainConfig &c, ExportKind which) {
    std::stringstream ss;
    write_text_vectors(ss, r.bank, c, r.vocab, which);
    const auto tv = read_text_vectors(ss);
    std::vector<Vector> original;
    for (WordId w = 0; w < r.vocab.size(); ++w) {
        original.push_back(which == ExportKind::word ? word_embedding(r.bank, c, w) : Vector(r.bank.target_vector(w)));
    }
    const std::size_t k = original.size() - 1;
    for (WordId w = 0; w < original.size(); ++w) {
        const auto a = nearest_neighbors(original, w, k);
        const auto b = nearest_neighbors(tv.vectors, w, k);
        for (std::size_t i = 0; i < k; ++i) ASSERT_EQ(a[i].first, b[i].first) << to_string(r.bank.mode) << " word " << w << " rank " << i;
    }
}

TEST(TextExport, ReimportPreservesNeighborRankings) {
    for (Mode m : {Mode::cbow, Mode::cmow}) {
        const auto r = small_model(m, 5);
        expect_rankings_survive(r, config_for(r, 5), ExportKind::word);
    }
    for (Mode m : all_modes) {
        const auto r = small_model(m, 5);
        expect_rankings_survive(r, config_for(r, 5), ExportKind::target);
    }
}

TEST(TextExport, FileRoundTrip) {
    const auto r = small_model(Mode::fop, 6);
    const auto c = config_for(r, 6);
    const auto path = w2r_test::temp_path("vec_fop.txt").string();
    export_text_vectors(r.bank, c, r.vocab, path, ExportKind::word);
    std::ostringstream direct;
    write_text_vectors(direct, r.bank, c, r.vocab, ExportKind::word);
    std::ifstream in(path);
    std::stringstream file;
    file << in.rdbuf();
    EXPECT_EQ(file.str(), direct.str());
    EXPECT_EQ(read_text_vectors(path).tokens.size(), r.vocab.size());
}

TEST(TextExport, MalformedInput) {
    std::istringstream none("");
    EXPECT_THROW(read_text_vectors(none), Error);
    std::istringstream short_row("2 3\na 1 2 3\nb 1\n");
    EXPECT_THROW(read_text_vectors(short_row), Error);
}

TEST(StabilityCsv, Format) {
    const std::vector<StabilityRecord> recs = {{0.01, 1, 7, 0.04}, {0.001, 20, 9, 1.0 / 3.0}};
    std::ostringstream out;
    write_stability_csv(out, recs);
    EXPECT_EQ(out.str(), "epsilon,length,seed,mean_abs\n0.01,1,7,0.040000000000000001\n"
                         "0.001,20,9,0.33333333333333331\n");
}

TEST(ProbeResult, JsonLine) {
    ProbeResult r{"order", "fop", 0.625, 0.5, 3};
    EXPECT_EQ(format_probe_result(r), R"({"probe":"order","mode":"fop","accuracy":0.625,"baseline":0.5,"seeds":3})");
}
