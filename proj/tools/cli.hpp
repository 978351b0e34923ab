/**
 * @file
 * @brief Command-line front end: subcommand parsing and dispatch.
 * @copyright Apache License v.2 (http://www.apache.org/licenses/LICENSE-2.0)
 */
#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <word2rate/word2rate.hpp>

namespace word2rate::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_runtime = 2;

namespace detail {

inline std::ifstream open_in(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw Error(path + ": cannot open for reading");
    return in;
}

inline std::ofstream open_out(const std::string &path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(path + ": cannot open for writing");
    return out;
}

inline std::vector<std::string> mode_names() {
    std::vector<std::string> out;
    for (Mode m : all_modes) out.emplace_back(to_string(m));
    return out;
}

/// {"categories": {name: [words]}, "templates": [[names]], "sentences": n, "seed": s}
inline GrammarSpec read_grammar(const std::string &path) {
    auto in = open_in(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw Error(path + ": invalid JSON: " + e.what());
    }
    GrammarSpec g;
    try {
        for (const auto &[name, words] : j.at("categories").items()) {
            g.categories.emplace_back(name, words.get<std::vector<std::string>>());
        }
        g.templates = j.at("templates").get<std::vector<std::vector<std::string>>>();
        g.sentences = j.value("sentences", g.sentences);
        g.seed = j.value("seed", g.seed);
    } catch (const nlohmann::json::exception &e) {
        throw Error(path + ": bad grammar spec: " + e.what());
    }
    return g;
}

inline std::vector<EncodedSentence> encode_corpus(const Vocabulary &vocab, std::istream &in, LengthBounds bounds) {
    std::vector<EncodedSentence> out;
    for (const auto &s : read_corpus(in)) {
        if (auto e = encode_sentence(vocab, s, bounds)) out.push_back(std::move(*e));
    }
    return out;
}

} // namespace detail

/// Parses argv and runs one subcommand. Returns the process exit code.
inline int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"Rate-matrix word and sentence embeddings", "word2rate"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    const auto modes = detail::mode_names();
    std::function<void()> action;

    // build-vocab
    struct {
        std::string corpus, out;
        std::size_t min_count = 100, min_len = 10, max_len = 20;
    } bv;
    auto *build_vocab = app.add_subcommand("build-vocab", "Count a corpus and write the vocabulary as TSV");
    build_vocab->add_option("--corpus", bv.corpus, "Corpus, one sentence per line")->required();
    build_vocab->add_option("--out", bv.out, "Vocabulary TSV to write")->required();
    build_vocab->add_option("--min-count", bv.min_count, "Minimum word count")->check(CLI::PositiveNumber);
    build_vocab->add_option("--min-len", bv.min_len, "Shortest sentence counted");
    build_vocab->add_option("--max-len", bv.max_len, "Longest sentence counted");
    build_vocab->callback([&] {
        action = [&] {
            auto in = detail::open_in(bv.corpus);
            const auto v = Vocabulary::build(read_corpus(in), bv.min_count, {bv.min_len, bv.max_len});
            auto o = detail::open_out(bv.out);
            v.write_tsv(o);
            out << "words=" << v.size() << " tokens=" << v.total_count() << '\n';
        };
    });

    // train
    TrainConfig tc;
    struct {
        std::string corpus, out, mode = "fos", target_policy = "with-replacement", window_policy = "symmetric";
        std::optional<std::size_t> dim;
        std::optional<double> epsilon;
        std::size_t min_len = 10, max_len = 20;
    } tr;
    auto *train_cmd = app.add_subcommand("train", "Train embeddings and write a checkpoint");
    train_cmd->add_option("--corpus", tr.corpus, "Corpus, one sentence per line")->required();
    train_cmd->add_option("--out", tr.out, "Checkpoint to write")->required();
    train_cmd->add_option("--mode", tr.mode, "Composition")->check(CLI::IsMember(modes));
    train_cmd->add_option("--dim", tr.dim, "Embedding dimension (default 25, hybrids 50)");
    train_cmd->add_option("--epsilon", tr.epsilon, "Rate step (default fos 0.01, fop/sos 0.001, hybrids 0.0001)");
    train_cmd->add_option("--window", tc.window, "Context words per side");
    train_cmd->add_option("--negatives", tc.negatives, "Negative samples per example");
    train_cmd->add_option("--lr", tc.learning_rate, "Adam learning rate");
    train_cmd->add_option("--batch", tc.batch_size, "Examples per step");
    train_cmd->add_option("--epochs", tc.epochs, "Passes over the corpus");
    train_cmd->add_flag("--lr-split", tc.lr_split, "Separate left and right context losses");
    train_cmd->add_option("--seed", tc.seed, "Random seed");
    train_cmd->add_option("--neg-exponent", tc.neg_exponent, "Unigram exponent for negatives");
    train_cmd->add_option("--min-count", tc.min_count, "Minimum word count");
    train_cmd->add_option("--min-len", tr.min_len, "Shortest sentence used");
    train_cmd->add_option("--max-len", tr.max_len, "Longest sentence used");
    train_cmd->add_option("--target-policy", tr.target_policy, "How targets are drawn from a sentence")
        ->check(CLI::IsMember({"with-replacement", "without-replacement"}));
    train_cmd->add_option("--window-policy", tr.window_policy, "Context split around the target")
        ->check(CLI::IsMember({"symmetric", "asymmetric"}));
    train_cmd->add_option("--init-scale", tc.init_scale, "Initial noise scale");
    train_cmd->add_option("--threads", tc.threads, "Worker threads (results do not depend on it)");
    train_cmd->callback([&] {
        action = [&] {
            const Mode m = parse_mode(tr.mode);
            TrainConfig c = tc;
            c.mode = m;
            c.dim = tr.dim.value_or(default_dim(m));
            c.epsilon = tr.epsilon.value_or(default_epsilon(m));
            c.length_bounds = {tr.min_len, tr.max_len};
            c.target_policy =
                tr.target_policy == "without-replacement" ? TargetPolicy::without_replacement : TargetPolicy::with_replacement;
            c.window_policy = tr.window_policy == "asymmetric" ? WindowPolicy::asymmetric : WindowPolicy::symmetric;
            c.validate();
            auto in = detail::open_in(tr.corpus);
            const auto result = train(in, c, &out);
            save_checkpoint(result.bank, &result.adam, c, result.vocab, tr.out);
            out << "saved " << tr.out << '\n';
        };
    });

    // export
    struct {
        std::string checkpoint, out, which = "word";
    } ex;
    auto *export_cmd = app.add_subcommand("export", "Write embeddings in the text vector format");
    export_cmd->add_option("--checkpoint", ex.checkpoint, "Checkpoint to read")->required();
    export_cmd->add_option("--out", ex.out, "Text file to write")->required();
    export_cmd->add_option("--which", ex.which, "Word (context) or target embeddings")
        ->check(CLI::IsMember({"word", "target"}));
    export_cmd->callback([&] {
        action = [&] {
            const auto ck = load_checkpoint(ex.checkpoint);
            export_text_vectors(ck.bank, ck.config, ck.vocab, ex.out,
                                ex.which == "target" ? ExportKind::target : ExportKind::word);
        };
    });

    // neighbors
    struct {
        std::string checkpoint, word;
        std::size_t top_k = 10;
    } nb;
    auto *neighbors = app.add_subcommand("neighbors", "Nearest words by cosine similarity");
    neighbors->add_option("--checkpoint", nb.checkpoint, "Checkpoint to read")->required();
    neighbors->add_option("--word", nb.word, "Query word")->required();
    neighbors->add_option("--top-k", nb.top_k, "Number of neighbors")->check(CLI::PositiveNumber);
    neighbors->callback([&] {
        action = [&] {
            const auto ck = load_checkpoint(nb.checkpoint);
            const auto id = ck.vocab.id(nb.word);
            if (!id) throw Error("unknown word '" + nb.word + "'");
            char buf[64];
            for (const auto &[w, cos] : nearest_neighbors(ck.bank, ck.config, *id, nb.top_k)) {
                std::snprintf(buf, sizeof buf, "\t%.9g\n", cos);
                out << ck.vocab.token(w) << buf;
            }
        };
    });

    // stability
    struct {
        std::size_t dim = 25, max_len = 20, seeds = 10;
        std::vector<double> epsilons = {0.01, 0.001, 0.0001};
        std::uint64_t seed = 1;
        double init_scale = 0.1;
        std::string out;
    } st;
    auto *stability = app.add_subcommand("stability", "CSV of mean |entry| of I+eps*Q products by length");
    stability->add_option("--dim", st.dim, "Matrix size")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 16));
    stability->add_option("--epsilons", st.epsilons, "Comma-separated epsilons")->delimiter(',');
    stability->add_option("--max-len", st.max_len, "Longest product")->check(CLI::PositiveNumber);
    stability->add_option("--seeds", st.seeds, "Number of seeds")->check(CLI::PositiveNumber);
    stability->add_option("--seed", st.seed, "First seed; seeds are seed, seed+1, ...");
    stability->add_option("--init-scale", st.init_scale, "Off-diagonal scale");
    stability->add_option("--out", st.out, "CSV file (default: standard output)");
    stability->callback([&] {
        action = [&] {
            std::vector<std::uint64_t> seeds;
            for (std::size_t i = 0; i < st.seeds; ++i) seeds.push_back(st.seed + i);
            const auto recs = stability_curve(st.dim, st.epsilons, st.max_len, seeds, st.init_scale);
            if (st.out.empty()) {
                write_stability_csv(out, recs);
            } else {
                auto o = detail::open_out(st.out);
                write_stability_csv(o, recs);
            }
        };
    });

    // probe
    struct {
        std::string checkpoint, corpus, probe = "order";
        std::size_t seeds = 3;
        std::uint64_t seed = 1;
    } pb;
    auto *probe = app.add_subcommand("probe", "Word-order or length probe on sentence embeddings");
    probe->add_option("--checkpoint", pb.checkpoint, "Checkpoint to read")->required();
    probe->add_option("--corpus", pb.corpus, "Probe sentences, one per line")->required();
    probe->add_option("--probe", pb.probe, "Probe task")->check(CLI::IsMember({"order", "length"}));
    probe->add_option("--seeds", pb.seeds, "Repetitions averaged")->check(CLI::PositiveNumber);
    probe->add_option("--seed", pb.seed, "Random seed");
    probe->callback([&] {
        action = [&] {
            const auto ck = load_checkpoint(pb.checkpoint);
            auto in = detail::open_in(pb.corpus);
            const auto sentences = detail::encode_corpus(ck.vocab, in, ck.config.length_bounds);
            ProbeResult total;
            for (std::size_t i = 0; i < pb.seeds; ++i) {
                Rng rng(derive_seed(pb.seed, stream::probe, i));
                const auto r = pb.probe == "order" ? order_probe(ck.bank, ck.config, sentences, rng)
                                                   : length_probe(ck.bank, ck.config, sentences, rng);
                total.probe = r.probe;
                total.mode = r.mode;
                total.accuracy += r.accuracy / static_cast<double>(pb.seeds);
                total.baseline += r.baseline / static_cast<double>(pb.seeds);
            }
            total.seeds = pb.seeds;
            out << format_probe_result(total) << '\n';
        };
    });

    // synth
    struct {
        std::string spec, out;
        std::optional<std::size_t> sentences;
        std::optional<std::uint64_t> seed;
    } sy;
    auto *synth = app.add_subcommand("synth", "Generate a synthetic-grammar corpus");
    synth->add_option("--spec", sy.spec, "Grammar JSON (default: built-in 5x20 grammar)");
    synth->add_option("--sentences", sy.sentences, "Sentence count (default 10000 or from the spec)");
    synth->add_option("--seed", sy.seed, "Random seed (default 1 or from the spec)");
    synth->add_option("--out", sy.out, "Corpus file to write")->required();
    synth->callback([&] {
        action = [&] {
            GrammarSpec g = sy.spec.empty() ? GrammarSpec::default_spec() : detail::read_grammar(sy.spec);
            if (sy.sentences) g.sentences = *sy.sentences;
            if (sy.seed) g.seed = *sy.seed;
            auto o = detail::open_out(sy.out);
            for (const auto &line : generate_synthetic_corpus(g)) o << line << '\n';
        };
    });

    // gradcheck
    struct {
        std::string mode = "all", objective = "both";
        std::size_t dim = 5, window = 2, negatives = 3, instances = 20;
        double epsilon = 0.1;
        std::uint64_t seed = 1;
    } gc;
    auto all_and_modes = modes;
    all_and_modes.push_back("all");
    auto *gradcheck = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
    gradcheck->add_option("--mode", gc.mode, "Composition, or all")->check(CLI::IsMember(all_and_modes));
    gradcheck->add_option("--dim", gc.dim, "Per-component size; CMOW uses dim x dim matrices")->check(CLI::PositiveNumber);
    gradcheck->add_option("--window", gc.window, "Context words per side")->check(CLI::PositiveNumber);
    gradcheck->add_option("--negatives", gc.negatives, "Negative samples")->check(CLI::PositiveNumber);
    gradcheck->add_option("--instances", gc.instances, "Random instances per check")->check(CLI::PositiveNumber);
    gradcheck->add_option("--epsilon", gc.epsilon, "Rate step");
    gradcheck->add_option("--objective", gc.objective, "Joint, left-right split, or both")
        ->check(CLI::IsMember({"plain", "split", "both"}));
    gradcheck->add_option("--seed", gc.seed, "Random seed");
    gradcheck->callback([&] {
        action = [&] {
            std::vector<Mode> ms;
            if (gc.mode == "all") {
                ms.assign(std::begin(all_modes), std::end(all_modes));
            } else {
                ms.push_back(parse_mode(gc.mode));
            }
            std::vector<bool> splits;
            if (gc.objective != "split") splits.push_back(false);
            if (gc.objective != "plain") splits.push_back(true);
            GradCheckOptions opt;
            opt.instances = gc.instances;
            opt.seed = gc.seed;
            bool ok = true;
            char buf[256];
            for (Mode m : ms) {
                for (bool split : splits) {
                    TrainConfig c = TrainConfig::for_mode(m);
                    c.dim = m == Mode::cmow ? gc.dim * gc.dim : (is_hybrid(m) ? 2 * gc.dim : gc.dim);
                    c.window = gc.window;
                    c.negatives = gc.negatives;
                    c.epsilon = gc.epsilon;
                    c.lr_split = split;
                    const auto r = gradient_check(c, opt);
                    std::snprintf(buf, sizeof buf, "%s %-15s %-5s coordinates=%zu max_rel=%.3g failures=%zu\n",
                                  r.passed() ? "PASS" : "FAIL", std::string(to_string(m)).c_str(),
                                  split ? "split" : "plain", r.coordinates, r.max_relative_error, r.failures);
                    out << buf;
                    if (!r.passed()) out << "  worst: " << r.worst << '\n';
                    ok = ok && r.passed();
                }
            }
            if (!ok) throw Error("gradient check failed");
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &) {
        out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return exit_ok;
    } catch (const CLI::CallForAllHelp &) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << '\n';
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return exit_usage;
    }
    try {
        action();
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return exit_runtime;
    }
    return exit_ok;
}

} // namespace word2rate::cli
