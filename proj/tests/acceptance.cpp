// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "test_support.hpp"

using namespace word2rate;
using w2r_test::random_rate_matrices;

namespace {

struct Verdict {
    bool pass = true;
    std::vector<std::string> notes;

    void check(bool ok, const std::string &note) {
        pass = pass && ok;
        notes.push_back((ok ? "ok: " : "FAILED: ") + note);
    }
    void info(const std::string &note) { notes.push_back(note); }
};

std::string fmt(const char *f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// 1. entry sums of FOS/FOP/SOS stay at 1
Verdict conservation() {
    Verdict v;
    Rng rng(1001);
    double worst = 0.0;
    std::size_t matrices = 0, cases = 0;
    for (std::size_t d : {2u, 5u, 25u}) {
        const Vector p = uniform_distribution(d);
        for (std::size_t len = 1; len <= 8; ++len) {
            for (double eps : {0.01, 0.001}) {
                std::size_t drawn = 0;
                while (drawn < 1000) {
                    const auto qs = random_rate_matrices(len, d, rng);
                    drawn += len;
                    for (const Vector &e : {compose_fos(qs, eps, p), compose_fop(qs, eps, p), compose_sos(qs, eps, p)}) {
                        worst = std::max(worst, std::abs(e.sum() - 1.0));
                    }
                }
                matrices += drawn;
                ++cases;
            }
        }
    }
    v.check(worst <= 1e-12, fmt("max |sum - 1| = %.3g over %zu cases, %zu matrices", worst, cases, matrices));
    return v;
}

// 2. FOP brute force, SOS explicit two-word form, FOP-SOS gap order
Verdict oracle_equivalence() {
    Verdict v;
    Rng rng(2002);
    double fop_err = 0.0;
    for (std::size_t len = 1; len <= 8; ++len) {
        for (int c = 0; c < 100; ++c) {
            const std::size_t d = 2 + static_cast<std::size_t>(c % 4);
            const auto qs = random_rate_matrices(len, d, rng);
            const double eps = c % 2 ? 0.01 : 0.1;
            const Vector p = uniform_distribution(d);
            fop_err = std::max(fop_err, (compose_fop(qs, eps, p) - expand_fop_bruteforce(qs, eps, p)).cwiseAbs().maxCoeff());
        }
    }
    v.check(fop_err <= 1e-12, fmt("FOP vs subset expansion, lengths 1-8 x 100: max err %.3g", fop_err));

    double sos_err = 0.0;
    for (int c = 0; c < 100; ++c) {
        const auto qs = random_rate_matrices(2, 5, rng);
        const double eps = 0.05;
        const Vector p = uniform_distribution(5);
        const Matrix &a = qs[0], &b = qs[1];
        const Vector six = p + eps * a * p + eps * b * p + eps * eps * b * (a * p) + 0.5 * eps * eps * a * (a * p) +
                           0.5 * eps * eps * b * (b * p);
        sos_err = std::max(sos_err, (compose_sos(qs, eps, p) - six).cwiseAbs().maxCoeff());
    }
    v.check(sos_err <= 1e-12, fmt("SOS vs six-term two-word form, 100 cases: max err %.3g", sos_err));

    std::vector<double> ratios;
    for (int c = 0; c < 20; ++c) {
        const auto qs = random_rate_matrices(2 + static_cast<std::size_t>(c % 7), 5, rng);
        const Vector p = uniform_distribution(5);
        std::vector<double> gaps;
        for (double eps : {1e-1, 1e-2, 1e-3}) gaps.push_back((compose_fop(qs, eps, p) - compose_sos(qs, eps, p)).norm());
        ratios.push_back(gaps[0] / gaps[1]);
        ratios.push_back(gaps[1] / gaps[2]);
    }
    const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
    const bool in_band = *lo >= 500.0 && *hi <= 2000.0;
    v.check(in_band, fmt("|FOP - SOS| shrink per x10 in eps: %.1f..%.1f (required 500..2000)", *lo, *hi));
    if (!in_band) {
        double resid = 0.0;
        for (int c = 0; c < 20; ++c) {
            const auto qs = random_rate_matrices(4, 5, rng);
            const Vector p = uniform_distribution(5);
            const double eps = 1e-3;
            Vector self = Vector::Zero(5);
            for (const auto &q : qs) self += q * (q * p);
            const Vector gap = compose_fop(qs, eps, p) - compose_sos(qs, eps, p);
            resid = std::max(resid, (gap + 0.5 * eps * eps * self).norm() / gap.norm());
        }
        v.info(fmt("gap = -(eps^2/2) sum Q_i^2 p + O(eps^3): relative residual %.2g at eps=1e-3, so the gap is second order",
                   resid));
    }
    return v;
}

// 3. analytic vs central-difference gradients
Verdict gradients() {
    Verdict v;
    for (Mode m : all_modes) {
        for (bool split : {false, true}) {
            TrainConfig c = TrainConfig::for_mode(m);
            c.dim = m == Mode::cmow ? 25 : (is_hybrid(m) ? 10 : 5);
            c.window = 2;
            c.negatives = 3;
            c.epsilon = 0.1;
            c.lr_split = split;
            GradCheckOptions opt;
            opt.instances = 20;
            const auto r = gradient_check(c, opt);
            v.check(r.passed(), fmt("%-14s %-5s coords=%zu max_rel=%.2g", std::string(to_string(m)).c_str(),
                                    split ? "split" : "plain", r.coordinates, r.max_relative_error));
        }
    }
    return v;
}

TrainConfig toy_defaults(Mode m, std::size_t epochs, std::uint64_t seed) {
    TrainConfig c = TrainConfig::for_mode(m);
    c.epochs = epochs;
    c.seed = seed;
    return c;
}

// 4. constraints after toy training
Verdict constraints() {
    Verdict v;
    const auto corpus = w2r_test::toy_corpus(1000, 4);
    for (Mode m : {Mode::fos, Mode::fop, Mode::sos, Mode::hybrid_fos_fop, Mode::hybrid_fos_sos}) {
        const auto r = train(corpus, toy_defaults(m, 3, 4));
        std::size_t total = 0, bad = 0;
        double worst_col = 0.0;
        for (const auto &comp : r.bank.context) {
            if (!is_rate(comp.kind)) continue;
            for (WordId w = 0; w < r.bank.vocab_size(); ++w) {
                const Matrix q = comp.matrix(w);
                ++total;
                bool ok = true;
                for (Eigen::Index j = 0; j < q.cols(); ++j) {
                    worst_col = std::max(worst_col, std::abs(q.col(j).sum()));
                    ok = ok && std::abs(q.col(j).sum()) < 1e-12;
                    for (Eigen::Index i = 0; i < q.rows(); ++i) ok = ok && (i == j || q(i, j) >= 0.0);
                }
                bad += !ok;
            }
        }
        v.check(bad == 0, fmt("%-14s %zu/%zu matrices valid, max |column sum| %.2g", std::string(to_string(m)).c_str(),
                              total - bad, total, worst_col));
    }
    return v;
}

// 5. fluctuation ordering of the stability curve
Verdict stability() {
    Verdict v;
    const double eps[] = {0.01, 0.001, 0.0001};
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 1; s <= 10; ++s) seeds.push_back(s);
    const std::size_t d = 25, len = 20;
    const auto recs = stability_curve(d, eps, len, seeds);
    auto sd = [&](std::size_t e, std::size_t s) {
        const std::size_t base = (e * seeds.size() + s) * len;
        double mean = 0.0;
        for (std::size_t l = 0; l < len; ++l) mean += recs[base + l].mean_abs;
        mean /= static_cast<double>(len);
        double ss = 0.0;
        for (std::size_t l = 0; l < len; ++l) ss += (recs[base + l].mean_abs - mean) * (recs[base + l].mean_abs - mean);
        return std::sqrt(ss / static_cast<double>(len));
    };
    std::size_t ordered = 0;
    double max_sd = 0.0;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        const double a = sd(0, s), b = sd(1, s), c = sd(2, s);
        max_sd = std::max({max_sd, a, b, c});
        ordered += a > b && b > c;
    }
    double dev = 0.0;
    for (const auto &r : recs) dev = std::max(dev, std::abs(r.mean_abs - 1.0 / static_cast<double>(d)));
    v.check(ordered >= 8, fmt("sd(0.01) > sd(0.001) > sd(0.0001) in %zu/10 seeds", ordered));
    v.info(fmt("largest sd across lengths %.3g; max |mean_abs - 1/d| = %.3g over all %zu records", max_sd, dev, recs.size()));
    if (dev < 1e-12) {
        v.info("every factor I+eps*Q is column-stochastic for these draws, so each product is nonnegative with column "
               "sums 1 and mean_abs is exactly 1/d; sd is rounding noise");
    }
    return v;
}

struct ProbeRun {
    double fop = 0.0, fos = 0.0, fop_split = 0.0;
};

/// Order-probe accuracies on held-out synthetic sentences for one seed.
ProbeRun probe_run(std::uint64_t seed) {
    auto spec = GrammarSpec::default_spec();
    spec.seed = seed;
    const auto corpus = w2r_test::tokenized(generate_synthetic_corpus(spec));
    spec.sentences = 5000;
    spec.seed = seed + 100;
    const auto probe_lines = w2r_test::tokenized(generate_synthetic_corpus(spec));

    auto accuracy = [&](Mode m, bool split) {
        TrainConfig c = TrainConfig::for_mode(m);
        c.dim = 10;
        c.epochs = 5;
        c.epsilon = 0.01;
        c.learning_rate = 0.2;
        c.lr_split = split;
        c.seed = seed;
        const auto r = train(corpus, c);
        std::vector<EncodedSentence> enc;
        for (const auto &s : probe_lines) {
            if (auto e = encode_sentence(r.vocab, s, c.length_bounds)) enc.push_back(std::move(*e));
        }
        Rng rng(derive_seed(seed, stream::probe));
        return order_probe(r.bank, c, enc, rng).accuracy;
    };
    return {accuracy(Mode::fop, false), accuracy(Mode::fos, false), accuracy(Mode::fop, true)};
}

const std::vector<ProbeRun> &probe_runs() {
    static const std::vector<ProbeRun> runs = {probe_run(1), probe_run(2), probe_run(3)};
    return runs;
}

// 6. order sensitivity: FOP above chance, FOS at chance
Verdict order_sensitivity() {
    Verdict v;
    std::size_t fop_ok = 0, fos_ok = 0;
    for (std::size_t s = 0; s < 3; ++s) {
        const auto &r = probe_runs()[s];
        fop_ok += r.fop >= 0.60;
        fos_ok += r.fos >= 0.45 && r.fos <= 0.55;
        v.info(fmt("seed %zu: FOP %.4f, FOS %.4f", s + 1, r.fop, r.fos));
    }
    v.check(fop_ok >= 2, fmt("FOP >= 0.60 in %zu/3 seeds", fop_ok));
    v.check(fos_ok >= 2, fmt("FOS in [0.45, 0.55] in %zu/3 seeds", fos_ok));
    v.info("d=10, 5 epochs, 10k sentences, eps=0.01, lr=0.2, 5000 held-out probe sentences");
    return v;
}

// 7. left-right split objective
Verdict split_objective() {
    Verdict v;
    std::size_t ok = 0;
    for (std::size_t s = 0; s < 3; ++s) {
        const auto &r = probe_runs()[s];
        ok += r.fop_split >= r.fop - 0.02;
        v.info(fmt("seed %zu: FOP split %.4f vs joint %.4f", s + 1, r.fop_split, r.fop));
    }
    v.check(ok >= 2, fmt("split >= joint - 0.02 in %zu/3 seeds", ok));

    bool exact = true;
    for (Mode m : all_modes) {
        TrainConfig c = TrainConfig::for_mode(m);
        c.dim = m == Mode::cmow ? 9 : (is_hybrid(m) ? 8 : 4);
        c.epsilon = 0.1;
        Rng rng(7);
        const auto bank = word2rate::detail::random_bank(c, 7, rng);
        const std::vector<std::vector<WordId>> negs = {{5, 6, 0}};
        for (bool left_edge : {false, true}) {
            const std::vector<WordId> side = {1, 2, 3};
            const TrainingExample ex = left_edge ? TrainingExample{{}, side, 4} : TrainingExample{side, {}, 4};
            c.lr_split = true;
            const std::vector<TrainingExample> batch = {ex};
            const double split = batch_loss(batch, negs, bank, c);
            std::vector<Vector> nv;
            for (WordId n : negs[0]) nv.push_back(bank.target_vector(n));
            const double single = negative_sampling_loss(compose_context(bank, side, c.epsilon), bank.target_vector(4), nv);
            exact = exact && split == single;
        }
    }
    v.check(exact, "edge-target split loss equals the single-side loss exactly, all modes, both edges");
    return v;
}

// 8. epoch loss decreases
Verdict training_smoke() {
    Verdict v;
    for (Mode m : all_modes) {
        std::string detail;
        bool all = true;
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            const auto r = train(w2r_test::toy_corpus(2000, seed), toy_defaults(m, 3, seed));
            const auto &l = r.report.epoch_loss;
            all = all && l.back() < l.front();
            detail += fmt(" %.4f->%.4f", l.front(), l.back());
        }
        v.check(all, std::string(to_string(m)) + detail);
    }
    return v;
}

std::string slurp(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "word2rate");
    std::vector<const char *> argv;
    for (const auto &a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (code != 0) std::cerr << err.str();
    return code;
}

// 9. bitwise-identical checkpoints across thread counts
Verdict determinism() {
    Verdict v;
    const auto corpus = w2r_test::temp_path("acc_corpus.txt").string();
    if (cli({"synth", "--sentences", "1500", "--seed", "9", "--out", corpus}) != 0) {
        v.check(false, "synth failed");
        return v;
    }
    for (Mode m : all_modes) {
        const std::string name(to_string(m));
        std::vector<std::string> base = {"train", "--corpus", corpus, "--mode", name, "--epochs", "2", "--seed", "5"};
        std::vector<std::string> files;
        for (const char *threads : {"1", "4", "1"}) {
            files.push_back(w2r_test::temp_path("acc_" + name + "_" + threads + "_" + std::to_string(files.size()) + ".w2r").string());
            auto args = base;
            args.insert(args.end(), {"--threads", threads, "--out", files.back()});
            if (cli(args) != 0) v.check(false, name + ": train failed");
        }
        const auto a = slurp(files[0]), b = slurp(files[1]), c = slurp(files[2]);
        v.check(!a.empty() && a == b && a == c, fmt("%-14s %zu-byte checkpoints identical at 1, 4, 1 threads", name.c_str(), a.size()));
    }
    return v;
}

// 10. checkpoint and text round trips
Verdict round_trips() {
    Verdict v;
    const auto corpus = w2r_test::toy_corpus(1000, 6);
    for (Mode m : all_modes) {
        const auto c = toy_defaults(m, 1, 6);
        const auto r = train(corpus, c);
        const std::string name(to_string(m));
        const auto path = w2r_test::temp_path("acc_rt_" + name + ".w2r").string();
        save_checkpoint(r.bank, &r.adam, c, r.vocab, path);
        const auto ck = load_checkpoint(path);
        const bool bitwise = ck.bank == r.bank && ck.adam && *ck.adam == r.adam && ck.vocab == r.vocab &&
                             encode_checkpoint(ck.bank, &*ck.adam, ck.config, ck.vocab) == slurp(path);
        v.check(bitwise, name + ": checkpoint save/load bitwise");

        for (ExportKind which : {ExportKind::word, ExportKind::target}) {
            std::stringstream ss;
            write_text_vectors(ss, r.bank, c, r.vocab, which);
            const auto tv = read_text_vectors(ss);
            std::vector<Vector> original;
            for (WordId w = 0; w < r.vocab.size(); ++w) {
                original.push_back(which == ExportKind::word ? word_embedding(r.bank, c, w) : Vector(r.bank.target_vector(w)));
            }
            const std::size_t k = original.size() - 1;
            std::size_t changed = 0;
            double min_gap = 1.0;
            for (WordId w = 0; w < original.size(); ++w) {
                const auto a = nearest_neighbors(original, w, k);
                const auto b = nearest_neighbors(tv.vectors, w, k);
                bool same = true;
                for (std::size_t i = 0; i < k; ++i) {
                    same = same && a[i].first == b[i].first;
                    if (i > 0) min_gap = std::min(min_gap, a[i - 1].second - a[i].second);
                }
                changed += !same;
            }
            v.check(changed == 0, fmt("%-14s %-6s export: rankings changed for %zu/%zu words (smallest cosine gap %.2g)",
                                      name.c_str(), which == ExportKind::word ? "word" : "target", changed,
                                      original.size(), min_gap));
        }
    }
    return v;
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"conservation", conservation},
        {"oracle equivalence", oracle_equivalence},
        {"gradient checks", gradients},
        {"constraint enforcement", constraints},
        {"stability ordering", stability},
        {"order sensitivity", order_sensitivity},
        {"left-right split", split_objective},
        {"training smoke", training_smoke},
        {"determinism", determinism},
        {"round trips", round_trips},
    };
    std::size_t failed = 0;
    std::vector<std::string> summary;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception &e) {
            v.check(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        for (const auto &n : v.notes) std::cout << "    " << n << '\n';
        const auto line = fmt("%s criterion %zu: %s (%.1fs)", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), secs);
        std::cout << line << '\n' << std::flush;
        summary.push_back(line);
        failed += !v.pass;
    }
    std::cout << "\nsummary\n";
    for (const auto &s : summary) std::cout << s << '\n';
    std::cout << criteria.size() - failed << "/" << criteria.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
