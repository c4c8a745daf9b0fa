// Acceptance gate: every release-blocking property at its stated
// tolerance, one pass/fail line each. Exit status is the failure count.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "lrea/bench.hpp"
#include "lrea/checkpoint.hpp"
#include "lrea/data.hpp"
#include "lrea/metrics.hpp"
#include "lrea/model.hpp"
#include "lrea/rng.hpp"
#include "lrea/serve.hpp"
#include "lrea/store.hpp"
#include "lrea/training.hpp"
#include "oracles.hpp"

using namespace lrea;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int number, const char* name, const Outcome& outcome, double seconds) {
    std::printf("[%s] %d %-24s %s (%.1fs)\n", outcome.pass ? "PASS" : "FAIL", number,
                name, outcome.detail.c_str(), seconds);
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
}

template <typename Fn>
void run(int number, const char* name, Fn&& fn) {
    const auto t0 = Clock::now();
    Outcome outcome;
    try {
        outcome = fn();
    } catch (const std::exception& e) {
        outcome = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(Clock::now() - t0).count();
    report(number, name, outcome, s);
}

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), pattern, args...);
    return buf;
}

Matrix random_matrix(Rng& rng, int rows, int cols, double lo = -1.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (auto& x : m.data) x = rng.uniform(lo, hi);
    return m;
}

// ---- shared synthetic corpus: 20k train / 5k test, seed 7 ----

SyntheticSpec corpus_spec() {
    SyntheticSpec spec;
    spec.n_users = 2500;
    spec.n_items = 2000;
    spec.seq_len = 200;
    spec.short_len = 16;
    spec.n_examples = 25000;
    spec.seed = 7;
    spec.latent_dim = 8;
    spec.noise = 0.1;
    spec.side_vocab = 8;
    return spec;
}

struct Corpus {
    Dataset train, test;
    int vocab = 0;
};

const Corpus& corpus() {
    static const Corpus c = [] {
        Corpus out;
        const SyntheticSpec spec = corpus_spec();
        SyntheticData data = generate(spec);
        out.train.assign(data.examples.begin(), data.examples.begin() + 20000);
        out.test.assign(data.examples.begin() + 20000, data.examples.end());
        out.vocab = spec.vocab_size();
        return out;
    }();
    return c;
}

ModelConfig corpus_config(Arch arch, int rank) {
    ModelConfig cfg;
    cfg.arch = arch;
    cfg.seq_len = 200;
    cfg.short_len = 16;
    cfg.rank = rank;
    cfg.emb_dim = 16;
    cfg.att_hidden = 36;
    cfg.mlp_hidden = {512, 256, 128};
    cfg.vocab_size = corpus().vocab;
    cfg.side_count = 1;
    cfg.use_short = true;
    return cfg;
}

double trained_test_auc(Arch arch, int rank, int epochs, std::uint64_t seed) {
    const ModelConfig cfg = corpus_config(arch, rank);
    TrainConfig tc;
    tc.lambda = 0.3;
    tc.lr = 0.01;
    tc.batch_size = 64;
    tc.epochs = epochs;
    tc.seed = seed;
    tc.threads = 2;
    const TrainResult result = train(corpus().train, &corpus().test, cfg, tc);
    return result.log.back().auc.value_or(0.0);
}

// ---- criteria ----

Outcome gradient_correctness() {
    const auto t0 = Clock::now();
    ModelConfig cfg;
    cfg.arch = Arch::kLrea;
    cfg.seq_len = 8;
    cfg.short_len = 4;
    cfg.rank = 3;
    cfg.emb_dim = 4;
    cfg.att_hidden = 5;
    cfg.mlp_hidden = {16, 8};
    cfg.vocab_size = 32;
    cfg.side_count = 1;
    cfg.use_short = true;
    const GradCheckReport report = loss_grad_check(cfg, 3, 0.3, 1e-5, 1e-4, 7);
    const double s = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool pass = report.ok && s < 10.0;
    return {pass, fmt("max rel err %.2e over %zu tensors, %.2fs (limits 1e-4, 10s)",
                      report.max_rel_err, report.entries.size(), s)};
}

Outcome exact_recovery() {
    Rng rng(202);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int len = 4 + rng.index(12);
        const int dim = 2 + rng.index(6);
        Matrix seq = random_matrix(rng, len, dim);

        Matrix w_comp, w_decomp;
        switch (trial % 3) {
            case 0:  // plain identity
                w_comp = Matrix::identity(len);
                w_decomp = Matrix::identity(len);
                break;
            case 1: {  // permutation and its inverse
                w_comp = Matrix(len, len);
                std::vector<int> perm(len);
                for (int i = 0; i < len; ++i) perm[i] = i;
                rng.shuffle(perm);
                for (int i = 0; i < len; ++i) w_comp(i, perm[i]) = 1.0;
                w_decomp = transpose(w_comp);
                break;
            }
            default: {  // power-of-two diagonal and its exact inverse
                w_comp = Matrix(len, len);
                w_decomp = Matrix(len, len);
                for (int i = 0; i < len; ++i) {
                    const double s = std::pow(2.0, rng.index(7) - 3);
                    w_comp(i, i) = s;
                    w_decomp(i, i) = 1.0 / s;
                }
                break;
            }
        }
        worst = std::max(worst, max_abs_diff(lrea_reconstruct(seq, w_comp, w_decomp), seq));
    }
    return {worst <= 1e-12,
            fmt("max |reconstruction - sequence| = %.2e (limit 1e-12)", worst)};
}

Outcome absorption_identity() {
    // (a) projected non-negative operands: serving equals training
    double worst = 0.0;
    for (int seed = 0; seed < 100; ++seed) {
        Rng rng(1000 + seed);
        const int len = 8 + rng.index(40);
        const int rank = 2 + rng.index(8);
        const int dim = 4 + rng.index(8);
        const int hidden = 4 + rng.index(12);
        Matrix seq = random_matrix(rng, len, dim, 0.0, 1.0);
        Matrix target = random_matrix(rng, 1, dim, 0.0, 1.0);
        Matrix w_comp = random_matrix(rng, len, rank, 0.0, 1.0 / std::sqrt(len));
        Matrix w_decomp = random_matrix(rng, rank, len, 0.0, 1.0 / std::sqrt(rank));
        AttentionParams att{random_matrix(rng, dim, hidden, 0.0, 0.5),
                            random_matrix(rng, dim, hidden, 0.0, 0.5),
                            random_matrix(rng, dim, hidden, 0.0, 0.5),
                            random_matrix(rng, hidden, 1)};

        const auto trained = lrea_attention_train(seq, target, w_comp, w_decomp, att, 0.01);
        const Matrix e_comp = matmul(transpose(seq), w_comp);
        const Matrix e_aux = matmul(transpose(seq), transpose(w_decomp));
        const Matrix served = lrea_attention_serve(e_comp, e_aux, target, att, 0.01);
        worst = std::max(worst, max_abs_diff(served, trained.pooled));
    }
    if (worst > 1e-8) {
        return {false, fmt("projected path mismatch %.2e exceeds 1e-8", worst)};
    }

    // (b) under a strong penalty the mean gap shrinks from its init value
    SyntheticSpec spec;
    spec.n_users = 120;
    spec.n_items = 400;
    spec.seq_len = 32;
    spec.short_len = 8;
    spec.n_examples = 2000;
    spec.seed = 7;
    spec.latent_dim = 6;
    spec.noise = 0.1;

    ModelConfig cfg;
    cfg.arch = Arch::kLrea;
    cfg.seq_len = spec.seq_len;
    cfg.short_len = spec.short_len;
    cfg.rank = 8;
    cfg.emb_dim = 8;
    cfg.att_hidden = 12;
    cfg.mlp_hidden = {32, 16};
    cfg.vocab_size = spec.vocab_size();
    cfg.side_count = 1;

    TrainConfig tc;
    tc.lambda = 10.0;
    tc.epochs = 3;
    tc.batch_size = 32;
    tc.seed = 7;
    tc.threads = 2;

    const TrainResult result = train(generate(spec).examples, nullptr, cfg, tc);
    const double init_gap = result.log.front().gap_mean;
    const double gap3 = result.log.at(3).gap_mean;
    const bool pass = gap3 < init_gap;
    return {pass,
            fmt("projected mismatch %.2e <= 1e-8; lambda=10 gap %.3e -> %.3e at epoch 3",
                worst, init_gap, gap3)};
}

Outcome non_neg_loss_oracle() {
    Rng rng(404);
    double worst = 0.0;
    bool zero_ok = true;
    for (int trial = 0; trial < 1000; ++trial) {
        const int r = 1 + rng.index(8);
        const int l = 1 + rng.index(12);
        const int d = 1 + rng.index(8);
        Matrix w_decomp = random_matrix(rng, r, l);
        Matrix comp_t = random_matrix(rng, r, d);

        double want = 0.0;
        for (double x : w_decomp.data)
            if (x < 0.0) want += x * x;
        for (double x : comp_t.data)
            if (x < 0.0) want += x * x;
        worst = std::max(worst, std::abs(non_neg_loss(w_decomp, comp_t) - want));

        abs_inplace(w_decomp);
        abs_inplace(comp_t);
        zero_ok = zero_ok && non_neg_loss(w_decomp, comp_t) == 0.0;
    }
    return {worst <= 1e-12 && zero_ok,
            fmt("max |loss - oracle| = %.2e over 1000 draws (limit 1e-12), "
                "non-negative inputs give %s",
                worst, zero_ok ? "exactly 0" : "NONZERO")};
}

Outcome metric_oracles() {
    const double worked = auc({0.9, 0.8, 0.3, 0.2}, {1, 0, 1, 0});
    if (std::abs(worked - 0.75) > 1e-12) {
        return {false, fmt("worked example gave %.6f, expected 0.75", worked)};
    }
    Rng rng(505);
    double worst_auc = 0.0, worst_gauc = 0.0;
    int auc_cases = 0, gauc_cases = 0;
    while (auc_cases < 25 || gauc_cases < 25) {
        const int n = 2 + rng.index(999);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        std::vector<std::int64_t> groups(n);
        const int levels = 2 + rng.index(12);  // coarse scores so ties occur
        for (int i = 0; i < n; ++i) {
            scores[i] = rng.index(levels) / static_cast<double>(levels);
            labels[i] = rng.bernoulli(0.4) ? 1 : 0;
            groups[i] = rng.index(8);
        }
        try {
            worst_auc = std::max(
                worst_auc, std::abs(auc(scores, labels) -
                                    oracle::auc_pairwise(scores, labels)));
            ++auc_cases;
        } catch (const MetricError&) {
        }
        try {
            worst_gauc = std::max(
                worst_gauc, std::abs(gauc(scores, labels, groups) -
                                     oracle::gauc_pairwise(scores, labels, groups)));
            ++gauc_cases;
        } catch (const MetricError&) {
        }
    }
    const bool pass = worst_auc <= 1e-9 && worst_gauc <= 1e-9;
    return {pass, fmt("worked example 0.75; max |auc-oracle| %.2e, |gauc-oracle| %.2e "
                      "(limit 1e-9)",
                      worst_auc, worst_gauc)};
}

Outcome learning_capability() {
    const auto t0 = Clock::now();
    const double auc_lrea = trained_test_auc(Arch::kLrea, 32, 5, 7);
    const double auc_din = trained_test_auc(Arch::kDinLong, 32, 5, 7);
    const double s = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool pass = auc_lrea >= 0.90 && auc_lrea >= auc_din - 0.02 && s < 600.0;
    return {pass, fmt("test AUC %.4f (>= 0.90), full-sequence baseline %.4f (margin "
                      "%+.4f >= -0.02), %.0fs (< 600s)",
                      auc_lrea, auc_din, auc_lrea - auc_din, s)};
}

Outcome complexity_scaling() {
    BenchConfig bc;
    bc.seq_lens = {128, 1024, 8192};
    bc.candidates = 32;
    bc.rank = 32;
    bc.emb_dim = 16;
    bc.att_hidden = 36;
    bc.mlp_hidden = {512, 256, 128};
    bc.reps = 100;
    bc.doubling_seq_len = 1024;
    bc.seed = 99;
    bc.precision = 32;
    const BenchReport report = run_bench(bc);

    const double serve_small = report.median("lrea_serve", 128, 32);
    const double serve_big = report.median("lrea_serve", 8192, 32);
    const double din_small = report.median("din_long", 128, 32);
    const double din_big = report.median("din_long", 8192, 32);
    const double serve_ratio = serve_big / serve_small;
    const double din_ratio = din_big / din_small;

    const double serve_b = report.median("lrea_serve", 1024, 64) /
                           report.median("lrea_serve", 1024, 32);
    const double din_b =
        report.median("din_long", 1024, 64) / report.median("din_long", 1024, 32);

    const bool pass = serve_ratio <= 1.3 && din_ratio >= 10.0 && serve_b >= 1.6 &&
                      serve_b <= 2.6 && din_b >= 1.6 && din_b <= 2.6;
    return {pass, fmt("serve L-growth %.2fx (<= 1.3), full-path %.1fx (>= 10); "
                      "B-doubling serve %.2fx, full %.2fx (within [1.6, 2.6])",
                      serve_ratio, din_ratio, serve_b, din_b)};
}

Outcome rank_trend() {
    int wins = 0;
    std::string detail;
    for (std::uint64_t seed : {1, 2, 3}) {
        const double auc_hi = trained_test_auc(Arch::kLrea, 64, 2, seed);
        const double auc_lo = trained_test_auc(Arch::kLrea, 8, 2, seed);
        if (auc_hi >= auc_lo) ++wins;
        detail += fmt("seed %llu: r64 %.4f vs r8 %.4f; ",
                      static_cast<unsigned long long>(seed), auc_hi, auc_lo);
    }
    return {wins >= 2, detail + fmt("r64 >= r8 in %d/3 seeds (need majority)", wins)};
}

Outcome cache_coherence() {
    ModelConfig cfg;
    cfg.arch = Arch::kLrea;
    cfg.seq_len = 16;
    cfg.short_len = 4;
    cfg.rank = 4;
    cfg.emb_dim = 8;
    cfg.att_hidden = 6;
    cfg.mlp_hidden = {16, 8};
    cfg.vocab_size = 80;
    cfg.side_count = 1;

    Checkpoint ck;
    ck.config = cfg;
    ck.params = init_params(cfg, 31);
    ck.version = params_version(ck.params, cfg);

    SyntheticSpec spec;
    spec.n_users = 10;
    spec.n_items = 60;
    spec.seq_len = cfg.seq_len;
    spec.short_len = cfg.short_len;
    spec.n_examples = 40;
    spec.seed = 3;
    spec.latent_dim = 4;
    Dataset data = generate(spec).examples;

    const std::string dir = "acceptance_store";
    std::filesystem::remove_all(dir);
    precompute(user_histories(data), ck, dir);

    Rng rng(606);
    const std::vector<std::string> names = tensor_names(cfg);
    int raised = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Checkpoint mutated = ck;
        // perturb one random entry of one random tensor
        const int which = rng.index(static_cast<int>(names.size()));
        int i = 0;
        for_each_tensor(mutated.params, cfg, [&](const char*, Matrix& m) {
            if (i++ != which) return;
            m.data[rng.index(static_cast<int>(m.size()))] += 1e-9 + rng.uniform();
        });
        mutated.version = params_version(mutated.params, cfg);
        if (mutated.version == ck.version) continue;  // would be a hash failure

        StateStore store = StateStore::open(dir);
        ScoreRequest req;
        req.user_id = data[rng.index(static_cast<int>(data.size()))].user_id;
        req.candidate_ids = {1 + rng.index(cfg.vocab_size - 1)};
        req.side_ids = data[0].side_ids;
        try {
            score(req, store, mutated);
        } catch (const StaleCacheError&) {
            ++raised;
        }
    }
    std::filesystem::remove_all(dir);
    return {raised == 100, fmt("stale-cache error raised in %d/100 trials", raised)};
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    run(1, "gradient-correctness", gradient_correctness);
    run(2, "exact-recovery", exact_recovery);
    run(3, "absorption-identity", absorption_identity);
    run(4, "non-neg-loss-oracle", non_neg_loss_oracle);
    run(5, "metric-oracles", metric_oracles);
    run(6, "learning-capability", learning_capability);
    run(7, "complexity-scaling", complexity_scaling);
    run(8, "rank-trend", rank_trend);
    run(9, "cache-coherence", cache_coherence);
    std::printf("%d of 9 criteria passed\n", 9 - failures);
    return failures;
}
