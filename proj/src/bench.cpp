#include "lrea/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <json.hpp>

#include "lrea/errors.hpp"
#include "lrea/rng.hpp"
#include "lrea/serve.hpp"

namespace lrea {

namespace {

using Clock = std::chrono::steady_clock;

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

template <typename T>
struct BenchModel {
    Mat<T> embedding;  // vocab x d
    AttentionParamsT<T> att;
    MlpT<T> head;
};

template <typename T>
Mat<T> random_mat(Rng& rng, int rows, int cols, double stddev) {
    Mat<T> m(rows, cols);
    for (auto& x : m.data) x = static_cast<T>(rng.normal(0.0, stddev));
    return m;
}

template <typename T>
BenchModel<T> make_model(const BenchConfig& cfg, Rng& rng) {
    BenchModel<T> m;
    m.embedding = random_mat<T>(rng, cfg.vocab_size, cfg.emb_dim, 0.25);
    const double s_in = std::sqrt(2.0 / (cfg.emb_dim + cfg.att_hidden));
    m.att.w1 = random_mat<T>(rng, cfg.emb_dim, cfg.att_hidden, s_in);
    m.att.w2 = random_mat<T>(rng, cfg.emb_dim, cfg.att_hidden, s_in);
    m.att.w3 = random_mat<T>(rng, cfg.emb_dim, cfg.att_hidden, s_in);
    m.att.w_o = random_mat<T>(rng, cfg.att_hidden, 1, std::sqrt(2.0 / cfg.att_hidden));
    int in_dim = cfg.emb_dim * (2 + cfg.side_count);
    for (std::size_t i = 0; i <= cfg.mlp_hidden.size(); ++i) {
        const int out_dim = i < cfg.mlp_hidden.size() ? cfg.mlp_hidden[i] : 1;
        m.head.weights.push_back(random_mat<T>(rng, in_dim, out_dim, std::sqrt(2.0 / in_dim)));
        m.head.biases.push_back(Mat<T>(1, out_dim));
        in_dim = out_dim;
    }
    return m;
}

template <typename T>
Mat<T> gather(const Mat<T>& table, const std::vector<int>& ids) {
    Mat<T> out(static_cast<int>(ids.size()), table.cols);
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (int j = 0; j < table.cols; ++j)
            out(static_cast<int>(i), j) = table(ids[i], j);
    return out;
}

template <typename T>
Mat<T> head_input(const BenchConfig& cfg, const Mat<T>& pooled, const Mat<T>& target,
                  const std::vector<Mat<T>>& sides) {
    Mat<T> x(1, cfg.emb_dim * (2 + cfg.side_count));
    int off = 0;
    auto place = [&](const Mat<T>& part) {
        for (int j = 0; j < part.cols; ++j) x(0, off + j) = part(0, j);
        off += part.cols;
    };
    place(pooled);
    place(target);
    for (const auto& s : sides) place(s);
    return x;
}

template <typename Fn>
std::vector<double> time_reps(int reps, Fn&& request) {
    const int warmup = std::max(3, reps / 10);
    for (int i = 0; i < warmup; ++i) request();
    std::vector<double> ms(reps);
    for (int i = 0; i < reps; ++i) {
        const auto t0 = Clock::now();
        request();
        const auto t1 = Clock::now();
        ms[i] = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    return ms;
}

template <typename T>
void run_cells(const BenchConfig& cfg, BenchReport& report) {
    Rng rng(cfg.seed);
    const BenchModel<T> model = make_model<T>(cfg, rng);
    const T slope = static_cast<T>(cfg.leaky_slope);
    volatile double sink = 0.0;

    for (int len : cfg.seq_lens) {
        std::vector<int> seq(len);
        for (int& id : seq) id = 1 + rng.index(cfg.vocab_size - 1);

        const Mat<T> w_comp = random_mat<T>(rng, len, cfg.rank, 1.0 / std::sqrt(len));
        const Mat<T> w_decomp = random_mat<T>(rng, cfg.rank, len, 1.0 / std::sqrt(cfg.rank));

        // offline step for the compressed path, reported separately
        Mat<T> e_comp, e_aux;
        {
            const auto t0 = Clock::now();
            const Mat<T> seq_t = transpose(gather(model.embedding, seq));
            e_comp = matmul(seq_t, w_comp);
            e_aux = matmul(seq_t, transpose(w_decomp));
            const auto t1 = Clock::now();
            report.precompute_ms.emplace_back(
                len, std::chrono::duration<double, std::milli>(t1 - t0).count());
        }

        std::vector<int> b_grid = {cfg.candidates};
        if (len == cfg.doubling_seq_len) b_grid.push_back(cfg.candidates * 2);

        for (int b : b_grid) {
            std::vector<int> candidates(b);
            for (int& id : candidates) id = 1 + rng.index(cfg.vocab_size - 1);
            std::vector<int> side_ids(cfg.side_count);
            for (int& id : side_ids) id = 1 + rng.index(cfg.vocab_size - 1);
            std::vector<Mat<T>> sides;
            for (int id : side_ids) sides.push_back(gather(model.embedding, {id}));

            auto serve_request = [&]() {
                double acc = 0.0;
                for (int c : candidates) {
                    const Mat<T> target = gather(model.embedding, {c});
                    const Mat<T> pooled =
                        lrea_attention_serve(e_comp, e_aux, target, model.att, slope);
                    acc += clamped_sigmoid(
                        mlp_logit(model.head, head_input(cfg, pooled, target, sides), slope));
                }
                sink = sink + acc;
            };
            auto din_request = [&]() {
                double acc = 0.0;
                const Mat<T> seq_emb = gather(model.embedding, seq);
                for (int c : candidates) {
                    const Mat<T> target = gather(model.embedding, {c});
                    const Mat<T> pooled =
                        din_attention_value(seq_emb, target, model.att, slope);
                    acc += clamped_sigmoid(
                        mlp_logit(model.head, head_input(cfg, pooled, target, sides), slope));
                }
                sink = sink + acc;
            };

            const std::vector<double> serve_ms = time_reps(cfg.reps, serve_request);
            report.cells.push_back({"lrea_serve", len, b, quantile(serve_ms, 0.5),
                                    quantile(serve_ms, 0.9)});
            const std::vector<double> din_ms = time_reps(cfg.reps, din_request);
            report.cells.push_back({"din_long", len, b, quantile(din_ms, 0.5),
                                    quantile(din_ms, 0.9)});
        }
    }
}

}  // namespace

double BenchReport::median(const std::string& path, int seq_len, int candidates) const {
    for (const auto& c : cells) {
        if (c.path == path && c.seq_len == seq_len && c.candidates == candidates) {
            return c.median_ms;
        }
    }
    throw DataError("bench report has no cell " + path + " L=" + std::to_string(seq_len) +
                    " B=" + std::to_string(candidates));
}

std::string BenchReport::to_json() const {
    nlohmann::json cells_json = nlohmann::json::array();
    for (const auto& c : cells) {
        cells_json.push_back({{"path", c.path},
                              {"L", c.seq_len},
                              {"B", c.candidates},
                              {"median_ms", c.median_ms},
                              {"p90_ms", c.p90_ms}});
    }
    nlohmann::json pre = nlohmann::json::array();
    for (const auto& [len, ms] : precompute_ms) pre.push_back({{"L", len}, {"ms", ms}});
    nlohmann::json j{{"config",
                      {{"L_grid", config.seq_lens},
                       {"B", config.candidates},
                       {"r", config.rank},
                       {"d", config.emb_dim},
                       {"h", config.att_hidden},
                       {"reps", config.reps},
                       {"precision", config.precision},
                       {"seed", config.seed}}},
                     {"medians_ms", cells_json},
                     {"precompute_ms", pre}};
    return j.dump(2);
}

BenchReport run_bench(const BenchConfig& cfg) {
    if (cfg.reps <= 0 || cfg.candidates <= 0 || cfg.seq_lens.empty()) {
        throw DataError("bench: reps, candidates and the length grid must be non-empty");
    }
    if (cfg.precision != 32 && cfg.precision != 64) {
        throw DataError("bench: precision must be 32 or 64");
    }
#if defined(__GLIBC__)
    // Keep the allocator out of the measurement: without this, glibc's
    // dynamic mmap/trim thresholds sit right at the size of the per-request
    // temporaries and kernel round-trips skew cells unevenly.
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
    BenchReport report;
    report.config = cfg;
    if (cfg.precision == 32) {
        run_cells<float>(cfg, report);
    } else {
        run_cells<double>(cfg, report);
    }
    return report;
}

}  // namespace lrea
