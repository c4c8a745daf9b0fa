#include "lrea/training.hpp"

#include <cmath>
#include <memory>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "lrea/checkpoint.hpp"
#include "lrea/metrics.hpp"
#include "lrea/rng.hpp"
#include "lrea/tape.hpp"

namespace lrea {

void TrainConfig::validate() const {
    if (lambda < 0.0) throw ShapeError("train config: lambda must be >= 0");
    if (lr <= 0.0) throw ShapeError("train config: learning rate must be positive");
    if (batch_size <= 0 || epochs < 0 || threads <= 0) {
        throw ShapeError("train config: batch size and threads must be positive, epochs >= 0");
    }
}

double cross_entropy(const std::vector<double>& probs, const std::vector<int>& labels) {
    if (probs.empty() || probs.size() != labels.size()) {
        throw ShapeError("cross_entropy: needs equal, non-empty probs and labels");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = probs[i];
        sum += labels[i] == 1 ? -std::log(p) : -std::log(1.0 - p);
    }
    return sum / static_cast<double>(probs.size());
}

double non_neg_loss(const Matrix& w_decomp, const Matrix& comp_t) {
    return neg_part_sq_norm(transpose(w_decomp)) + neg_part_sq_norm(comp_t);
}

AdagradState make_adagrad_state(const ModelParams& params, const ModelConfig& cfg) {
    AdagradState s;
    for_each_tensor(params, cfg, [&](const char*, const Matrix& m) {
        s.acc.emplace_back(m.rows, m.cols);
    });
    return s;
}

void adagrad_step(Matrix& theta, const Matrix& grad, Matrix& acc, double lr,
                  double epsilon) {
    if (!theta.same_shape(grad) || !theta.same_shape(acc)) {
        throw ShapeError("adagrad_step: parameter " + theta.shape_str() + ", gradient " +
                         grad.shape_str() + ", accumulator " + acc.shape_str());
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double g = grad.data[i];
        acc.data[i] += g * g;
        theta.data[i] -= lr * g / (std::sqrt(acc.data[i]) + epsilon);
    }
}

void apply_gradients(ModelParams& params, const ModelConfig& cfg,
                     const std::vector<Matrix>& grads, AdagradState& state, double lr) {
    std::size_t i = 0;
    for_each_tensor(params, cfg, [&](const char*, Matrix& theta) {
        adagrad_step(theta, grads.at(i), state.acc.at(i), lr, state.epsilon);
        ++i;
    });
    for (int j = 0; j < params.embedding.dim; ++j) params.embedding.weights(0, j) = 0.0;
}

BatchStats eval_batch(const Example* examples, std::size_t count,
                      const ModelParams& params, const ModelConfig& cfg, double lambda,
                      double inv_n, bool include_decomp_term, bool penalty_stop_grad,
                      std::vector<Matrix>* grad_out) {
    const bool with_grads = grad_out != nullptr;
    Tape tape;
    ModelVars vars = register_params(tape, params, cfg, with_grads);

    BatchStats stats;
    Var acc;
    for (std::size_t i = 0; i < count; ++i) {
        ExampleForward fwd = forward_example(tape, vars, cfg, examples[i], penalty_stop_grad);
        Var term = tape.bce_term(fwd.prob, static_cast<double>(examples[i].label));
        stats.ce_sum += tape.value(term)(0, 0);
        stats.gap_sum += fwd.absorption_gap;
        if (fwd.comp_penalty.valid()) {
            stats.pen_sum += tape.value(fwd.comp_penalty)(0, 0);
            if (lambda != 0.0) term = tape.add(term, tape.scale(fwd.comp_penalty, lambda));
        }
        acc = acc.valid() ? tape.add(acc, term) : term;
        ++stats.count;
    }
    if (!acc.valid()) throw ShapeError("eval_batch: empty slice");

    Var loss = tape.scale(acc, inv_n);
    if (include_decomp_term && cfg.arch == Arch::kLrea) {
        Var wd_term = tape.neg_part_sq_norm(tape.transpose(vars.w_decomp));
        stats.pen_sum += tape.value(wd_term)(0, 0) * static_cast<double>(count);
        if (lambda != 0.0) loss = tape.add(loss, tape.scale(wd_term, lambda));
    }
    stats.loss = tape.value(loss)(0, 0);

    if (with_grads) {
        tape.backward(loss);
        const std::vector<Var> order = tensor_vars(vars, cfg);
        grad_out->clear();
        grad_out->reserve(order.size());
        for (Var v : order) grad_out->push_back(tape.grad(v));
    }
    return stats;
}

double total_loss(const std::vector<Example>& batch, const ModelParams& params,
                  const ModelConfig& cfg, double lambda, std::vector<Matrix>* grad_out) {
    if (batch.empty()) throw ShapeError("total_loss: empty batch");
    return eval_batch(batch.data(), batch.size(), params, cfg, lambda,
                      1.0 / static_cast<double>(batch.size()),
                      /*include_decomp_term=*/true, /*penalty_stop_grad=*/false, grad_out)
        .loss;
}

namespace {

struct SliceRange {
    std::size_t begin = 0;
    std::size_t count = 0;
};

std::vector<SliceRange> make_slices(std::size_t n, int threads) {
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<SliceRange> slices;
    std::size_t start = 0;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t len = n / workers + (w < n % workers ? 1 : 0);
        if (len == 0) continue;
        slices.push_back({start, len});
        start += len;
    }
    return slices;
}

// Runs fn(slice_index) on `threads` workers; slice 0 on the calling thread.
template <typename Fn>
void run_slices(std::size_t n_slices, Fn&& fn) {
    if (n_slices == 1) {
        fn(0);
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t s = 1; s < n_slices; ++s) pool.emplace_back(fn, s);
    fn(0);
    for (auto& th : pool) th.join();
}

}  // namespace

std::vector<double> predict_all(const ModelParams& params, const ModelConfig& cfg,
                                const Dataset& data, int threads) {
    std::vector<double> probs(data.size());
    const auto slices = make_slices(data.size(), threads);
    run_slices(slices.size(), [&](std::size_t s) {
        for (std::size_t i = slices[s].begin; i < slices[s].begin + slices[s].count; ++i) {
            probs[i] = predict(params, cfg, data[i]);
        }
    });
    return probs;
}

namespace {

struct EpochMeter {
    double ce = 0.0, pen = 0.0, gap = 0.0;
    std::size_t n = 0;
    void absorb(const BatchStats& b) {
        ce += b.ce_sum;
        pen += b.pen_sum;
        gap += b.gap_sum;
        n += b.count;
    }
};

EpochStats finish_epoch(int epoch, const EpochMeter& m, const ModelParams& params,
                        const ModelConfig& cfg, const Dataset& metric_set, int threads) {
    EpochStats st;
    st.epoch = epoch;
    const double dn = static_cast<double>(std::max<std::size_t>(m.n, 1));
    st.ce = m.ce / dn;
    st.penalty = m.pen / dn;
    st.gap_mean = m.gap / dn;

    const std::vector<double> scores = predict_all(params, cfg, metric_set, threads);
    std::vector<int> labels(metric_set.size());
    std::vector<std::int64_t> users(metric_set.size());
    for (std::size_t i = 0; i < metric_set.size(); ++i) {
        labels[i] = metric_set[i].label;
        users[i] = metric_set[i].user_id;
    }
    try {
        st.auc = auc(scores, labels);
    } catch (const MetricError&) {
    }
    try {
        st.gauc = gauc(scores, labels, users);
    } catch (const MetricError&) {
    }
    return st;
}

void write_log_line(std::ostream* out, const EpochStats& st) {
    if (out == nullptr) return;
    nlohmann::json rec{{"epoch", st.epoch},
                       {"ce", st.ce},
                       {"penalty", st.penalty},
                       {"gap_mean", st.gap_mean},
                       {"auc", st.auc ? nlohmann::json(*st.auc) : nlohmann::json()},
                       {"gauc", st.gauc ? nlohmann::json(*st.gauc) : nlohmann::json()}};
    *out << rec.dump() << "\n";
}

}  // namespace

TrainResult train(const Dataset& train_set, const Dataset* eval_set,
                  const ModelConfig& cfg, const TrainConfig& tc,
                  std::ostream* log_stream) {
    cfg.validate();
    tc.validate();
    if (train_set.empty()) throw DataError("train: empty dataset");

    TrainResult result;
    result.params = init_params(cfg, tc.seed);
    AdagradState opt = make_adagrad_state(result.params, cfg);
    const Dataset& metric_set = eval_set != nullptr ? *eval_set : train_set;

    // Epoch 0: diagnostics of the untouched initialization.
    {
        EpochMeter meter;
        const auto chunks = make_slices(
            train_set.size(), static_cast<int>((train_set.size() + 63) / 64));
        std::vector<BatchStats> chunk_stats(chunks.size());
        const auto slices = make_slices(chunks.size(), tc.threads);
        run_slices(slices.size(), [&](std::size_t s) {
            for (std::size_t c = slices[s].begin; c < slices[s].begin + slices[s].count;
                 ++c) {
                chunk_stats[c] = eval_batch(train_set.data() + chunks[c].begin,
                                            chunks[c].count, result.params, cfg, tc.lambda,
                                            1.0, false, tc.penalty_stop_grad, nullptr);
            }
        });
        for (const auto& b : chunk_stats) meter.absorb(b);
        EpochStats st = finish_epoch(0, meter, result.params, cfg, metric_set, tc.threads);
        write_log_line(log_stream, st);
        result.log.push_back(std::move(st));
    }

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = Rng(tc.seed).fork(1);

    for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        EpochMeter meter;

        std::vector<Example> batch;
        batch.reserve(tc.batch_size);
        for (std::size_t pos = 0; pos < order.size(); pos += tc.batch_size) {
            const std::size_t bsz =
                std::min<std::size_t>(tc.batch_size, order.size() - pos);
            batch.clear();
            for (std::size_t k = 0; k < bsz; ++k) batch.push_back(train_set[order[pos + k]]);

            const auto slices = make_slices(bsz, tc.threads);
            std::vector<BatchStats> slice_stats(slices.size());
            std::vector<std::vector<Matrix>> slice_grads(slices.size());
            run_slices(slices.size(), [&](std::size_t s) {
                slice_stats[s] = eval_batch(batch.data() + slices[s].begin,
                                            slices[s].count, result.params, cfg, tc.lambda,
                                            1.0 / static_cast<double>(bsz),
                                            /*include_decomp_term=*/s == 0,
                                            tc.penalty_stop_grad, &slice_grads[s]);
            });

            double batch_loss = 0.0;
            for (const auto& st : slice_stats) batch_loss += st.loss;
            if (!std::isfinite(batch_loss)) {
                throw EvalError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                ", batch starting at " + std::to_string(pos) +
                                " (ce_sum=" + std::to_string(slice_stats[0].ce_sum) + ")");
            }
            for (const auto& st : slice_stats) meter.absorb(st);

            // deterministic reduction in slice order
            std::vector<Matrix>& total = slice_grads[0];
            for (std::size_t s = 1; s < slice_grads.size(); ++s) {
                for (std::size_t g = 0; g < total.size(); ++g) {
                    Matrix& dst = total[g];
                    const Matrix& src = slice_grads[s][g];
                    for (std::size_t k = 0; k < dst.size(); ++k) dst.data[k] += src.data[k];
                }
            }
            apply_gradients(result.params, cfg, total, opt, tc.lr);
        }

        EpochStats st = finish_epoch(epoch, meter, result.params, cfg, metric_set,
                                     tc.threads);
        write_log_line(log_stream, st);
        result.log.push_back(std::move(st));
    }

    result.version = params_version(result.params, cfg);
    return result;
}

namespace {

// Random batch with varying true lengths so padded rows are exercised.
std::vector<Example> random_batch(const ModelConfig& cfg, int batch_size, Rng& rng) {
    std::vector<Example> batch(batch_size);
    const int item_hi = cfg.vocab_size - 1;
    for (auto& ex : batch) {
        ex.user_id = rng.index(8);
        ex.target_id = 1 + rng.index(item_hi);
        ex.label = rng.bernoulli(0.5) ? 1 : 0;
        const int n_long = 1 + rng.index(cfg.seq_len);
        for (int i = 0; i < n_long; ++i) ex.seq.long_ids.push_back(1 + rng.index(item_hi));
        if (cfg.use_short) {
            const int n_short = 1 + rng.index(cfg.short_len);
            for (int i = 0; i < n_short; ++i)
                ex.seq.short_ids.push_back(1 + rng.index(item_hi));
        }
        for (int i = 0; i < cfg.side_count; ++i)
            ex.side_ids.push_back(1 + rng.index(item_hi));
    }
    return batch;
}

}  // namespace

GradCheckReport loss_grad_check(const ModelConfig& cfg, int batch_size, double lambda,
                                double step, double tol, std::uint64_t seed,
                                std::size_t max_entries) {
    cfg.validate();
    Rng rng(seed);
    const std::vector<Example> batch = random_batch(cfg, batch_size, rng);
    const ModelParams base = init_params(cfg, seed + 1);

    std::vector<Matrix> flat;
    for_each_tensor(base, cfg,
                    [&](const char*, const Matrix& m) { flat.push_back(m); });

    DiffFn f = [&](const std::vector<Matrix>& ps, std::vector<Matrix>* grads) {
        ModelParams p = base;
        std::size_t i = 0;
        for_each_tensor(p, cfg, [&](const char*, Matrix& m) { m = ps[i++]; });
        return total_loss(batch, p, cfg, lambda, grads);
    };
    return grad_check(f, flat, tensor_names(cfg), step, tol, max_entries);
}

}  // namespace lrea
