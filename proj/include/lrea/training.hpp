#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "lrea/data.hpp"
#include "lrea/gradcheck.hpp"
#include "lrea/model.hpp"

namespace lrea {

struct TrainConfig {
    double lambda = 0.3;  // non-negativity penalty weight
    double lr = 0.01;
    int batch_size = 64;
    int epochs = 5;
    std::uint64_t seed = 7;
    int threads = 1;
    bool penalty_stop_grad = false;  // ablation: no penalty gradient into embeddings

    void validate() const;
};

// Mean binary cross entropy, -(1/N) sum y log p + (1-y) log(1-p).
double cross_entropy(const std::vector<double>& probs, const std::vector<int>& labels);

// Squared negative parts of the transposed decompression matrix and of the
// compressed sequence (comp_t = w_comp' * seq_emb, r x d).
double non_neg_loss(const Matrix& w_decomp, const Matrix& comp_t);

struct AdagradState {
    std::vector<Matrix> acc;  // one accumulator per tensor, canonical order
    double epsilon = 1e-8;
};

AdagradState make_adagrad_state(const ModelParams& params, const ModelConfig& cfg);

// acc += g^2; theta -= lr * g / (sqrt(acc) + eps)
void adagrad_step(Matrix& theta, const Matrix& grad, Matrix& acc, double lr,
                  double epsilon);

// One optimizer step over all tensors; re-freezes the embedding padding row.
void apply_gradients(ModelParams& params, const ModelConfig& cfg,
                     const std::vector<Matrix>& grads, AdagradState& state, double lr);

struct BatchStats {
    double loss = 0.0;     // the differentiated objective value
    double ce_sum = 0.0;   // per-example cross-entropy terms, unscaled
    double pen_sum = 0.0;  // per-example penalty terms, unscaled
    double gap_sum = 0.0;  // per-example absorption gaps
    std::size_t count = 0;
};

// Forward (and optionally backward) over a slice of examples. The slice
// objective is inv_n * sum_i (ce_i + lambda*pen_i), plus the
// batch-independent lambda*negsq(w_decomp') term when include_decomp_term
// is set. When grad_out is non-null it is overwritten with gradients in
// canonical tensor order.
BatchStats eval_batch(const Example* examples, std::size_t count,
                      const ModelParams& params, const ModelConfig& cfg, double lambda,
                      double inv_n, bool include_decomp_term, bool penalty_stop_grad,
                      std::vector<Matrix>* grad_out);

// Mean total objective over a batch: cross entropy plus lambda times the
// penalty (per-example compressed-sequence terms averaged, decompression
// term counted once). Fills grad_out when non-null.
double total_loss(const std::vector<Example>& batch, const ModelParams& params,
                  const ModelConfig& cfg, double lambda,
                  std::vector<Matrix>* grad_out = nullptr);

// Forward-only probabilities for a dataset, in order.
std::vector<double> predict_all(const ModelParams& params, const ModelConfig& cfg,
                                const Dataset& data, int threads = 1);

struct EpochStats {
    int epoch = 0;  // 0 is the untouched initialization
    double ce = 0.0;
    double penalty = 0.0;
    double gap_mean = 0.0;
    std::optional<double> auc;
    std::optional<double> gauc;
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochStats> log;
    std::uint64_t version = 0;
};

// Deterministic training loop: fixed init and shuffle order per seed.
// Epoch metrics are computed on eval_set when given, else on train_set.
// NDJSON epoch records go to log_stream when non-null.
TrainResult train(const Dataset& train_set, const Dataset* eval_set,
                  const ModelConfig& cfg, const TrainConfig& tc,
                  std::ostream* log_stream = nullptr);

// Central-difference check of the full training objective against the
// backward pass, over every tensor of a freshly initialized model on a
// random batch. max_entries == 0 checks every entry of every tensor.
GradCheckReport loss_grad_check(const ModelConfig& cfg, int batch_size, double lambda,
                                double step, double tol, std::uint64_t seed,
                                std::size_t max_entries = 0);

}  // namespace lrea
